// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace risbf {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;

enum class RisMode { Passive, Active };

inline std::string to_string(RisMode mode) { return mode == RisMode::Passive ? "passive" : "active"; }

inline RisMode parse_ris_mode(const std::string& s)
{
    if (s == "passive" || s == "Passive" || s == "pris") return RisMode::Passive;
    if (s == "active" || s == "Active" || s == "aris") return RisMode::Active;
    throw std::invalid_argument("unknown RIS mode '" + s + "'");
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

// All scalars in linear units (watts, linear SINR).
struct SystemConfig
{
    int L = 4;
    int K = 3;
    int M = 4;
    int N = 16;
    double p_max = 10.0;
    std::vector<double> gamma_c;     // size K
    std::vector<double> gamma_t;     // size K
    std::vector<double> sigma2_user; // size K
    double sigma2_target = 1e-11;
    double sigma2_ris = 0.0;
    double beta_max = 1.0;
    RisMode ris_mode = RisMode::Passive;
    double zeta = 0.0; // 0 selects the automatic schedule
    bool direct_links = true;

    // Weight on the RIS-related terms of the power model. It is 1 for physical
    // data and becomes 1/varsigma on scaled problems so the budget keeps its units.
    double reflect_power_weight = 1.0;

    int columns() const { return K + M; }

    void validate() const
    {
        if (L < 1 || K < 1 || M < 0 || N < 1) throw std::invalid_argument("SystemConfig: L, K, N must be positive and M nonnegative");
        if (!(p_max > 0.0)) throw std::invalid_argument("SystemConfig: p_max must be positive");
        if (static_cast<int>(gamma_c.size()) != K || static_cast<int>(gamma_t.size()) != K || static_cast<int>(sigma2_user.size()) != K)
            throw std::invalid_argument("SystemConfig: per-user vectors must have K entries");
        for (int k = 0; k < K; ++k)
            if (!(gamma_c[k] > 0.0) || !(gamma_t[k] > 0.0) || !(sigma2_user[k] > 0.0))
                throw std::invalid_argument("SystemConfig: thresholds and noise powers must be positive");
        if (!(sigma2_target > 0.0)) throw std::invalid_argument("SystemConfig: sigma2_target must be positive");
        if (!(sigma2_ris >= 0.0)) throw std::invalid_argument("SystemConfig: sigma2_ris must be nonnegative");
        if (!(beta_max >= 1.0)) throw std::invalid_argument("SystemConfig: beta_max must be >= 1");
        if (!(zeta >= 0.0)) throw std::invalid_argument("SystemConfig: zeta must be nonnegative");
        if (!(reflect_power_weight > 0.0)) throw std::invalid_argument("SystemConfig: reflect_power_weight must be positive");
        if (ris_mode == RisMode::Passive && (sigma2_ris != 0.0 || beta_max != 1.0))
            throw std::invalid_argument("SystemConfig: passive RIS requires sigma2_ris = 0 and beta_max = 1");
        if (ris_mode == RisMode::Active && !(sigma2_ris > 0.0))
            throw std::invalid_argument("SystemConfig: active RIS requires sigma2_ris > 0");
    }

    // Uniform per-user thresholds and noise.
    static SystemConfig uniform(int L, int K, int M, int N, double p_max, double gamma_c, double gamma_t, double sigma2_user,
                                double sigma2_target)
    {
        SystemConfig c;
        c.L = L, c.K = K, c.M = M, c.N = N, c.p_max = p_max;
        c.gamma_c.assign(K, gamma_c);
        c.gamma_t.assign(K, gamma_t);
        c.sigma2_user.assign(K, sigma2_user);
        c.sigma2_target = sigma2_target;
        return c;
    }

    // Switches to the given RIS mode, setting the mode-dependent fields.
    void set_mode(RisMode mode, double beta = 4.0, double sigma2 = 1e-11)
    {
        ris_mode = mode;
        if (mode == RisMode::Passive)
            beta_max = 1.0, sigma2_ris = 0.0;
        else
            beta_max = beta, sigma2_ris = sigma2;
    }
};

struct SceneGeometry
{
    Vec3 bs_position{0.0, 0.0, 10.0};
    Vec3 ris_position{50.0, 0.0, 10.0};
    std::vector<Vec3> user_positions{{55.0, 10.0, 0.0}, {60.0, 5.0, 0.0}, {58.0, 15.0, 0.0},
                                     {52.0, 18.0, 0.0}, {62.0, 12.0, 0.0}, {57.0, 3.0, 0.0}};
    double target_azimuth_deg = 40.0;
    double target_elevation_deg = -30.0;
    double target_distance_m = 20.0;

    double element_spacing = 0.5; // RIS spacing over wavelength
    double bs_spacing = 0.5;

    void validate() const
    {
        auto dist = [](const Vec3& a, const Vec3& b) { return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]); };
        if (!(dist(bs_position, ris_position) > 0.0)) throw std::invalid_argument("SceneGeometry: BS and RIS coincide");
        for (const auto& u : user_positions)
            if (!(dist(u, bs_position) > 0.0) || !(dist(u, ris_position) > 0.0))
                throw std::invalid_argument("SceneGeometry: user coincides with BS or RIS");
        for (size_t i = 0; i < user_positions.size(); ++i)
            for (size_t j = i + 1; j < user_positions.size(); ++j)
                if (!(dist(user_positions[i], user_positions[j]) > 0.0)) throw std::invalid_argument("SceneGeometry: users coincide");
        if (!(target_distance_m > 0.0)) throw std::invalid_argument("SceneGeometry: target distance must be positive");
    }
};

// Large-scale fading: channel power = reference_gain * d^(-exponent).
struct PropagationModel
{
    double reference_loss_db = -30.0; // at 1 m
    double exponent_bs_ris = 2.2;
    double exponent_bs_user = 3.6;
    double exponent_ris_user = 2.5;
    double exponent_ris_target = 2.2;
    double rician_factor_db = 3.0; // +inf gives pure line of sight
    double target_rician_factor_db = 3.0; // RIS -> target link

    double pathloss(double distance, double exponent) const
    {
        return db_to_linear(reference_loss_db) * std::pow(distance, -exponent);
    }
};

struct ChannelSet
{
    Eigen::MatrixXcd g_mat;                // N x L
    std::vector<Eigen::VectorXcd> h_direct; // K rows of length L
    std::vector<Eigen::VectorXcd> h_ris;    // K rows of length N
    Eigen::VectorXcd g_ris;                 // length N

    int N() const { return static_cast<int>(g_mat.rows()); }
    int L() const { return static_cast<int>(g_mat.cols()); }
    int K() const { return static_cast<int>(h_direct.size()); }

    void validate(const SystemConfig& cfg) const
    {
        if (g_mat.rows() != cfg.N || g_mat.cols() != cfg.L) throw std::invalid_argument("ChannelSet: G must be N x L");
        if (static_cast<int>(h_direct.size()) != cfg.K || static_cast<int>(h_ris.size()) != cfg.K)
            throw std::invalid_argument("ChannelSet: need K user channels");
        for (int k = 0; k < cfg.K; ++k)
            if (h_direct[k].size() != cfg.L || h_ris[k].size() != cfg.N) throw std::invalid_argument("ChannelSet: user channel size");
        if (g_ris.size() != cfg.N) throw std::invalid_argument("ChannelSet: g_R must have N entries");
        bool finite = g_mat.allFinite() && g_ris.allFinite();
        for (int k = 0; k < cfg.K; ++k) finite = finite && h_direct[k].allFinite() && h_ris[k].allFinite();
        if (!finite) throw std::invalid_argument("ChannelSet: non-finite entry");
    }

    bool operator==(const ChannelSet& o) const
    {
        if (g_mat.rows() != o.g_mat.rows() || g_mat.cols() != o.g_mat.cols() || g_mat != o.g_mat) return false;
        if (g_ris.size() != o.g_ris.size() || g_ris != o.g_ris) return false;
        if (h_direct.size() != o.h_direct.size()) return false;
        for (size_t k = 0; k < h_direct.size(); ++k)
            if (h_direct[k] != o.h_direct[k] || h_ris[k] != o.h_ris[k]) return false;
        return true;
    }
};

// Planar-array factorization used for the RIS: ny = largest divisor of n not above sqrt(n).
inline std::pair<int, int> upa_shape(int n)
{
    int ny = 1;
    for (int d = 1; d * d <= n; ++d)
        if (n % d == 0) ny = d;
    return {n / ny, ny};
}

// Element i sits at (i % nx, i / nx) in units of spacing. A 1-row array (prime n)
// degenerates to the usual linear-array progression 2*pi*d*sin(az)*i.
inline Eigen::VectorXcd steering_vector(int n_elements, double azimuth_deg, double elevation_deg, double spacing_over_wavelength)
{
    if (n_elements < 1) throw std::invalid_argument("steering_vector: n_elements must be >= 1");
    const double az = azimuth_deg * std::numbers::pi / 180.0;
    const double el = elevation_deg * std::numbers::pi / 180.0;
    const int nx = upa_shape(n_elements).first;
    const double ux = std::sin(az) * std::cos(el);
    const double uy = std::sin(el);
    Eigen::VectorXcd a(n_elements);
    for (int i = 0; i < n_elements; ++i)
    {
        const int ix = i % nx, iy = i / nx;
        const double phase = 2.0 * std::numbers::pi * spacing_over_wavelength * (ix * ux + iy * uy);
        a[i] = std::polar(1.0, phase);
    }
    return a;
}

// Uniform linear array along one axis, used at the BS.
inline Eigen::VectorXcd ula_steering(int n, double angle_rad, double spacing)
{
    Eigen::VectorXcd a(n);
    for (int i = 0; i < n; ++i) a[i] = std::polar(1.0, 2.0 * std::numbers::pi * spacing * i * std::sin(angle_rad));
    return a;
}

namespace detail {

inline double distance(const Vec3& a, const Vec3& b) { return std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]); }

// Azimuth in the horizontal plane and elevation of the vector from a to b, in degrees.
inline std::pair<double, double> direction_deg(const Vec3& from, const Vec3& to)
{
    const double dx = to[0] - from[0], dy = to[1] - from[1], dz = to[2] - from[2];
    const double az = std::atan2(dy, dx) * 180.0 / std::numbers::pi;
    const double el = std::atan2(dz, std::hypot(dx, dy)) * 180.0 / std::numbers::pi;
    return {az, el};
}

inline uint64_t splitmix64(uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

struct Cn01
{
    std::mt19937_64 rng;
    std::normal_distribution<double> normal{0.0, std::sqrt(0.5)};
    explicit Cn01(uint64_t seed) : rng(seed) {}
    cplx operator()() { return {normal(rng), normal(rng)}; }
};

// Mixes a LoS component (unit modulus) with a CN(0,1) scattered component at Rician factor k.
inline cplx rician(double k_lin, cplx los, cplx nlos)
{
    if (std::isinf(k_lin)) return los;
    return std::sqrt(k_lin / (k_lin + 1.0)) * los + std::sqrt(1.0 / (k_lin + 1.0)) * nlos;
}

} // namespace detail

// Seed for realization r of experiment e; stable across releases.
inline uint64_t realization_seed(uint64_t experiment, uint64_t realization)
{
    return detail::splitmix64(detail::splitmix64(experiment) ^ (realization + 1));
}

// Draw order is fixed (G, then per-user direct and RIS links, then g_R), so
// changing only the target angles changes only the LoS part of g_R.
inline ChannelSet generate_channels(const SystemConfig& config, const SceneGeometry& geometry, const PropagationModel& prop,
                                    uint64_t seed)
{
    config.validate();
    geometry.validate();
    if (static_cast<int>(geometry.user_positions.size()) < config.K)
        throw std::invalid_argument("generate_channels: geometry has fewer users than K");

    const int L = config.L, N = config.N, K = config.K;
    auto k_of = [](double db) { return std::isinf(db) && db > 0 ? std::numeric_limits<double>::infinity() : db_to_linear(db); };
    const double k_lin = k_of(prop.rician_factor_db);
    detail::Cn01 draw(seed);
    ChannelSet ch;

    // BS -> RIS
    {
        const double d = detail::distance(geometry.bs_position, geometry.ris_position);
        const double amp = std::sqrt(prop.pathloss(d, prop.exponent_bs_ris));
        const double az_tx = detail::direction_deg(geometry.bs_position, geometry.ris_position).first;
        const auto [az_rx, el_rx] = detail::direction_deg(geometry.ris_position, geometry.bs_position);
        const Eigen::VectorXcd a_bs = ula_steering(L, az_tx * std::numbers::pi / 180.0, geometry.bs_spacing);
        const Eigen::VectorXcd a_ris = steering_vector(N, az_rx, el_rx, geometry.element_spacing);
        ch.g_mat.resize(N, L);
        for (int l = 0; l < L; ++l)
            for (int n = 0; n < N; ++n) ch.g_mat(n, l) = amp * detail::rician(k_lin, a_ris[n] * std::conj(a_bs[l]), draw());
    }

    ch.h_direct.resize(K);
    ch.h_ris.resize(K);
    for (int k = 0; k < K; ++k)
    {
        const Vec3& u = geometry.user_positions[k];
        {
            const double d = detail::distance(geometry.bs_position, u);
            const double amp = std::sqrt(prop.pathloss(d, prop.exponent_bs_user));
            ch.h_direct[k].resize(L);
            // Direct links are Rayleigh (ground-level scattering); drawn even when disabled to keep the stream aligned.
            for (int l = 0; l < L; ++l)
            {
                const cplx v = amp * draw();
                ch.h_direct[k][l] = config.direct_links ? v : cplx{0.0, 0.0};
            }
        }
        {
            const double d = detail::distance(geometry.ris_position, u);
            const double amp = std::sqrt(prop.pathloss(d, prop.exponent_ris_user));
            const auto [az, el] = detail::direction_deg(geometry.ris_position, u);
            const Eigen::VectorXcd a = steering_vector(N, az, el, geometry.element_spacing);
            ch.h_ris[k].resize(N);
            for (int n = 0; n < N; ++n) ch.h_ris[k][n] = amp * detail::rician(k_lin, a[n], draw());
        }
    }

    {
        const double amp = std::sqrt(prop.pathloss(geometry.target_distance_m, prop.exponent_ris_target));
        const Eigen::VectorXcd a =
            steering_vector(N, geometry.target_azimuth_deg, geometry.target_elevation_deg, geometry.element_spacing);
        ch.g_ris.resize(N);
        const double k_target = k_of(prop.target_rician_factor_db);
        for (int n = 0; n < N; ++n) ch.g_ris[n] = amp * detail::rician(k_target, a[n], draw());
    }
    return ch;
}

inline SceneGeometry perturb_target_angles(const SceneGeometry& geometry, double delta_az_deg, double delta_el_deg)
{
    SceneGeometry g = geometry;
    g.target_azimuth_deg += delta_az_deg;
    g.target_elevation_deg += delta_el_deg;
    return g;
}

} // namespace risbf
