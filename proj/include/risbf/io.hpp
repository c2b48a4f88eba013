// SPDX-License-Identifier: Apache-2.0
#pragma once

// Boundary layer: key = value scenario files (decibel units) and JSON artifacts.
// Everything returned from here to the library is linear.

#include "optimizer.hpp"
#include "scene.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace risbf {

struct Scenario
{
    int L = 4;
    int K = 3;
    int M = 4;
    int N = 16;
    double p_max_dbm = 40.0;
    std::vector<double> gamma_c_db{10.0}; // one value for all users, or K values
    std::vector<double> gamma_t_db{0.0};
    double sigma2_user_dbm = -80.0;
    double sigma2_target_dbm = -80.0;
    double sigma2_ris_dbm = -80.0;
    double beta_max = 4.0; // active mode only
    RisMode mode = RisMode::Active;
    double zeta = 0.0; // watts per unit |theta|^2; 0 = automatic
    bool direct_links = true;
    uint64_t experiment = 1;

    SceneGeometry geometry;
    PropagationModel propagation;
    SolverSettings solver;

    SystemConfig system_config(RisMode m) const
    {
        auto per_user = [&](const std::vector<double>& db, const char* what) {
            std::vector<double> out;
            if (db.size() == 1)
                out.assign(K, db_to_linear(db[0]));
            else if (static_cast<int>(db.size()) == K)
                for (double v : db) out.push_back(db_to_linear(v));
            else
                throw std::invalid_argument(std::string("Scenario: ") + what + " needs 1 or K values");
            return out;
        };
        SystemConfig c;
        c.L = L, c.K = K, c.M = M, c.N = N;
        c.p_max = dbm_to_watt(p_max_dbm);
        c.gamma_c = per_user(gamma_c_db, "gamma_c_db");
        c.gamma_t = per_user(gamma_t_db, "gamma_t_db");
        c.sigma2_user.assign(K, dbm_to_watt(sigma2_user_dbm));
        c.sigma2_target = dbm_to_watt(sigma2_target_dbm);
        c.set_mode(m, beta_max, dbm_to_watt(sigma2_ris_dbm));
        c.zeta = zeta;
        c.direct_links = direct_links;
        c.validate();
        return c;
    }
    SystemConfig system_config() const { return system_config(mode); }

    // Channels do not depend on the RIS mode, so both modes of one seed see the same draw.
    ChannelSet channels(uint64_t seed_index) const
    {
        return generate_channels(system_config(), geometry, propagation, realization_seed(experiment, seed_index));
    }

    void validate() const
    {
        system_config();
        geometry.validate();
        solver.validate();
    }
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, sep)) out.push_back(trim(cur));
    return out;
}

inline double parse_double(const std::string& s, const std::string& ctx)
{
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw std::invalid_argument(ctx + ": not a number: '" + s + "'");
    return v;
}

inline long long parse_int(const std::string& s, const std::string& ctx)
{
    long long v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw std::invalid_argument(ctx + ": not an integer: '" + s + "'");
    return v;
}

inline bool parse_bool(const std::string& s, const std::string& ctx)
{
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw std::invalid_argument(ctx + ": not a boolean: '" + s + "'");
}

inline std::vector<double> parse_list(const std::string& s, const std::string& ctx)
{
    std::vector<double> out;
    for (const auto& t : split(s, ',')) out.push_back(parse_double(t, ctx));
    if (out.empty()) throw std::invalid_argument(ctx + ": empty list");
    return out;
}

inline Vec3 parse_vec3(const std::string& s, const std::string& ctx)
{
    const auto v = parse_list(s, ctx);
    if (v.size() != 3) throw std::invalid_argument(ctx + ": expected x, y, z");
    return {v[0], v[1], v[2]};
}

inline std::string fmt(double v)
{
    char b[32];
    std::snprintf(b, sizeof b, "%.17g", v);
    return b;
}

inline std::string fmt_list(const std::vector<double>& v)
{
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
    return s;
}

inline std::string fmt_vec3(const Vec3& v) { return fmt(v[0]) + ", " + fmt(v[1]) + ", " + fmt(v[2]); }

} // namespace detail

// Ordered key -> (value, line) pairs. '#' starts a comment; duplicate keys are an error.
struct KeyValues
{
    std::vector<std::pair<std::string, std::string>> entries;
    std::vector<int> lines;
    std::string source;
};

inline KeyValues parse_key_values(std::istream& is, const std::string& source)
{
    KeyValues kv;
    kv.source = source;
    std::map<std::string, int> seen;
    std::string line;
    int no = 0;
    while (std::getline(is, line))
    {
        ++no;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument(source + ":" + std::to_string(no) + ": expected key = value");
        std::string key = detail::trim(line.substr(0, eq));
        std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument(source + ":" + std::to_string(no) + ": empty key");
        if (seen.count(key))
            throw std::invalid_argument(source + ":" + std::to_string(no) + ": duplicate key '" + key + "' (first on line " +
                                        std::to_string(seen[key]) + ")");
        seen[key] = no;
        kv.entries.emplace_back(std::move(key), std::move(val));
        kv.lines.push_back(no);
    }
    return kv;
}

// Applies one key to the scenario; returns false for unknown keys.
inline bool apply_scenario_key(Scenario& s, const std::string& key, const std::string& v, const std::string& ctx)
{
    using namespace detail;
    auto i = [&] { return static_cast<int>(parse_int(v, ctx)); };
    auto d = [&] { return parse_double(v, ctx); };
    SceneGeometry& g = s.geometry;
    PropagationModel& p = s.propagation;
    SolverSettings& o = s.solver;

    if (key == "L") s.L = i();
    else if (key == "K") s.K = i();
    else if (key == "M") s.M = i();
    else if (key == "N") s.N = i();
    else if (key == "p_max_dbm") s.p_max_dbm = d();
    else if (key == "gamma_c_db") s.gamma_c_db = parse_list(v, ctx);
    else if (key == "gamma_t_db") s.gamma_t_db = parse_list(v, ctx);
    else if (key == "sigma2_user_dbm") s.sigma2_user_dbm = d();
    else if (key == "sigma2_target_dbm") s.sigma2_target_dbm = d();
    else if (key == "sigma2_ris_dbm") s.sigma2_ris_dbm = d();
    else if (key == "beta_max") s.beta_max = d();
    else if (key == "mode") s.mode = parse_ris_mode(v);
    else if (key == "zeta") s.zeta = d();
    else if (key == "direct_links") s.direct_links = parse_bool(v, ctx);
    else if (key == "experiment") s.experiment = static_cast<uint64_t>(parse_int(v, ctx));
    else if (key == "bs_position") g.bs_position = parse_vec3(v, ctx);
    else if (key == "ris_position") g.ris_position = parse_vec3(v, ctx);
    else if (key == "user_positions")
    {
        g.user_positions.clear();
        for (const auto& u : split(v, ';'))
            if (!u.empty()) g.user_positions.push_back(parse_vec3(u, ctx));
    }
    else if (key == "target_azimuth_deg") g.target_azimuth_deg = d();
    else if (key == "target_elevation_deg") g.target_elevation_deg = d();
    else if (key == "target_distance_m") g.target_distance_m = d();
    else if (key == "element_spacing") g.element_spacing = d();
    else if (key == "bs_spacing") g.bs_spacing = d();
    else if (key == "reference_loss_db") p.reference_loss_db = d();
    else if (key == "exponent_bs_ris") p.exponent_bs_ris = d();
    else if (key == "exponent_bs_user") p.exponent_bs_user = d();
    else if (key == "exponent_ris_user") p.exponent_ris_user = d();
    else if (key == "exponent_ris_target") p.exponent_ris_target = d();
    else if (key == "rician_factor_db") p.rician_factor_db = d();
    else if (key == "target_rician_factor_db") p.target_rician_factor_db = d();
    else if (key == "sca_tolerance") o.sca_tolerance = d();
    else if (key == "max_sca_iters") o.max_sca_iters = i();
    else if (key == "unit_modulus_tol") o.unit_modulus_tol = d();
    else if (key == "scale_epsilon") o.scale_epsilon = d();
    else if (key == "apply_scaling") o.apply_scaling = parse_bool(v, ctx);
    else if (key == "max_zeta_escalations") o.max_zeta_escalations = i();
    else if (key == "conic_tol") o.conic.tol_gap = o.conic.tol_feas = d();
    else if (key == "conic_max_iters") o.conic.max_iters = i();
    else return false;
    return true;
}

inline Scenario parse_scenario(std::istream& is, const std::string& source = "<config>")
{
    const KeyValues kv = parse_key_values(is, source);
    Scenario s;
    for (size_t n = 0; n < kv.entries.size(); ++n)
    {
        const auto& [key, val] = kv.entries[n];
        const std::string ctx = source + ":" + std::to_string(kv.lines[n]) + ": " + key;
        if (!apply_scenario_key(s, key, val, ctx)) throw std::invalid_argument(ctx + ": unknown key");
    }
    s.validate();
    return s;
}

inline Scenario load_scenario(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config '" + path + "'");
    return parse_scenario(f, path);
}

// Full dump; parse_scenario(write_scenario(s)) reproduces s.
inline std::string write_scenario(const Scenario& s)
{
    using namespace detail;
    std::ostringstream os;
    os << "L = " << s.L << "\nK = " << s.K << "\nM = " << s.M << "\nN = " << s.N << '\n';
    os << "p_max_dbm = " << fmt(s.p_max_dbm) << '\n';
    os << "gamma_c_db = " << fmt_list(s.gamma_c_db) << '\n';
    os << "gamma_t_db = " << fmt_list(s.gamma_t_db) << '\n';
    os << "sigma2_user_dbm = " << fmt(s.sigma2_user_dbm) << '\n';
    os << "sigma2_target_dbm = " << fmt(s.sigma2_target_dbm) << '\n';
    os << "sigma2_ris_dbm = " << fmt(s.sigma2_ris_dbm) << '\n';
    os << "beta_max = " << fmt(s.beta_max) << '\n';
    os << "mode = " << to_string(s.mode) << '\n';
    os << "zeta = " << fmt(s.zeta) << '\n';
    os << "direct_links = " << (s.direct_links ? "true" : "false") << '\n';
    os << "experiment = " << s.experiment << '\n';
    const SceneGeometry& g = s.geometry;
    os << "bs_position = " << fmt_vec3(g.bs_position) << '\n';
    os << "ris_position = " << fmt_vec3(g.ris_position) << '\n';
    os << "user_positions = ";
    for (size_t k = 0; k < g.user_positions.size(); ++k) os << (k ? "; " : "") << fmt_vec3(g.user_positions[k]);
    os << '\n';
    os << "target_azimuth_deg = " << fmt(g.target_azimuth_deg) << '\n';
    os << "target_elevation_deg = " << fmt(g.target_elevation_deg) << '\n';
    os << "target_distance_m = " << fmt(g.target_distance_m) << '\n';
    os << "element_spacing = " << fmt(g.element_spacing) << '\n';
    os << "bs_spacing = " << fmt(g.bs_spacing) << '\n';
    const PropagationModel& p = s.propagation;
    os << "reference_loss_db = " << fmt(p.reference_loss_db) << '\n';
    os << "exponent_bs_ris = " << fmt(p.exponent_bs_ris) << '\n';
    os << "exponent_bs_user = " << fmt(p.exponent_bs_user) << '\n';
    os << "exponent_ris_user = " << fmt(p.exponent_ris_user) << '\n';
    os << "exponent_ris_target = " << fmt(p.exponent_ris_target) << '\n';
    os << "rician_factor_db = " << (std::isinf(p.rician_factor_db) ? std::string("inf") : fmt(p.rician_factor_db)) << '\n';
    os << "target_rician_factor_db = "
       << (std::isinf(p.target_rician_factor_db) ? std::string("inf") : fmt(p.target_rician_factor_db)) << '\n';
    const SolverSettings& o = s.solver;
    os << "sca_tolerance = " << fmt(o.sca_tolerance) << '\n';
    os << "max_sca_iters = " << o.max_sca_iters << '\n';
    os << "unit_modulus_tol = " << fmt(o.unit_modulus_tol) << '\n';
    os << "scale_epsilon = " << fmt(o.scale_epsilon) << '\n';
    os << "apply_scaling = " << (o.apply_scaling ? "true" : "false") << '\n';
    os << "max_zeta_escalations = " << o.max_zeta_escalations << '\n';
    os << "conic_tol = " << fmt(o.conic.tol_gap) << '\n';
    os << "conic_max_iters = " << o.conic.max_iters << '\n';
    return os.str();
}

// Full-scale preset: N = 100 elements (seeds are set by the sweep).
inline Scenario full_scale(Scenario s)
{
    s.N = 100;
    return s;
}

// ---- JSON artifacts ----

using json = nlohmann::json;

namespace detail {

inline json to_json_vec(const Eigen::VectorXcd& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back({v[i].real(), v[i].imag()});
    return a;
}

inline Eigen::VectorXcd vec_from_json(const json& a)
{
    Eigen::VectorXcd v(static_cast<Eigen::Index>(a.size()));
    for (size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = {a[i].at(0).get<double>(), a[i].at(1).get<double>()};
    return v;
}

inline json to_json_mat(const Eigen::MatrixXcd& m)
{
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json_vec(m.row(r).transpose()));
    return rows;
}

inline Eigen::MatrixXcd mat_from_json(const json& rows)
{
    if (rows.empty()) return {};
    const auto cols = rows[0].size();
    Eigen::MatrixXcd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (size_t r = 0; r < rows.size(); ++r)
    {
        if (rows[r].size() != cols) throw std::invalid_argument("matrix rows differ in length");
        m.row(static_cast<Eigen::Index>(r)) = vec_from_json(rows[r]).transpose();
    }
    return m;
}

} // namespace detail

// Complex entries are [re, im]; matrices are row lists.
inline json channels_to_json(const ChannelSet& ch)
{
    json j;
    j["format"] = "risbf-channels";
    j["version"] = 1;
    j["g_mat"] = detail::to_json_mat(ch.g_mat);
    j["h_direct"] = json::array();
    j["h_ris"] = json::array();
    for (int k = 0; k < ch.K(); ++k)
    {
        j["h_direct"].push_back(detail::to_json_vec(ch.h_direct[k]));
        j["h_ris"].push_back(detail::to_json_vec(ch.h_ris[k]));
    }
    j["g_ris"] = detail::to_json_vec(ch.g_ris);
    return j;
}

inline ChannelSet channels_from_json(const json& j)
{
    if (j.value("format", "") != "risbf-channels") throw std::invalid_argument("channels_from_json: not a channel artifact");
    if (j.value("version", 0) != 1) throw std::invalid_argument("channels_from_json: unsupported version");
    ChannelSet ch;
    ch.g_mat = detail::mat_from_json(j.at("g_mat"));
    for (const auto& v : j.at("h_direct")) ch.h_direct.push_back(detail::vec_from_json(v));
    for (const auto& v : j.at("h_ris")) ch.h_ris.push_back(detail::vec_from_json(v));
    ch.g_ris = detail::vec_from_json(j.at("g_ris"));
    if (ch.h_direct.size() != ch.h_ris.size()) throw std::invalid_argument("channels_from_json: h_direct and h_ris differ in K");
    return ch;
}

inline void save_channels(const ChannelSet& ch, const std::string& path)
{
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << channels_to_json(ch).dump(1) << '\n';
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

inline ChannelSet load_channels(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    try
    {
        return channels_from_json(json::parse(f));
    }
    catch (const json::exception& e)
    {
        throw std::runtime_error(path + ": " + e.what());
    }
}

inline json solution_to_json(const BeamformingSolution& s)
{
    return {{"x_mat", detail::to_json_mat(s.x_mat)}, {"theta", detail::to_json_vec(s.theta)}};
}

inline json trace_to_json(const IterationTrace& t)
{
    json j;
    j["initial_gain"] = t.initial_gain;
    j["records"] = json::array();
    for (const auto& r : t.records)
        j["records"].push_back({{"iteration", r.iteration},
                                {"stage", r.stage},
                                {"zeta", r.zeta},
                                {"surrogate", r.surrogate},
                                {"true_gain", r.true_gain},
                                {"worst_residual", r.worst_residual},
                                {"solve_time", r.solve_time},
                                {"solver_iterations", r.solver_iterations},
                                {"solver_status", r.solver_status}});
    return j;
}

inline json report_to_json(const MetricReport& r)
{
    json res = json::object();
    for (const auto& c : r.constraint_residuals) res[c.name] = c.value;
    return {{"beampattern_gain", r.beampattern_gain},
            {"total_power", r.total_power},
            {"user_sinr", r.user_sinr},
            {"leakage_sinr", r.leakage_sinr},
            {"worst_residual", r.worst_residual()},
            {"residuals", res}};
}

} // namespace risbf
