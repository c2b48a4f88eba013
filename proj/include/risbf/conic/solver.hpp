// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "program.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <string_view>
#include <vector>

namespace risbf::conic {

struct Settings
{
    double tol_gap = 1e-8;
    double tol_feas = 1e-8;
    int max_iters = 200;
    double step_fraction = 0.99;
    int refinement_steps = 1;
    bool equilibrate = true;
    double tol_reduced = 1e-6; // fallback accuracy accepted when progress stalls
};

enum class Status { Optimal, AlmostOptimal, PrimalInfeasible, DualInfeasible, NumericalLimit };

inline std::string_view to_string(Status s)
{
    switch (s)
    {
    case Status::Optimal: return "optimal";
    case Status::AlmostOptimal: return "almost_optimal";
    case Status::PrimalInfeasible: return "primal_infeasible";
    case Status::DualInfeasible: return "dual_infeasible";
    case Status::NumericalLimit: return "numerical_limit";
    }
    return "?";
}

struct SolveResult
{
    Status status = Status::NumericalLimit;
    Eigen::VectorXd primal; // x, or the dual-infeasibility ray
    Eigen::VectorXd dual;   // multipliers stacked per block row, or the primal-infeasibility ray
    Eigen::VectorXd slack;  // block values A x + b
    double objective = 0.0;      // maximize convention
    double dual_objective = 0.0; // upper bound on objective when optimal
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0; // duality gap relative to max(1, |objective|)
    int iterations = 0;
    double wall_time = 0.0;
};

namespace detail {

struct Cone
{
    int offset = 0;
    int dim = 1;
    bool soc = false;
};

// Minimize c^T x  s.t.  G x + s = h,  s in K.
struct StandardForm
{
    int n = 0;
    int m = 0;
    Eigen::SparseMatrix<double, Eigen::RowMajor> G;
    Eigen::VectorXd h;
    Eigen::VectorXd c;
    std::vector<Cone> cones;
    std::vector<int> block_row; // first standard-form row of each program block
};

inline StandardForm to_standard_form(const ConicProgram& p)
{
    StandardForm sf;
    sf.n = p.num_vars();
    sf.m = p.num_rows();
    sf.h.resize(sf.m);
    sf.c = -p.objective();
    std::vector<Eigen::Triplet<double>> trip;
    int row = 0;
    const double r2 = std::sqrt(0.5);
    for (const auto& b : p.blocks())
    {
        sf.block_row.push_back(row);
        if (b.kind == ConeKind::NonNegative)
        {
            for (int i = 0; i < b.dim; ++i) sf.cones.push_back({row + i, 1, false});
            for (const auto& t : b.coeffs) trip.emplace_back(row + t.row(), t.col(), -t.value());
            sf.h.segment(row, b.dim) = b.offset;
        }
        else if (b.kind == ConeKind::SecondOrder)
        {
            sf.cones.push_back({row, b.dim, true});
            for (const auto& t : b.coeffs) trip.emplace_back(row + t.row(), t.col(), -t.value());
            sf.h.segment(row, b.dim) = b.offset;
        }
        else
        {
            sf.cones.push_back({row, b.dim, true});
            for (const auto& t : b.coeffs)
            {
                if (t.row() == 0)
                {
                    trip.emplace_back(row, t.col(), -r2 * t.value());
                    trip.emplace_back(row + 1, t.col(), -r2 * t.value());
                }
                else if (t.row() == 1)
                {
                    trip.emplace_back(row, t.col(), -r2 * t.value());
                    trip.emplace_back(row + 1, t.col(), r2 * t.value());
                }
                else
                    trip.emplace_back(row + t.row(), t.col(), -t.value());
            }
            sf.h.segment(row, b.dim) = rotated_to_soc(b.offset);
        }
        row += b.dim;
    }
    sf.G.resize(sf.m, sf.n);
    sf.G.setFromTriplets(trip.begin(), trip.end());
    sf.G.makeCompressed();
    return sf;
}

inline double soc_det(const Eigen::Ref<const Eigen::VectorXd>& u)
{
    return u[0] * u[0] - u.tail(u.size() - 1).squaredNorm();
}

class HsdeSolver
{
  public:
    HsdeSolver(StandardForm sf, const Settings& settings) : sf_(std::move(sf)), set_(settings)
    {
        n_ = sf_.n;
        m_ = sf_.m;
        degree_ = static_cast<int>(sf_.cones.size());
        equilibrate();
        Gt_ = G_.transpose();
        build_kkt_pattern();
    }

    SolveResult run()
    {
        const auto t0 = std::chrono::steady_clock::now();
        SolveResult res;
        if (!initial_point())
        {
            res.status = Status::NumericalLimit;
            finish(res, t0);
            return res;
        }

        Eigen::VectorXd rx(n_), rz(m_);
        int small_steps = 0;
        // Best iterate so far by its worst residual; returned at reduced accuracy if progress stalls.
        SolveResult best;
        double best_merit = std::numeric_limits<double>::infinity();
        int since_best = 0;
        auto reduced_ok = [&] { return best_merit <= set_.tol_reduced; };
        for (int iter = 0;; ++iter)
        {
            res.iterations = iter;
            rx = Gt_ * z_ + c_ * tau_;
            rz = G_ * x_ + s_ - h_ * tau_;
            const double rt = kappa_ + c_.dot(x_) + h_.dot(z_);
            const double mu = (s_.dot(z_) + tau_ * kappa_) / (degree_ + 1);

            if (check_termination(res)) break;
            const double merit = std::max({res.primal_residual, res.dual_residual, res.gap});
            if (merit < best_merit)
            {
                best_merit = merit;
                best = res;
                since_best = 0;
            }
            else if (++since_best >= 5 && reduced_ok())
            {
                res.status = Status::NumericalLimit;
                break;
            }
            if (iter >= set_.max_iters)
            {
                res.status = Status::NumericalLimit;
                break;
            }

            compute_scaling();
            if (!factor())
            {
                res.status = Status::NumericalLimit;
                break;
            }

            Eigen::VectorXd qx, qz;
            solve_k(-c_, h_, qx, qz);
            const double q_den = c_.dot(qx) + h_.dot(qz) - kappa_ / tau_;

            // Predictor.
            Eigen::VectorXd ds = -circ(lambda_, lambda_);
            double dk = -tau_ * kappa_;
            Direction aff = direction(1.0, rx, rz, rt, ds, dk, qx, qz, q_den);
            const double alpha_aff = std::min(1.0, max_step(aff));
            const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);

            // Corrector with Mehrotra second-order term.
            const Eigen::VectorXd ws = apply_winv(aff.s);
            const Eigen::VectorXd wz = apply_w(aff.z);
            ds = -circ(lambda_, lambda_) - circ(ws, wz);
            add_identity(ds, sigma * mu);
            dk = -tau_ * kappa_ + sigma * mu - aff.tau * aff.kappa;
            Direction d = direction(1.0 - sigma, rx, rz, rt, ds, dk, qx, qz, q_den);
            const double amax = max_step(d);
            const double alpha = std::min(1.0, set_.step_fraction * amax);

            x_ += alpha * d.x;
            s_ += alpha * d.s;
            z_ += alpha * d.z;
            tau_ += alpha * d.tau;
            kappa_ += alpha * d.kappa;
            if (!(tau_ > 0.0) || !(kappa_ > 0.0) || !x_.allFinite() || !s_.allFinite() || !z_.allFinite())
            {
                res.status = Status::NumericalLimit;
                break;
            }
            small_steps = alpha < 1e-8 ? small_steps + 1 : 0;
            if (small_steps >= 5)
            {
                res.status = Status::NumericalLimit;
                break;
            }
        }
        if (res.status == Status::NumericalLimit && reduced_ok())
        {
            const int it = res.iterations;
            res = std::move(best);
            res.status = Status::AlmostOptimal;
            res.iterations = it;
        }
        finish(res, t0);
        return res;
    }

  private:
    struct Direction
    {
        Eigen::VectorXd x, s, z;
        double tau = 0.0, kappa = 0.0;
    };

    void equilibrate()
    {
        row_scale_ = Eigen::VectorXd::Ones(m_);
        col_scale_ = Eigen::VectorXd::Ones(n_);
        Eigen::SparseMatrix<double, Eigen::RowMajor> G = sf_.G;
        if (set_.equilibrate)
        {
            for (int pass = 0; pass < 10; ++pass)
            {
                // Row scaling must be uniform inside each cone to preserve membership.
                Eigen::VectorXd rmax = Eigen::VectorXd::Zero(m_);
                Eigen::VectorXd cmax = Eigen::VectorXd::Zero(n_);
                for (int r = 0; r < m_; ++r)
                    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(G, r); it; ++it)
                    {
                        rmax[r] = std::max(rmax[r], std::abs(it.value()));
                        cmax[it.col()] = std::max(cmax[it.col()], std::abs(it.value()));
                    }
                Eigen::VectorXd dr = Eigen::VectorXd::Ones(m_);
                for (const auto& k : sf_.cones)
                {
                    const double v = rmax.segment(k.offset, k.dim).maxCoeff();
                    if (v > 0.0) dr.segment(k.offset, k.dim).setConstant(1.0 / std::sqrt(v));
                }
                Eigen::VectorXd dc = Eigen::VectorXd::Ones(n_);
                for (int j = 0; j < n_; ++j)
                    if (cmax[j] > 0.0) dc[j] = 1.0 / std::sqrt(cmax[j]);
                G = dr.asDiagonal() * G * dc.asDiagonal();
                row_scale_ = row_scale_.cwiseProduct(dr);
                col_scale_ = col_scale_.cwiseProduct(dc);
            }
        }
        G_ = G;
        G_.makeCompressed();
        h_ = row_scale_.cwiseProduct(sf_.h);
        c_ = col_scale_.cwiseProduct(sf_.c);
        // Scalar normalizations of h and c keep the embedding well balanced.
        b_scale_ = std::max(1.0, h_.lpNorm<Eigen::Infinity>());
        c_norm_scale_ = std::max(1.0, c_.lpNorm<Eigen::Infinity>());
        h_ /= b_scale_;
        c_ /= c_norm_scale_;
    }

    // Fixed part of the lower triangle of [reg I, G^T; G, -(W^2 + reg I)].
    void build_kkt_pattern()
    {
        int expanded = 0;
        expanded_index_.assign(sf_.cones.size(), -1);
        for (size_t j = 0; j < sf_.cones.size(); ++j)
            if (sf_.cones[j].soc && sf_.cones[j].dim > kDenseConeDim) expanded_index_[j] = expanded++;
        kkt_dim_ = n_ + m_ + 2 * expanded;
        kkt_fixed_.clear();
        for (int i = 0; i < n_; ++i) kkt_fixed_.emplace_back(i, i, kkt_reg_);
        for (int r = 0; r < m_; ++r)
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(G_, r); it; ++it)
                kkt_fixed_.emplace_back(n_ + r, static_cast<int>(it.col()), it.value());
    }

    // Cone algebra on stacked vectors.
    Eigen::VectorXd circ(const Eigen::VectorXd& u, const Eigen::VectorXd& v) const
    {
        Eigen::VectorXd r(m_);
        for (const auto& k : sf_.cones)
        {
            if (!k.soc)
            {
                r[k.offset] = u[k.offset] * v[k.offset];
                continue;
            }
            const auto us = u.segment(k.offset, k.dim);
            const auto vs = v.segment(k.offset, k.dim);
            r[k.offset] = us.dot(vs);
            r.segment(k.offset + 1, k.dim - 1) = us[0] * vs.tail(k.dim - 1) + vs[0] * us.tail(k.dim - 1);
        }
        return r;
    }

    // Solves lambda o x = d.
    Eigen::VectorXd inv_circ(const Eigen::VectorXd& l, const Eigen::VectorXd& d) const
    {
        Eigen::VectorXd r(m_);
        for (const auto& k : sf_.cones)
        {
            if (!k.soc)
            {
                r[k.offset] = d[k.offset] / l[k.offset];
                continue;
            }
            const auto ls = l.segment(k.offset, k.dim);
            const auto ds = d.segment(k.offset, k.dim);
            const double det = soc_det(ls);
            const double x0 = (ls[0] * ds[0] - ls.tail(k.dim - 1).dot(ds.tail(k.dim - 1))) / det;
            r[k.offset] = x0;
            r.segment(k.offset + 1, k.dim - 1) = (ds.tail(k.dim - 1) - x0 * ls.tail(k.dim - 1)) / ls[0];
        }
        return r;
    }

    void add_identity(Eigen::VectorXd& v, double a) const
    {
        for (const auto& k : sf_.cones) v[k.offset] += a;
    }

    // Nesterov-Todd scaling W with W z = W^{-1} s = lambda.
    void compute_scaling()
    {
        beta_.assign(sf_.cones.size(), 1.0);
        v_.resize(sf_.cones.size());
        for (size_t j = 0; j < sf_.cones.size(); ++j)
        {
            const Cone& k = sf_.cones[j];
            if (!k.soc)
            {
                beta_[j] = std::sqrt(s_[k.offset] / z_[k.offset]);
                continue;
            }
            const Eigen::VectorXd s = s_.segment(k.offset, k.dim);
            const Eigen::VectorXd z = z_.segment(k.offset, k.dim);
            const double sd = std::max(soc_det(s), 1e-300);
            const double zd = std::max(soc_det(z), 1e-300);
            const Eigen::VectorXd sb = s / std::sqrt(sd);
            const Eigen::VectorXd zb = z / std::sqrt(zd);
            const double gamma = std::sqrt(std::max(0.5 * (1.0 + sb.dot(zb)), 1e-300));
            Eigen::VectorXd wb(k.dim);
            wb[0] = (sb[0] + zb[0]) / (2.0 * gamma);
            wb.tail(k.dim - 1) = (sb.tail(k.dim - 1) - zb.tail(k.dim - 1)) / (2.0 * gamma);
            Eigen::VectorXd v = wb;
            v[0] += 1.0;
            v /= std::sqrt(2.0 * (wb[0] + 1.0));
            v_[j] = std::move(v);
            beta_[j] = std::pow(sd / zd, 0.25);
        }
        lambda_ = apply_w(z_);
    }

    Eigen::VectorXd apply_w(const Eigen::VectorXd& y) const
    {
        Eigen::VectorXd r(m_);
        for (size_t j = 0; j < sf_.cones.size(); ++j)
        {
            const Cone& k = sf_.cones[j];
            if (!k.soc)
            {
                r[k.offset] = beta_[j] * y[k.offset];
                continue;
            }
            const Eigen::VectorXd& v = v_[j];
            const auto ys = y.segment(k.offset, k.dim);
            auto out = r.segment(k.offset, k.dim);
            out = 2.0 * v.dot(ys) * v;
            out[0] -= ys[0];
            out.tail(k.dim - 1) += ys.tail(k.dim - 1);
            out *= beta_[j];
        }
        return r;
    }

    Eigen::VectorXd apply_winv(const Eigen::VectorXd& y) const
    {
        Eigen::VectorXd r(m_);
        for (size_t j = 0; j < sf_.cones.size(); ++j)
        {
            const Cone& k = sf_.cones[j];
            if (!k.soc)
            {
                r[k.offset] = y[k.offset] / beta_[j];
                continue;
            }
            const Eigen::VectorXd& v = v_[j];
            const auto ys = y.segment(k.offset, k.dim);
            // J v
            const double jv_dot_y = v[0] * ys[0] - v.tail(k.dim - 1).dot(ys.tail(k.dim - 1));
            auto out = r.segment(k.offset, k.dim);
            out[0] = 2.0 * jv_dot_y * v[0] - ys[0];
            out.tail(k.dim - 1) = -2.0 * jv_dot_y * v.tail(k.dim - 1) + ys.tail(k.dim - 1);
            out /= beta_[j];
        }
        return r;
    }

    Eigen::VectorXd apply_w2(const Eigen::VectorXd& y) const { return apply_w(apply_w(y)); }
    Eigen::VectorXd apply_w2inv(const Eigen::VectorXd& y) const { return apply_winv(apply_winv(y)); }

    // Factors the regularized KKT matrix for the current scaling.
    bool factor()
    {
        for (int attempt = 0; attempt < 4; ++attempt)
        {
            if (factor_once()) return true;
            // Zero pivot: raise the static regularization; refinement still targets the exact system.
            kkt_reg_ *= 100.0;
            build_kkt_pattern();
            assembled_ = false;
            analyzed_ = false;
            slot_.clear();
        }
        return false;
    }

    bool factor_once()
    {
        // The sparsity pattern is fixed, so after the first assembly values go straight into their slots.
        const bool first = !assembled_;
        std::vector<Eigen::Triplet<double>> trip;
        if (first) trip = kkt_fixed_;
        size_t idx = 0;
        double* val = kkt_.valuePtr();
        auto put = [&](int r, int c, double w) {
            if (first)
                trip.emplace_back(r, c, w);
            else
                val[slot_[idx++]] = w;
        };
        for (size_t j = 0; j < sf_.cones.size(); ++j)
        {
            const Cone& k = sf_.cones[j];
            const int o = n_ + k.offset;
            const double b2 = beta_[j] * beta_[j];
            if (!k.soc)
            {
                put(o, o, -b2 - kkt_reg_);
                continue;
            }
            // W^2 = beta^2 (I + 4|v|^2 v v^T - 2 v (Jv)^T - 2 (Jv) v^T) = beta^2 (I + p p^T - q q^T)
            // with p = 2|v| v - Jv / |v| and q = Jv / |v|.
            const Eigen::VectorXd& v = v_[j];
            Eigen::VectorXd jv = v;
            jv.tail(k.dim - 1) *= -1.0;
            const double nv = v.norm();
            if (k.dim > kDenseConeDim)
            {
                // Two auxiliary rows carry the rank-2 part so the factor stays sparse.
                const int e = n_ + m_ + 2 * expanded_index_[j];
                const Eigen::VectorXd pv = beta_[j] * (2.0 * nv * v - jv / nv);
                const Eigen::VectorXd qv = beta_[j] * (jv / nv);
                for (int r = 0; r < k.dim; ++r)
                {
                    put(o + r, o + r, -b2 - kkt_reg_);
                    put(e, o + r, pv[r]);
                    put(e + 1, o + r, qv[r]);
                }
                put(e, e, 1.0);
                put(e + 1, e + 1, -1.0);
                continue;
            }
            const double vv = 4.0 * nv * nv;
            for (int c = 0; c < k.dim; ++c)
                for (int r = c; r < k.dim; ++r)
                {
                    double w = vv * v[r] * v[c] - 2.0 * (v[r] * jv[c] + jv[r] * v[c]);
                    if (r == c) w += 1.0;
                    put(o + r, o + c, -b2 * w - (r == c ? kkt_reg_ : 0.0));
                }
        }
        if (first)
        {
            kkt_.resize(kkt_dim_, kkt_dim_);
            kkt_.setFromTriplets(trip.begin(), trip.end());
            kkt_.makeCompressed();
            const double* base = kkt_.valuePtr();
            for (size_t t = kkt_fixed_.size(); t < trip.size(); ++t)
                slot_.push_back(static_cast<int>(&kkt_.coeffRef(trip[t].row(), trip[t].col()) - base));
            assembled_ = true;
        }
        if (!analyzed_)
        {
            ldlt_.analyzePattern(kkt_);
            analyzed_ = true;
        }
        ldlt_.factorize(kkt_);
        return ldlt_.info() == Eigen::Success;
    }

    // [0 G^T; G -W^2] [x; z] = [a; b], refined against the unregularized matrix.
    void solve_k(const Eigen::VectorXd& a, const Eigen::VectorXd& b, Eigen::VectorXd& x, Eigen::VectorXd& z) const
    {
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(kkt_dim_);
        rhs.head(n_) = a;
        rhs.segment(n_, m_) = b;
        Eigen::VectorXd sol = ldlt_.solve(rhs);
        x = sol.head(n_);
        z = sol.segment(n_, m_);
        for (int r = 0; r < set_.refinement_steps; ++r)
        {
            rhs.head(n_) = a - Gt_ * z;
            rhs.segment(n_, m_) = b - (G_ * x - apply_w2(z));
            sol = ldlt_.solve(rhs);
            x += sol.head(n_);
            z += sol.segment(n_, m_);
        }
    }

    Direction direction(double eta, const Eigen::VectorXd& rx, const Eigen::VectorXd& rz, double rt, const Eigen::VectorXd& ds,
                        double dk, const Eigen::VectorXd& qx, const Eigen::VectorXd& qz, double q_den) const
    {
        const Eigen::VectorXd wl = apply_w(inv_circ(lambda_, ds));
        Eigen::VectorXd px, pz;
        solve_k(-eta * rx, -eta * rz - wl, px, pz);
        const double rhs3 = -eta * rt - dk / tau_;
        Direction d;
        d.tau = (rhs3 - c_.dot(px) - h_.dot(pz)) / q_den;
        d.x = px + d.tau * qx;
        d.z = pz + d.tau * qz;
        d.s = wl - apply_w2(d.z);
        d.kappa = (dk - kappa_ * d.tau) / tau_;
        return d;
    }

    double cone_step(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) const
    {
        double amax = std::numeric_limits<double>::infinity();
        for (const auto& k : sf_.cones)
        {
            if (!k.soc)
            {
                if (dx[k.offset] < 0.0) amax = std::min(amax, -x[k.offset] / dx[k.offset]);
                continue;
            }
            const auto xs = x.segment(k.offset, k.dim);
            const auto ds = dx.segment(k.offset, k.dim);
            const double a2 = ds[0] * ds[0] - ds.tail(k.dim - 1).squaredNorm();
            const double a1 = 2.0 * (xs[0] * ds[0] - xs.tail(k.dim - 1).dot(ds.tail(k.dim - 1)));
            const double a0 = soc_det(xs);
            double root = std::numeric_limits<double>::infinity();
            auto consider = [&](double r) {
                if (r > 0.0 && xs[0] + r * ds[0] >= -1e-300) root = std::min(root, r);
            };
            if (a2 == 0.0)
            {
                if (a1 < 0.0) consider(-a0 / a1);
            }
            else
            {
                const double disc = a1 * a1 - 4.0 * a2 * a0;
                if (disc >= 0.0)
                {
                    const double q = -0.5 * (a1 + std::copysign(std::sqrt(disc), a1));
                    if (q != 0.0)
                    {
                        consider(q / a2);
                        consider(a0 / q);
                    }
                }
            }
            // The head must stay positive too.
            if (ds[0] < 0.0) root = std::min(root, -xs[0] / ds[0]);
            amax = std::min(amax, root);
        }
        return amax;
    }

    double max_step(const Direction& d) const
    {
        double a = std::min(cone_step(s_, d.s), cone_step(z_, d.z));
        if (d.tau < 0.0) a = std::min(a, -tau_ / d.tau);
        if (d.kappa < 0.0) a = std::min(a, -kappa_ / d.kappa);
        return a;
    }

    // Least-squares primal/dual starts shifted into the cone interior.
    bool initial_point()
    {
        beta_.assign(sf_.cones.size(), 1.0);
        v_.assign(sf_.cones.size(), Eigen::VectorXd());
        for (size_t j = 0; j < sf_.cones.size(); ++j)
            if (sf_.cones[j].soc)
            {
                v_[j] = Eigen::VectorXd::Zero(sf_.cones[j].dim);
                v_[j][0] = 1.0; // W = I
            }
        if (!factor()) return false;
        Eigen::VectorXd z;
        solve_k(Eigen::VectorXd::Zero(n_), h_, x_, z);
        s_ = -z;
        Eigen::VectorXd xd;
        solve_k(-c_, Eigen::VectorXd::Zero(m_), xd, z_);
        if (!x_.allFinite() || !s_.allFinite() || !z_.allFinite()) return false;
        shift_interior(s_);
        shift_interior(z_);
        tau_ = 1.0;
        kappa_ = 1.0;
        return true;
    }

    void shift_interior(Eigen::VectorXd& u) const
    {
        double alpha = -std::numeric_limits<double>::infinity();
        for (const auto& k : sf_.cones)
        {
            if (!k.soc)
                alpha = std::max(alpha, -u[k.offset]);
            else
                alpha = std::max(alpha, u.segment(k.offset + 1, k.dim - 1).norm() - u[k.offset]);
        }
        if (alpha >= -1e-8) add_identity_to(u, 1.0 + alpha);
    }

    void add_identity_to(Eigen::VectorXd& u, double a) const
    {
        for (const auto& k : sf_.cones) u[k.offset] += a;
    }

    // Unscaled iterate views.
    Eigen::VectorXd ux() const { return col_scale_.cwiseProduct(x_) * b_scale_; }
    Eigen::VectorXd uz() const { return row_scale_.cwiseProduct(z_) * c_norm_scale_; }
    Eigen::VectorXd us() const { return s_.cwiseQuotient(row_scale_) * b_scale_; }

    bool check_termination(SolveResult& res)
    {
        const Eigen::VectorXd x = ux();
        const Eigen::VectorXd z = uz();
        const Eigen::VectorXd s = us();
        const double tx = tau_;
        const double tz = tau_;
        const double hn = std::max(1.0, sf_.h.norm());
        const double cn = std::max(1.0, sf_.c.norm());

        const Eigen::VectorXd gxs = sf_.G * x + s;
        const Eigen::VectorXd gtz = sf_.G.transpose() * z;
        const double pres = (gxs - sf_.h * tx).norm() / tx / hn;
        const double dres = (gtz + sf_.c * tz).norm() / tz / cn;
        const double cx = sf_.c.dot(x);
        const double hz = sf_.h.dot(z);
        const double pcost = cx / tx;
        const double dcost = -hz / tz;
        const double gap = s.dot(z) / (tx * tz);
        const double gap_rel = gap / std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));

        res.primal_residual = pres;
        res.dual_residual = dres;
        res.gap = gap_rel;
        res.primal = x / tx;
        res.dual = z / tz;
        res.slack = s / tx;
        res.objective = -pcost;
        res.dual_objective = -dcost;

        if (pres <= set_.tol_feas && dres <= set_.tol_feas && gap_rel <= set_.tol_gap)
        {
            res.status = Status::Optimal;
            return true;
        }
        if (hz < 0.0)
        {
            const double pinf = gtz.norm() / cn / (-hz);
            if (pinf <= set_.tol_feas)
            {
                res.status = Status::PrimalInfeasible;
                res.dual = z / (-hz);
                res.primal_residual = pinf;
                return true;
            }
        }
        if (cx < 0.0)
        {
            const double dinf = gxs.norm() / hn / (-cx);
            if (dinf <= set_.tol_feas)
            {
                res.status = Status::DualInfeasible;
                res.primal = x / (-cx);
                res.dual_residual = dinf;
                return true;
            }
        }
        return false;
    }

    void finish(SolveResult& res, std::chrono::steady_clock::time_point t0) const
    {
        res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

  public:
    // Maps standard-form rows back to program block rows (rotated blocks are rotated back).
    void map_back(SolveResult& res, const ConicProgram& p, double obj_const) const
    {
        const double r2 = std::sqrt(0.5);
        for (size_t j = 0; j < p.blocks().size(); ++j)
        {
            const auto& b = p.blocks()[j];
            if (b.kind != ConeKind::RotatedSecondOrder) continue;
            const int o = sf_.block_row[j];
            for (Eigen::VectorXd* v : {&res.slack, &res.dual})
            {
                if (v->size() != m_) continue;
                const double a = (*v)[o], c = (*v)[o + 1];
                (*v)[o] = r2 * (a + c);
                (*v)[o + 1] = r2 * (a - c);
            }
        }
        res.objective += obj_const;
        res.dual_objective += obj_const;
    }

  private:
    StandardForm sf_;
    Settings set_;
    int n_ = 0, m_ = 0, degree_ = 0;
    Eigen::SparseMatrix<double, Eigen::RowMajor> G_, Gt_;
    Eigen::VectorXd h_, c_;
    Eigen::VectorXd row_scale_, col_scale_;
    double b_scale_ = 1.0, c_norm_scale_ = 1.0;
    static constexpr int kDenseConeDim = 16; // larger cones use the expanded rank-2 form
    std::vector<Eigen::Triplet<double>> kkt_fixed_;
    std::vector<int> expanded_index_;
    int kkt_dim_ = 0;
    double kkt_reg_ = 1e-9;
    Eigen::SparseMatrix<double> kkt_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
    bool analyzed_ = false;
    bool assembled_ = false;
    std::vector<int> slot_; // value index of each variable KKT entry

    Eigen::VectorXd x_, s_, z_;
    double tau_ = 1.0, kappa_ = 1.0;
    std::vector<double> beta_;
    std::vector<Eigen::VectorXd> v_;
    Eigen::VectorXd lambda_;
};

} // namespace detail

// Pluggable solve interface; the embedded interior-point method is the default.
class Backend
{
  public:
    virtual ~Backend() = default;
    virtual SolveResult solve(const ConicProgram& program, const Settings& settings) const = 0;
};

class InteriorPointBackend final : public Backend
{
  public:
    SolveResult solve(const ConicProgram& program, const Settings& settings) const override
    {
        if (program.num_vars() == 0 || program.blocks().empty())
            throw std::invalid_argument("solve: program needs variables and at least one cone block");
        detail::HsdeSolver solver(detail::to_standard_form(program), settings);
        SolveResult r = solver.run();
        solver.map_back(r, program, program.objective_constant());
        return r;
    }
};

inline SolveResult solve(const ConicProgram& program, const Settings& settings = {})
{
    return InteriorPointBackend{}.solve(program, settings);
}

} // namespace risbf::conic
