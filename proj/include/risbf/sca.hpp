// SPDX-License-Identifier: Apache-2.0
#pragma once

// Convex surrogates of the beamforming problem around an expansion point.
// Complex variables are stored as (re, im) pairs of solver variables.

#include "conic/program.hpp"
#include "linear_expr.hpp"
#include "metrics.hpp"
#include "scene.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace risbf::sca {

// Solver-variable handles of X (column-major, L x (K+M)) and theta.
struct VariableLayout
{
    int L = 0, cols = 0, N = 0;
    int x_base = 0;
    int theta_base = 0;

    int x_re(int l, int j) const { return x_base + 2 * (j * L + l); }
    int x_im(int l, int j) const { return x_re(l, j) + 1; }
    int theta_re(int n) const { return theta_base + 2 * n; }
    int theta_im(int n) const { return theta_re(n) + 1; }

    CVecExpr column(int j) const
    {
        CVecExpr c;
        c.reserve(static_cast<size_t>(L));
        for (int l = 0; l < L; ++l) c.emplace_back(LinExpr::var(x_re(l, j)), LinExpr::var(x_im(l, j)));
        return c;
    }
    CExpr theta(int n) const { return {LinExpr::var(theta_re(n)), LinExpr::var(theta_im(n))}; }

    void pack(const Eigen::MatrixXcd& x_mat, const Eigen::VectorXcd& theta, Eigen::VectorXd& v) const
    {
        for (int j = 0; j < cols; ++j)
            for (int l = 0; l < L; ++l) v[x_re(l, j)] = x_mat(l, j).real(), v[x_im(l, j)] = x_mat(l, j).imag();
        for (int n = 0; n < N; ++n) v[theta_re(n)] = theta[n].real(), v[theta_im(n)] = theta[n].imag();
    }

    BeamformingSolution unpack(const Eigen::VectorXd& v) const
    {
        BeamformingSolution s;
        s.x_mat.resize(L, cols);
        s.theta.resize(N);
        for (int j = 0; j < cols; ++j)
            for (int l = 0; l < L; ++l) s.x_mat(l, j) = {v[x_re(l, j)], v[x_im(l, j)]};
        for (int n = 0; n < N; ++n) s.theta[n] = {v[theta_re(n)], v[theta_im(n)]};
        return s;
    }
};

inline VariableLayout add_beamforming_variables(conic::ConicProgram& p, const SystemConfig& cfg)
{
    VariableLayout v;
    v.L = cfg.L, v.cols = cfg.columns(), v.N = cfg.N;
    v.x_base = p.num_vars();
    for (int j = 0; j < v.cols; ++j)
        for (int l = 0; l < v.L; ++l)
        {
            p.add_variable("Re x[" + std::to_string(l) + "," + std::to_string(j) + "]");
            p.add_variable("Im x[" + std::to_string(l) + "," + std::to_string(j) + "]");
        }
    v.theta_base = p.num_vars();
    for (int n = 0; n < v.N; ++n)
    {
        p.add_variable("Re theta[" + std::to_string(n) + "]");
        p.add_variable("Im theta[" + std::to_string(n) + "]");
    }
    return v;
}

// Slack handles; -1 marks an unused index (e.g. the diagonal k' = k).
struct SlackSet
{
    std::vector<std::vector<int>> wp_c, wp_bar_c;       // [k][k']
    std::vector<std::vector<int>> wp_t, wp_bar_t;       // [k][m]
    std::vector<int> tau_c, tau_bar_c;                  // [k]
    std::vector<std::vector<int>> kappa_c, kappa_bar_c; // [k][n]
    std::vector<std::vector<int>> kappa_t, kappa_bar_t; // [m][n]

    int kappa(int j, int n, int K) const { return j < K ? kappa_c[j][n] : kappa_t[j - K][n]; }
    int kappa_bar(int j, int n, int K) const { return j < K ? kappa_bar_c[j][n] : kappa_bar_t[j - K][n]; }

    static SlackSet allocate(conic::ConicProgram& p, const SystemConfig& cfg, bool power_slacks)
    {
        const int K = cfg.K, M = cfg.M, N = cfg.N;
        auto name = [](const char* base, int a, int b) { return std::string(base) + "[" + std::to_string(a) + "," + std::to_string(b) + "]"; };
        SlackSet s;
        s.wp_c.assign(K, std::vector<int>(K, -1));
        s.wp_bar_c = s.wp_c;
        s.wp_t.assign(K, std::vector<int>(M, -1));
        s.wp_bar_t = s.wp_t;
        for (int k = 0; k < K; ++k)
        {
            for (int kp = 0; kp < K; ++kp)
                if (kp != k)
                {
                    s.wp_c[k][kp] = p.add_variable(name("wp_c", k, kp));
                    s.wp_bar_c[k][kp] = p.add_variable(name("wp_bar_c", k, kp));
                }
            for (int m = 0; m < M; ++m)
            {
                s.wp_t[k][m] = p.add_variable(name("wp_t", k, m));
                s.wp_bar_t[k][m] = p.add_variable(name("wp_bar_t", k, m));
            }
            s.tau_c.push_back(p.add_variable("tau_c[" + std::to_string(k) + "]"));
            s.tau_bar_c.push_back(p.add_variable("tau_bar_c[" + std::to_string(k) + "]"));
        }
        if (power_slacks)
        {
            s.kappa_c.assign(K, std::vector<int>(N, -1));
            s.kappa_bar_c = s.kappa_c;
            s.kappa_t.assign(M, std::vector<int>(N, -1));
            s.kappa_bar_t = s.kappa_t;
            for (int k = 0; k < K; ++k)
                for (int n = 0; n < N; ++n)
                {
                    s.kappa_c[k][n] = p.add_variable(name("kappa_c", k, n));
                    s.kappa_bar_c[k][n] = p.add_variable(name("kappa_bar_c", k, n));
                }
            for (int m = 0; m < M; ++m)
                for (int n = 0; n < N; ++n)
                {
                    s.kappa_t[m][n] = p.add_variable(name("kappa_t", m, n));
                    s.kappa_bar_t[m][n] = p.add_variable(name("kappa_bar_t", m, n));
                }
        }
        return s;
    }
};

// Previous iterate with every constant the surrogates need.
class ExpansionPoint
{
  public:
    // balance = false keeps the unweighted split 2 Re{u^H v} = (||u+v||^2 - ||u-v||^2)/2 of every bilinear term;
    // true splits (alpha u, v/alpha) with ||alpha u0|| = ||v0/alpha||, which makes the bounds covariant under rescaling.
    static ExpansionPoint make(const Eigen::MatrixXcd& x_mat, const Eigen::VectorXcd& theta, const ChannelSet& ch, const SystemConfig& cfg,
                               bool balance = true)
    {
        ExpansionPoint e;
        e.balance_ = balance;
        e.x_mat_prev_ = x_mat;
        e.theta_prev_ = theta;
        e.g_t_ = effective_target_channel(ch, theta);
        const int cols = static_cast<int>(x_mat.cols());
        for (int j = 0; j < cols; ++j)
        {
            const cplx a = row_times(e.g_t_, x_mat.col(j));
            const Eigen::VectorXcd u0 = a * e.g_t_.conjugate();
            const double al = e.weight(u0, x_mat.col(j));
            e.a_.push_back(a);
            e.alpha_.push_back(al);
            e.b_.push_back(al * u0 + x_mat.col(j) / al);
        }
        e.psi_ = ch.g_ris.cwiseProduct(theta);
        for (int k = 0; k < cfg.K; ++k)
        {
            e.h_.push_back(effective_user_channel(k, ch, theta));
            const cplx c = row_times(e.h_[k], x_mat.col(k));
            const Eigen::VectorXcd u0 = c * e.h_[k].conjugate();
            const double al = e.weight(u0, x_mat.col(k));
            e.c_.push_back(c);
            e.gamma_.push_back(al);
            e.d_.push_back(al * u0 + x_mat.col(k) / al);
        }
        return e;
    }

    // sqrt(||v0|| / ||u0||), or 1 when balancing is off or either side vanishes.
    double weight(const Eigen::VectorXcd& u0, const Eigen::VectorXcd& v0) const
    {
        const double nu = u0.norm(), nv = v0.norm();
        if (!balance_ || !(nu > 0.0) || !(nv > 0.0)) return 1.0;
        return std::sqrt(nv / nu);
    }

    bool balanced() const { return balance_; }
    double alpha(int j) const { return alpha_[j]; }
    double gamma(int k) const { return gamma_[k]; }
    const Eigen::MatrixXcd& x_mat_prev() const { return x_mat_prev_; }
    const Eigen::VectorXcd& theta_prev() const { return theta_prev_; }
    const Eigen::VectorXcd& g_t() const { return g_t_; }
    const Eigen::VectorXcd& h(int k) const { return h_[k]; }
    cplx a(int j) const { return a_[j]; }
    const Eigen::VectorXcd& b(int j) const { return b_[j]; }
    cplx psi(int n) const { return psi_[n]; }
    cplx c(int k) const { return c_[k]; }
    const Eigen::VectorXcd& d(int k) const { return d_[k]; }

  private:
    bool balance_ = true;
    std::vector<double> alpha_, gamma_;
    Eigen::MatrixXcd x_mat_prev_;
    Eigen::VectorXcd theta_prev_;
    Eigen::VectorXcd g_t_;
    std::vector<Eigen::VectorXcd> h_;
    std::vector<cplx> a_;
    std::vector<Eigen::VectorXcd> b_;
    Eigen::VectorXcd psi_;
    std::vector<cplx> c_;
    std::vector<Eigen::VectorXcd> d_;
};

// sum squares[i]^2 <= rhs
struct QuadraticConstraint
{
    std::string label;
    std::vector<LinExpr> squares;
    LinExpr rhs;
    int slack_var = -1; // set when the constraint lower-bounds a single slack variable

    double margin(const Eigen::VectorXd& v) const
    {
        double s = 0.0;
        for (const auto& q : squares)
        {
            const double e = q.evaluate(v);
            s += e * e;
        }
        return rhs.evaluate(v) - s;
    }
};

// ||entries|| <= bound
struct NormConstraint
{
    std::string label;
    std::vector<LinExpr> entries;
    LinExpr bound;

    double margin(const Eigen::VectorXd& v) const
    {
        double s = 0.0;
        for (const auto& q : entries)
        {
            const double e = q.evaluate(v);
            s += e * e;
        }
        return bound.evaluate(v) - std::sqrt(s);
    }
};

// expr >= 0
struct LinearConstraint
{
    std::string label;
    LinExpr expr;
    double margin(const Eigen::VectorXd& v) const { return expr.evaluate(v); }
};

inline std::string format_expr(const LinExpr& e, const std::vector<std::string>& names)
{
    std::ostringstream os;
    os.precision(6);
    bool first = true;
    for (const auto& [i, c] : e.terms())
    {
        os << (first ? (c < 0 ? "-" : "") : (c < 0 ? " - " : " + ")) << std::abs(c) << "*"
           << (i < static_cast<int>(names.size()) ? names[i] : "v" + std::to_string(i));
        first = false;
    }
    if (e.constant() != 0.0 || first) os << (first ? "" : (e.constant() < 0 ? " - " : " + ")) << (first ? e.constant() : std::abs(e.constant()));
    return os.str();
}

struct ConstraintSet
{
    std::vector<QuadraticConstraint> quadratic;
    std::vector<NormConstraint> norms;
    std::vector<LinearConstraint> linear;

    void append(const ConstraintSet& o)
    {
        quadratic.insert(quadratic.end(), o.quadratic.begin(), o.quadratic.end());
        norms.insert(norms.end(), o.norms.begin(), o.norms.end());
        linear.insert(linear.end(), o.linear.begin(), o.linear.end());
    }

    size_t size() const { return quadratic.size() + norms.size() + linear.size(); }

    // Lifting: a quadratic constraint with constant right side becomes the SOC [sqrt(rhs); squares],
    // otherwise the rotated cone [rhs; 1/2; squares]. Norm bounds are SOCs, linear ones nonnegative rows.
    void emit(conic::ConicProgram& p) const
    {
        for (const auto& q : quadratic)
        {
            std::vector<LinExpr> rows;
            rows.reserve(q.squares.size() + 2);
            if (q.rhs.terms().empty() && q.rhs.constant() >= 0.0)
            {
                rows.emplace_back(std::sqrt(q.rhs.constant()));
                rows.insert(rows.end(), q.squares.begin(), q.squares.end());
                p.add_block(conic::ConeKind::SecondOrder, rows, q.label);
            }
            else
            {
                rows.push_back(q.rhs);
                rows.emplace_back(0.5);
                rows.insert(rows.end(), q.squares.begin(), q.squares.end());
                p.add_block(conic::ConeKind::RotatedSecondOrder, rows, q.label);
            }
        }
        for (const auto& n : norms)
        {
            std::vector<LinExpr> rows{n.bound};
            rows.insert(rows.end(), n.entries.begin(), n.entries.end());
            p.add_block(conic::ConeKind::SecondOrder, rows, n.label);
        }
        for (const auto& l : linear) p.add_block(conic::ConeKind::NonNegative, std::span(&l.expr, 1), l.label);
    }

    double min_margin(const Eigen::VectorXd& v) const
    {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& q : quadratic) m = std::min(m, q.margin(v));
        for (const auto& q : norms) m = std::min(m, q.margin(v));
        for (const auto& q : linear) m = std::min(m, q.margin(v));
        return m;
    }

    // Sets every slack variable to the smallest value its bounding constraints allow.
    void fill_slacks(Eigen::VectorXd& v) const
    {
        std::vector<std::pair<int, double>> need;
        for (const auto& q : quadratic)
        {
            if (q.slack_var < 0) continue;
            double s = 0.0;
            for (const auto& e : q.squares)
            {
                const double x = e.evaluate(v);
                s += x * x;
            }
            need.emplace_back(q.slack_var, s - (q.rhs.evaluate(v) - v[q.slack_var]));
        }
        for (const auto& [i, _] : need) v[i] = -std::numeric_limits<double>::infinity();
        for (const auto& [i, val] : need) v[i] = std::max(v[i], val);
    }

    std::string listing(const std::vector<std::string>& names) const
    {
        std::ostringstream os;
        for (const auto& q : quadratic)
        {
            os << q.label << ": ";
            for (size_t i = 0; i < q.squares.size(); ++i) os << (i ? " + " : "") << "(" << format_expr(q.squares[i], names) << ")^2";
            os << " <= " << format_expr(q.rhs, names) << '\n';
        }
        for (const auto& n : norms)
        {
            os << n.label << ": ||";
            for (size_t i = 0; i < n.entries.size(); ++i) os << (i ? ", " : "") << format_expr(n.entries[i], names);
            os << "|| <= " << format_expr(n.bound, names) << '\n';
        }
        for (const auto& l : linear) os << l.label << ": " << format_expr(l.expr, names) << " >= 0\n";
        return os.str();
    }
};

// affine - sum squares^2, maximized through an epigraph variable.
struct ConcaveObjective
{
    LinExpr affine;
    std::vector<LinExpr> squares;

    double evaluate(const Eigen::VectorXd& v) const
    {
        double s = 0.0;
        for (const auto& q : squares)
        {
            const double e = q.evaluate(v);
            s += e * e;
        }
        return affine.evaluate(v) - s;
    }

    void emit(conic::ConicProgram& p) const
    {
        if (squares.empty())
        {
            p.set_objective(affine);
            return;
        }
        const int t = p.add_variable("objective_epigraph");
        QuadraticConstraint q{"objective_epigraph", squares, LinExpr::var(t), -1};
        ConstraintSet cs;
        cs.quadratic.push_back(std::move(q));
        cs.emit(p);
        p.set_objective(affine - LinExpr::var(t));
    }
};

// ---------------------------------------------------------------------------
// Elementary bounds.

// 2 Re{v^H u} - ||v||^2 <= ||u||^2, tight at u = v.
inline LinExpr lb_normsq(const CVecExpr& u, const Eigen::VectorXcd& v)
{
    LinExpr e = 2.0 * re_inner(v, u);
    e += LinExpr(-v.squaredNorm());
    return e;
}

inline double lb_normsq(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v)
{
    if (u.size() != v.size()) throw std::invalid_argument("lb_normsq: dimension mismatch");
    return 2.0 * v.dot(u).real() - v.squaredNorm();
}

// (Re{u^H v}, Im{u^H v}) through the polarization identities.
inline std::pair<double, double> re_split(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v)
{
    if (u.size() != v.size()) throw std::invalid_argument("re_split: dimension mismatch");
    const cplx j(0.0, 1.0);
    const double re = 0.25 * ((u + v).squaredNorm() - (u - v).squaredNorm());
    const double im = 0.25 * ((u - j * v).squaredNorm() - (u + j * v).squaredNorm());
    return {re, im};
}

enum class Part { Real, Imag };

// slack >= sign * Part{u^H v}, convexified around (u0, v0).
// With p = u + e v, q = u - e v (e = 1 for Real, e = -j for Imag), Part = (||p||^2 - ||q||^2)/4,
// so the bound keeps ||p||^2/4 (or ||q||^2/4) and linearizes the subtracted norm.
// The pair is split as (alpha u, v / alpha); alpha = 1 gives the plain identity.
inline QuadraticConstraint inner_part_bound(int slack, const CVecExpr& u, const CVecExpr& v, const Eigen::VectorXcd& u0,
                                            const Eigen::VectorXcd& v0, Part part, double sign, std::string label, double alpha = 1.0)
{
    const cplx e = part == Part::Real ? cplx(1.0, 0.0) : cplx(0.0, -1.0);
    const CVecExpr ua = cplx(alpha) * u;
    const CVecExpr ev = (e / alpha) * v;
    const CVecExpr p = ua + ev, q = ua - ev;
    const Eigen::VectorXcd p0 = alpha * u0 + (e / alpha) * v0, q0 = alpha * u0 - (e / alpha) * v0;
    QuadraticConstraint c;
    c.label = std::move(label);
    c.slack_var = slack;
    const CVecExpr& kept = sign > 0 ? p : q;
    c.squares.reserve(2 * kept.size());
    append_squares(c.squares, kept, 0.25);
    c.rhs = LinExpr::var(slack) + 0.25 * (sign > 0 ? lb_normsq(q, q0) : lb_normsq(p, p0));
    return c;
}

// ---------------------------------------------------------------------------
// Channel expressions (conjugated channels are affine in conj(theta)).

namespace detail {

// entries conj(coef_n * G_{n,l}) conj(theta_n) summed over n, plus conj(offset_l)
inline CVecExpr conj_cascade(const VariableLayout& var, const ChannelSet& ch, const Eigen::VectorXcd& coef, const Eigen::VectorXcd* offset)
{
    CVecExpr r(static_cast<size_t>(var.L));
    for (int l = 0; l < var.L; ++l)
    {
        LinExpr re, im;
        for (int n = 0; n < var.N; ++n)
        {
            const cplx c = std::conj(coef[n] * ch.g_mat(n, l));
            // c * (tr - j ti)
            re.add_term(var.theta_re(n), c.real()).add_term(var.theta_im(n), c.imag());
            im.add_term(var.theta_re(n), c.imag()).add_term(var.theta_im(n), -c.real());
        }
        if (offset)
        {
            re += LinExpr(std::conj((*offset)[l]).real());
            im += LinExpr(std::conj((*offset)[l]).imag());
        }
        r[static_cast<size_t>(l)] = CExpr(std::move(re), std::move(im));
    }
    return r;
}

} // namespace detail

// g_t^H as an affine expression.
inline CVecExpr target_channel_conj_expr(const VariableLayout& var, const ChannelSet& ch)
{
    return detail::conj_cascade(var, ch, ch.g_ris, nullptr);
}

// h_k^H as an affine expression.
inline CVecExpr user_channel_conj_expr(int k, const VariableLayout& var, const ChannelSet& ch)
{
    return detail::conj_cascade(var, ch, ch.h_ris[k], &ch.h_direct[k]);
}

// g_n^H conj(theta_n) for RIS row n.
inline CVecExpr reflected_row_expr(int n, const VariableLayout& var, const ChannelSet& ch)
{
    CVecExpr r(static_cast<size_t>(var.L));
    const CExpr ct = conj(var.theta(n));
    for (int l = 0; l < var.L; ++l) r[static_cast<size_t>(l)] = std::conj(ch.g_mat(n, l)) * ct;
    return r;
}

// ---------------------------------------------------------------------------
// Concave surrogate pieces.

// Concave minorant of |g_t x_j|^2: affine part and the squares of 1/sqrt(2) (al a_j g_t^H - x_j / al).
inline ConcaveObjective column_gain_lower_bound(int j, const ExpansionPoint& exp, const VariableLayout& var, const CVecExpr& gtH)
{
    const double al = exp.alpha(j);
    const CVecExpr u = (al * exp.a(j)) * gtH;
    const CVecExpr v = cplx(1.0 / al) * var.column(j);
    const Eigen::VectorXcd& b = exp.b(j);
    ConcaveObjective f;
    f.affine = re_inner(b, u + v);
    f.affine += LinExpr(-0.5 * b.squaredNorm() - std::norm(exp.a(j)));
    append_squares(f.squares, u - v, 0.5);
    return f;
}

// sum_n (2 Re{conj(psi_n) g_{R,n} theta_n} - |psi_n|^2), affine in theta.
inline LinExpr ris_noise_lower_bound(const ExpansionPoint& exp, const VariableLayout& var, const ChannelSet& ch)
{
    LinExpr e;
    for (int n = 0; n < var.N; ++n)
    {
        const cplx w = std::conj(exp.psi(n)) * ch.g_ris[n];
        // 2 Re{w theta_n}
        e.add_term(var.theta_re(n), 2.0 * w.real()).add_term(var.theta_im(n), -2.0 * w.imag());
        e += LinExpr(-std::norm(exp.psi(n)));
    }
    return e;
}

inline ConcaveObjective objective_lower_bound(const ExpansionPoint& exp, const VariableLayout& var, const ChannelSet& ch,
                                              const SystemConfig& cfg)
{
    const CVecExpr gtH = target_channel_conj_expr(var, ch);
    ConcaveObjective f;
    for (int j = 0; j < cfg.columns(); ++j)
    {
        ConcaveObjective fj = column_gain_lower_bound(j, exp, var, gtH);
        f.affine += fj.affine;
        f.squares.insert(f.squares.end(), fj.squares.begin(), fj.squares.end());
    }
    if (cfg.sigma2_ris > 0.0) f.affine += cfg.sigma2_ris * ris_noise_lower_bound(exp, var, ch);
    return f;
}

// Objective plus the linearized penalty zeta (2 Re{theta_prev^H theta} - ||theta_prev||^2).
inline ConcaveObjective pris_objective(const ExpansionPoint& exp, const VariableLayout& var, const ChannelSet& ch,
                                       const SystemConfig& cfg, double zeta)
{
    ConcaveObjective f = objective_lower_bound(exp, var, ch, cfg);
    if (zeta == 0.0) return f;
    CVecExpr th;
    for (int n = 0; n < var.N; ++n) th.push_back(var.theta(n));
    f.affine += zeta * lb_normsq(th, exp.theta_prev());
    return f;
}

// ---------------------------------------------------------------------------
// Restricted constraint blocks.

// User SINR >= gamma_c[k]. Optional relax_var adds a nonnegative relaxation to the signal side.
inline ConstraintSet comm_sinr_block(int k, const ExpansionPoint& exp, const VariableLayout& var, const ChannelSet& ch,
                                     const SystemConfig& cfg, const SlackSet& sl, int relax_var = -1)
{
    const int K = cfg.K, M = cfg.M;
    const CVecExpr hH = user_channel_conj_expr(k, var, ch);
    const Eigen::VectorXcd hH0 = exp.h(k).conjugate();
    const std::string tag = "[" + std::to_string(k) + "]";
    ConstraintSet cs;

    // (1/gamma) fbar_k >= sigma_k^2 + sum slack^2 + sigma_I^2 ||h_Rk Theta||^2
    {
        const double ig = 1.0 / cfg.gamma_c[k];
        const double al = exp.gamma(k);
        const cplx c = exp.c(k);
        const CVecExpr u = (al * c) * hH;
        const CVecExpr v = cplx(1.0 / al) * var.column(k);
        QuadraticConstraint q;
        q.label = "sinr" + tag;
        append_squares(q.squares, u - v, 0.5 * ig);
        for (int kp = 0; kp < K; ++kp)
            if (kp != k)
            {
                q.squares.push_back(LinExpr::var(sl.wp_c[k][kp]));
                q.squares.push_back(LinExpr::var(sl.wp_bar_c[k][kp]));
            }
        for (int m = 0; m < M; ++m)
        {
            q.squares.push_back(LinExpr::var(sl.wp_t[k][m]));
            q.squares.push_back(LinExpr::var(sl.wp_bar_t[k][m]));
        }
        if (cfg.sigma2_ris > 0.0)
            for (int n = 0; n < cfg.N; ++n)
            {
                const double w = std::sqrt(cfg.sigma2_ris) * std::abs(ch.h_ris[k][n]);
                q.squares.push_back(w * LinExpr::var(var.theta_re(n)));
                q.squares.push_back(w * LinExpr::var(var.theta_im(n)));
            }
        LinExpr rhs = re_inner(exp.d(k), u + v);
        rhs += LinExpr(-0.5 * exp.d(k).squaredNorm() - std::norm(c));
        rhs *= ig;
        rhs += LinExpr(-cfg.sigma2_user[k]);
        if (relax_var >= 0) rhs += LinExpr::var(relax_var);
        q.rhs = std::move(rhs);
        cs.quadratic.push_back(std::move(q));
    }

    // Interference slacks: |Re{h_k x_j}| and |Im{h_k x_j}| for every other column.
    auto bound_pair = [&](int re_slack, int im_slack, int j, const std::string& name) {
        const CVecExpr xj = var.column(j);
        const Eigen::VectorXcd x0 = exp.x_mat_prev().col(j);
        const double al = exp.weight(hH0, x0);
        for (double sign : {1.0, -1.0})
        {
            const std::string sfx = sign > 0 ? "+" : "-";
            cs.quadratic.push_back(inner_part_bound(re_slack, hH, xj, hH0, x0, Part::Real, sign, name + "re" + sfx, al));
            cs.quadratic.push_back(inner_part_bound(im_slack, hH, xj, hH0, x0, Part::Imag, sign, name + "im" + sfx, al));
        }
    };
    for (int kp = 0; kp < K; ++kp)
        if (kp != k) bound_pair(sl.wp_c[k][kp], sl.wp_bar_c[k][kp], kp, "wp_c[" + std::to_string(k) + "," + std::to_string(kp) + "]");
    for (int m = 0; m < M; ++m) bound_pair(sl.wp_t[k][m], sl.wp_bar_t[k][m], K + m, "wp_t[" + std::to_string(k) + "," + std::to_string(m) + "]");
    return cs;
}

// Leakage SINR of user k at the target <= gamma_t[k]. Optional relax_var relaxes the denominator side.
inline ConstraintSet leakage_block(int k, const ExpansionPoint& exp, const VariableLayout& var, const ChannelSet& ch,
                                   const SystemConfig& cfg, const SlackSet& sl, int relax_var = -1)
{
    const CVecExpr gtH = target_channel_conj_expr(var, ch);
    const Eigen::VectorXcd gtH0 = exp.g_t().conjugate();
    const std::string tag = "[" + std::to_string(k) + "]";
    ConstraintSet cs;
    {
        QuadraticConstraint q;
        q.label = "leakage" + tag;
        LinExpr rhs(cfg.sigma2_target);
        for (int j = 0; j < cfg.columns(); ++j)
        {
            if (j == k) continue;
            ConcaveObjective fj = column_gain_lower_bound(j, exp, var, gtH);
            rhs += fj.affine;
            q.squares.insert(q.squares.end(), fj.squares.begin(), fj.squares.end());
        }
        if (cfg.sigma2_ris > 0.0) rhs += cfg.sigma2_ris * ris_noise_lower_bound(exp, var, ch);
        if (relax_var >= 0) rhs += LinExpr::var(relax_var);
        const double w = 1.0 / std::sqrt(cfg.gamma_t[k]);
        q.squares.push_back(w * LinExpr::var(sl.tau_c[k]));
        q.squares.push_back(w * LinExpr::var(sl.tau_bar_c[k]));
        q.rhs = std::move(rhs);
        cs.quadratic.push_back(std::move(q));
    }
    const CVecExpr xk = var.column(k);
    const Eigen::VectorXcd x0 = exp.x_mat_prev().col(k);
    const double al = exp.weight(gtH0, x0);
    for (double sign : {1.0, -1.0})
    {
        const std::string sfx = sign > 0 ? "+" : "-";
        cs.quadratic.push_back(inner_part_bound(sl.tau_c[k], gtH, xk, gtH0, x0, Part::Real, sign, "tau_c" + tag + "re" + sfx, al));
        cs.quadratic.push_back(inner_part_bound(sl.tau_bar_c[k], gtH, xk, gtH0, x0, Part::Imag, sign, "tau_c" + tag + "im" + sfx, al));
    }
    return cs;
}

// Active-RIS budget: ||X||^2 + w (sum kappa^2 + sigma_I^2 ||theta||^2) <= P_max with kappa bounding theta_n g_n x_j.
inline ConstraintSet power_block_active(const ExpansionPoint& exp, const VariableLayout& var, const ChannelSet& ch,
                                        const SystemConfig& cfg, const SlackSet& sl)
{
    const int K = cfg.K;
    const double w = cfg.reflect_power_weight;
    ConstraintSet cs;
    QuadraticConstraint q;
    q.label = "power";
    for (int j = 0; j < cfg.columns(); ++j) append_squares(q.squares, var.column(j));
    const double sw = std::sqrt(w);
    for (int j = 0; j < cfg.columns(); ++j)
        for (int n = 0; n < cfg.N; ++n)
        {
            q.squares.push_back(sw * LinExpr::var(sl.kappa(j, n, K)));
            q.squares.push_back(sw * LinExpr::var(sl.kappa_bar(j, n, K)));
        }
    if (cfg.sigma2_ris > 0.0)
        for (int n = 0; n < cfg.N; ++n)
        {
            const double s = std::sqrt(w * cfg.sigma2_ris);
            q.squares.push_back(s * LinExpr::var(var.theta_re(n)));
            q.squares.push_back(s * LinExpr::var(var.theta_im(n)));
        }
    q.rhs = LinExpr(cfg.p_max);
    cs.quadratic.push_back(std::move(q));

    for (int n = 0; n < cfg.N; ++n)
    {
        const CVecExpr u = reflected_row_expr(n, var, ch);
        const Eigen::VectorXcd u0 = ch.g_mat.row(n).transpose().conjugate() * std::conj(exp.theta_prev()[n]);
        for (int j = 0; j < cfg.columns(); ++j)
        {
            const CVecExpr xj = var.column(j);
            const Eigen::VectorXcd x0 = exp.x_mat_prev().col(j);
            const std::string tag = "kappa[" + std::to_string(j) + "," + std::to_string(n) + "]";
            const double al = exp.weight(u0, x0);
            for (double sign : {1.0, -1.0})
            {
                const std::string sfx = sign > 0 ? "+" : "-";
                cs.quadratic.push_back(inner_part_bound(sl.kappa(j, n, K), u, xj, u0, x0, Part::Real, sign, tag + "re" + sfx, al));
                cs.quadratic.push_back(inner_part_bound(sl.kappa_bar(j, n, K), u, xj, u0, x0, Part::Imag, sign, tag + "im" + sfx, al));
            }
        }
    }
    return cs;
}

// Passive-RIS budget ||X||^2 <= P_max.
inline ConstraintSet power_block_passive(const VariableLayout& var, const SystemConfig& cfg)
{
    ConstraintSet cs;
    QuadraticConstraint q;
    q.label = "power";
    for (int j = 0; j < cfg.columns(); ++j) append_squares(q.squares, var.column(j));
    q.rhs = LinExpr(cfg.p_max);
    cs.quadratic.push_back(std::move(q));
    return cs;
}

// |theta_n| <= beta_max (active) or 1 (passive relaxation).
inline ConstraintSet amplitude_constraints(const VariableLayout& var, const SystemConfig& cfg)
{
    const double bound = cfg.ris_mode == RisMode::Passive ? 1.0 : cfg.beta_max;
    ConstraintSet cs;
    for (int n = 0; n < cfg.N; ++n)
        cs.norms.push_back({"amplitude[" + std::to_string(n) + "]", {LinExpr::var(var.theta_re(n)), LinExpr::var(var.theta_im(n))}, LinExpr(bound)});
    return cs;
}

// Power block for the configured mode.
inline ConstraintSet power_block(const ExpansionPoint& exp, const VariableLayout& var, const ChannelSet& ch, const SystemConfig& cfg,
                                 const SlackSet& sl)
{
    return cfg.ris_mode == RisMode::Active ? power_block_active(exp, var, ch, cfg, sl) : power_block_passive(var, cfg);
}

// Relaxation handles of the feasibility problem.
struct FeasibilityVariables
{
    std::vector<int> delta_c, delta_t;

    static FeasibilityVariables allocate(conic::ConicProgram& p, int K)
    {
        FeasibilityVariables f;
        for (int k = 0; k < K; ++k) f.delta_c.push_back(p.add_variable("delta_c[" + std::to_string(k) + "]"));
        for (int k = 0; k < K; ++k) f.delta_t.push_back(p.add_variable("delta_t[" + std::to_string(k) + "]"));
        return f;
    }
};

// Objective -(sum delta) (maximized, i.e. sum delta minimized) with the relaxed blocks.
inline std::pair<ConcaveObjective, ConstraintSet> feasibility_blocks(const ExpansionPoint& exp, const VariableLayout& var,
                                                                     const ChannelSet& ch, const SystemConfig& cfg, const SlackSet& sl,
                                                                     const FeasibilityVariables& fv)
{
    ConcaveObjective obj;
    ConstraintSet cs;
    for (int k = 0; k < cfg.K; ++k)
    {
        obj.affine -= LinExpr::var(fv.delta_c[k]);
        obj.affine -= LinExpr::var(fv.delta_t[k]);
        cs.append(comm_sinr_block(k, exp, var, ch, cfg, sl, fv.delta_c[k]));
        cs.append(leakage_block(k, exp, var, ch, cfg, sl, fv.delta_t[k]));
        cs.linear.push_back({"delta_c[" + std::to_string(k) + "]", LinExpr::var(fv.delta_c[k])});
        cs.linear.push_back({"delta_t[" + std::to_string(k) + "]", LinExpr::var(fv.delta_t[k])});
    }
    cs.append(power_block(exp, var, ch, cfg, sl));
    cs.append(amplitude_constraints(var, cfg));
    return {std::move(obj), std::move(cs)};
}

// All blocks of the restricted problem for the configured mode.
inline ConstraintSet restricted_constraints(const ExpansionPoint& exp, const VariableLayout& var, const ChannelSet& ch,
                                            const SystemConfig& cfg, const SlackSet& sl)
{
    ConstraintSet cs;
    for (int k = 0; k < cfg.K; ++k)
    {
        cs.append(comm_sinr_block(k, exp, var, ch, cfg, sl));
        cs.append(leakage_block(k, exp, var, ch, cfg, sl));
    }
    cs.append(power_block(exp, var, ch, cfg, sl));
    cs.append(amplitude_constraints(var, cfg));
    return cs;
}

} // namespace risbf::sca
