// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace risbf {

// Real affine form  constant + sum coef * x[var]  over solver variables.
class LinExpr
{
  public:
    LinExpr() = default;
    LinExpr(double c) : constant_(c) {} // NOLINT(implicit)

    static LinExpr var(int index, double coef = 1.0)
    {
        LinExpr e;
        e.add_term(index, coef);
        return e;
    }

    LinExpr& add_term(int index, double coef)
    {
        if (coef != 0.0) terms_.emplace_back(index, coef);
        return *this;
    }

    LinExpr& operator+=(const LinExpr& o)
    {
        terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
        constant_ += o.constant_;
        return *this;
    }
    LinExpr& operator-=(const LinExpr& o)
    {
        terms_.reserve(terms_.size() + o.terms_.size());
        for (const auto& [i, c] : o.terms_) terms_.emplace_back(i, -c);
        constant_ -= o.constant_;
        return *this;
    }
    LinExpr& operator*=(double s)
    {
        if (s == 0.0)
        {
            terms_.clear();
            constant_ = 0.0;
            return *this;
        }
        for (auto& t : terms_) t.second *= s;
        constant_ *= s;
        return *this;
    }

    friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
    friend LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
    friend LinExpr operator*(double s, LinExpr a) { return a *= s; }
    friend LinExpr operator*(LinExpr a, double s) { return a *= s; }
    friend LinExpr operator-(LinExpr a) { return a *= -1.0; }

    double constant() const { return constant_; }
    void set_constant(double c) { constant_ = c; }
    const std::vector<std::pair<int, double>>& terms() const { return terms_; }

    double evaluate(std::span<const double> x) const
    {
        double v = constant_;
        for (const auto& [i, c] : terms_) v += c * x[static_cast<size_t>(i)];
        return v;
    }
    double evaluate(const Eigen::VectorXd& x) const { return evaluate(std::span<const double>(x.data(), static_cast<size_t>(x.size()))); }

    // Merges duplicate variables and drops exact zeros; terms end up sorted by index.
    void compact()
    {
        std::sort(terms_.begin(), terms_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        size_t out = 0;
        for (size_t i = 0; i < terms_.size();)
        {
            const int idx = terms_[i].first;
            double c = 0.0;
            for (; i < terms_.size() && terms_[i].first == idx; ++i) c += terms_[i].second;
            if (c != 0.0) terms_[out++] = {idx, c};
        }
        terms_.resize(out);
    }

    int max_index() const
    {
        int m = -1;
        for (const auto& t : terms_) m = std::max(m, t.first);
        return m;
    }

  private:
    std::vector<std::pair<int, double>> terms_;
    double constant_ = 0.0;
};

// Complex affine scalar stored as its real and imaginary parts.
struct CExpr
{
    LinExpr re;
    LinExpr im;

    CExpr() = default;
    CExpr(LinExpr r, LinExpr i) : re(std::move(r)), im(std::move(i)) {}
    CExpr(std::complex<double> c) : re(c.real()), im(c.imag()) {} // NOLINT(implicit)

    CExpr& operator+=(const CExpr& o)
    {
        re += o.re;
        im += o.im;
        return *this;
    }
    CExpr& operator-=(const CExpr& o)
    {
        re -= o.re;
        im -= o.im;
        return *this;
    }
    friend CExpr operator+(CExpr a, const CExpr& b) { return a += b; }
    friend CExpr operator-(CExpr a, const CExpr& b) { return a -= b; }
    friend CExpr operator*(std::complex<double> a, const CExpr& e)
    {
        return {a.real() * e.re - a.imag() * e.im, a.imag() * e.re + a.real() * e.im};
    }

    std::complex<double> evaluate(std::span<const double> x) const { return {re.evaluate(x), im.evaluate(x)}; }
};

inline CExpr conj(CExpr e)
{
    e.im *= -1.0;
    return e;
}

using CVecExpr = std::vector<CExpr>;

inline CVecExpr operator+(const CVecExpr& a, const CVecExpr& b)
{
    if (a.size() != b.size()) throw std::invalid_argument("CVecExpr: dimension mismatch");
    CVecExpr r(a);
    for (size_t i = 0; i < r.size(); ++i) r[i] += b[i];
    return r;
}

inline CVecExpr operator-(const CVecExpr& a, const CVecExpr& b)
{
    if (a.size() != b.size()) throw std::invalid_argument("CVecExpr: dimension mismatch");
    CVecExpr r(a);
    for (size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
    return r;
}

inline CVecExpr operator*(std::complex<double> s, const CVecExpr& a)
{
    CVecExpr r;
    r.reserve(a.size());
    for (const auto& e : a) r.push_back(s * e);
    return r;
}

inline CVecExpr constant_vector(const Eigen::VectorXcd& v)
{
    CVecExpr r;
    r.reserve(static_cast<size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) r.emplace_back(v[i]);
    return r;
}

inline Eigen::VectorXcd evaluate(const CVecExpr& u, std::span<const double> x)
{
    Eigen::VectorXcd r(static_cast<Eigen::Index>(u.size()));
    for (size_t i = 0; i < u.size(); ++i) r[static_cast<Eigen::Index>(i)] = u[i].evaluate(x);
    return r;
}

// Re{v^H u}
inline LinExpr re_inner(const Eigen::VectorXcd& v, const CVecExpr& u)
{
    if (static_cast<size_t>(v.size()) != u.size()) throw std::invalid_argument("re_inner: dimension mismatch");
    LinExpr r;
    for (size_t i = 0; i < u.size(); ++i)
    {
        const auto vi = v[static_cast<Eigen::Index>(i)];
        r += vi.real() * u[i].re;
        r += vi.imag() * u[i].im;
    }
    return r;
}

// Appends the rows of sqrt(weight) * [Re u; Im u], whose squared norm is weight * ||u||^2.
inline void append_squares(std::vector<LinExpr>& out, const CVecExpr& u, double weight = 1.0)
{
    const double s = std::sqrt(weight);
    for (const auto& e : u)
    {
        out.push_back(s * e.re);
        out.push_back(s * e.im);
    }
}

} // namespace risbf
