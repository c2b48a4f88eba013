// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "../linear_expr.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace risbf::conic {

// Nonnegative: every row >= 0.
// SecondOrder: (t, u) with t >= ||u||.
// RotatedSecondOrder: (u0, u1, w) with 2*u0*u1 >= ||w||^2, u0, u1 >= 0.
enum class ConeKind { NonNegative, SecondOrder, RotatedSecondOrder };

inline std::string_view to_string(ConeKind k)
{
    switch (k)
    {
    case ConeKind::NonNegative: return "nonnegative";
    case ConeKind::SecondOrder: return "second-order";
    case ConeKind::RotatedSecondOrder: return "rotated-second-order";
    }
    return "?";
}

// A block constrains  A x + b  to lie in a cone.
struct ConeBlock
{
    ConeKind kind = ConeKind::NonNegative;
    int dim = 0;
    std::vector<Eigen::Triplet<double>> coeffs; // (local row, variable, value)
    Eigen::VectorXd offset;
    std::string label;
};

// Euclidean projection onto the second-order cone.
inline Eigen::VectorXd project_soc(const Eigen::VectorXd& v)
{
    const double t = v[0];
    const double nu = v.tail(v.size() - 1).norm();
    if (nu <= t) return v;
    if (nu <= -t) return Eigen::VectorXd::Zero(v.size());
    Eigen::VectorXd p(v.size());
    const double a = 0.5 * (t + nu);
    p[0] = a;
    p.tail(v.size() - 1) = (a / nu) * v.tail(v.size() - 1);
    return p;
}

// Rotated rows map to a standard second-order cone by an orthogonal change of the first two rows.
inline Eigen::VectorXd rotated_to_soc(const Eigen::VectorXd& v)
{
    Eigen::VectorXd r = v;
    const double s = std::sqrt(0.5);
    r[0] = s * (v[0] + v[1]);
    r[1] = s * (v[0] - v[1]);
    return r;
}

inline double cone_distance(ConeKind kind, const Eigen::VectorXd& v)
{
    switch (kind)
    {
    case ConeKind::NonNegative: return v.cwiseMin(0.0).norm();
    case ConeKind::SecondOrder: return (v - project_soc(v)).norm();
    case ConeKind::RotatedSecondOrder:
    {
        const Eigen::VectorXd r = rotated_to_soc(v);
        return (r - project_soc(r)).norm();
    }
    }
    return 0.0;
}

class ConicProgram
{
  public:
    int add_variable(std::string name = {})
    {
        names_.push_back(name.empty() ? "x" + std::to_string(names_.size()) : std::move(name));
        return static_cast<int>(names_.size()) - 1;
    }

    int num_vars() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& variable_names() const { return names_; }

    // Maximize objective^T x + objective_constant.
    void set_objective(LinExpr e)
    {
        e.compact();
        check_expr(e);
        objective_ = std::move(e);
    }
    const LinExpr& objective_expr() const { return objective_; }
    double objective_constant() const { return objective_.constant(); }

    Eigen::VectorXd objective() const
    {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(num_vars());
        for (const auto& [i, v] : objective_.terms()) c[i] += v;
        return c;
    }

    void add_block(ConeKind kind, std::span<const LinExpr> rows, std::string label = {})
    {
        ConeBlock b;
        b.kind = kind;
        b.dim = static_cast<int>(rows.size());
        b.offset.resize(b.dim);
        b.label = std::move(label);
        for (int r = 0; r < b.dim; ++r)
        {
            LinExpr e = rows[static_cast<size_t>(r)];
            e.compact();
            check_expr(e);
            for (const auto& [i, v] : e.terms()) b.coeffs.emplace_back(r, i, v);
            b.offset[r] = e.constant();
        }
        check_block(b);
        blocks_.push_back(std::move(b));
    }

    void add_block(ConeBlock b)
    {
        check_block(b);
        for (const auto& t : b.coeffs)
            if (t.col() < 0 || t.col() >= num_vars() || t.row() < 0 || t.row() >= b.dim)
                throw std::invalid_argument("ConicProgram: block entry out of range");
        blocks_.push_back(std::move(b));
    }

    const std::vector<ConeBlock>& blocks() const { return blocks_; }

    int num_rows() const
    {
        int m = 0;
        for (const auto& b : blocks_) m += b.dim;
        return m;
    }

    Eigen::VectorXd block_value(size_t j, const Eigen::VectorXd& x) const
    {
        const ConeBlock& b = blocks_.at(j);
        Eigen::VectorXd v = b.offset;
        for (const auto& t : b.coeffs) v[t.row()] += t.value() * x[t.col()];
        return v;
    }

    double objective_value(const Eigen::VectorXd& x) const { return objective_.evaluate(x); }

  private:
    void check_expr(const LinExpr& e) const
    {
        if (e.max_index() >= num_vars()) throw std::invalid_argument("ConicProgram: expression references unknown variable");
        for (const auto& [i, v] : e.terms())
            if (i < 0 || !std::isfinite(v)) throw std::invalid_argument("ConicProgram: bad coefficient");
        if (!std::isfinite(e.constant())) throw std::invalid_argument("ConicProgram: non-finite constant");
    }

    static void check_block(const ConeBlock& b)
    {
        if (b.offset.size() != b.dim) throw std::invalid_argument("ConicProgram: offset size does not match cone dimension");
        if (b.dim < 1) throw std::invalid_argument("ConicProgram: empty block");
        if (b.kind == ConeKind::RotatedSecondOrder && b.dim < 2)
            throw std::invalid_argument("ConicProgram: rotated cone needs dimension >= 2");
    }

    std::vector<std::string> names_;
    LinExpr objective_;
    std::vector<ConeBlock> blocks_;
};

struct Residuals
{
    std::vector<double> block; // distance of each block value to its cone
    double objective = 0.0;

    double max() const
    {
        double m = 0.0;
        for (double r : block) m = std::max(m, r);
        return m;
    }
};

inline Residuals residuals(const ConicProgram& program, const Eigen::VectorXd& x)
{
    if (x.size() != program.num_vars()) throw std::invalid_argument("residuals: point has wrong length");
    Residuals r;
    r.block.reserve(program.blocks().size());
    for (size_t j = 0; j < program.blocks().size(); ++j)
        r.block.push_back(cone_distance(program.blocks()[j].kind, program.block_value(j, x)));
    r.objective = program.objective_value(x);
    return r;
}

} // namespace risbf::conic
