// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <risbf/conic/cbf.hpp>
#include <risbf/conic/solver.hpp>

#include <random>
#include <sstream>

using namespace risbf;
using namespace risbf::conic;
using Catch::Approx;

namespace {

// max r  s.t.  b_i - a_i^T x >= r ||a_i||, written as SOC blocks [b_i - a_i^T x; r a_i].
ConicProgram chebyshev_program(const std::vector<Eigen::Vector2d>& a, const std::vector<double>& b)
{
    ConicProgram p;
    const int x0 = p.add_variable("x0"), x1 = p.add_variable("x1"), r = p.add_variable("r");
    for (size_t i = 0; i < a.size(); ++i)
    {
        std::vector<LinExpr> rows(3);
        rows[0] = LinExpr(b[i]) - a[i][0] * LinExpr::var(x0) - a[i][1] * LinExpr::var(x1);
        rows[1] = a[i][0] * LinExpr::var(r);
        rows[2] = a[i][1] * LinExpr::var(r);
        p.add_block(ConeKind::SecondOrder, rows, "face" + std::to_string(i));
    }
    p.set_objective(LinExpr::var(r));
    return p;
}

double inscribed_radius(const std::vector<Eigen::Vector2d>& a, const std::vector<double>& b, double x, double y)
{
    double r = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < a.size(); ++i) r = std::min(r, (b[i] - a[i][0] * x - a[i][1] * y) / a[i].norm());
    return r;
}

// Grid search with successive zoom; the radius function is concave so the zoom keeps the maximizer.
double grid_chebyshev(const std::vector<Eigen::Vector2d>& a, const std::vector<double>& b)
{
    double cx = 0.0, cy = 0.0, half = 4.0, best = -1e300;
    for (int level = 0; level < 30; ++level)
    {
        const int n = 40;
        double bx = cx, by = cy;
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n; ++j)
            {
                const double x = cx - half + 2.0 * half * i / n, y = cy - half + 2.0 * half * j / n;
                const double r = inscribed_radius(a, b, x, y);
                if (r > best) best = r, bx = x, by = y;
            }
        cx = bx, cy = by;
        half *= 0.25;
    }
    return best;
}

} // namespace

TEST_CASE("lp_single_bound", "[conic]")
{
    ConicProgram p;
    const int x = p.add_variable("x");
    const LinExpr row = LinExpr::var(x) - 3.0;
    p.add_block(ConeKind::NonNegative, std::span(&row, 1));
    p.set_objective(-LinExpr::var(x));
    const SolveResult r = solve(p);
    REQUIRE(r.status == Status::Optimal);
    CHECK(r.primal[0] == Approx(3.0).margin(1e-7));
    CHECK(r.objective == Approx(-3.0).margin(1e-7));
}

TEST_CASE("lp_box_corner", "[conic]")
{
    ConicProgram p;
    const int x = p.add_variable(), y = p.add_variable();
    const std::vector<LinExpr> rows{1.0 - LinExpr::var(x), 2.0 - LinExpr::var(y), LinExpr::var(x), LinExpr::var(y)};
    p.add_block(ConeKind::NonNegative, rows);
    p.set_objective(LinExpr::var(x) + LinExpr::var(y));
    const SolveResult r = solve(p);
    REQUIRE(r.status == Status::Optimal);
    CHECK(r.primal[0] == Approx(1.0).margin(1e-6));
    CHECK(r.primal[1] == Approx(2.0).margin(1e-6));
    CHECK(r.gap <= 1e-8);
    CHECK(r.objective <= r.dual_objective + 1e-8);
}

TEST_CASE("soc_projection_matches_closed_form", "[conic]")
{
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 20; ++trial)
    {
        const int d = 2 + trial % 5;
        Eigen::VectorXd v(d);
        for (int i = 0; i < d; ++i) v[i] = 3.0 * nd(rng);
        if (trial == 0) v.setZero(), v[d - 1] = 2.0;

        // max -t  s.t.  ||p - v|| <= t,  p in SOC
        ConicProgram prog;
        std::vector<int> p(d);
        for (int i = 0; i < d; ++i) p[i] = prog.add_variable("p" + std::to_string(i));
        const int t = prog.add_variable("t");
        std::vector<LinExpr> dist{LinExpr::var(t)}, cone;
        for (int i = 0; i < d; ++i)
        {
            dist.push_back(LinExpr::var(p[i]) - v[i]);
            cone.push_back(LinExpr::var(p[i]));
        }
        prog.add_block(ConeKind::SecondOrder, dist);
        prog.add_block(ConeKind::SecondOrder, cone);
        prog.set_objective(-LinExpr::var(t));
        const SolveResult r = solve(prog);
        REQUIRE(r.status == Status::Optimal);
        CHECK(r.gap <= 1e-8);
        const Eigen::VectorXd expect = project_soc(v);
        CHECK(std::abs(r.objective + (v - expect).norm()) <= 1e-6);

        // The minimizer itself is only square-root conditioned in the gap; tighten to compare points.
        Settings tight;
        tight.tol_gap = tight.tol_feas = 1e-13;
        const SolveResult rt = solve(prog, tight);
        CHECK((rt.primal.head(d) - expect).norm() <= 1e-6 * (1.0 + v.norm()));
    }
}

TEST_CASE("soc_projection_of_axis_point", "[conic]")
{
    // (0, ..., 0, 2) projects to (1, 0, ..., 0, 1).
    const Eigen::VectorXd v = (Eigen::VectorXd(3) << 0.0, 0.0, 2.0).finished();
    const Eigen::VectorXd p = project_soc(v);
    CHECK(p[0] == Approx(1.0));
    CHECK(p[2] == Approx(1.0));
}

TEST_CASE("chebyshev_center_matches_grid", "[conic]")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi), off(0.5, 2.0);
    for (int trial = 0; trial < 5; ++trial)
    {
        std::vector<Eigen::Vector2d> a;
        std::vector<double> b;
        for (int i = 0; i < 7; ++i)
        {
            const double t = ang(rng);
            const double scale = 0.5 + 0.2 * i;
            a.emplace_back(scale * std::cos(t), scale * std::sin(t));
            b.push_back(scale * off(rng));
        }
        // Box faces keep the polytope bounded.
        for (int i = 0; i < 4; ++i)
        {
            a.emplace_back(std::cos(i * std::numbers::pi / 2), std::sin(i * std::numbers::pi / 2));
            b.push_back(3.0);
        }
        const SolveResult r = solve(chebyshev_program(a, b));
        REQUIRE(r.status == Status::Optimal);
        CHECK(r.gap <= 1e-8);
        const double grid = grid_chebyshev(a, b);
        CHECK(std::abs(r.objective - grid) <= 1e-4);
        CHECK(std::abs(inscribed_radius(a, b, r.primal[0], r.primal[1]) - r.objective) <= 1e-6);
    }
}

TEST_CASE("rotated_cone_epigraph", "[conic]")
{
    // min t  s.t.  (x-2)^2 + (y+1)^2 <= t  written as a rotated cone [t; 0.5; x-2; y+1].
    ConicProgram p;
    const int x = p.add_variable(), y = p.add_variable(), t = p.add_variable();
    const std::vector<LinExpr> rows{LinExpr::var(t), LinExpr(0.5), LinExpr::var(x) - 2.0, LinExpr::var(y) + 1.0};
    p.add_block(ConeKind::RotatedSecondOrder, rows);
    const std::vector<LinExpr> lin{1.0 - LinExpr::var(x)};
    p.add_block(ConeKind::NonNegative, lin);
    p.set_objective(-LinExpr::var(t));
    const SolveResult r = solve(p);
    REQUIRE(r.status == Status::Optimal);
    CHECK(r.primal[0] == Approx(1.0).margin(1e-6));
    CHECK(r.primal[1] == Approx(-1.0).margin(1e-6));
    CHECK(r.primal[2] == Approx(1.0).margin(1e-6));
    const Residuals res = residuals(p, r.primal);
    CHECK(res.max() <= 1e-7);
}

TEST_CASE("infeasible_and_unbounded_detected", "[conic]")
{
    {
        ConicProgram p;
        const int x = p.add_variable();
        const std::vector<LinExpr> rows{LinExpr::var(x) - 2.0, 1.0 - LinExpr::var(x)};
        p.add_block(ConeKind::NonNegative, rows);
        p.set_objective(LinExpr::var(x));
        CHECK(solve(p).status == Status::PrimalInfeasible);
    }
    {
        ConicProgram p;
        const int x = p.add_variable();
        const std::vector<LinExpr> rows{LinExpr::var(x) - 2.0};
        p.add_block(ConeKind::NonNegative, rows);
        p.set_objective(LinExpr::var(x));
        CHECK(solve(p).status == Status::DualInfeasible);
    }
}

TEST_CASE("solve_is_deterministic", "[conic]")
{
    std::vector<Eigen::Vector2d> a{{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {1, 1}};
    std::vector<double> b{1, 1, 1, 1, 1.2};
    const ConicProgram p = chebyshev_program(a, b);
    const SolveResult r1 = solve(p), r2 = solve(p);
    CHECK(r1.iterations == r2.iterations);
    CHECK(r1.primal == r2.primal);
    CHECK(r1.dual == r2.dual);
}

TEST_CASE("scaling_robustness_on_toy_suite", "[conic]")
{
    std::vector<Eigen::Vector2d> a{{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {1, 1}, {-2, 1}};
    std::vector<double> b{1, 1, 1, 1, 1.2, 1.5};
    const double base = solve(chebyshev_program(a, b)).objective;
    for (double s : {1e-3, 1e3})
    {
        std::vector<double> bs(b);
        for (auto& v : bs) v *= s;
        const SolveResult r = solve(chebyshev_program(a, bs));
        REQUIRE(r.status == Status::Optimal);
        CHECK(std::abs(r.objective / s - base) <= 1e-5 * std::abs(base));
    }
}

TEST_CASE("residuals_flag_violated_block", "[conic]")
{
    ConicProgram p;
    const int x = p.add_variable(), y = p.add_variable();
    const std::vector<LinExpr> soc{LinExpr(1.0), LinExpr::var(x), LinExpr::var(y)};
    const std::vector<LinExpr> lp{LinExpr::var(x)};
    p.add_block(ConeKind::SecondOrder, soc);
    p.add_block(ConeKind::NonNegative, lp);
    Eigen::Vector2d inside(0.3, -0.2), outside(-0.1, 2.0);
    const Residuals ri = residuals(p, inside);
    CHECK(ri.block[0] == 0.0);
    CHECK(ri.block[1] == 0.0);
    const Residuals ro = residuals(p, Eigen::Vector2d(0.5, 2.0));
    CHECK(ro.block[0] > 0.0);
    CHECK(ro.block[1] == 0.0);
    const Residuals rn = residuals(p, Eigen::Vector2d(-0.1, 0.0));
    CHECK(rn.block[0] == 0.0);
    CHECK(rn.block[1] > 0.0);
    (void)outside;
}

TEST_CASE("rejects_malformed_blocks", "[conic]")
{
    ConicProgram p;
    p.add_variable();
    const std::vector<LinExpr> bad{LinExpr::var(3)};
    CHECK_THROWS_AS(p.add_block(ConeKind::NonNegative, bad), std::invalid_argument);
    const std::vector<LinExpr> one{LinExpr::var(0)};
    CHECK_THROWS_AS(p.add_block(ConeKind::RotatedSecondOrder, one), std::invalid_argument);
}

TEST_CASE("cbf_roundtrip", "[conic]")
{
    std::vector<Eigen::Vector2d> a{{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {1, 1}};
    std::vector<double> b{1, 1, 1, 1, 1.2};
    ConicProgram p = chebyshev_program(a, b);
    const std::vector<LinExpr> rot{LinExpr::var(2) + 1.0, LinExpr(0.5), LinExpr::var(0)};
    p.add_block(ConeKind::RotatedSecondOrder, rot);
    std::stringstream ss;
    write_cbf(p, ss);
    const ConicProgram q = read_cbf(ss);
    REQUIRE(q.num_vars() == p.num_vars());
    REQUIRE(q.blocks().size() == p.blocks().size());
    const SolveResult r1 = solve(p), r2 = solve(q);
    CHECK(r1.objective == Approx(r2.objective).margin(1e-9));
}
