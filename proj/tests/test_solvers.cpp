#include "volterra_h2/solvers.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace volterra_h2 {
namespace {

EvaluatorOptions options(double h, int stages, int q, int n_min = 1) {
    EvaluatorOptions o;
    o.h = h;
    o.stages = stages;
    o.q = q;
    o.n_min = n_min;
    return o;
}

/// u = 1 - int_0^t u ds, so u = exp(-t).
VieProblem decay_problem(double T) {
    VieProblem p;
    p.kernel = kernels::one();
    p.T = T;
    p.rhs = [](double, const Vector& u) { return Vector(-u); };
    p.rhs_jacobian = [](double, const Vector&) { return Matrix::Constant(1, 1, -1.0); };
    p.source = [](double) { return Vector::Constant(1, 1.0); };
    return p;
}

TEST(SolveVie, LinearDecaySuperconverges) {
    for (int stages : {1, 2, 3}) {
        auto error = [&](int N) {
            const auto sol = solve_vie(decay_problem(2.0), options(2.0 / N, stages, 2, 4));
            return std::abs(sol.at_grid(static_cast<std::size_t>(N))(0) - std::exp(-2.0));
        };
        const double order = std::log2(error(16) / error(32));
        EXPECT_NEAR(order, 2.0 * stages - 1.0, 0.15) << "stages = " << stages;
    }
}

TEST(SolveVie, NonlinearRiccati) {
    // u = 1 + int_0^t u^2 ds, u = 1 / (1 - t)
    VieProblem p;
    p.kernel = kernels::one();
    p.T = 0.5;
    p.rhs = [](double, const Vector& u) { return Vector(u.array().square()); };
    p.rhs_jacobian = [](double, const Vector& u) { return Matrix::Constant(1, 1, 2.0 * u(0)); };
    p.source = [](double) { return Vector::Constant(1, 1.0); };
    EXPECT_LT(check_jacobian(p), 1e-7);
    const auto sol = solve_vie(p, options(0.5 / 64, 3, 2), true);
    EXPECT_NEAR(sol.at_grid(64)(0), 2.0, 1e-8);
    EXPECT_GT(sol.newton_iterations.front(), 0);
    ASSERT_EQ(sol.residual_log.size(), 64u);
    EXPECT_LE(sol.residual_log.back().back(), 1e-12 * 2.0);
}

TEST(SolveVie, SystemRotation) {
    // u' = (u2, -u1), u(0) = (1, 0): u = (cos t, -sin t)
    VieProblem p;
    p.kernel = kernels::one();
    p.dim = 2;
    p.T = 3.0;
    p.rhs = [](double, const Vector& u) { return Vector{{u(1), -u(0)}}; };
    p.rhs_jacobian = [](double, const Vector&) { return Matrix{{0.0, 1.0}, {-1.0, 0.0}}; };
    p.source = [](double) { return Vector{{1.0, 0.0}}; };
    const auto h2 = solve_vie(p, options(3.0 / 128, 2, 2, 2));
    const auto dense = solve_vie<DenseEvaluator>(p, options(3.0 / 128, 2, 2, 2));
    EXPECT_NEAR(h2.at_grid(128)(0), std::cos(3.0), 1e-5);
    EXPECT_NEAR(h2.at_grid(128)(1), -std::sin(3.0), 1e-5);
    EXPECT_LT((h2.at_grid(128) - dense.at_grid(128)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SolveVie, InputErrors) {
    auto p = decay_problem(1.0);
    EXPECT_THROW((void)solve_vie(p, options(0.3, 1, 1)), std::invalid_argument);
    auto missing = p;
    missing.rhs_jacobian = nullptr;
    EXPECT_THROW((void)solve_vie(missing, options(0.25, 1, 1)), std::invalid_argument);
    auto stalled = p;
    stalled.newton_max_iter = 0;
    EXPECT_THROW((void)solve_vie(stalled, options(0.25, 1, 1)), NewtonError);
}

TEST(CheckJacobian, DetectsWrongDerivative) {
    auto p = decay_problem(1.0);
    p.rhs_jacobian = [](double, const Vector&) { return Matrix::Constant(1, 1, 1.0); };
    EXPECT_GT(check_jacobian(p), 1.0);
}

TEST(VariationOfConstants, GaussianKernel) {
    // y' = -2 t y + 2 t, y(0) = 0: y = 1 - exp(-t^2)
    RunStats stats;
    const auto traj = variation_of_constants(
        kernels::gauss_voc(), [](double t) { return Vector::Constant(1, 2.0 * t); },
        [](double) { return Vector::Zero(1); }, options(1.0 / 128, 3, 10, 4), 2.0, &stats);
    ASSERT_EQ(traj.values.size(), 256u);
    for (std::size_t m = 0; m < traj.values.size(); m += 17) {
        const double t = traj.times[m];
        EXPECT_NEAR(traj.values[m](0), 1.0 - std::exp(-t * t), 1e-9);
    }
    EXPECT_GT(stats.block_multiplies, 0);
    EXPECT_GT(stats.peak_buffers, 0);
}

TEST(ReferenceOde, RadauOrderFive) {
    OdeSystem ode{[](double, const Vector& y) { return Vector(-y); },
                  [](double, const Vector&) { return Matrix::Constant(1, 1, -1.0); }};
    const Vector y0 = Vector::Constant(1, 1.0);
    auto error = [&](int N) { return std::abs(reference_ode_radau(ode, y0, 1.0, N).back()(0) - std::exp(-1.0)); };
    EXPECT_NEAR(std::log2(error(4) / error(8)), 5.0, 0.3);
    EXPECT_EQ(reference_ode_radau(ode, y0, 1.0, 4).size(), 5u);
    EXPECT_THROW((void)reference_ode_radau(ode, y0, 1.0, 0), std::invalid_argument);
}

}  // namespace
}  // namespace volterra_h2
