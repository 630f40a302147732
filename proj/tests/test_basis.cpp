#include "volterra_h2/basis.hpp"
#include "volterra_h2/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace volterra_h2 {
namespace {

TEST(RadauNodes, KnownValues) {
    EXPECT_EQ(radau_nodes(1), std::vector<double>{1.0});
    const auto two = radau_nodes(2);
    ASSERT_EQ(two.size(), 2u);
    EXPECT_NEAR(two[0], 1.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(two[1], 1.0);
    const auto three = radau_nodes(3);
    ASSERT_EQ(three.size(), 3u);
    EXPECT_NEAR(three[0], (4.0 - std::sqrt(6.0)) / 10.0, 1e-15);
    EXPECT_NEAR(three[1], (4.0 + std::sqrt(6.0)) / 10.0, 1e-15);
    EXPECT_DOUBLE_EQ(three[2], 1.0);
}

TEST(ChebyshevNodes, EndpointsAndSymmetry) {
    EXPECT_EQ(chebyshev_nodes(0), std::vector<double>{0.5});
    for (int q : {1, 4, 7, 16}) {
        const auto x = chebyshev_nodes(q);
        ASSERT_EQ(x.size(), static_cast<std::size_t>(q + 1));
        EXPECT_EQ(x.front(), 0.0);
        EXPECT_EQ(x.back(), 1.0);
        for (int i = 0; i <= q; ++i) EXPECT_NEAR(x[i] + x[q - i], 1.0, 1e-15);
    }
}

TEST(Lagrange, KnownValue) {
    const std::vector<double> nodes{1.0 / 3.0, 1.0};
    EXPECT_NEAR(lagrange_eval(nodes, 0, 0.0), 1.5, 1e-15);
    EXPECT_NEAR(lagrange_eval(nodes, 1, 0.0), -0.5, 1e-15);
}

TEST(Lagrange, PartitionOfUnityAndCardinality) {
    const LagrangeBasis basis(chebyshev_nodes(12));
    for (std::size_t i = 0; i < basis.size(); ++i) {
        for (std::size_t j = 0; j < basis.size(); ++j) {
            EXPECT_EQ(basis.eval(i, basis.node(j)), i == j ? 1.0 : 0.0);
        }
    }
    for (double x : {0.01, 0.3, 0.77, 0.999}) EXPECT_NEAR(basis.eval_all(x).sum(), 1.0, 1e-14);
    EXPECT_THROW(LagrangeBasis(std::vector<double>{0.2, 0.2}), std::invalid_argument);
}

TEST(Lagrange, ReproducesPolynomials) {
    const LagrangeBasis basis(chebyshev_nodes(6));
    auto f = [](double x) { return 1.0 - 2.0 * x + 3.0 * std::pow(x, 5); };
    for (double x : {0.05, 0.41, 0.93}) {
        double sum = 0.0;
        for (std::size_t i = 0; i < basis.size(); ++i) sum += f(basis.node(i)) * basis.eval(i, x);
        EXPECT_NEAR(sum, f(x), 1e-13);
    }
}

TEST(BuildTables, ShapesAndAggregation) {
    const auto t = build_tables(2, 5, 0.1, 4);
    EXPECT_EQ(t.P.rows(), 2);
    EXPECT_EQ(t.P.cols(), 6);
    EXPECT_EQ(t.Q.rows(), 6);
    EXPECT_EQ(t.Q.cols(), 2);
    ASSERT_EQ(t.P_sub.size(), 4u);
    ASSERT_EQ(t.Q_sub.size(), 4u);
    const auto one = build_tables(2, 5, 0.1, 1);
    EXPECT_TRUE(one.P_sub[0].isApprox(one.P));
    EXPECT_TRUE(one.Q_sub[0].isApprox(one.Q));
    EXPECT_THROW((void)build_tables(0, 5, 0.1), std::invalid_argument);
    EXPECT_THROW((void)build_tables(2, 5, 0.0), std::invalid_argument);
}

TEST(BuildTables, RungeKuttaTableauOfRadauIIA) {
    const auto t = build_tables(2, 3, 1.0);
    Matrix A(2, 2);
    A << 5.0 / 12.0, -1.0 / 12.0, 3.0 / 4.0, 1.0 / 4.0;
    EXPECT_TRUE(t.runge_kutta_A.isApprox(A, 1e-14));
    EXPECT_NEAR(t.runge_kutta_b(0), 0.75, 1e-15);
    EXPECT_NEAR(t.runge_kutta_b(1), 0.25, 1e-15);
}

TEST(BuildTables, TwoScaleConsistency) {
    // Values of a degree-q polynomial at the child nodes follow from the parent
    // node values through A1 and A2.
    const int q = 7;
    const auto t = build_tables(1, q, 1.0);
    auto f = [](double x) { return std::pow(x - 0.3, 7) + 2.0 * x * x; };
    Vector parent(q + 1);
    for (int i = 0; i <= q; ++i) parent(i) = f(t.kernel.node(i));
    const Vector left = t.A1.transpose() * parent;
    const Vector right = t.A2.transpose() * parent;
    for (int j = 0; j <= q; ++j) {
        EXPECT_NEAR(left(j), f(0.5 * t.kernel.node(j)), 1e-13);
        EXPECT_NEAR(right(j), f(0.5 * (1.0 + t.kernel.node(j))), 1e-13);
    }
}

TEST(BuildTables, ExactMomentsMatchIndependentQuadrature) {
    const double h = 0.2;
    const int n_min = 2;
    const auto t = build_tables(3, 4, h, n_min);
    const auto rule = gauss_legendre(20);
    for (int c = 0; c < n_min; ++c) {
        for (int k = 0; k <= 4; ++k) {
            for (int r = 0; r < 3; ++r) {
                double sum = 0.0;
                for (std::size_t g = 0; g < rule.size(); ++g) {
                    const double x = rule.nodes[g];
                    sum += rule.weights[g] * t.kernel.eval(k, (c + x) / n_min) * t.collocation.eval(r, x);
                }
                EXPECT_NEAR(t.Q_sub[c](k, r), h * sum, 1e-15);
            }
        }
    }
}

TEST(BuildTables, RungeKuttaMomentsUseRadauQuadrature) {
    const double h = 0.5;
    const auto t = build_tables(2, 3, h, 1, MomentRule::runge_kutta);
    for (int k = 0; k <= 3; ++k) {
        for (int r = 0; r < 2; ++r) {
            EXPECT_NEAR(t.Q(k, r), h * t.runge_kutta_b(r) * t.kernel.eval(k, t.collocation.node(r)), 1e-15);
        }
    }
}

}  // namespace
}  // namespace volterra_h2
