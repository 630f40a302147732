#include "volterra_h2/basis.hpp"
#include "volterra_h2/kernel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace volterra_h2 {
namespace {

Kernel power_transfer_only(double alpha, int R) {
    return Kernel::transfer([alpha](Complex z) { return std::pow(z, -alpha); },
                            SectorInfo{0.0, std::numbers::pi, 1.0, alpha}, R);
}

TEST(Kernel, KindsAndDefaults) {
    EXPECT_TRUE(kernels::one().is_convolution());
    EXPECT_FALSE(kernels::one().is_transfer());
    EXPECT_FALSE(kernels::gauss_voc().is_convolution());
    const auto p = kernels::difference_power(0.5, 15);
    EXPECT_TRUE(p.is_transfer());
    EXPECT_TRUE(p.has_time_domain());
    EXPECT_EQ(p.nearfield_rule(), NearfieldRule::convolution_quadrature);
    EXPECT_EQ(kernels::one().nearfield_rule(), NearfieldRule::quadrature);
    EXPECT_DOUBLE_EQ(*p.singular_exponent(), -0.5);
    EXPECT_THROW(kernels::one().with_nearfield_rule(NearfieldRule::convolution_quadrature), KernelError);
    EXPECT_THROW((void)Kernel::transfer([](Complex z) { return 1.0 / z; }, SectorInfo{}, 0),
                 std::invalid_argument);
    EXPECT_THROW((void)kernels::difference_power(0.0, 15), std::invalid_argument);
}

TEST(Kernel, TransferValuesMatchClosedForm) {
    const auto k = power_transfer_only(0.5, 30);
    for (double tau : {0.01, 0.3, 2.0}) {
        EXPECT_NEAR(k(1.0 + tau, 1.0), 1.0 / std::sqrt(std::numbers::pi * tau), 1e-8 / std::sqrt(tau));
    }
    EXPECT_THROW((void)k(1.0, 1.0), KernelError);
}

TEST(Kernel, SampleUsesOneContourPerBlock) {
    const auto k = power_transfer_only(2.0 / 3.0, 30);
    const std::vector<double> t{5.0, 5.5, 6.0};
    const std::vector<double> s{0.5, 1.0, 2.0};
    const Matrix values = k.sample(t, s);
    const double inv_gamma = 1.0 / std::tgamma(2.0 / 3.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            EXPECT_NEAR(values(i, j), std::pow(t[i] - s[j], -1.0 / 3.0) * inv_gamma, 1e-9);
    const std::vector<double> overlap{0.5};
    EXPECT_THROW((void)k.sample(overlap, s), KernelError);
}

TEST(Kernel, ValidateTransferChecksSectorAndBound) {
    EXPECT_NO_THROW(validate_transfer(kernels::difference_power(0.5, 15), 0.01, 10.0));
    const auto narrow = Kernel::transfer([](Complex z) { return 1.0 / z; },
                                         SectorInfo{0.0, std::numbers::pi / 8.0, 1.0, 1.0}, 15);
    EXPECT_THROW(validate_transfer(narrow, 0.01, 10.0), KernelError);
    const auto loose = Kernel::transfer([](Complex z) { return 1.0 / z; },
                                        SectorInfo{0.0, std::numbers::pi, 1e-3, 1.0}, 15);
    EXPECT_THROW(validate_transfer(loose, 0.01, 10.0), KernelError);
    EXPECT_NO_THROW(validate_transfer(kernels::one(), 0.01, 10.0));
}

TEST(FarfieldBlock, ValuesAtNodePairs) {
    const auto tables = build_tables(2, 4, 0.1, 2);
    const auto k = kernels::gauss_voc();
    const LevelIndex row{2, 5};
    const LevelIndex col{2, 2};
    const double base = 0.2;
    const auto block = farfield_block_coeffs(k, row, col, tables, base);
    EXPECT_EQ(block.offset, 3);
    const auto t = interval_nodes(tables.kernel, row, base);
    const auto s = interval_nodes(tables.kernel, col, base);
    EXPECT_NEAR(t.front(), row.begin(base), 1e-15);
    EXPECT_NEAR(t.back(), row.end(base), 1e-15);
    for (int i = 0; i <= 4; ++i)
        for (int j = 0; j <= 4; ++j) EXPECT_DOUBLE_EQ(block.values(i, j), k(t[i], s[j]));
    EXPECT_THROW((void)farfield_block_coeffs(k, LevelIndex{2, 3}, LevelIndex{2, 2}, tables, base), KernelError);
    EXPECT_THROW((void)farfield_block_coeffs(k, LevelIndex{2, 5}, LevelIndex{1, 2}, tables, base), KernelError);
}

TEST(Nearfield, ConstantKernelOneStage) {
    const double h = 0.125;
    const auto tables = build_tables(1, 3, h);
    const auto pair = nearfield_matrices(kernels::one(), tables, 4);
    EXPECT_NEAR(pair.current(0, 0), h, 1e-15);
    EXPECT_NEAR(pair.previous(0, 0), h, 1e-15);
    EXPECT_EQ(nearfield_matrices(kernels::one(), tables, 1).previous(0, 0), 0.0);
    EXPECT_THROW((void)nearfield_matrices(kernels::one(), tables, 0), std::invalid_argument);
}

TEST(Nearfield, ConstantKernelIsCollocationIntegration) {
    const double h = 0.2;
    const auto tables = build_tables(3, 3, h);
    const auto pair = nearfield_matrices(kernels::one(), tables, 2);
    EXPECT_TRUE(pair.current.isApprox(h * tables.runge_kutta_A, 1e-13));
    const Matrix expected = h * Vector::Ones(3) * tables.runge_kutta_b.transpose();
    EXPECT_TRUE(pair.previous.isApprox(expected, 1e-13));
}

TEST(Nearfield, WeaklySingularKernel) {
    const double h = 0.01;
    const auto tables = build_tables(1, 3, h);
    const auto pair = nearfield_matrices(kernels::difference_power_time(0.5), tables, 3);
    EXPECT_NEAR(pair.current(0, 0), 2.0 * std::sqrt(h / std::numbers::pi), 1e-12);
    // int_h^{2h} s^{-1/2} / Gamma(1/2) ds
    EXPECT_NEAR(pair.previous(0, 0), 2.0 * (std::sqrt(2.0 * h) - std::sqrt(h)) / std::sqrt(std::numbers::pi),
                1e-12);
}

TEST(Nearfield, ConvolutionQuadratureOfIntegrator) {
    const double h = 0.1;
    const auto tables = build_tables(2, 3, h);
    const auto pair = nearfield_matrices(kernels::one_transfer(15), tables, 2);
    EXPECT_TRUE(pair.current.isApprox(h * tables.runge_kutta_A, 1e-12));
    const Matrix expected = h * Vector::Ones(2) * tables.runge_kutta_b.transpose();
    EXPECT_TRUE(pair.previous.isApprox(expected, 1e-12));
}

TEST(RadauCqWeights, IntegratorWeights) {
    const double h = 0.05;
    const auto tables = build_tables(3, 3, h);
    const auto W = radau_cq_weights(kernels::one_transfer(15), tables, 12);
    ASSERT_EQ(W.size(), 13u);
    EXPECT_LT((W[0] - h * tables.runge_kutta_A).cwiseAbs().maxCoeff(), 1e-12);
    const Matrix tail = h * Vector::Ones(3) * tables.runge_kutta_b.transpose();
    for (std::size_t j = 1; j < W.size(); ++j) EXPECT_LT((W[j] - tail).cwiseAbs().maxCoeff(), 1e-12) << j;
}

TEST(RadauCqWeights, FirstTwoMatchTwoStepCompanion) {
    const auto tables = build_tables(2, 3, 0.02);
    const auto k = kernels::difference_power(0.5, 15);
    const auto W = radau_cq_weights(k, tables, 4);
    const auto pair = nearfield_matrices(k, tables, 5);
    EXPECT_LT((W[0] - pair.current).cwiseAbs().maxCoeff(), 1e-11);
    EXPECT_LT((W[1] - pair.previous).cwiseAbs().maxCoeff(), 1e-11);
    EXPECT_THROW((void)radau_cq_weights(kernels::one(), tables, 4), KernelError);
}

TEST(RadauCqWeights, OneStageIsBackwardEuler) {
    const double h = 0.03;
    const auto tables = build_tables(1, 2, h);
    const auto k = kernels::difference_power(0.5, 15);
    const auto W = radau_cq_weights(k, tables, 20);
    const auto euler = cq_weights_euler(k.transfer_function(), h, 20);
    for (std::size_t j = 0; j <= 20; ++j) EXPECT_NEAR(W[j](0, 0), euler[j], 1e-11) << j;
}

}  // namespace
}  // namespace volterra_h2
