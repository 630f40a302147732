#include "volterra_h2/dense_eval.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace volterra_h2 {
namespace {

EvaluatorOptions options(double h, int stages, int q, int dim = 1, int n_min = 1) {
    EvaluatorOptions o;
    o.h = h;
    o.stages = stages;
    o.q = q;
    o.dim = dim;
    o.n_min = n_min;
    return o;
}

TEST(DenseEvaluator, ExactForPolynomialKernelAndData) {
    // int_0^t (t - s)^2 (1 + s) ds = t^3 / 3 + t^4 / 12
    const auto o = options(0.05, 2, 2);
    const auto y = dense_evaluate(kernels::difference_monomial(2), [](double t) { return Vector::Constant(1, 1.0 + t); },
                                  100, o);
    const auto nodes = radau_nodes(2);
    for (std::size_t m = 1; m <= y.size(); ++m) {
        for (int j = 0; j < 2; ++j) {
            const double t = (static_cast<double>(m) - 1.0 + nodes[j]) * o.h;
            EXPECT_NEAR(y[m - 1](j, 0), t * t * t / 3.0 + t * t * t * t / 12.0, 1e-12);
        }
    }
}

TEST(DenseEvaluator, NonConvolutionKernelConverges) {
    // int_0^t exp(s^2 - t^2) 2 s ds = 1 - exp(-t^2)
    // One collocation node: the data are piecewise constant, so the error is O(h).
    auto run = [](int N) {
        const auto o = options(1.0 / N, 1, 8);
        const auto y = dense_evaluate(kernels::gauss_voc(), [](double t) { return Vector::Constant(1, 2.0 * t); },
                                      N, o);
        return std::abs(y.back()(0, 0) - (1.0 - std::exp(-1.0)));
    };
    const double coarse = run(32);
    const double fine = run(64);
    EXPECT_LT(fine, 1e-2);
    EXPECT_NEAR(coarse / fine, 2.0, 0.2);
}

TEST(DenseEvaluator, VectorData) {
    const auto o = options(0.1, 1, 1, 2);
    DenseEvaluator eval(kernels::one(), o);
    Matrix f(1, 2);
    f << 1.0, -2.0;
    Matrix y;
    for (int m = 1; m <= 10; ++m) y = eval.step(f);
    EXPECT_NEAR(y(0, 0), 1.0, 1e-13);
    EXPECT_NEAR(y(0, 1), -2.0, 1e-13);
    EXPECT_EQ(eval.stored_moments(), 10);
}

TEST(DenseEvaluator, PhaseProtocol) {
    DenseEvaluator eval(kernels::one(), options(0.1, 2, 2));
    EXPECT_THROW(eval.commit(Matrix::Ones(2, 1)), PhaseError);
    EXPECT_THROW((void)eval.self_coupling(), PhaseError);
    eval.history_part();
    EXPECT_THROW(eval.history_part(), PhaseError);
    EXPECT_NO_THROW((void)eval.self_coupling());
    EXPECT_THROW(eval.commit(Matrix::Ones(3, 1)), std::invalid_argument);
    EXPECT_NO_THROW(eval.commit(Matrix::Ones(2, 1)));
    EXPECT_EQ(eval.steps(), 1);
}

TEST(DenseEvaluator, StepErrorCarriesStepIndex) {
    const auto bad = Kernel::general(
        [](double t, double) {
            if (t > 0.45) throw std::runtime_error("kernel undefined");
            return 1.0;
        },
        "bad");
    DenseEvaluator eval(bad, options(0.1, 1, 1));
    try {
        for (int m = 1; m <= 10; ++m) eval.step(Matrix::Ones(1, 1));
        FAIL() << "expected StepError";
    } catch (const StepError& e) {
        EXPECT_EQ(e.step(), 5);
    }
}

TEST(DenseEvaluator, RejectsBadOptions) {
    EXPECT_THROW(DenseEvaluator(kernels::one(), options(0.0, 1, 1)), std::invalid_argument);
    EXPECT_THROW(DenseEvaluator(kernels::one(), options(0.1, 0, 1)), std::invalid_argument);
    EXPECT_THROW(DenseEvaluator(kernels::one(), options(0.1, 1, 1, 1, 3)), std::invalid_argument);
}

}  // namespace
}  // namespace volterra_h2
