#pragma once

#include "volterra_h2/dense_eval.hpp"
#include "volterra_h2/h2_eval.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace volterra_h2 {

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

template <class Evaluator>
void record_counters(const Evaluator& eval, RunStats* stats) {
    if (stats == nullptr) return;
    stats->peak_buffers = eval.peak_buffers();
    stats->block_multiplies = eval.block_multiplies();
}

}  // namespace detail

/// u(t) = g0(t) + int_0^t k(t, s) f(s, u(s)) ds with u(t) in R^dim.
struct VieProblem {
    Kernel kernel = kernels::one();
    int dim = 1;
    std::function<Vector(double t, const Vector& u)> rhs;
    std::function<Matrix(double t, const Vector& u)> rhs_jacobian;  // d f / d u, dim x dim
    std::function<Vector(double t)> source;                          // g0
    double T = 1.0;
    double newton_tol = 1e-12;
    int newton_max_iter = 25;
};

/// Raised when the per-step Newton iteration does not converge.
class NewtonError : public std::runtime_error {
public:
    NewtonError(std::int64_t step, double residual)
        : std::runtime_error("Newton iteration failed at step " + std::to_string(step) +
                             ", residual " + std::to_string(residual)),
          step_(step),
          residual_(residual) {}
    [[nodiscard]] std::int64_t step() const { return step_; }
    [[nodiscard]] double residual() const { return residual_; }

private:
    std::int64_t step_;
    double residual_;
};

/// Stage values of a solve: block m holds u at the collocation times of cell m.
struct VieSolution {
    double h = 0.0;
    std::vector<Matrix> stages;                      // stages x dim per step
    std::vector<int> newton_iterations;              // per step
    std::vector<std::vector<double>> residual_log;   // per step, if requested

    /// u at the grid point t^m = m h (last collocation node, m >= 1).
    [[nodiscard]] Vector at_grid(std::size_t m) const {
        return stages.at(m - 1).row(stages.at(m - 1).rows() - 1).transpose();
    }
};

/// Largest relative deviation between rhs_jacobian and a central difference
/// quotient of rhs at `samples` random points in [0, T] x [-scale, scale]^dim.
[[nodiscard]] inline double check_jacobian(const VieProblem& problem, int samples = 20,
                                           double scale = 1.0, unsigned seed = 7) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> time(0.0, problem.T);
    std::uniform_real_distribution<double> value(-scale, scale);
    double worst = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double t = time(rng);
        Vector u(problem.dim);
        for (int i = 0; i < problem.dim; ++i) u(i) = value(rng);
        const Matrix J = problem.rhs_jacobian(t, u);
        Matrix fd(problem.dim, problem.dim);
        for (int i = 0; i < problem.dim; ++i) {
            const double eps = 1e-6 * std::max(1.0, std::abs(u(i)));
            Vector up = u;
            Vector down = u;
            up(i) += eps;
            down(i) -= eps;
            fd.col(i) = (problem.rhs(t, up) - problem.rhs(t, down)) / (2.0 * eps);
        }
        const double denom = std::max(J.cwiseAbs().maxCoeff(), 1e-12);
        worst = std::max(worst, (J - fd).cwiseAbs().maxCoeff() / denom);
    }
    return worst;
}

/// Collocation solve of a Volterra integral equation, one Newton solve per step
/// on U = g0 + history + K^{m,m} f(t, U) with the previous stage values as
/// starting guess. `Evaluator` is H2Evaluator or DenseEvaluator.
template <class Evaluator = H2Evaluator>
[[nodiscard]] VieSolution solve_vie(const VieProblem& problem, EvaluatorOptions options,
                                    bool log_residuals = false, RunStats* stats = nullptr) {
    if (!problem.rhs || !problem.rhs_jacobian || !problem.source) {
        throw std::invalid_argument("solve_vie: rhs, rhs_jacobian and source are required");
    }
    const double steps_real = problem.T / options.h;
    const auto N = static_cast<std::int64_t>(std::llround(steps_real));
    if (N < 1 || std::abs(steps_real - static_cast<double>(N)) > 1e-9 * steps_real) {
        throw std::invalid_argument("solve_vie: h must divide T");
    }
    options.dim = problem.dim;
    if (!options.horizon_hint) options.horizon_hint = problem.T;
    auto clock = std::chrono::steady_clock::now();
    Evaluator eval(problem.kernel, options);
    if (stats) stats->setup_ms = detail::elapsed_ms(clock);
    clock = std::chrono::steady_clock::now();
    const int s = options.stages;
    const int d = problem.dim;
    const Eigen::Index size = static_cast<Eigen::Index>(s) * d;

    VieSolution out;
    out.h = options.h;
    out.stages.reserve(static_cast<std::size_t>(N));
    Matrix U(s, d);
    for (int j = 0; j < s; ++j) U.row(j) = problem.source(0.0).transpose();

    auto evaluate_rhs = [&](const std::vector<double>& t, const Matrix& values) {
        Matrix F(s, d);
        for (int j = 0; j < s; ++j) {
            F.row(j) = problem.rhs(t[static_cast<std::size_t>(j)], values.row(j).transpose()).transpose();
        }
        return F;
    };

    for (std::int64_t m = 1; m <= N; ++m) {
        const std::vector<double> t = eval.next_times();
        const Matrix base = [&] {
            Matrix b = eval.history_part();
            for (int j = 0; j < s; ++j) b.row(j) += problem.source(t[static_cast<std::size_t>(j)]).transpose();
            return b;
        }();
        const Matrix& K = eval.self_coupling();

        std::vector<double> log;
        int iterations = 0;
        Matrix F = evaluate_rhs(t, U);
        Matrix residual = U - base - K * F;
        double res_norm = residual.cwiseAbs().maxCoeff();
        if (log_residuals) log.push_back(res_norm);
        while (res_norm > problem.newton_tol * std::max(1.0, U.cwiseAbs().maxCoeff())) {
            if (iterations == problem.newton_max_iter || !std::isfinite(res_norm)) {
                throw NewtonError(m, res_norm);
            }
            // Jacobian of vec(U) -> vec(residual), unknowns ordered (stage, component).
            Matrix J = Matrix::Identity(size, size);
            for (int l = 0; l < s; ++l) {
                const Matrix Jf = problem.rhs_jacobian(t[static_cast<std::size_t>(l)], U.row(l).transpose());
                for (int j = 0; j < s; ++j) {
                    J.block(static_cast<Eigen::Index>(j) * d, static_cast<Eigen::Index>(l) * d, d, d) -= K(j, l) * Jf;
                }
            }
            Vector r(size);
            for (int j = 0; j < s; ++j) r.segment(static_cast<Eigen::Index>(j) * d, d) = residual.row(j).transpose();
            const Vector delta = J.partialPivLu().solve(r);
            for (int j = 0; j < s; ++j) U.row(j) -= delta.segment(static_cast<Eigen::Index>(j) * d, d).transpose();
            ++iterations;
            F = evaluate_rhs(t, U);
            residual = U - base - K * F;
            res_norm = residual.cwiseAbs().maxCoeff();
            if (log_residuals) log.push_back(res_norm);
        }
        eval.commit(F);
        out.stages.push_back(U);
        out.newton_iterations.push_back(iterations);
        if (log_residuals) out.residual_log.push_back(std::move(log));
    }
    if (stats) stats->run_ms = detail::elapsed_ms(clock);
    detail::record_counters(eval, stats);
    return out;
}

/// Result of a direct evaluation: y at the grid points t^1..t^N.
struct GridTrajectory {
    std::vector<double> times;
    std::vector<Vector> values;
};

/// y(t^m) = additive(t^m) + int_0^{t^m} k(t^m, s) forcing(s) ds, streamed over
/// m = 1..T/h. The integral is the collocation value at the last node.
template <class Evaluator = H2Evaluator>
[[nodiscard]] GridTrajectory variation_of_constants(const Kernel& kernel, const DataSampler& forcing,
                                                    const DataSampler& additive, EvaluatorOptions options,
                                                    double T, RunStats* stats = nullptr) {
    const auto N = static_cast<std::int64_t>(std::llround(T / options.h));
    if (N < 1) throw std::invalid_argument("variation_of_constants: T / h must be >= 1");
    if (!options.horizon_hint) options.horizon_hint = T;
    auto clock = std::chrono::steady_clock::now();
    Evaluator eval(kernel, options);
    if (stats) stats->setup_ms = detail::elapsed_ms(clock);
    clock = std::chrono::steady_clock::now();
    GridTrajectory out;
    out.times.reserve(static_cast<std::size_t>(N));
    out.values.reserve(static_cast<std::size_t>(N));
    for (std::int64_t m = 1; m <= N; ++m) {
        const Matrix y = eval.step(sample_block(forcing, eval.next_times(), options.dim));
        const double t = static_cast<double>(m) * options.h;
        out.times.push_back(t);
        out.values.push_back(additive(t) + y.row(y.rows() - 1).transpose());
    }
    if (stats) stats->run_ms = detail::elapsed_ms(clock);
    detail::record_counters(eval, stats);
    return out;
}

/// Right-hand side of an ODE y' = F(t, y) together with dF/dy.
struct OdeSystem {
    std::function<Vector(double t, const Vector& y)> rhs;
    std::function<Matrix(double t, const Vector& y)> jacobian;
};

/// Fixed-step Radau IIA integration of y' = F(t, y), y(0) = y0, with N steps.
/// Returns y at t^0..t^N.
[[nodiscard]] inline std::vector<Vector> reference_ode_radau(const OdeSystem& ode, const Vector& y0,
                                                             double T, std::int64_t N, int stages = 3) {
    if (N < 1 || !(T > 0.0)) throw std::invalid_argument("reference_ode_radau: need N >= 1, T > 0");
    const double h = T / static_cast<double>(N);
    const BasisTables tab = build_tables(stages, 0, h);
    const Matrix& A = tab.runge_kutta_A;
    const Eigen::Index d = y0.size();
    const Eigen::Index size = stages * d;
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(N) + 1);
    out.push_back(y0);
    Vector y = y0;
    Matrix Y(stages, d);
    for (std::int64_t n = 0; n < N; ++n) {
        const double t0 = static_cast<double>(n) * h;
        for (int j = 0; j < stages; ++j) Y.row(j) = y.transpose();
        bool converged = false;
        double res_norm = 0.0;
        for (int it = 0; it < 50; ++it) {
            Matrix F(stages, d);
            std::vector<Matrix> Jf(static_cast<std::size_t>(stages));
            for (int j = 0; j < stages; ++j) {
                const double t = t0 + tab.collocation.node(j) * h;
                F.row(j) = ode.rhs(t, Y.row(j).transpose()).transpose();
                Jf[static_cast<std::size_t>(j)] = ode.jacobian(t, Y.row(j).transpose());
            }
            Matrix residual = Y - (h * A * F);
            for (int j = 0; j < stages; ++j) residual.row(j) -= y.transpose();
            res_norm = residual.cwiseAbs().maxCoeff();
            if (res_norm <= 1e-14 * std::max(1.0, Y.cwiseAbs().maxCoeff())) {
                converged = true;
                break;
            }
            Matrix J = Matrix::Identity(size, size);
            for (int j = 0; j < stages; ++j)
                for (int l = 0; l < stages; ++l)
                    J.block(j * d, l * d, d, d) -= h * A(j, l) * Jf[static_cast<std::size_t>(l)];
            Vector r(size);
            for (int j = 0; j < stages; ++j) r.segment(j * d, d) = residual.row(j).transpose();
            const Vector delta = J.partialPivLu().solve(r);
            for (int j = 0; j < stages; ++j) Y.row(j) -= delta.segment(j * d, d).transpose();
        }
        if (!converged && res_norm > 1e-10 * std::max(1.0, Y.cwiseAbs().maxCoeff())) {
            throw NewtonError(n + 1, res_norm);
        }
        y = Y.row(stages - 1).transpose();  // stiffly accurate: last stage is y_{n+1}
        out.push_back(y);
    }
    return out;
}

}  // namespace volterra_h2
