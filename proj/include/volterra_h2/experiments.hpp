#pragma once

#include "volterra_h2/dense_eval.hpp"
#include "volterra_h2/h2_eval.hpp"
#include "volterra_h2/solvers.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace volterra_h2 {

/// One row of a convergence or timing sweep.
struct ExperimentRecord {
    std::string example;
    int p = 0;  // collocation stages
    int q = 0;
    int n_min = 1;
    int R = 0;
    std::int64_t N = 0;
    double h = 0.0;
    double error = std::numeric_limits<double>::quiet_NaN();
    /// Error at t = T alone (not part of the CSV schema).
    double final_error = std::numeric_limits<double>::quiet_NaN();
    double order = std::numeric_limits<double>::quiet_NaN();  // against the previous row
    double setup_ms = 0.0;
    double run_ms = 0.0;
    std::int64_t peak_g_buffers = 0;
    std::int64_t block_multiplies = 0;
};

/// Rows of one sweep plus the optional fast-versus-dense comparison.
struct ExperimentResult {
    std::vector<ExperimentRecord> rows;
    std::optional<double> dense_deviation;
};

/// Common sweep parameters. Levels give N = 2^level steps over [0, T].
struct ExperimentConfig {
    int p = 2;
    int q = 8;
    int n_min = 16;
    int R = 15;
    int level_lo = 5;
    int level_hi = 10;
    double T = 1.0;
    int M = 200;
    bool dense_check = false;
    MomentRule rule = MomentRule::runge_kutta;
    NearfieldRule nearfield = NearfieldRule::convolution_quadrature;  // transfer kernels only
};

inline constexpr const char* csv_header =
    "example,p,q,nmin,R,N,h,error,order,setup_ms,run_ms,peak_g_buffers,block_multiplies";

inline void write_csv(std::ostream& out, const std::vector<ExperimentRecord>& rows,
                      bool header = true) {
    if (header) out << csv_header << '\n';
    auto num = [](double v) {
        if (std::isnan(v)) return std::string();
        std::ostringstream s;
        s.precision(10);
        s << v;
        return s.str();
    };
    for (const auto& r : rows) {
        out << r.example << ',' << r.p << ',' << r.q << ',' << r.n_min << ',' << r.R << ',' << r.N
            << ',' << num(r.h) << ',' << num(r.error) << ',' << num(r.order) << ','
            << num(r.setup_ms) << ',' << num(r.run_ms) << ',' << r.peak_g_buffers << ','
            << r.block_multiplies << '\n';
    }
}

/// Fills the `order` column with log(e_prev / e) / log(h_prev / h).
inline void fill_orders(std::vector<ExperimentRecord>& rows) {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& a = rows[i - 1];
        auto& b = rows[i];
        if (a.error > 0.0 && b.error > 0.0) {
            b.order = std::log(a.error / b.error) / std::log(a.h / b.h);
        }
    }
}

/// Least-squares slope of log(error) against log(h) over rows [first, last].
[[nodiscard]] inline double fitted_order(const std::vector<ExperimentRecord>& rows,
                                         std::size_t first, std::size_t last) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    double n = 0;
    for (std::size_t i = first; i <= last && i < rows.size(); ++i) {
        const double x = std::log(rows[i].h);
        const double y = std::log(rows[i].error);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        n += 1;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Least-squares slope of log(y) against log(x).
/// Least-squares order over the last `intervals` refinements before the error
/// stagnates. A refinement stagnates when its observed order drops below half
/// of the target; the fit ends at the row before the first such refinement.
[[nodiscard]] inline double order_before_stagnation(const std::vector<ExperimentRecord>& rows,
                                                    double target, std::size_t intervals = 2) {
    if (rows.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    std::size_t last = rows.size() - 1;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (!(rows[i].order >= 0.5 * target)) {
            last = i - 1;
            break;
        }
    }
    if (last == 0) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t first = last > intervals ? last - intervals : 0;
    return fitted_order(rows, first, last);
}

[[nodiscard]] inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace detail {

inline ExperimentRecord make_record(const std::string& example, const ExperimentConfig& c,
                                    std::int64_t N, const RunStats& stats, int R) {
    ExperimentRecord r;
    r.example = example;
    r.p = c.p;
    r.q = c.q;
    r.n_min = c.n_min;
    r.R = R;
    r.N = N;
    r.h = c.T / static_cast<double>(N);
    r.setup_ms = stats.setup_ms;
    r.run_ms = stats.run_ms;
    r.peak_g_buffers = stats.peak_buffers;
    r.block_multiplies = stats.block_multiplies;
    return r;
}

inline EvaluatorOptions options_for(const ExperimentConfig& c, std::int64_t N, int dim = 1) {
    EvaluatorOptions o;
    o.h = c.T / static_cast<double>(N);
    o.stages = c.p;
    o.q = c.q;
    o.dim = dim;
    o.n_min = c.n_min;
    o.horizon_hint = c.T;
    o.rule = c.rule;
    return o;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Example 1: y' = -2 t y + 5 cos(5 t), y(0) = 2, written as
// y(t) = 2 exp(-t^2) + int_0^t exp(s^2 - t^2) 5 cos(5 s) ds.

[[nodiscard]] inline OdeSystem example1_ode() {
    return {[](double t, const Vector& y) {
                Vector out(1);
                out(0) = -2.0 * t * y(0) + 5.0 * std::cos(5.0 * t);
                return out;
            },
            [](double t, const Vector&) { return Matrix::Constant(1, 1, -2.0 * t); }};
}

[[nodiscard]] inline DataSampler example1_forcing() {
    return [](double s) { return Vector::Constant(1, 5.0 * std::cos(5.0 * s)); };
}

[[nodiscard]] inline DataSampler example1_additive() {
    return [](double t) { return Vector::Constant(1, 2.0 * std::exp(-t * t)); };
}

/// Example 1 sweep. Errors are measured against a 3-stage Radau IIA ODE
/// solution on 2^16 steps (or 4x the finest grid), at the coarsest grid points.
[[nodiscard]] inline ExperimentResult run_example1(ExperimentConfig c) {
    const std::int64_t coarse = std::int64_t{1} << c.level_lo;
    const std::int64_t finest = std::int64_t{1} << c.level_hi;
    const std::int64_t n_ref = std::max<std::int64_t>(std::int64_t{1} << 16, 4 * finest);
    const auto reference = reference_ode_radau(example1_ode(), Vector::Constant(1, 2.0), c.T, n_ref, 3);
    const Kernel kernel = kernels::gauss_voc();

    ExperimentResult out;
    for (int level = c.level_lo; level <= c.level_hi; ++level) {
        const std::int64_t N = std::int64_t{1} << level;
        RunStats stats;
        const auto traj = variation_of_constants(kernel, example1_forcing(), example1_additive(),
                                                 detail::options_for(c, N), c.T, &stats);
        ExperimentRecord row = detail::make_record("example1", c, N, stats, 0);
        double err = 0.0;
        for (std::int64_t k = 1; k <= coarse; ++k) {
            const auto idx = static_cast<std::size_t>(k * (N / coarse));
            const auto ref = static_cast<std::size_t>(k * (n_ref / coarse));
            err = std::max(err, std::abs(traj.values[idx - 1](0) - reference[ref](0)));
        }
        row.error = err;
        out.rows.push_back(row);
        if (c.dense_check && level == std::min(c.level_hi, 10)) {
            const auto dense = variation_of_constants<DenseEvaluator>(
                kernel, example1_forcing(), example1_additive(), detail::options_for(c, N), c.T);
            double dev = 0.0;
            double scale = 0.0;
            for (std::size_t m = 0; m < dense.values.size(); ++m) {
                dev = std::max(dev, std::abs(dense.values[m](0) - traj.values[m](0)));
                scale = std::max(scale, std::abs(dense.values[m](0)));
            }
            out.dense_deviation = dev / scale;
        }
    }
    fill_orders(out.rows);
    return out;
}

// ---------------------------------------------------------------------------
// Example 2: u(t) = -int_0^t (u - sin s)^3 / sqrt(pi (t - s)) ds.

[[nodiscard]] inline VieProblem example2_problem(int R, double T,
                                                 NearfieldRule nearfield = NearfieldRule::convolution_quadrature) {
    VieProblem p;
    p.kernel = kernels::difference_power(0.5, R).with_nearfield_rule(nearfield);
    p.dim = 1;
    p.rhs = [](double t, const Vector& u) {
        const double d = u(0) - std::sin(t);
        return Vector::Constant(1, -d * d * d);
    };
    p.rhs_jacobian = [](double t, const Vector& u) {
        const double d = u(0) - std::sin(t);
        return Matrix::Constant(1, 1, -3.0 * d * d);
    };
    p.source = [](double) { return Vector::Zero(1); };
    p.T = T;
    return p;
}

/// Example 2 sweep. The error of the run with N steps is measured against the
/// run with 2N steps at the coarsest grid points; final_error holds the
/// difference at t = T.
[[nodiscard]] inline ExperimentResult run_example2(ExperimentConfig c) {
    const std::int64_t coarse = std::int64_t{1} << c.level_lo;
    const VieProblem problem = example2_problem(c.R, c.T, c.nearfield);
    ExperimentResult out;
    std::vector<Vector> previous;  // grid values of the previous (coarser) run
    std::optional<ExperimentRecord> pending;
    for (int level = c.level_lo; level <= c.level_hi + 1; ++level) {
        const std::int64_t N = std::int64_t{1} << level;
        RunStats stats;
        const VieSolution sol = solve_vie(problem, detail::options_for(c, N), false, &stats);
        std::vector<Vector> grid;
        grid.reserve(static_cast<std::size_t>(coarse));
        for (std::int64_t k = 1; k <= coarse; ++k) {
            grid.push_back(sol.at_grid(static_cast<std::size_t>(k * (N / coarse))));
        }
        if (pending) {
            double err = 0.0;
            for (std::size_t k = 0; k < grid.size(); ++k) err = std::max(err, std::abs(grid[k](0) - previous[k](0)));
            pending->error = err;
            pending->final_error = std::abs(grid.back()(0) - previous.back()(0));
            out.rows.push_back(*pending);
        }
        pending = detail::make_record("example2", c, N, stats, c.R);
        previous = std::move(grid);

        if (c.dense_check && level == std::min(c.level_hi, 10)) {
            const VieSolution dense = solve_vie<DenseEvaluator>(problem, detail::options_for(c, N));
            double dev = 0.0;
            double scale = 0.0;
            for (std::size_t m = 0; m < dense.stages.size(); ++m) {
                dev = std::max(dev, (dense.stages[m] - sol.stages[m]).cwiseAbs().maxCoeff());
                scale = std::max(scale, dense.stages[m].cwiseAbs().maxCoeff());
            }
            out.dense_deviation = dev / scale;
        }
    }
    fill_orders(out.rows);
    return out;
}

// ---------------------------------------------------------------------------
// Example 3: fractional diffusion on (-a, a) with transparent boundary conditions.

/// Problem data of the fractional diffusion example.
struct FracDiffConfig {
    double alpha = 2.0 / 3.0;
    double a = 1.0;
    int M = 200;  // grid x_i = i a / M, i = -M..M
    std::function<double(double x)> u0 = [](double x) { return std::exp(-100.0 * x * x); };
    std::function<double(double x, double t)> source = [](double, double) { return 0.0; };
    double T = 1.0;
};

/// Values u(x_i, t^m) of a fractional diffusion run, one row per grid point t^m.
struct FracDiffSolution {
    std::vector<Vector> grid_values;  // length N, each of size 2M + 1
    RunStats stats;
};

/// Solves u = u0 + k_alpha * (Laplacian u) + g on the grid nodes together with
/// u = -k_{alpha/2} * (normal derivative of u) at x = +-a. The Laplacian at the
/// boundary nodes and the central normal derivative use one ghost value on
/// each side, giving 2M + 3 unknowns per collocation node. Both convolutions
/// are evaluated with their own evaluator (dimensions 2M + 1 and 2).
template <class Evaluator = H2Evaluator>
[[nodiscard]] FracDiffSolution solve_fractional_diffusion(const FracDiffConfig& fd, int stages, int q,
                                                          int n_min, int R, std::int64_t N,
                                                          MomentRule rule = MomentRule::runge_kutta) {
    using Sparse = Eigen::SparseMatrix<double>;
    using Triplet = Eigen::Triplet<double>;
    const int M = fd.M;
    const Eigen::Index nodes = 2 * M + 1;
    const Eigen::Index unknowns = nodes + 2;  // [ghost left, u_{-M} .. u_{M}, ghost right]
    const double dx = fd.a / M;
    const double h = fd.T / static_cast<double>(N);
    const int s = stages;

    EvaluatorOptions bulk_opts;
    bulk_opts.h = h;
    bulk_opts.stages = s;
    bulk_opts.q = q;
    bulk_opts.n_min = n_min;
    bulk_opts.rule = rule;
    bulk_opts.dim = static_cast<int>(nodes);
    bulk_opts.horizon_hint = fd.T;
    EvaluatorOptions edge_opts = bulk_opts;
    edge_opts.dim = 2;

    FracDiffSolution out;
    auto clock = std::chrono::steady_clock::now();
    Evaluator bulk(kernels::difference_power(fd.alpha, R), bulk_opts);
    Evaluator edge(kernels::difference_power(0.5 * fd.alpha, R), edge_opts);

    // Discrete operators on one stage vector z.
    std::vector<Triplet> lap_t;
    for (Eigen::Index k = 0; k < nodes; ++k) {
        lap_t.emplace_back(k, k, 1.0 / (dx * dx));
        lap_t.emplace_back(k, k + 1, -2.0 / (dx * dx));
        lap_t.emplace_back(k, k + 2, 1.0 / (dx * dx));
    }
    Sparse lap(nodes, unknowns);
    lap.setFromTriplets(lap_t.begin(), lap_t.end());
    // outward normal derivatives at x = -a (row 0) and x = a (row 1)
    std::vector<Triplet> nd_t = {{0, 0, 1.0 / (2 * dx)},
                                 {0, 2, -1.0 / (2 * dx)},
                                 {1, static_cast<int>(unknowns - 1), 1.0 / (2 * dx)},
                                 {1, static_cast<int>(unknowns - 3), -1.0 / (2 * dx)}};
    Sparse normal(2, unknowns);
    normal.setFromTriplets(nd_t.begin(), nd_t.end());

    Vector u0(nodes);
    for (Eigen::Index k = 0; k < nodes; ++k) u0(k) = fd.u0(-fd.a + static_cast<double>(k) * dx);

    // The self couplings K^{m,m} are step independent, so the stage system is
    // assembled and factorised once.
    bulk.history_part();
    edge.history_part();
    const Matrix K1 = bulk.self_coupling();
    const Matrix K2 = edge.self_coupling();
    std::vector<Triplet> sys_t;
    for (int j = 0; j < s; ++j) {
        const Eigen::Index row0 = static_cast<Eigen::Index>(j) * unknowns;
        for (Eigen::Index k = 0; k < nodes; ++k) sys_t.emplace_back(row0 + k, row0 + k + 1, 1.0);
        sys_t.emplace_back(row0 + nodes, row0 + 1, 1.0);
        sys_t.emplace_back(row0 + nodes + 1, row0 + nodes, 1.0);
        for (int l = 0; l < s; ++l) {
            const Eigen::Index col0 = static_cast<Eigen::Index>(l) * unknowns;
            for (int k = 0; k < lap.outerSize(); ++k) {
                for (Sparse::InnerIterator it(lap, k); it; ++it) {
                    sys_t.emplace_back(row0 + it.row(), col0 + it.col(), -K1(j, l) * it.value());
                }
            }
            for (int k = 0; k < normal.outerSize(); ++k) {
                for (Sparse::InnerIterator it(normal, k); it; ++it) {
                    sys_t.emplace_back(row0 + nodes + it.row(), col0 + it.col(), K2(j, l) * it.value());
                }
            }
        }
    }
    Sparse system(s * unknowns, s * unknowns);
    system.setFromTriplets(sys_t.begin(), sys_t.end());
    Eigen::SparseLU<Sparse> lu;
    lu.compute(system);
    if (lu.info() != Eigen::Success) throw std::runtime_error("fractional diffusion: factorisation failed");
    out.stats.setup_ms = detail::elapsed_ms(clock);
    clock = std::chrono::steady_clock::now();

    out.grid_values.reserve(static_cast<std::size_t>(N));
    for (std::int64_t m = 1; m <= N; ++m) {
        const Matrix W1 = m == 1 ? Matrix::Zero(s, nodes) : bulk.history_part();
        const Matrix W2 = m == 1 ? Matrix::Zero(s, 2) : edge.history_part();
        const std::vector<double> t = bulk.next_times();
        Vector rhs(s * unknowns);
        for (int j = 0; j < s; ++j) {
            const Eigen::Index row0 = static_cast<Eigen::Index>(j) * unknowns;
            for (Eigen::Index k = 0; k < nodes; ++k) {
                rhs(row0 + k) = u0(k) + W1(j, k) +
                                fd.source(-fd.a + static_cast<double>(k) * dx, t[static_cast<std::size_t>(j)]);
            }
            rhs(row0 + nodes) = W2(j, 0);
            rhs(row0 + nodes + 1) = W2(j, 1);
        }
        const Vector z = lu.solve(rhs);
        Matrix F1(s, nodes);
        Matrix F2(s, 2);
        for (int j = 0; j < s; ++j) {
            const Vector zj = z.segment(static_cast<Eigen::Index>(j) * unknowns, unknowns);
            F1.row(j) = (lap * zj).transpose();
            F2.row(j) = -(normal * zj).transpose();
        }
        bulk.commit(F1);
        edge.commit(F2);
        out.grid_values.push_back(z.segment(static_cast<Eigen::Index>(s - 1) * unknowns + 1, nodes));
    }
    out.stats.run_ms = detail::elapsed_ms(clock);
    out.stats.peak_buffers = bulk.peak_buffers() + edge.peak_buffers();
    out.stats.block_multiplies = bulk.block_multiplies() + edge.block_multiplies();
    return out;
}

/// Example 3 sweep against a 3-stage run on 4x the finest grid.
[[nodiscard]] inline ExperimentResult run_example3(ExperimentConfig c) {
    FracDiffConfig fd;
    fd.M = c.M;
    fd.T = c.T;
    const std::int64_t coarse = std::int64_t{1} << c.level_lo;
    const std::int64_t n_ref = std::int64_t{1} << (c.level_hi + 2);
    const FracDiffSolution reference = solve_fractional_diffusion(fd, 3, c.q, c.n_min, c.R, n_ref, c.rule);
    ExperimentResult out;
    for (int level = c.level_lo; level <= c.level_hi; ++level) {
        const std::int64_t N = std::int64_t{1} << level;
        const FracDiffSolution sol = solve_fractional_diffusion(fd, c.p, c.q, c.n_min, c.R, N, c.rule);
        ExperimentRecord row = detail::make_record("example3", c, N, sol.stats, c.R);
        double err = 0.0;
        for (std::int64_t k = 1; k <= coarse; ++k) {
            const auto a = static_cast<std::size_t>(k * (N / coarse) - 1);
            const auto b = static_cast<std::size_t>(k * (n_ref / coarse) - 1);
            err = std::max(err, (sol.grid_values[a] - reference.grid_values[b]).cwiseAbs().maxCoeff());
        }
        row.error = err;
        out.rows.push_back(row);
        if (c.dense_check && level == std::min(c.level_hi, 8)) {
            const FracDiffSolution dense =
                solve_fractional_diffusion<DenseEvaluator>(fd, c.p, c.q, c.n_min, c.R, N, c.rule);
            double dev = 0.0;
            double scale = 0.0;
            for (std::size_t m = 0; m < dense.grid_values.size(); ++m) {
                dev = std::max(dev, (dense.grid_values[m] - sol.grid_values[m]).cwiseAbs().maxCoeff());
                scale = std::max(scale, dense.grid_values[m].cwiseAbs().maxCoeff());
            }
            out.dense_deviation = dev / scale;
        }
    }
    fill_orders(out.rows);
    return out;
}

// ---------------------------------------------------------------------------
// Complexity and inversion accuracy.

/// Timing sweep: direct evaluation of int_0^t cos(s) / sqrt(pi (t - s)) ds on
/// [0, T] for N = 2^level_lo .. 2^level_hi. Each row keeps the fastest of
/// `repeats` runs; the error column stays empty.
[[nodiscard]] inline ExperimentResult run_complexity(ExperimentConfig c, int repeats = 1) {
    const Kernel kernel = kernels::difference_power(0.5, c.R);
    const DataSampler data = [](double s) { return Vector::Constant(1, std::cos(s)); };
    const DataSampler zero = [](double) { return Vector::Zero(1); };
    ExperimentResult out;
    for (int level = c.level_lo; level <= c.level_hi; ++level) {
        const std::int64_t N = std::int64_t{1} << level;
        RunStats best;
        best.run_ms = std::numeric_limits<double>::infinity();
        for (int r = 0; r < std::max(1, repeats); ++r) {
            RunStats stats;
            (void)variation_of_constants(kernel, data, zero, detail::options_for(c, N), c.T, &stats);
            if (stats.run_ms < best.run_ms) best = stats;
        }
        out.rows.push_back(detail::make_record("complexity", c, N, best, c.R));
    }
    return out;
}

/// Largest relative error of the trapezoidal inverse Laplace transform of
/// lambda^-alpha on one contour for [t_min, t_max], over `points` log-spaced
/// times, against t^(alpha-1) / Gamma(alpha).
[[nodiscard]] inline double laplace_inversion_error(double alpha, int R, double t_min, double t_max,
                                                    int points = 200) {
    const ContourParams contour = select_contour(t_min, t_max, R);
    const LaplaceInverter inverter(contour, [alpha](Complex z) { return std::pow(z, -alpha); });
    const double inv_gamma = 1.0 / std::tgamma(alpha);
    double worst = 0.0;
    for (int i = 0; i < points; ++i) {
        const double t = t_min * std::pow(t_max / t_min, static_cast<double>(i) / (points - 1));
        const double exact = std::pow(t, alpha - 1.0) * inv_gamma;
        worst = std::max(worst, std::abs(inverter(t) - exact) / std::abs(exact));
    }
    return worst;
}

/// One row per R with the inversion error of laplace_inversion_error.
[[nodiscard]] inline ExperimentResult run_laplace_accuracy(double alpha, const std::vector<int>& Rs,
                                                           double t_min, double t_max) {
    ExperimentResult out;
    for (int R : Rs) {
        ExperimentRecord row;
        row.example = "laplace";
        row.R = R;
        const auto clock = std::chrono::steady_clock::now();
        row.error = laplace_inversion_error(alpha, R, t_min, t_max);
        row.run_ms = detail::elapsed_ms(clock);
        out.rows.push_back(row);
    }
    return out;
}

}  // namespace volterra_h2
