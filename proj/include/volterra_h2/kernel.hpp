#pragma once

#include "volterra_h2/basis.hpp"
#include "volterra_h2/hierarchy.hpp"
#include "volterra_h2/laplace.hpp"
#include "volterra_h2/quadrature.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace volterra_h2 {

/// Analyticity sector |arg(lambda - shift)| < half_angle and decay bound
/// |khat(lambda)| <= bound |lambda|^(-decay) of a transfer function.
struct SectorInfo {
    double shift = 0.0;
    double half_angle = std::numbers::pi;
    double bound = 1.0;
    double decay = 1.0;
};

/// How the two nearfield matrices K^{m,m-1}, K^{m,m} are formed.
enum class NearfieldRule {
    /// Adaptive (Gauss-Legendre / Gauss-Jacobi) integration of the time-domain kernel.
    quadrature,
    /// Collocation Runge-Kutta convolution quadrature from the transfer function,
    /// i.e. khat((hA)^-1) and its two-step companion.
    convolution_quadrature,
};

/// Raised when a kernel cannot be evaluated as requested.
class KernelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A Volterra kernel k(t, s), given either in the time domain or through the
/// transfer function of a convolution kernel k(t - s).
class Kernel {
public:
    using GeneralFunction = std::function<double(double t, double s)>;
    using DifferenceFunction = std::function<double(double tau)>;

    /// Non-convolution kernel k(t, s).
    static Kernel general(GeneralFunction k, std::string name = "general") {
        Kernel out;
        out.name_ = std::move(name);
        out.general_ = std::move(k);
        return out;
    }

    /// Convolution kernel k(t - s). `singular_exponent` declares k(tau) ~ tau^beta at 0.
    static Kernel convolution(DifferenceFunction k, std::string name = "convolution",
                              std::optional<double> singular_exponent = std::nullopt) {
        Kernel out;
        out.name_ = std::move(name);
        out.difference_ = std::move(k);
        out.singular_exponent_ = singular_exponent;
        return out;
    }

    /// Convolution kernel known through its transfer function; time values are
    /// reconstructed on hyperbolic contours with 2R+1 nodes.
    static Kernel transfer(TransferFunction khat, SectorInfo sector, int R,
                           std::string name = "transfer") {
        if (R < 1) throw std::invalid_argument("Kernel::transfer: need R >= 1");
        Kernel out;
        out.name_ = std::move(name);
        out.transfer_ = std::move(khat);
        out.sector_ = sector;
        out.R_ = R;
        out.rule_ = NearfieldRule::convolution_quadrature;
        return out;
    }

    /// Attaches a closed-form time-domain representation to a transfer kernel.
    /// It is used only by NearfieldRule::quadrature.
    Kernel& with_time_domain(DifferenceFunction k, std::optional<double> singular_exponent) {
        difference_ = std::move(k);
        singular_exponent_ = singular_exponent;
        return *this;
    }

    Kernel& with_nearfield_rule(NearfieldRule rule) {
        if (rule == NearfieldRule::convolution_quadrature && !transfer_) {
            throw KernelError("convolution-quadrature nearfield needs a transfer function");
        }
        rule_ = rule;
        return *this;
    }

    [[nodiscard]] const std::string& name() const { return name_; }
    [[nodiscard]] bool is_convolution() const { return !general_; }
    [[nodiscard]] bool is_transfer() const { return static_cast<bool>(transfer_); }
    [[nodiscard]] bool has_time_domain() const {
        return static_cast<bool>(general_) || static_cast<bool>(difference_);
    }
    [[nodiscard]] int contour_nodes() const { return R_; }
    [[nodiscard]] const SectorInfo& sector() const { return sector_; }
    [[nodiscard]] NearfieldRule nearfield_rule() const { return rule_; }
    [[nodiscard]] std::optional<double> singular_exponent() const { return singular_exponent_; }
    [[nodiscard]] const TransferFunction& transfer_function() const { return transfer_; }

    /// Time-domain value k(t, s), from the closed form if one is attached.
    [[nodiscard]] double operator()(double t, double s) const {
        if (general_) return general_(t, s);
        if (difference_) return difference_(t - s);
        if (t - s <= 0.0) throw KernelError(name_ + ": transfer kernel needs t > s");
        const ContourParams c = select_contour(t - s, t - s, R_);
        return LaplaceInverter(c, transfer_)(t - s);
    }

    /// Kernel values at all pairs (t_i, s_j). Transfer kernels use one contour
    /// fitted to the range of distances t_i - s_j, which must all be positive.
    [[nodiscard]] Matrix sample(std::span<const double> t, std::span<const double> s) const {
        const auto rows = static_cast<Eigen::Index>(t.size());
        const auto cols = static_cast<Eigen::Index>(s.size());
        Matrix out(rows, cols);
        if (general_) {
            for (Eigen::Index i = 0; i < rows; ++i)
                for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = general_(t[i], s[j]);
            return out;
        }
        if (!transfer_) {
            for (Eigen::Index i = 0; i < rows; ++i)
                for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = difference_(t[i] - s[j]);
            return out;
        }
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        for (double ti : t) {
            for (double sj : s) {
                lo = std::min(lo, ti - sj);
                hi = std::max(hi, ti - sj);
            }
        }
        if (!(lo > 0.0)) {
            throw KernelError(name_ + ": transfer kernel sampled at non-positive distance");
        }
        const LaplaceInverter inverter(select_contour(lo, hi, R_), transfer_);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = inverter(t[i] - s[j]);
        return out;
    }

private:
    Kernel() = default;

    std::string name_;
    GeneralFunction general_;
    DifferenceFunction difference_;
    TransferFunction transfer_;
    SectorInfo sector_;
    std::optional<double> singular_exponent_;
    int R_ = 15;
    NearfieldRule rule_ = NearfieldRule::quadrature;
};

/// Samples the contour used for [t_min, t_max] and checks that every node lies
/// in the declared sector and obeys the decay bound. Throws KernelError otherwise.
inline void validate_transfer(const Kernel& kernel, double t_min, double t_max) {
    if (!kernel.is_transfer()) return;
    const SectorInfo& sector = kernel.sector();
    const ContourParams c = select_contour(t_min, t_max, kernel.contour_nodes());
    for (int r = -c.half_nodes; r <= c.half_nodes; ++r) {
        const Complex z = contour_point(c, c.step * r).first;
        if (std::abs(std::arg(z - sector.shift)) >= sector.half_angle) {
            std::ostringstream msg;
            msg << kernel.name() << ": contour node " << z << " leaves the sector of analyticity";
            throw KernelError(msg.str());
        }
        const double value = std::abs(kernel.transfer_function()(z));
        const double bound = sector.bound * std::pow(std::abs(z), -sector.decay);
        if (!std::isfinite(value) || value > bound * (1.0 + 1e-8)) {
            std::ostringstream msg;
            msg << kernel.name() << ": |khat| = " << value << " exceeds decay bound " << bound
                << " at " << z;
            throw KernelError(msg.str());
        }
    }
}

/// Kernel coefficients of one farfield block: values at node pairs of the row
/// (target) and column (source) interval on a common level.
struct BlockCoeffs {
    int level = 1;
    std::int64_t offset = 0;  // row position minus column position
    Matrix values;            // (q+1) x (q+1)
};

/// Interpolation nodes of a hierarchy interval whose level-1 cells have length `base`.
[[nodiscard]] inline std::vector<double> interval_nodes(const LagrangeBasis& basis,
                                                        const LevelIndex& interval, double base) {
    std::vector<double> out(basis.size());
    const double len = interval.length(base);
    const double start = interval.begin(base);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = start + len * basis.node(i);
    return out;
}

/// Coefficients k(t_i, s_j) of the tensor Lagrange interpolant of the kernel on
/// row x col. `base` is the length of a level-1 interval (h, or n_min h).
[[nodiscard]] inline BlockCoeffs farfield_block_coeffs(const Kernel& kernel, const LevelIndex& row,
                                                       const LevelIndex& col,
                                                       const BasisTables& tables, double base) {
    if (row.level != col.level) throw KernelError("farfield block: levels differ");
    if (row.position - col.position < 2) {
        throw KernelError("farfield block: intervals (" + std::to_string(row.position) + ", " +
                          std::to_string(col.position) + ") on level " +
                          std::to_string(row.level) + " are not separated");
    }
    const auto t = interval_nodes(tables.kernel, row, base);
    const auto s = interval_nodes(tables.kernel, col, base);
    return {row.level, row.position - col.position, kernel.sample(t, s)};
}

/// Nearfield matrices of step m: entry (j, r) of `current` couples collocation
/// node j of cell m with data basis function r of cell m (integrated up to the
/// node), `previous` couples it with cell m-1. `previous` is zero for m = 1.
struct NearfieldPair {
    Matrix previous;
    Matrix current;
};

namespace detail {

inline NearfieldPair nearfield_by_quadrature(const Kernel& kernel, const BasisTables& tables,
                                             std::int64_t m) {
    if (!kernel.has_time_domain()) {
        throw KernelError(kernel.name() + ": quadrature nearfield needs a time-domain kernel");
    }
    const double h = tables.h;
    const Eigen::Index ns = tables.data_size();
    const double cell_start = static_cast<double>(m - 1) * h;
    NearfieldPair out{Matrix::Zero(ns, ns), Matrix::Zero(ns, ns)};
    const auto singular = kernel.singular_exponent();

    for (Eigen::Index j = 0; j < ns; ++j) {
        const double t = cell_start + tables.collocation.node(j) * h;
        const double upper = tables.collocation.node(j);  // in units of h from cell start
        // self cell, [cell_start, t]
        if (singular && *singular != 0.0) {
            const double beta = *singular;
            auto jacobi_sum = [&](int n) {
                const QuadratureRule rule = gauss_jacobi(n, beta, 0.0);
                Vector sum = Vector::Zero(ns);
                const double half = 0.5 * upper * h;
                for (std::size_t g = 0; g < rule.size(); ++g) {
                    const double x = rule.nodes[g];
                    const double dist = half * (1.0 - x);  // t - s
                    const double s = t - dist;
                    const double regular = kernel(t, s) / std::pow(dist, beta);
                    sum += (rule.weights[g] * regular) *
                           tables.collocation.eval_all((s - cell_start) / h);
                }
                return Vector(sum * std::pow(half, 1.0 + beta));
            };
            const Vector coarse = jacobi_sum(2 * ns + 8);
            const Vector fine = jacobi_sum(4 * ns + 16);
            const double scale = std::max(fine.lpNorm<Eigen::Infinity>(), 1e-300);
            if ((fine - coarse).lpNorm<Eigen::Infinity>() > 1e-13 * scale) {
                throw QuadratureError(kernel.name() + ": Gauss-Jacobi nearfield did not converge");
            }
            out.current.row(j) = fine.transpose();
        } else {
            const VectorIntegrand self = [&](double s, Eigen::Ref<Vector> value) {
                value = kernel(t, s) * tables.collocation.eval_all((s - cell_start) / h);
            };
            out.current.row(j) =
                integrate_adaptive(self, cell_start, t, ns).transpose();
        }
        if (m >= 2) {
            const double prev_start = cell_start - h;
            const VectorIntegrand prev = [&](double s, Eigen::Ref<Vector> value) {
                value = kernel(t, s) * tables.collocation.eval_all((s - prev_start) / h);
            };
            out.previous.row(j) = integrate_adaptive(prev, prev_start, cell_start, ns).transpose();
        }
    }
    return out;
}

// Radau quadrature of the nearfield integrals: K^{m,m}(j, r) = h A(j, r) k(t_j, t_r),
// K^{m,m-1}(j, r) = h b_r k(t_j, t_r - h).
inline NearfieldPair nearfield_by_runge_kutta(const Kernel& kernel, const BasisTables& tables,
                                              std::int64_t m) {
    if (!kernel.has_time_domain()) {
        throw KernelError(kernel.name() + ": Runge-Kutta nearfield needs a time-domain kernel");
    }
    if (kernel.singular_exponent() && *kernel.singular_exponent() < 0.0) {
        throw KernelError(kernel.name() +
                          ": Runge-Kutta nearfield needs a kernel that is finite on the diagonal");
    }
    const double h = tables.h;
    const Eigen::Index ns = tables.data_size();
    const double cell_start = static_cast<double>(m - 1) * h;
    NearfieldPair out{Matrix::Zero(ns, ns), Matrix::Zero(ns, ns)};
    for (Eigen::Index j = 0; j < ns; ++j) {
        const double t = cell_start + tables.collocation.node(j) * h;
        for (Eigen::Index r = 0; r < ns; ++r) {
            const double s = cell_start + tables.collocation.node(r) * h;
            out.current(j, r) = h * tables.runge_kutta_A(j, r) * kernel(t, s);
            if (m >= 2) out.previous(j, r) = h * tables.runge_kutta_b(r) * kernel(t, s - h);
        }
    }
    return out;
}

// d/dz khat at z from a trapezoidal Cauchy integral on a small circle.
inline Complex transfer_derivative(const TransferFunction& khat, Complex z) {
    constexpr int points = 32;
    const double radius = 0.25 * std::abs(z);
    Complex sum = 0.0;
    for (int k = 0; k < points; ++k) {
        const Complex e = std::polar(1.0, 2.0 * std::numbers::pi * k / points);
        sum += khat(z + radius * e) / e;
    }
    return sum / (static_cast<double>(points) * radius);
}

inline NearfieldPair nearfield_by_convolution_quadrature(const Kernel& kernel,
                                                         const BasisTables& tables,
                                                         std::int64_t m) {
    using CMatrix = Eigen::MatrixXcd;
    const TransferFunction& khat = kernel.transfer_function();
    const Eigen::Index ns = tables.data_size();
    // Z = (h A)^-1; the stage vector of the two-step collocation solution of
    // z' = lambda z + f is (Z - lambda)^-1 f^m + (Z - lambda)^-1 Z 1 e_s^T (Z - lambda)^-1 f^{m-1}.
    Eigen::EigenSolver<Matrix> eig(tables.runge_kutta_A);
    const CMatrix V = eig.eigenvectors();
    const CMatrix V_inv = V.inverse();
    Eigen::VectorXcd z(ns);
    for (Eigen::Index i = 0; i < ns; ++i) z(i) = 1.0 / (tables.h * eig.eigenvalues()(i));

    Eigen::VectorXcd f_z(ns);
    for (Eigen::Index i = 0; i < ns; ++i) f_z(i) = khat(z(i));
    const CMatrix current = V * f_z.asDiagonal() * V_inv;

    NearfieldPair out{Matrix::Zero(ns, ns), current.real()};
    if (m >= 2) {
        const Matrix Z = (tables.h * tables.runge_kutta_A).inverse();
        Matrix shift = Matrix::Zero(ns, ns);
        shift.col(ns - 1) = Z * Vector::Ones(ns);  // Z 1 e_s^T
        const CMatrix M = V_inv * shift.cast<Complex>() * V;
        CMatrix divided(ns, ns);
        for (Eigen::Index i = 0; i < ns; ++i) {
            for (Eigen::Index k = 0; k < ns; ++k) {
                if (i == k || std::abs(z(i) - z(k)) < 1e-10 * std::abs(z(i))) {
                    divided(i, k) = transfer_derivative(khat, z(i));
                } else {
                    divided(i, k) = (f_z(i) - f_z(k)) / (z(i) - z(k));
                }
            }
        }
        const CMatrix previous = -(V * divided.cwiseProduct(M) * V_inv);
        out.previous = previous.real();
    }
    return out;
}

}  // namespace detail

/// K^{m,m-1} and K^{m,m} for step m (m >= 1). Transfer kernels use convolution
/// quadrature; time-domain kernels use adaptive quadrature, or the Radau
/// quadrature when the tables were built with MomentRule::runge_kutta.
[[nodiscard]] inline NearfieldPair nearfield_matrices(const Kernel& kernel,
                                                      const BasisTables& tables, std::int64_t m) {
    if (m < 1) throw std::invalid_argument("nearfield_matrices: step must be >= 1");
    if (kernel.nearfield_rule() == NearfieldRule::convolution_quadrature) {
        return detail::nearfield_by_convolution_quadrature(kernel, tables, m);
    }
    if (tables.rule == MomentRule::runge_kutta) {
        return detail::nearfield_by_runge_kutta(kernel, tables, m);
    }
    return detail::nearfield_by_quadrature(kernel, tables, m);
}

/// Radau IIA convolution quadrature weights W_0 .. W_count of a transfer
/// kernel (stages x stages each). W_j maps the stage data of cell n to the
/// stage values of cell n + j when z' = lambda z + f is integrated by the
/// collocation scheme and the result is weighted with khat(lambda).
///
/// The weights are the Taylor coefficients of khat(Delta(zeta) / h) with
/// Delta(zeta) = (A + zeta / (1 - zeta) 1 b^T)^-1, extracted by a discrete
/// Fourier transform on the circle |zeta| = rho. With L samples and
/// rho^L = eps, aliasing stays at eps and round-off grows at most by
/// rho^-count.
[[nodiscard]] inline std::vector<Matrix> radau_cq_weights(const Kernel& kernel,
                                                          const BasisTables& tables,
                                                          std::size_t count) {
    if (!kernel.is_transfer()) {
        throw KernelError(kernel.name() + ": convolution quadrature needs a transfer function");
    }
    using CMatrix = Eigen::MatrixXcd;
    const TransferFunction& khat = kernel.transfer_function();
    const Eigen::Index ns = tables.data_size();
    const std::size_t L = std::bit_ceil(std::max<std::size_t>(64 * (count + 1), 256));
    const double radius = std::pow(machine_epsilon, 1.0 / static_cast<double>(L));
    const CMatrix A = tables.runge_kutta_A.cast<Complex>();
    const CMatrix one_b =
        (Vector::Ones(ns) * tables.runge_kutta_b.transpose()).cast<Complex>();

    std::vector<CMatrix> samples(L);
    for (std::size_t k = 0; k < L; ++k) {
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(L);
        const Complex zeta = radius * std::polar(1.0, theta);
        const CMatrix delta = (A + zeta / (1.0 - zeta) * one_b).inverse() / tables.h;
        Eigen::ComplexEigenSolver<CMatrix> eig(delta);
        const CMatrix V = eig.eigenvectors();
        Eigen::VectorXcd values(ns);
        for (Eigen::Index i = 0; i < ns; ++i) values(i) = khat(eig.eigenvalues()(i));
        samples[k] = V * values.asDiagonal() * V.inverse();
    }

    std::vector<Matrix> weights(count + 1);
    for (std::size_t j = 0; j <= count; ++j) {
        CMatrix sum = CMatrix::Zero(ns, ns);
        for (std::size_t k = 0; k < L; ++k) {
            const double theta = -2.0 * std::numbers::pi * static_cast<double>((j * k) % L) /
                                 static_cast<double>(L);
            sum += samples[k] * std::polar(1.0, theta);
        }
        weights[j] = sum.real() / (static_cast<double>(L) * std::pow(radius, static_cast<double>(j)));
    }
    return weights;
}

/// Built-in kernels.
namespace kernels {

/// k = 1 (Heaviside convolution kernel).
[[nodiscard]] inline Kernel one() {
    return Kernel::convolution([](double) { return 1.0; }, "one");
}

/// k = 1 given only through khat = 1/lambda.
[[nodiscard]] inline Kernel one_transfer(int R) {
    return Kernel::transfer([](Complex z) { return 1.0 / z; }, SectorInfo{0.0, std::numbers::pi, 1.0, 1.0},
                            R, "one-transfer");
}

/// k = (t - s)^degree.
[[nodiscard]] inline Kernel difference_monomial(int degree) {
    return Kernel::convolution([degree](double tau) { return std::pow(tau, degree); },
                               "difference-monomial-" + std::to_string(degree));
}

/// k = (t - s)^(alpha-1) / Gamma(alpha) with transfer lambda^-alpha.
[[nodiscard]] inline Kernel difference_power(double alpha, int R) {
    if (!(alpha > 0.0)) throw std::invalid_argument("difference_power: alpha must be positive");
    const double inv_gamma = 1.0 / std::tgamma(alpha);
    Kernel k = Kernel::transfer([alpha](Complex z) { return std::pow(z, -alpha); },
                                SectorInfo{0.0, std::numbers::pi, 1.0, alpha}, R,
                                "difference-power");
    k.with_time_domain([alpha, inv_gamma](double tau) { return std::pow(tau, alpha - 1.0) * inv_gamma; },
                       alpha < 1.0 ? std::optional<double>(alpha - 1.0) : std::nullopt);
    return k;
}

/// Same kernel as difference_power, evaluated in the time domain only.
[[nodiscard]] inline Kernel difference_power_time(double alpha) {
    const double inv_gamma = 1.0 / std::tgamma(alpha);
    return Kernel::convolution(
        [alpha, inv_gamma](double tau) { return std::pow(tau, alpha - 1.0) * inv_gamma; },
        "difference-power-time", alpha < 1.0 ? std::optional<double>(alpha - 1.0) : std::nullopt);
}

/// k(t, s) = exp(s^2 - t^2), the variation-of-constants kernel of y' = -2ty + f.
[[nodiscard]] inline Kernel gauss_voc() {
    return Kernel::general([](double t, double s) { return std::exp(s * s - t * t); }, "gauss-voc");
}

}  // namespace kernels

}  // namespace volterra_h2
