#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace volterra_h2 {

using Complex = std::complex<double>;

/// A transfer function: the Laplace transform of a convolution kernel.
using TransferFunction = std::function<Complex(Complex)>;

/// Default hyperbola opening angle and shift.
inline constexpr double default_contour_angle = 3.0 * std::numbers::pi / 16.0;
inline constexpr double default_contour_shift = 0.0;
inline constexpr double machine_epsilon = 2.22e-16;

/// Hyperbola gamma(theta) = scale (1 - sin(angle + i theta)) + shift, sampled
/// by the trapezoidal rule at theta_r = step * r, r = -half_nodes..half_nodes.
struct ContourParams {
    double scale = 1.0;
    double angle = default_contour_angle;
    double shift = default_contour_shift;
    double step = 0.1;
    int half_nodes = 15;
    double rho = 0.5;  // minimiser of the error model used to pick step/scale
    double t_min = 0.0;
    double t_max = 0.0;
};

/// gamma(theta) and its derivative d gamma / d theta.
[[nodiscard]] inline std::pair<Complex, Complex> contour_point(const ContourParams& c,
                                                               double theta) {
    const Complex arg(c.angle, theta);
    const Complex gamma = c.scale * (1.0 - std::sin(arg)) + c.shift;
    const Complex dgamma = -c.scale * std::cos(arg) * Complex(0.0, 1.0);
    return {gamma, dgamma};
}

namespace detail {

inline double contour_width(double ratio, double rho, double angle) {
    return std::acosh(ratio / ((1.0 - rho) * std::sin(angle)));
}

// log(eps * e_R^(rho-1) + e_R^rho) with e_R = exp(-2 pi angle R / a(rho)).
inline double contour_error_model(double ratio, double rho, int R, double angle) {
    const double log_eR = -2.0 * std::numbers::pi * angle * R / contour_width(ratio, rho, angle);
    const double x = std::log(machine_epsilon) + (rho - 1.0) * log_eR;
    const double y = rho * log_eR;
    const double hi = std::max(x, y);
    return hi + std::log1p(std::exp(std::min(x, y) - hi));
}

}  // namespace detail

/// Step and scale of the hyperbola for kernel values on [t_min, t_max] with
/// 2R+1 nodes: rho minimises the error model by golden-section search on
/// (0.01, 0.99); step = a(rho)/R, scale = 2 pi angle R (1-rho) / (t_max a(rho)).
[[nodiscard]] inline ContourParams select_contour(double t_min, double t_max, int R,
                                                  double angle = default_contour_angle,
                                                  double shift = default_contour_shift) {
    if (!(t_min > 0.0) || !(t_max >= t_min)) {
        throw std::invalid_argument("select_contour: need 0 < t_min <= t_max");
    }
    if (R < 1) throw std::invalid_argument("select_contour: need R >= 1");
    const double ratio = t_max / t_min;
    auto objective = [&](double rho) { return detail::contour_error_model(ratio, rho, R, angle); };

    constexpr double lo_bound = 0.01;
    constexpr double hi_bound = 0.99;
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = lo_bound;
    double hi = hi_bound;
    double x1 = hi - golden * (hi - lo);
    double x2 = lo + golden * (hi - lo);
    double f1 = objective(x1);
    double f2 = objective(x2);
    while (hi - lo > 1e-6) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = objective(x2);
        }
    }
    const double rho = 0.5 * (lo + hi);
    if (rho - lo_bound < 1e-5 || hi_bound - rho < 1e-5) {
        std::ostringstream msg;
        msg << "select_contour: no interior minimum in (" << lo_bound << ", " << hi_bound
            << "), search ended at rho = " << rho << " for t_max/t_min = " << ratio << ", R = " << R;
        throw std::runtime_error(msg.str());
    }
    const double width = detail::contour_width(ratio, rho, angle);
    ContourParams c;
    c.angle = angle;
    c.shift = shift;
    c.half_nodes = R;
    c.rho = rho;
    c.step = width / R;
    c.scale = 2.0 * std::numbers::pi * angle * R * (1.0 - rho) / (t_max * width);
    c.t_min = t_min;
    c.t_max = t_max;
    return c;
}

/// Trapezoidal-rule inverse Laplace transform with the transfer function
/// pre-sampled on the upper half of a contour.
///
/// k(t) ~ sum_r (i step / 2 pi) e^{gamma_r t} gamma'_r khat(gamma_r), folded by
/// conjugate symmetry into the centre term plus twice the real part of r > 0.
class LaplaceInverter {
public:
    LaplaceInverter() = default;
    LaplaceInverter(const ContourParams& contour, const TransferFunction& transfer)
        : contour_(contour) {
        const int R = contour.half_nodes;
        points_.reserve(R + 1);
        weights_.reserve(R + 1);
        for (int r = 0; r <= R; ++r) {
            const auto [gamma, dgamma] = contour_point(contour, contour.step * r);
            const Complex value = transfer(gamma);
            if (!std::isfinite(value.real()) || !std::isfinite(value.imag())) {
                std::ostringstream msg;
                msg << "inverse Laplace: transfer function not finite at node " << r << " ("
                    << gamma << ")";
                throw std::domain_error(msg.str());
            }
            const Complex w = Complex(0.0, contour.step / (2.0 * std::numbers::pi)) * dgamma * value;
            points_.push_back(gamma);
            weights_.push_back(r == 0 ? w : 2.0 * w);
        }
    }

    [[nodiscard]] double operator()(double t) const {
        double sum = 0.0;
        for (std::size_t r = 0; r < points_.size(); ++r) {
            sum += (weights_[r] * std::exp(points_[r] * t)).real();
        }
        return sum;
    }

    [[nodiscard]] const ContourParams& contour() const { return contour_; }
    [[nodiscard]] const std::vector<Complex>& points() const { return points_; }

private:
    ContourParams contour_;
    std::vector<Complex> points_;
    std::vector<Complex> weights_;
};

/// Single evaluation of the inverse Laplace transform at t.
[[nodiscard]] inline double inverse_laplace_eval(const ContourParams& contour,
                                                 const TransferFunction& transfer, double t) {
    return LaplaceInverter(contour, transfer)(t);
}

/// Implicit-Euler convolution quadrature weights omega_0..omega_count,
/// omega_l = (1/2 pi i) oint khat((1 - z)/h) / z^(l+1) dz, by the trapezoidal
/// rule on |z| = rho (a plain DFT of the circle samples).
///
/// Uses L = next power of two >= 4 (count + 1) samples and rho = eps^(1/L),
/// which keeps aliasing and round-off both near eps^(3/4).
[[nodiscard]] inline std::vector<double> cq_weights_euler(const TransferFunction& transfer,
                                                          double h, std::size_t count) {
    const std::size_t L = std::bit_ceil(std::max<std::size_t>(4 * (count + 1), 16));
    const double radius = std::pow(machine_epsilon, 1.0 / static_cast<double>(L));
    std::vector<Complex> samples(L);
    for (std::size_t k = 0; k < L; ++k) {
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(L);
        const Complex z = radius * std::polar(1.0, theta);
        samples[k] = transfer((1.0 - z) / h);
    }
    std::vector<double> weights(count + 1);
    for (std::size_t l = 0; l <= count; ++l) {
        Complex sum = 0.0;
        for (std::size_t k = 0; k < L; ++k) {
            const double theta = -2.0 * std::numbers::pi * static_cast<double>((l * k) % L) /
                                 static_cast<double>(L);
            sum += samples[k] * std::polar(1.0, theta);
        }
        weights[l] = sum.real() / (static_cast<double>(L) * std::pow(radius, static_cast<double>(l)));
    }
    return weights;
}

}  // namespace volterra_h2
