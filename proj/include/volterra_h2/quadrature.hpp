#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace volterra_h2 {

/// Nodes and weights of a quadrature rule on a fixed reference interval.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    [[nodiscard]] std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss-Legendre rule on [0, 1], exact for degree 2n-1.
[[nodiscard]] inline QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // recompute derivative at the converged root for the weight
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= n; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = 0.5 * (1.0 - x);
        rule.nodes[n - 1 - i] = 0.5 * (1.0 + x);
        rule.weights[i] = 0.5 * w;
        rule.weights[n - 1 - i] = 0.5 * w;
    }
    return rule;
}

/// n-point Gauss-Jacobi rule for the weight (1-x)^a (1+x)^b on [-1, 1]
/// (Golub-Welsch). Requires a, b > -1.
[[nodiscard]] inline QuadratureRule gauss_jacobi(int n, double a, double b) {
    if (n < 1 || a <= -1.0 || b <= -1.0) {
        throw std::invalid_argument("gauss_jacobi: need n >= 1 and a, b > -1");
    }
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < n; ++k) {
        const double s = 2.0 * k + a + b;
        if (k == 0) {
            jacobi(0, 0) = (b - a) / (a + b + 2.0);
        } else {
            jacobi(k, k) = (b * b - a * a) / (s * (s + 2.0));
        }
        if (k + 1 < n) {
            const double k1 = k + 1.0;
            const double s1 = 2.0 * k1 + a + b;
            const double off = std::sqrt(4.0 * k1 * (k1 + a) * (k1 + b) * (k1 + a + b) /
                                         (s1 * s1 * (s1 + 1.0) * (s1 - 1.0)));
            jacobi(k, k + 1) = off;
            jacobi(k + 1, k) = off;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
    const double mass = std::exp((a + b + 1.0) * std::log(2.0) + std::lgamma(a + 1.0) +
                                 std::lgamma(b + 1.0) - std::lgamma(a + b + 2.0));
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int k = 0; k < n; ++k) {
        rule.nodes[k] = eig.eigenvalues()(k);
        const double v = eig.eigenvectors()(0, k);
        rule.weights[k] = mass * v * v;
    }
    return rule;
}

/// Thrown when an adaptive quadrature cannot reach its tolerance.
class QuadratureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Vector-valued integrand: fills `out` with the integrand components at x.
using VectorIntegrand = std::function<void(double x, Eigen::Ref<Eigen::VectorXd> out)>;

namespace detail {

inline Eigen::VectorXd apply_rule(const VectorIntegrand& f, const QuadratureRule& rule, double a,
                                  double b, Eigen::Index components) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(components);
    Eigen::VectorXd value(components);
    const double len = b - a;
    for (std::size_t k = 0; k < rule.size(); ++k) {
        f(a + len * rule.nodes[k], value);
        sum += (len * rule.weights[k]) * value;
    }
    return sum;
}

inline Eigen::VectorXd adaptive_panel(const VectorIntegrand& f, const QuadratureRule& coarse,
                                      const QuadratureRule& fine, double a, double b,
                                      Eigen::Index components, double abs_tol, int depth) {
    const Eigen::VectorXd low = apply_rule(f, coarse, a, b, components);
    const Eigen::VectorXd high = apply_rule(f, fine, a, b, components);
    if ((high - low).lpNorm<Eigen::Infinity>() <= abs_tol) return high;
    if (depth == 0) {
        throw QuadratureError("adaptive quadrature did not converge on [" + std::to_string(a) +
                              ", " + std::to_string(b) + "]");
    }
    const double mid = 0.5 * (a + b);
    return adaptive_panel(f, coarse, fine, a, mid, components, abs_tol, depth - 1) +
           adaptive_panel(f, coarse, fine, mid, b, components, abs_tol, depth - 1);
}

}  // namespace detail

/// Adaptive Gauss-Legendre integration of a vector integrand over [a, b].
///
/// Each panel compares an n-point and a 2n-point rule and bisects until the
/// difference drops below `rel_tol` times the magnitude of a first estimate.
/// The 2n-point value is kept, so the per-panel error is far below the
/// criterion for smooth integrands.
[[nodiscard]] inline Eigen::VectorXd integrate_adaptive(const VectorIntegrand& f, double a,
                                                        double b, Eigen::Index components,
                                                        double rel_tol = 1e-13, int points = 12,
                                                        int max_depth = 40) {
    const QuadratureRule coarse = gauss_legendre(points);
    const QuadratureRule fine = gauss_legendre(2 * points);
    const Eigen::VectorXd estimate = detail::apply_rule(f, fine, a, b, components);
    const double scale = std::max(estimate.lpNorm<Eigen::Infinity>(), 1e-300);
    return detail::adaptive_panel(f, coarse, fine, a, b, components, rel_tol * scale, max_depth);
}

}  // namespace volterra_h2
