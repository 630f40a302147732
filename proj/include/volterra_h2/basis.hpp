#pragma once

#include "volterra_h2/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace volterra_h2 {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

// Legendre P_n(y) and its derivative by the three-term recurrence.
inline void legendre(int n, double y, double& value, double& derivative) {
    double p0 = 1.0;
    double d0 = 0.0;
    if (n == 0) {
        value = p0;
        derivative = d0;
        return;
    }
    double p1 = y;
    double d1 = 1.0;
    for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * y * p1 - (k - 1.0) * p0) / k;
        const double d2 = d0 + (2.0 * k - 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    value = p1;
    derivative = d1;
}

}  // namespace detail

/// Abscissae of the s-stage Radau IIA method on [0, 1], ascending, last = 1.
///
/// Roots of P_s(2x-1) - P_{s-1}(2x-1), found by Newton iteration with
/// deflation against the roots already located.
[[nodiscard]] inline std::vector<double> radau_nodes(int stages) {
    if (stages < 1) {
        throw std::invalid_argument("radau_nodes: stage count must be >= 1, got " +
                                    std::to_string(stages));
    }
    std::vector<double> roots;  // in y = 2x - 1
    roots.push_back(1.0);
    for (int k = 1; k < stages; ++k) {
        double y = std::cos(2.0 * std::numbers::pi * k / (2.0 * stages - 1.0));
        for (int iter = 0; iter < 200; ++iter) {
            double pa, da, pb, db;
            detail::legendre(stages, y, pa, da);
            detail::legendre(stages - 1, y, pb, db);
            const double f = pa - pb;
            const double df = da - db;
            double deflate = 0.0;
            for (double r : roots) deflate += 1.0 / (y - r);
            const double step = f / (df - f * deflate);
            y -= step;
            if (std::abs(step) < 1e-16) break;
        }
        roots.push_back(y);
    }
    std::vector<double> nodes;
    nodes.reserve(roots.size());
    for (double r : roots) nodes.push_back(0.5 * (r + 1.0));
    std::sort(nodes.begin(), nodes.end());
    nodes.back() = 1.0;
    return nodes;
}

/// Chebyshev points of the second kind mapped to [0, 1], ascending.
/// For q = 0 the single node is the midpoint.
[[nodiscard]] inline std::vector<double> chebyshev_nodes(int q) {
    if (q < 0) throw std::invalid_argument("chebyshev_nodes: degree must be >= 0");
    if (q == 0) return {0.5};
    std::vector<double> nodes(q + 1);
    for (int i = 0; i <= q; ++i) {
        nodes[i] = 0.5 * (1.0 - std::cos(std::numbers::pi * i / q));
    }
    nodes.front() = 0.0;
    nodes.back() = 1.0;
    if (q % 2 == 0) nodes[q / 2] = 0.5;
    return nodes;
}

/// Lagrange basis on [0, 1] for a set of distinct nodes, evaluated in
/// barycentric form.
class LagrangeBasis {
public:
    LagrangeBasis() = default;
    explicit LagrangeBasis(std::vector<double> nodes) : nodes_(std::move(nodes)) {
        const std::size_t n = nodes_.size();
        if (n == 0) throw std::invalid_argument("LagrangeBasis: empty node set");
        weights_.assign(n, 1.0);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t k = 0; k < n; ++k) {
                if (k == j) continue;
                const double diff = nodes_[j] - nodes_[k];
                if (diff == 0.0) throw std::invalid_argument("LagrangeBasis: repeated node");
                weights_[j] /= diff;
            }
        }
        double scale = 0.0;
        for (double w : weights_) scale = std::max(scale, std::abs(w));
        for (double& w : weights_) w /= scale;
    }

    [[nodiscard]] std::size_t size() const { return nodes_.size(); }
    [[nodiscard]] int degree() const { return static_cast<int>(nodes_.size()) - 1; }
    [[nodiscard]] std::span<const double> nodes() const { return nodes_; }
    [[nodiscard]] double node(std::size_t i) const { return nodes_[i]; }

    /// All basis values at x, written to `out` (size()).
    void eval_all(double x, std::span<double> out) const {
        const std::size_t n = nodes_.size();
        for (std::size_t j = 0; j < n; ++j) {
            if (x == nodes_[j]) {
                std::fill(out.begin(), out.end(), 0.0);
                out[j] = 1.0;
                return;
            }
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            out[j] = weights_[j] / (x - nodes_[j]);
            denom += out[j];
        }
        for (std::size_t j = 0; j < n; ++j) out[j] /= denom;
    }

    [[nodiscard]] Vector eval_all(double x) const {
        Vector values(static_cast<Eigen::Index>(size()));
        eval_all(x, std::span<double>(values.data(), size()));
        return values;
    }

    [[nodiscard]] double eval(std::size_t i, double x) const {
        std::vector<double> values(size());
        eval_all(x, values);
        return values[i];
    }

private:
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

/// Value of the i-th Lagrange cardinal function for `nodes` at x.
[[nodiscard]] inline double lagrange_eval(std::span<const double> nodes, std::size_t i, double x) {
    return LagrangeBasis(std::vector<double>(nodes.begin(), nodes.end())).eval(i, x);
}

/// How moments of the data against the kernel basis are formed.
enum class MomentRule {
    /// Q(k, r) = h int phi_k psi_r, integrated exactly.
    exact,
    /// Q(k, r) = h b_r phi_k(gamma_r): the Radau quadrature of the product,
    /// i.e. the Runge-Kutta discretisation of the collocation integrals.
    runge_kutta,
};

/// Step-independent tables for collocation data of `stages` nodes and kernel
/// interpolation of degree q, on a uniform grid with step h.
///
/// Rows of P are collocation nodes, columns kernel basis functions. Q couples
/// kernel basis and data basis over one fine interval and carries the factor h.
/// A1 / A2 express a parent-interval kernel basis in its left / right child:
/// A1(i, j) = phi_i(xi_j / 2), A2(i, j) = phi_i((1 + xi_j) / 2).
///
/// With aggregation n_min > 1 the kernel basis lives on macro intervals of
/// n_min fine cells; P_sub[c] and Q_sub[c] are the coupling tables for the
/// c-th fine cell inside a macro interval (P = P_sub[0] when n_min = 1).
struct BasisTables {
    int stages = 1;
    int q = 0;
    int n_min = 1;
    double h = 1.0;
    MomentRule rule = MomentRule::exact;
    LagrangeBasis collocation;  // data basis psi on [0, 1]
    LagrangeBasis kernel;       // kernel basis phi on [0, 1]
    Matrix P;                   // stages x (q+1), fine level
    Matrix Q;                   // (q+1) x stages, fine level
    Matrix A1;                  // (q+1) x (q+1)
    Matrix A2;                  // (q+1) x (q+1)
    std::vector<Matrix> P_sub;  // n_min tables, stages x (q+1)
    std::vector<Matrix> Q_sub;  // n_min tables, (q+1) x stages
    Matrix runge_kutta_A;       // stages x stages: int_0^{gamma_j} psi_r
    Vector runge_kutta_b;       // int_0^1 psi_r

    [[nodiscard]] Eigen::Index data_size() const { return stages; }
    [[nodiscard]] Eigen::Index kernel_size() const { return q + 1; }
    [[nodiscard]] const Matrix& transfer(int child) const { return child == 1 ? A1 : A2; }
};

namespace detail {

// Q-type table: h * int_0^1 phi_k(map(x)) psi_r(x) dx with map(x) = (offset + x) / scale.
inline Matrix coupling_table(const LagrangeBasis& kernel, const LagrangeBasis& data, double h,
                             double offset, double scale) {
    const int points = (kernel.degree() + data.degree()) / 2 + 2;
    const QuadratureRule rule = gauss_legendre(points);
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(kernel.size()),
                              static_cast<Eigen::Index>(data.size()));
    for (std::size_t g = 0; g < rule.size(); ++g) {
        const double x = rule.nodes[g];
        const Vector phi = kernel.eval_all((offset + x) / scale);
        const Vector psi = data.eval_all(x);
        out.noalias() += (h * rule.weights[g]) * phi * psi.transpose();
    }
    return out;
}

}  // namespace detail

/// Builds P, Q, A1, A2 (and the aggregated sub-tables) for Radau IIA
/// collocation with `stages` nodes and Chebyshev kernel nodes of degree q.
/// `rule` selects exact or Radau-quadrature moments.
[[nodiscard]] inline BasisTables build_tables(int stages, int q, double h, int n_min = 1,
                                              MomentRule rule = MomentRule::exact) {
    if (stages < 1 || q < 0 || !(h > 0.0) || n_min < 1) {
        throw std::invalid_argument("build_tables: need stages >= 1, q >= 0, h > 0, n_min >= 1");
    }
    BasisTables t;
    t.stages = stages;
    t.q = q;
    t.h = h;
    t.n_min = n_min;
    t.rule = rule;
    t.collocation = LagrangeBasis(radau_nodes(stages));
    t.kernel = LagrangeBasis(chebyshev_nodes(q));

    const auto nk = static_cast<Eigen::Index>(q + 1);
    const auto ns = static_cast<Eigen::Index>(stages);
    auto p_table = [&](double offset, double scale) {
        Matrix out(ns, nk);
        for (Eigen::Index j = 0; j < ns; ++j) {
            out.row(j) = t.kernel.eval_all((offset + t.collocation.node(j)) / scale).transpose();
        }
        return out;
    };
    // Runge-Kutta form of the collocation method (A(j, r) = int_0^{gamma_j} psi_r).
    const QuadratureRule gauss = gauss_legendre(stages + 1);
    t.runge_kutta_A = Matrix::Zero(ns, ns);
    t.runge_kutta_b = Vector::Zero(ns);
    for (Eigen::Index j = 0; j < ns; ++j) {
        const double upper = t.collocation.node(j);
        for (std::size_t g = 0; g < gauss.size(); ++g) {
            t.runge_kutta_A.row(j) +=
                (upper * gauss.weights[g]) * t.collocation.eval_all(upper * gauss.nodes[g]).transpose();
        }
    }
    for (std::size_t g = 0; g < gauss.size(); ++g) {
        t.runge_kutta_b += gauss.weights[g] * t.collocation.eval_all(gauss.nodes[g]);
    }

    auto q_table = [&](double offset, double scale) {
        if (rule == MomentRule::exact) {
            return detail::coupling_table(t.kernel, t.collocation, h, offset, scale);
        }
        Matrix out(nk, ns);
        for (Eigen::Index r = 0; r < ns; ++r) {
            out.col(r) = (h * t.runge_kutta_b(r)) *
                         t.kernel.eval_all((offset + t.collocation.node(r)) / scale);
        }
        return out;
    };
    t.P = p_table(0.0, 1.0);
    t.Q = q_table(0.0, 1.0);
    for (int c = 0; c < n_min; ++c) {
        t.P_sub.push_back(p_table(c, n_min));
        t.Q_sub.push_back(q_table(c, n_min));
    }

    t.A1.resize(nk, nk);
    t.A2.resize(nk, nk);
    for (Eigen::Index j = 0; j < nk; ++j) {
        t.A1.col(j) = t.kernel.eval_all(0.5 * t.kernel.node(j));
        t.A2.col(j) = t.kernel.eval_all(0.5 * (1.0 + t.kernel.node(j)));
    }

    return t;
}

}  // namespace volterra_h2
