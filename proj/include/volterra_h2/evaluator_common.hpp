#pragma once

#include "volterra_h2/basis.hpp"
#include "volterra_h2/kernel.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace volterra_h2 {

/// Construction parameters shared by the dense and the hierarchical evaluator.
struct EvaluatorOptions {
    double h = 1.0;
    int stages = 1;  // collocation nodes per step (Radau IIA)
    int q = 0;       // kernel interpolation degree
    int dim = 1;     // data dimension d
    int n_min = 1;   // aggregation factor, power of two
    MomentRule rule = MomentRule::exact;
    /// Largest time the run is expected to reach; only used to check the
    /// transfer function on a representative contour. Defaults to 2^16 h.
    std::optional<double> horizon_hint;
};

/// Two-phase evaluator protocol: history_part() must precede commit() in each step.
class PhaseError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Wraps an exception raised while processing step m with the step index.
class StepError : public std::runtime_error {
public:
    StepError(std::int64_t step, const std::string& what)
        : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
    [[nodiscard]] std::int64_t step() const { return step_; }

private:
    std::int64_t step_;
};

/// Timing and counter readout of one evaluator run.
struct RunStats {
    double setup_ms = 0.0;
    double run_ms = 0.0;
    std::int64_t peak_buffers = 0;
    std::int64_t block_multiplies = 0;
};

namespace detail {

inline void check_options(const EvaluatorOptions& o) {
    if (!(o.h > 0.0)) throw std::invalid_argument("evaluator: h must be positive");
    if (o.stages < 1) throw std::invalid_argument("evaluator: need at least one stage");
    if (o.q < 0) throw std::invalid_argument("evaluator: q must be >= 0");
    if (o.dim < 1) throw std::invalid_argument("evaluator: dim must be >= 1");
    if (o.n_min < 1 || (o.n_min & (o.n_min - 1)) != 0) {
        throw std::invalid_argument("evaluator: n_min must be a power of two");
    }
}

/// Collocation times (m - 1 + gamma_j) h of fine cell m.
inline std::vector<double> collocation_times(const BasisTables& t, std::int64_t m) {
    std::vector<double> out(static_cast<std::size_t>(t.stages));
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = (static_cast<double>(m - 1) + t.collocation.node(j)) * t.h;
    }
    return out;
}

/// Kernel interpolation nodes (n - 1 + xi_k) h of fine cell n.
inline std::vector<double> kernel_times(const BasisTables& t, std::int64_t n) {
    std::vector<double> out(t.kernel.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = (static_cast<double>(n - 1) + t.kernel.node(k)) * t.h;
    }
    return out;
}

/// First fine cell of the near region of step m: the previous and the current
/// macro interval of n_min cells.
inline std::int64_t near_region_start(std::int64_t m, int n_min) {
    const std::int64_t macro = (m - 1) / n_min + 1;
    return std::max<std::int64_t>(1, (macro - 2) * n_min + 1);
}

/// True when the kernel's near region is handled by convolution quadrature.
inline bool uses_convolution_quadrature(const Kernel& kernel) {
    return kernel.is_transfer() && kernel.nearfield_rule() == NearfieldRule::convolution_quadrature;
}

/// Nearfield matrices per step, computed once for convolution kernels.
class NearfieldCache {
public:
    const NearfieldPair& get(const Kernel& kernel, const BasisTables& tables, std::int64_t m) {
        if (kernel.is_convolution()) {
            // K^{m,m} is step independent; K^{m,m-1} too once m >= 2.
            if (m == 1) {
                if (!first_) first_ = nearfield_matrices(kernel, tables, 1);
                return *first_;
            }
            if (!steady_) steady_ = nearfield_matrices(kernel, tables, 2);
            return *steady_;
        }
        current_ = nearfield_matrices(kernel, tables, m);
        return current_;
    }

private:
    std::optional<NearfieldPair> first_;
    std::optional<NearfieldPair> steady_;
    NearfieldPair current_;
};

/// Level-1 blocks P k^{m,n} Q between two separated fine cells, cached by
/// m - n for convolution kernels.
class FineBlockCache {
public:
    const Matrix& get(const Kernel& kernel, const BasisTables& tables, std::int64_t m,
                      std::int64_t n) {
        if (kernel.is_convolution()) {
            auto it = cache_.find(m - n);
            if (it != cache_.end()) return it->second;
            return cache_.emplace(m - n, compute(kernel, tables, m, n)).first->second;
        }
        scratch_ = compute(kernel, tables, m, n);
        return scratch_;
    }

    /// Raw kernel coefficient block k^{m,n} (no P, Q), same caching rule.
    const Matrix& coefficients(const Kernel& kernel, const BasisTables& tables, std::int64_t m,
                               std::int64_t n) {
        if (kernel.is_convolution()) {
            auto it = coeff_.find(m - n);
            if (it != coeff_.end()) return it->second;
            return coeff_.emplace(m - n, sample(kernel, tables, m, n)).first->second;
        }
        coeff_scratch_ = sample(kernel, tables, m, n);
        return coeff_scratch_;
    }

private:
    static Matrix sample(const Kernel& kernel, const BasisTables& tables, std::int64_t m,
                         std::int64_t n) {
        const auto t = kernel_times(tables, m);
        const auto s = kernel_times(tables, n);
        return kernel.sample(t, s);
    }
    static Matrix compute(const Kernel& kernel, const BasisTables& tables, std::int64_t m,
                          std::int64_t n) {
        return tables.P * sample(kernel, tables, m, n) * tables.Q;
    }

    std::map<std::int64_t, Matrix> cache_;
    std::map<std::int64_t, Matrix> coeff_;
    Matrix scratch_;
    Matrix coeff_scratch_;
};

}  // namespace detail

}  // namespace volterra_h2
