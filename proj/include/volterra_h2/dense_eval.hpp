#pragma once

#include "volterra_h2/evaluator_common.hpp"

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace volterra_h2 {

/// Uncompressed evaluation of y(t) = int_0^t k(t, s) f(s) ds on a uniform grid.
///
/// Every moment vector g^n = Q f^n is kept, and step m forms
/// y^m = P sum_{n <= m-2} k^{m,n} g^n + K^{m,m-1} f^{m-1} + K^{m,m} f^m,
/// at a cost of m - 2 block multiplies. For transfer kernels with the
/// convolution quadrature rule, the cells of the previous and the current
/// macro interval of n_min cells use the Radau IIA convolution quadrature
/// weights instead, exactly as in the hierarchical evaluator. It serves as the
/// reference for the hierarchical evaluator and exposes the same two-phase
/// interface.
class DenseEvaluator {
public:
    DenseEvaluator(Kernel kernel, const EvaluatorOptions& options)
        : kernel_(std::move(kernel)), options_(options) {
        detail::check_options(options_);
        tables_ = build_tables(options_.stages, options_.q, options_.h, 1, options_.rule);
        if (detail::uses_convolution_quadrature(kernel_)) {
            cq_ = radau_cq_weights(kernel_, tables_, 2 * static_cast<std::size_t>(options_.n_min));
        }
    }

    /// Contribution of all data before the current cell to the stage values of
    /// step m = steps() + 1, i.e. everything except K^{m,m} f^m.
    Matrix history_part() {
        if (awaiting_commit_) throw PhaseError("history_part called twice without commit");
        const std::int64_t m = step_ + 1;
        try {
            const Eigen::Index nk = tables_.kernel_size();
            // with convolution quadrature the near region matches the hierarchical evaluator
            const std::int64_t far_end =
                cq_.empty() ? m - 1 : detail::near_region_start(m, options_.n_min);
            Matrix u = Matrix::Zero(nk, options_.dim);
            for (std::int64_t n = 1; n < far_end; ++n) {
                u.noalias() += blocks_.coefficients(kernel_, tables_, m, n) *
                               moments_[static_cast<std::size_t>(n - 1)];
                ++block_multiplies_;
            }
            Matrix w = tables_.P * u;
            if (!cq_.empty()) {
                for (std::int64_t n = far_end; n < m; ++n) {
                    w.noalias() += cq_[static_cast<std::size_t>(m - n)] * data_[static_cast<std::size_t>(n - 1)];
                }
                self_ = &cq_[0];
            } else {
                const NearfieldPair& pair = near_.get(kernel_, tables_, m);
                if (m >= 2) w.noalias() += pair.previous * data_.back();
                self_ = &pair.current;
            }
            history_ = w;
            awaiting_commit_ = true;
            return w;
        } catch (const PhaseError&) {
            throw;
        } catch (const std::exception& e) {
            throw StepError(m, e.what());
        }
    }

    /// K^{m,m} of the current step; valid between history_part and commit.
    [[nodiscard]] const Matrix& self_coupling() const {
        if (!awaiting_commit_) throw PhaseError("self_coupling requested outside a step");
        return *self_;
    }

    /// Completes step m with data block f^m (stages x dim) and returns y^m.
    Matrix commit(const Matrix& f) {
        if (!awaiting_commit_) throw PhaseError("commit called before history_part");
        check_block(f);
        Matrix y = history_ + *self_ * f;
        moments_.push_back(tables_.Q * f);
        data_.push_back(f);
        ++step_;
        awaiting_commit_ = false;
        return y;
    }

    /// history_part followed by commit.
    Matrix step(const Matrix& f) {
        history_part();
        return commit(f);
    }

    [[nodiscard]] std::int64_t steps() const { return step_; }
    [[nodiscard]] const BasisTables& tables() const { return tables_; }
    [[nodiscard]] const EvaluatorOptions& options() const { return options_; }
    [[nodiscard]] const Kernel& kernel() const { return kernel_; }
    [[nodiscard]] std::int64_t block_multiplies() const { return block_multiplies_; }
    [[nodiscard]] std::int64_t stored_moments() const {
        return static_cast<std::int64_t>(moments_.size());
    }
    /// All moments are kept, so the buffer count equals the step count.
    [[nodiscard]] std::int64_t peak_buffers() const { return stored_moments(); }
    /// Collocation times of the next step.
    [[nodiscard]] std::vector<double> next_times() const {
        return detail::collocation_times(tables_, step_ + 1);
    }

private:
    void check_block(const Matrix& f) const {
        if (f.rows() != options_.stages || f.cols() != options_.dim) {
            throw std::invalid_argument("data block must be stages x dim");
        }
    }

    Kernel kernel_;
    EvaluatorOptions options_;
    BasisTables tables_;
    std::vector<Matrix> moments_;
    std::vector<Matrix> data_;
    Matrix history_;
    detail::NearfieldCache near_;
    detail::FineBlockCache blocks_;
    std::vector<Matrix> cq_;
    const Matrix* self_ = nullptr;
    std::int64_t step_ = 0;
    std::int64_t block_multiplies_ = 0;
    bool awaiting_commit_ = false;
};

/// Data callback: the value f(t) in R^dim.
using DataSampler = std::function<Vector(double t)>;

/// Samples f at the collocation times of one cell, as a stages x dim block.
[[nodiscard]] inline Matrix sample_block(const DataSampler& f, const std::vector<double>& times,
                                         int dim) {
    Matrix block(static_cast<Eigen::Index>(times.size()), dim);
    for (std::size_t j = 0; j < times.size(); ++j) {
        const Vector v = f(times[j]);
        if (v.size() != dim) throw std::invalid_argument("data sampler returned wrong dimension");
        block.row(static_cast<Eigen::Index>(j)) = v.transpose();
    }
    return block;
}

/// Runs the dense evaluator for N steps and returns y^1..y^N.
[[nodiscard]] inline std::vector<Matrix> dense_evaluate(const Kernel& kernel,
                                                        const DataSampler& data, std::int64_t N,
                                                        const EvaluatorOptions& options) {
    if (N < 1) throw std::invalid_argument("dense_evaluate: N must be >= 1");
    DenseEvaluator eval(kernel, options);
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(N));
    for (std::int64_t m = 1; m <= N; ++m) {
        out.push_back(eval.step(sample_block(data, eval.next_times(), options.dim)));
    }
    return out;
}

}  // namespace volterra_h2
