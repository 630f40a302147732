#pragma once

#include "volterra_h2/evaluator_common.hpp"
#include "volterra_h2/hierarchy.hpp"

#include <bit>
#include <cstdint>
#include <deque>
#include <map>
#include <utility>
#include <vector>

namespace volterra_h2 {

/// Streaming evaluation of y(t) = int_0^t k(t, s) f(s) ds with O(log N) memory
/// and O(N) work.
///
/// The farfield [0, t^(m-2)] is split into dyadic intervals on levels
/// 1..L(m); on each level the two most recent moment vectors and the local
/// expansion u are kept. Moments of a parent interval are assembled from its
/// children with A1/A2 and expansions are passed down with the transposes.
///
/// With n_min > 1 the hierarchy runs over macro intervals of n_min fine cells.
/// The cells of the current and the previous macro interval are then treated
/// densely from a ring of the last 2 n_min data blocks. For transfer kernels
/// with the convolution quadrature rule this whole near region uses the
/// Radau IIA convolution quadrature weights.
class H2Evaluator {
public:
    H2Evaluator(Kernel kernel, const EvaluatorOptions& options)
        : kernel_(std::move(kernel)), options_(options) {
        detail::check_options(options_);
        tables_ = build_tables(options_.stages, options_.q, options_.h, options_.n_min, options_.rule);
        macro_length_ = options_.h * options_.n_min;
        const double horizon = options_.horizon_hint.value_or(65536.0 * options_.h);
        if (kernel_.is_transfer()) validate_transfer(kernel_, options_.h, std::max(horizon, 2.0 * options_.h));
        const Eigen::Index nk = tables_.kernel_size();
        macro_older_ = Matrix::Zero(nk, options_.dim);
        macro_newer_ = Matrix::Zero(nk, options_.dim);
        macro_current_ = Matrix::Zero(nk, options_.dim);
        if (detail::uses_convolution_quadrature(kernel_)) {
            cq_ = radau_cq_weights(kernel_, tables_, 2 * static_cast<std::size_t>(options_.n_min));
        }
    }

    /// All contributions to the stage values of step m = steps() + 1 except the
    /// self coupling K^{m,m} f^m. Advances the hierarchy when m opens a new
    /// macro interval.
    Matrix history_part() {
        if (awaiting_commit_) throw PhaseError("history_part called twice without commit");
        const std::int64_t m = step_ + 1;
        try {
            const std::int64_t n_min = options_.n_min;
            const std::int64_t macro = (m - 1) / n_min + 1;
            const auto cell = static_cast<std::size_t>((m - 1) % n_min);
            if (cell == 0) {
                if (m > 1) {
                    macro_older_ = std::move(macro_newer_);
                    macro_newer_ = std::move(macro_current_);
                    macro_current_ = Matrix::Zero(tables_.kernel_size(), options_.dim);
                }
                advance_hierarchy(macro);
            }

            Matrix w = Matrix::Zero(options_.stages, options_.dim);
            if (!levels_.empty() && max_level(macro) >= 1) {
                w.noalias() += tables_.P_sub[cell] * levels_[0].u;
            }
            // fine cells of the previous and current macro interval
            const std::int64_t first = detail::near_region_start(m, options_.n_min);
            if (!cq_.empty()) {
                for (std::int64_t n = first; n < m; ++n) {
                    w.noalias() += cq_[static_cast<std::size_t>(m - n)] * ring_at(n);
                    ++near_multiplies_;
                }
                self_ = &cq_[0];
            } else {
                for (std::int64_t n = first; n + 2 <= m; ++n) {
                    w.noalias() += fine_.get(kernel_, tables_, m, n) * ring_at(n);
                    ++near_multiplies_;
                }
                const NearfieldPair& pair = near_.get(kernel_, tables_, m);
                if (m >= 2) w.noalias() += pair.previous * ring_at(m - 1);
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

    /// Completes step m with the data block f^m (stages x dim) and returns y^m.
    Matrix commit(const Matrix& f) {
        if (!awaiting_commit_) throw PhaseError("commit called before history_part");
        if (f.rows() != options_.stages || f.cols() != options_.dim) {
            throw std::invalid_argument("data block must be stages x dim");
        }
        const std::int64_t m = step_ + 1;
        Matrix y = history_ + *self_ * f;
        const auto cell = static_cast<std::size_t>((m - 1) % options_.n_min);
        macro_current_.noalias() += tables_.Q_sub[cell] * f;
        ring_.push_back(f);
        if (static_cast<int>(ring_.size()) > 2 * options_.n_min) ring_.pop_front();
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
    [[nodiscard]] std::vector<double> next_times() const {
        return detail::collocation_times(tables_, step_ + 1);
    }

    /// Kernel (q+1) x (q+1) block multiplies in the farfield.
    [[nodiscard]] std::int64_t block_multiplies() const { return block_multiplies_; }
    /// Transfer multiplies (A1, A2 and their transposes).
    [[nodiscard]] std::int64_t transfer_multiplies() const { return transfer_multiplies_; }
    /// Dense multiplies for fine cells inside the two most recent macro intervals.
    [[nodiscard]] std::int64_t near_multiplies() const { return near_multiplies_; }
    /// Moment and expansion buffers alive now: three per level plus the three macro moments.
    [[nodiscard]] std::int64_t live_buffers() const {
        return 3 * static_cast<std::int64_t>(levels_.size()) + 3;
    }
    [[nodiscard]] std::int64_t peak_buffers() const { return peak_buffers_; }
    [[nodiscard]] int levels() const { return static_cast<int>(levels_.size()); }
    [[nodiscard]] std::size_t ring_size() const { return ring_.size(); }
    [[nodiscard]] std::size_t cached_blocks() const { return coeff_cache_.size(); }

private:
    struct Level {
        Matrix g_recent;    // moment of the interval at position C - 2
        Matrix g_previous;  // moment of the interval at position C - 3
        Matrix u;           // local expansion on the row interval C
    };

    const Matrix& ring_at(std::int64_t n) const {
        const std::int64_t back = step_ - n;  // 0 for the most recent block
        return ring_[ring_.size() - 1 - static_cast<std::size_t>(back)];
    }

    const Matrix& block_coeffs(int level, std::int64_t row, std::int64_t col) {
        const LevelIndex r{level, row};
        const LevelIndex c{level, col};
        if (kernel_.is_convolution()) {
            const auto key = std::make_pair(level, row - col);
            auto it = coeff_cache_.find(key);
            if (it != coeff_cache_.end()) return it->second;
            return coeff_cache_
                .emplace(key, farfield_block_coeffs(kernel_, r, c, tables_, macro_length_).values)
                .first->second;
        }
        scratch_ = farfield_block_coeffs(kernel_, r, c, tables_, macro_length_).values;
        return scratch_;
    }

    /// Hierarchy update when macro interval M starts: refresh the moment
    /// buffers and expansions of every level whose row interval changed.
    void advance_hierarchy(std::int64_t M) {
        const int top = max_level(M);
        if (top == 0) return;
        const Eigen::Index nk = tables_.kernel_size();
        while (static_cast<int>(levels_.size()) < top) {
            levels_.push_back({Matrix::Zero(nk, options_.dim), Matrix::Zero(nk, options_.dim),
                               Matrix::Zero(nk, options_.dim)});
        }
        peak_buffers_ = std::max(peak_buffers_, live_buffers());

        // row intervals change on levels 1 .. 1 + v2(M - 1)
        const int changed = std::min(
            top, 1 + static_cast<int>(std::countr_zero(static_cast<std::uint64_t>(M - 1))));

        // Moments, coarse to fine so that level l reads level l-1 before it shifts.
        for (int level = changed; level >= 1; --level) {
            Level& cur = levels_[static_cast<std::size_t>(level - 1)];
            cur.g_previous = std::move(cur.g_recent);
            if (level == 1) {
                cur.g_recent = macro_older_;
            } else {
                const Level& child = levels_[static_cast<std::size_t>(level - 2)];
                cur.g_recent = tables_.A1 * child.g_previous + tables_.A2 * child.g_recent;
                transfer_multiplies_ += 2;
            }
        }

        // Expansions, coarse to fine.
        for (int level = changed; level >= 1; --level) {
            Level& cur = levels_[static_cast<std::size_t>(level - 1)];
            const std::int64_t row = ancestor_index(M, level);
            Matrix u = block_coeffs(level, row, row - 2) * cur.g_recent;
            ++block_multiplies_;
            if (row % 2 == 0) {
                u.noalias() += block_coeffs(level, row, row - 3) * cur.g_previous;
                ++block_multiplies_;
            }
            if (level < top) {
                const Matrix& transfer = (row % 2 == 1) ? tables_.A1 : tables_.A2;
                u.noalias() += transfer.transpose() * levels_[static_cast<std::size_t>(level)].u;
                ++transfer_multiplies_;
            }
            cur.u = std::move(u);
        }
    }

    Kernel kernel_;
    EvaluatorOptions options_;
    BasisTables tables_;
    double macro_length_ = 1.0;

    std::vector<Level> levels_;
    Matrix macro_older_;    // moment of macro interval M - 2
    Matrix macro_newer_;    // moment of macro interval M - 1
    Matrix macro_current_;  // running moment of macro interval M
    std::deque<Matrix> ring_;

    std::map<std::pair<int, std::int64_t>, Matrix> coeff_cache_;
    Matrix scratch_;
    detail::NearfieldCache near_;
    detail::FineBlockCache fine_;
    std::vector<Matrix> cq_;  // convolution quadrature weights W_0 .. W_{2 n_min}
    const Matrix* self_ = nullptr;
    Matrix history_;

    std::int64_t step_ = 0;
    std::int64_t block_multiplies_ = 0;
    std::int64_t transfer_multiplies_ = 0;
    std::int64_t near_multiplies_ = 0;
    std::int64_t peak_buffers_ = 3;
    bool awaiting_commit_ = false;
};

}  // namespace volterra_h2
