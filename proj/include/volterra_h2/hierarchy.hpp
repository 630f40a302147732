#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace volterra_h2 {

/// A dyadic interval I^(position; level) of the coarsening hierarchy.
///
/// Level 1 is the uniform grid itself; an interval on level l has length
/// 2^(l-1) h and is the union of the intervals (2n-1, l-1) and (2n, l-1).
/// Positions and levels are 1-based.
struct LevelIndex {
    int level = 1;
    std::int64_t position = 1;

    [[nodiscard]] double length(double h) const {
        return static_cast<double>(std::int64_t{1} << (level - 1)) * h;
    }
    [[nodiscard]] double begin(double h) const {
        return static_cast<double>(position - 1) * length(h);
    }
    [[nodiscard]] double end(double h) const {
        return static_cast<double>(position) * length(h);
    }
    /// First and last fine cell (1-based) covered by this interval.
    [[nodiscard]] std::int64_t first_cell() const {
        return ((position - 1) << (level - 1)) + 1;
    }
    [[nodiscard]] std::int64_t last_cell() const { return position << (level - 1); }

    [[nodiscard]] LevelIndex parent() const { return {level + 1, (position + 1) / 2}; }
    [[nodiscard]] bool is_left_child() const { return (position % 2) == 1; }

    friend bool operator==(const LevelIndex&, const LevelIndex&) = default;
};

/// C(n; l) = ceil(n / 2^(l-1)): position of the level-l ancestor of fine cell n.
[[nodiscard]] constexpr std::int64_t ancestor_index(std::int64_t n, int level) {
    return ((n - 1) >> (level - 1)) + 1;
}

/// L(m) = ceil(log2 m) - 1, the number of levels in the farfield of step m.
/// Zero for m <= 2, where the farfield [0, t^(m-2)] is empty.
[[nodiscard]] constexpr int max_level(std::int64_t m) {
    if (m <= 2) return 0;
    // ceil(log2 m) = bit_width(m - 1) for m >= 2
    return static_cast<int>(std::bit_width(static_cast<std::uint64_t>(m - 1))) - 1;
}

namespace detail {
[[nodiscard]] constexpr int binary_digit(std::int64_t value, int level) {
    return static_cast<int>((value >> (level - 1)) & 1);
}
}  // namespace detail

/// B(m; l) in {1, 2}: number of farfield intervals on level l in row m.
///
/// Uses bin(m-1)_l + 1, which equals 2 exactly when the level-l ancestor of
/// fine cell m is a right child.
[[nodiscard]] inline int block_count(std::int64_t m, int level) {
    if (m < 3 || level < 1 || level > max_level(m)) {
        throw std::out_of_range("block_count: level " + std::to_string(level) +
                                " out of range for step " + std::to_string(m));
    }
    return detail::binary_digit(m - 1, level) + 1;
}

/// Ordered cover of [0, t^(m-2)] by hierarchy intervals, coarse to fine.
struct FarfieldPartition {
    std::int64_t step = 0;
    std::vector<LevelIndex> entries;
};

/// The splitting [0, t^(m-2)] = U_l U_n I^(P(m,n;l); l) with
/// P(m,n;l) = C(m;l) - n - 1. Within a level, entries are in ascending position.
[[nodiscard]] inline FarfieldPartition farfield_partition(std::int64_t m) {
    FarfieldPartition out{m, {}};
    for (int level = max_level(m); level >= 1; --level) {
        const std::int64_t row = ancestor_index(m, level);
        const int count = block_count(m, level);
        for (int n = count; n >= 1; --n) out.entries.push_back({level, row - n - 1});
    }
    return out;
}

/// Coarsest level whose block count changes between steps m-1 and m.
///
/// All levels 1..coarsening_level(m) change at step m and no other level does.
/// The xor trick gives 1 + (number of trailing zeros of m-1); it is capped at
/// max_level(m) because a freshly created level counts as changed.
[[nodiscard]] inline int coarsening_level(std::int64_t m) {
    if (m < 3) return 0;
    const auto flips = static_cast<std::uint64_t>((m - 1) ^ (m - 2));
    const int bound = static_cast<int>(std::bit_width(flips));  // 1 + floor(log2(xor))
    return bound < max_level(m) ? bound : max_level(m);
}

/// One square cell of the adaptive mesh: rows are targets t, columns sources s.
struct AdmissibleBlock {
    LevelIndex row;
    LevelIndex col;
    bool nearfield = false;
};

namespace detail {
// Closed dyadic intervals on one level intersect iff their positions differ by <= 1.
[[nodiscard]] constexpr bool touches(std::int64_t a, std::int64_t b) {
    return (a > b ? a - b : b - a) <= 1;
}
}  // namespace detail

/// Enumerates the adaptive hierarchical mesh over the lower triangle of an
/// N x N cell grid (N a power of two): the nearfield cells (n in {m-1, m}) on
/// level 1 and every admissible farfield block, i.e. disjoint intervals whose
/// parents intersect.
[[nodiscard]] inline std::vector<AdmissibleBlock> admissible_blocks(std::int64_t N) {
    if (N < 1 || !std::has_single_bit(static_cast<std::uint64_t>(N))) {
        throw std::invalid_argument("admissible_blocks: N must be a power of two, got " +
                                    std::to_string(N));
    }
    std::vector<AdmissibleBlock> blocks;
    for (std::int64_t m = 1; m <= N; ++m) {
        if (m > 1) blocks.push_back({{1, m}, {1, m - 1}, true});
        blocks.push_back({{1, m}, {1, m}, true});
    }
    for (int level = 1; (std::int64_t{1} << level) <= N; ++level) {
        const std::int64_t count = N >> (level - 1);
        for (std::int64_t m = 1; m <= count; ++m) {
            for (std::int64_t n = m > 3 ? m - 3 : 1; n + 2 <= m; ++n) {
                if (detail::touches((m + 1) / 2, (n + 1) / 2)) {
                    blocks.push_back({{level, m}, {level, n}, false});
                }
            }
        }
    }
    return blocks;
}

}  // namespace volterra_h2
