#include "volterra_h2/hierarchy.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <tuple>
#include <vector>

namespace volterra_h2 {
namespace {

TEST(AncestorIndex, KnownValues) {
    EXPECT_EQ(ancestor_index(14, 3), 4);
    EXPECT_EQ(ancestor_index(7, 2), 4);
    for (std::int64_t n = 1; n < 100; ++n) EXPECT_EQ(ancestor_index(n, 1), n);
}

TEST(AncestorIndex, CellLiesInsideAncestor) {
    for (std::int64_t n = 1; n <= 1000; ++n) {
        for (int level = 1; level <= 11; ++level) {
            const LevelIndex a{level, ancestor_index(n, level)};
            EXPECT_LE(a.first_cell(), n);
            EXPECT_GE(a.last_cell(), n);
        }
    }
}

TEST(LevelIndex, ChildrenTileParent) {
    const double h = 0.25;
    for (int level = 2; level <= 6; ++level) {
        for (std::int64_t n = 1; n <= 20; ++n) {
            const LevelIndex parent{level, n};
            const LevelIndex left{level - 1, 2 * n - 1};
            const LevelIndex right{level - 1, 2 * n};
            EXPECT_DOUBLE_EQ(parent.begin(h), left.begin(h));
            EXPECT_DOUBLE_EQ(left.end(h), right.begin(h));
            EXPECT_DOUBLE_EQ(parent.end(h), right.end(h));
            EXPECT_EQ(left.parent(), parent);
            EXPECT_EQ(right.parent(), parent);
            EXPECT_TRUE(left.is_left_child());
            EXPECT_FALSE(right.is_left_child());
        }
    }
}

TEST(MaxLevel, KnownValues) {
    EXPECT_EQ(max_level(14), 3);
    EXPECT_EQ(max_level(4), 1);
    EXPECT_EQ(max_level(2), 0);
    EXPECT_EQ(max_level(1), 0);
}

TEST(BlockCount, RowFourteen) {
    EXPECT_EQ(block_count(14, 3), 2);
    EXPECT_EQ(block_count(14, 2), 1);
    EXPECT_EQ(block_count(14, 1), 2);
}

TEST(BlockCount, OutOfRangeThrows) {
    EXPECT_THROW((void)block_count(2, 1), std::out_of_range);
    EXPECT_THROW((void)block_count(14, 4), std::out_of_range);
    EXPECT_THROW((void)block_count(14, 0), std::out_of_range);
}

TEST(BlockCount, TelescopesToFarfieldLength) {
    for (std::int64_t m = 3; m <= 5000; ++m) {
        std::int64_t cells = 0;
        for (int level = 1; level <= max_level(m); ++level) {
            cells += block_count(m, level) * (std::int64_t{1} << (level - 1));
        }
        EXPECT_EQ(cells, m - 2) << "m = " << m;
    }
}

TEST(BlockCount, OneIffAncestorIsLeftChild) {
    // B(m; l) = 1 iff the level-l ancestor of cell m - 1 sits left in its parent:
    // row C(m; l) minus the first farfield column is 2 then.
    for (std::int64_t m = 3; m <= 3000; ++m) {
        for (int level = 1; level <= max_level(m); ++level) {
            const LevelIndex a{level, ancestor_index(m, level)};
            EXPECT_EQ(block_count(m, level) == 1, a.is_left_child()) << m << " " << level;
        }
    }
}

std::vector<std::pair<int, std::int64_t>> entries_of(std::int64_t m) {
    std::vector<std::pair<int, std::int64_t>> out;
    for (const auto& e : farfield_partition(m).entries) out.emplace_back(e.level, e.position);
    return out;
}

TEST(FarfieldPartition, KnownValues) {
    using E = std::vector<std::pair<int, std::int64_t>>;
    EXPECT_EQ(entries_of(14), (E{{3, 1}, {3, 2}, {2, 5}, {1, 11}, {1, 12}}));
    EXPECT_EQ(entries_of(3), (E{{1, 1}}));
    EXPECT_EQ(entries_of(5), (E{{2, 1}, {1, 3}}));
    EXPECT_TRUE(entries_of(1).empty());
    EXPECT_TRUE(entries_of(2).empty());
}

TEST(FarfieldPartition, UnionIsExactPrefix) {
    for (std::int64_t m = 3; m <= (std::int64_t{1} << 16); m += (m < 5000 ? 1 : 97)) {
        const auto part = farfield_partition(m);
        std::int64_t next = 1;
        int previous_level = 1 << 30;
        int per_level = 0;
        for (const auto& e : part.entries) {
            EXPECT_EQ(e.first_cell(), next) << "m = " << m;
            next = e.last_cell() + 1;
            per_level = e.level == previous_level ? per_level + 1 : 1;
            EXPECT_LE(e.level, previous_level);
            EXPECT_LE(per_level, 2);
            previous_level = e.level;
        }
        EXPECT_EQ(next, m - 1);
    }
}

TEST(CoarseningLevel, KnownValues) {
    EXPECT_EQ(coarsening_level(14), 1);
    EXPECT_EQ(coarsening_level(17), 4);
    EXPECT_EQ(coarsening_level(4), 1);  // max_level(4) = 1 caps the xor bound of 2
}

TEST(CoarseningLevel, BoundsEveryChangedLevel) {
    for (std::int64_t m = 4; m <= 5000; ++m) {
        const int bound = coarsening_level(m);
        for (int level = 1; level <= max_level(m); ++level) {
            const bool is_new = level > max_level(m - 1);
            const bool changed = is_new || block_count(m, level) != block_count(m - 1, level);
            if (changed) {
                EXPECT_LE(level, bound) << "m = " << m;
            }
        }
    }
}

TEST(AdmissibleBlocks, RejectsNonPowerOfTwo) {
    EXPECT_THROW((void)admissible_blocks(6), std::invalid_argument);
    EXPECT_THROW((void)admissible_blocks(0), std::invalid_argument);
}

TEST(AdmissibleBlocks, SmallGrids) {
    const auto two = admissible_blocks(2);
    for (const auto& b : two) EXPECT_TRUE(b.nearfield);
    EXPECT_EQ(two.size(), 3u);

    std::set<std::tuple<std::int64_t, std::int64_t, int>> far;
    for (const auto& b : admissible_blocks(4)) {
        if (!b.nearfield) far.insert({b.row.position, b.col.position, b.row.level});
    }
    EXPECT_EQ(far, (std::set<std::tuple<std::int64_t, std::int64_t, int>>{{3, 1, 1}, {4, 1, 1}, {4, 2, 1}}));
}

TEST(AdmissibleBlocks, TileLowerTriangleAndMatchRows) {
    for (std::int64_t N : {4, 16, 64, 256}) {
        std::vector<int> hits(static_cast<std::size_t>(N * N), 0);
        const auto blocks = admissible_blocks(N);
        for (const auto& b : blocks) {
            for (auto r = b.row.first_cell(); r <= b.row.last_cell(); ++r)
                for (auto c = b.col.first_cell(); c <= b.col.last_cell(); ++c)
                    ++hits[static_cast<std::size_t>((r - 1) * N + c - 1)];
        }
        for (std::int64_t r = 1; r <= N; ++r)
            for (std::int64_t c = 1; c <= N; ++c)
                EXPECT_EQ(hits[static_cast<std::size_t>((r - 1) * N + c - 1)], c <= r ? 1 : 0);

        // The column intervals of the farfield blocks containing row m are farfield_partition(m).
        for (std::int64_t m = 3; m <= N; ++m) {
            std::vector<std::pair<int, std::int64_t>> cols;
            for (const auto& b : blocks) {
                if (!b.nearfield && b.row.first_cell() <= m && m <= b.row.last_cell())
                    cols.emplace_back(b.col.level, b.col.position);
            }
            auto expected = entries_of(m);
            std::sort(cols.begin(), cols.end());
            std::sort(expected.begin(), expected.end());
            EXPECT_EQ(cols, expected) << "N = " << N << " m = " << m;
        }
    }
}

}  // namespace
}  // namespace volterra_h2
