#ifndef LEAVEN_SPATIAL_INDEX_HPP
#define LEAVEN_SPATIAL_INDEX_HPP

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "leaven/core.hpp"
#include "leaven/mesh.hpp"

namespace leaven {

struct CellIndex {
    std::int64_t i = 0;
    std::int64_t j = 0;
    std::int64_t k = 0;

    friend constexpr bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Uniform partition of space into cubes of side `cellSide`, starting at
/// `origin` with `dims` cells per axis. Cells are closed on their min face.
struct CellGrid {
    Vec3 origin;
    double cellSide = 1.0;
    std::array<std::int64_t, 3> dims{1, 1, 1};

    /// Smallest grid anchored at box.min whose cells cover the box.
    static CellGrid covering(const Aabb& box, double cellSide) {
        if (!(cellSide > 0.0)) throw Error(ErrorKind::InvalidConfig, "cell side must be positive");
        CellGrid grid{box.min, cellSide, {1, 1, 1}};
        const Vec3 extent = box.extent();
        for (int axis = 0; axis < 3; ++axis) {
            grid.dims[axis] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(extent[axis] / cellSide)));
        }
        return grid;
    }

    std::uint64_t cellCount() const {
        return static_cast<std::uint64_t>(dims[0]) * static_cast<std::uint64_t>(dims[1]) *
               static_cast<std::uint64_t>(dims[2]);
    }

    Vec3 upper() const {
        return origin + Vec3{static_cast<double>(dims[0]), static_cast<double>(dims[1]), static_cast<double>(dims[2])} *
                            cellSide;
    }

    bool inGrid(const CellIndex& c) const {
        return c.i >= 0 && c.j >= 0 && c.k >= 0 && c.i < dims[0] && c.j < dims[1] && c.k < dims[2];
    }

    /// Row-major flat id, x fastest.
    std::uint64_t flatId(const CellIndex& c) const {
        return static_cast<std::uint64_t>(c.i) +
               static_cast<std::uint64_t>(dims[0]) *
                   (static_cast<std::uint64_t>(c.j) + static_cast<std::uint64_t>(dims[1]) * static_cast<std::uint64_t>(c.k));
    }

    /// Cell containing p. Points on the max face (or within the clamping
    /// tolerance outside the grid) land in the boundary cell; anything further
    /// out is OutOfBounds.
    CellIndex cellOf(const Vec3& p) const {
        const double tolerance = 1e-9 * std::max(1.0, cellSide * static_cast<double>(std::max({dims[0], dims[1], dims[2]})));
        std::array<std::int64_t, 3> index{};
        for (int axis = 0; axis < 3; ++axis) {
            const double offset = p[axis] - origin[axis];
            const double span = cellSide * static_cast<double>(dims[axis]);
            if (!(offset >= -tolerance && offset <= span + tolerance))
                throw Error(ErrorKind::OutOfBounds, "point outside the cell grid");
            const auto raw = static_cast<std::int64_t>(std::floor(offset / cellSide));
            index[axis] = std::clamp<std::int64_t>(raw, 0, dims[axis] - 1);
        }
        return {index[0], index[1], index[2]};
    }

    Vec3 cellMin(const CellIndex& c) const {
        return origin + Vec3{static_cast<double>(c.i), static_cast<double>(c.j), static_cast<double>(c.k)} * cellSide;
    }
};

/// Large primes of the xor spatial hash.
inline constexpr std::uint64_t kHashPrime1 = 73856093;
inline constexpr std::uint64_t kHashPrime2 = 19349663;
inline constexpr std::uint64_t kHashPrime3 = 83492791;

/// (i*p1 xor j*p2 xor k*p3) mod tableSize with wrapping unsigned 64-bit
/// multiplication. Signed indices are reinterpreted as two's complement.
constexpr std::uint64_t spatialHash(std::int64_t i, std::int64_t j, std::int64_t k, std::uint64_t tableSize) {
    const std::uint64_t h = (static_cast<std::uint64_t>(i) * kHashPrime1) ^ (static_cast<std::uint64_t>(j) * kHashPrime2) ^
                            (static_cast<std::uint64_t>(k) * kHashPrime3);
    return h % tableSize;
}

/// Default table size: next power of two at or above twice the occupied cells.
inline std::uint64_t defaultTableSize(std::size_t occupiedCells) {
    return std::bit_ceil(std::max<std::uint64_t>(1, 2 * static_cast<std::uint64_t>(occupiedCells)));
}

/// One occupied cell: its contiguous run in the sorted candidate order and the
/// sample chosen for it, if any.
struct CellEntry {
    std::uint64_t cellId = 0;
    CellIndex cell;
    std::size_t start = 0;
    std::size_t count = 0;
    std::optional<std::size_t> sample;  // original candidate index
};

/// Occupied cells of a CellGrid keyed through the xor spatial hash. Collisions
/// are chained per bucket.
class HashGrid {
public:
    static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

    HashGrid() : buckets_(1, kNone) {}

    /// Stable-sorts candidates by flat cell id and records one entry per
    /// occupied cell. tableSize 0 selects defaultTableSize().
    HashGrid(const CellGrid& grid, std::span<const Vec3> positions, std::uint64_t tableSize = 0) {
        std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
        keyed.reserve(positions.size());
        for (std::size_t n = 0; n < positions.size(); ++n) keyed.emplace_back(grid.flatId(grid.cellOf(positions[n])), n);
        // (cellId, index) pairs are unique, so this ordering is the stable one.
        std::sort(keyed.begin(), keyed.end());

        order_.reserve(keyed.size());
        for (std::size_t n = 0; n < keyed.size(); ++n) {
            const auto [id, original] = keyed[n];
            if (entries_.empty() || entries_.back().cellId != id)
                entries_.push_back({id, grid.cellOf(positions[original]), n, 0, {}});
            ++entries_.back().count;
            order_.push_back(original);
        }

        tableSize_ = tableSize == 0 ? defaultTableSize(entries_.size()) : tableSize;
        buckets_.assign(static_cast<std::size_t>(tableSize_), kNone);
        next_.assign(entries_.size(), kNone);
        for (std::size_t e = entries_.size(); e-- > 0;) {
            const auto& c = entries_[e].cell;
            auto& head = buckets_[static_cast<std::size_t>(spatialHash(c.i, c.j, c.k, tableSize_))];
            next_[e] = head;
            head = static_cast<std::uint32_t>(e);
        }
    }

    std::uint64_t tableSize() const { return tableSize_; }
    std::span<const CellEntry> entries() const { return entries_; }
    std::span<CellEntry> entries() { return entries_; }

    /// Candidate indices in sorted order; entry runs index into this.
    std::span<const std::size_t> order() const { return order_; }

    std::span<const std::size_t> candidatesOf(const CellEntry& entry) const {
        return std::span<const std::size_t>(order_).subspan(entry.start, entry.count);
    }

    /// Entry position for an occupied cell, kNone when the cell is empty.
    std::uint32_t findIndex(const CellIndex& c) const {
        std::uint32_t e = buckets_[static_cast<std::size_t>(spatialHash(c.i, c.j, c.k, tableSize_))];
        while (e != kNone && entries_[e].cell != c) e = next_[e];
        return e;
    }

    const CellEntry* find(const CellIndex& c) const {
        const auto e = findIndex(c);
        return e == kNone ? nullptr : &entries_[e];
    }

    /// Number of entries chained in one bucket.
    std::size_t bucketLength(std::size_t bucket) const {
        std::size_t length = 0;
        for (auto e = buckets_[bucket]; e != kNone; e = next_[e]) ++length;
        return length;
    }

private:
    std::vector<CellEntry> entries_;
    std::vector<std::size_t> order_;
    std::vector<std::uint32_t> buckets_;
    std::vector<std::uint32_t> next_;
    std::uint64_t tableSize_ = 1;
};

inline HashGrid buildHashGrid(const CellGrid& grid, std::span<const Vec3> positions, std::uint64_t tableSize = 0) {
    return HashGrid(grid, positions, tableSize);
}

/// Entry positions of occupied cells within `ring` cells (Chebyshev) of
/// `cell`, center included, offsets outside the grid skipped.
inline std::vector<std::uint32_t> neighborEntryIndices(const HashGrid& hg, const CellGrid& grid, const CellIndex& cell,
                                                       int ring) {
    std::vector<std::uint32_t> found;
    for (std::int64_t dk = -ring; dk <= ring; ++dk) {
        for (std::int64_t dj = -ring; dj <= ring; ++dj) {
            for (std::int64_t di = -ring; di <= ring; ++di) {
                const CellIndex n{cell.i + di, cell.j + dj, cell.k + dk};
                if (!grid.inGrid(n)) continue;
                if (const auto e = hg.findIndex(n); e != HashGrid::kNone) found.push_back(e);
            }
        }
    }
    return found;
}

inline std::vector<const CellEntry*> neighborEntries(const HashGrid& hg, const CellGrid& grid, const CellIndex& cell,
                                                     int ring) {
    std::vector<const CellEntry*> found;
    for (auto e : neighborEntryIndices(hg, grid, cell, ring)) found.push_back(&hg.entries()[e]);
    return found;
}

/// Ring of cells needed so every point within `reach` of a cell is covered.
inline int ringFor(double reach, double cellSide) {
    return std::max(1, static_cast<int>(std::ceil(reach / cellSide)));
}

}  // namespace leaven

#endif  // LEAVEN_SPATIAL_INDEX_HPP
