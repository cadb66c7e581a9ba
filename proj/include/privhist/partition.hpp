#pragma once

#include <optional>
#include <string>
#include <vector>

#include "privhist/dp.hpp"
#include "privhist/histogram.hpp"

namespace privhist {

/// Quadtree block of face indices, inclusive bounds.
struct Region {
    int row_lo = 0;
    int row_hi = 0;
    int col_lo = 0;
    int col_hi = 0;

    int cell_count() const { return (row_hi - row_lo + 1) * (col_hi - col_lo + 1); }

    bool contains(CellIndex c) const {
        return c.row >= row_lo && c.row <= row_hi && c.col >= col_lo && c.col <= col_hi;
    }

    bool intersects(const RangeQuery& q) const {
        return row_lo <= q.row_hi && q.row_lo <= row_hi && col_lo <= q.col_hi &&
               q.col_lo <= col_hi;
    }

    friend bool operator==(const Region& a, const Region& b) {
        return a.row_lo == b.row_lo && a.row_hi == b.row_hi && a.col_lo == b.col_lo &&
               a.col_hi == b.col_hi;
    }
};

/// Disjoint cover of the grid with one noisy density per region.
struct PartitionSet {
    int rows = 0;
    int cols = 0;
    double delta = 0.0;  ///< uniformity threshold used
    std::vector<Region> regions;
    std::vector<double> densities;  ///< clamped to [0, 1]
};

/// Length-normalized visit counts recorded at ingestion; sums to the number
/// of trajectories. Throws if the histogram lacks the ingestion metadata.
Matrix normalized_counts(const SpatialHistogram& h);

/// L1 deviation of the region's normalized counts from their mean.
double uniformity_cost(const Matrix& m, const Region& region);

struct PartitionOptions {
    std::optional<double> delta;  ///< overrides the default 4/eps1^2
};

/// Recursive quadtree partitioning with noisy uniformity costs and noisy
/// densities. A node splits when its noisy cost exceeds the mean noisy cost
/// of its children by more than delta; single cells always become leaves.
/// Infinite budget components disable the corresponding noise, which is the
/// deterministic test mode.
PartitionSet partition(const SpatialHistogram& h, const PrivacyBudget& budget, NoiseSource& ns,
                       const PartitionOptions& options = {},
                       BudgetAccountant* accountant = nullptr);

/// Face/edge -> region lookup. An edge belongs to the region of its top/left
/// endpoint face.
class RegionMap {
public:
    RegionMap(int rows, int cols, std::vector<int> face_region)
        : rows_(rows), cols_(cols), face_region_(std::move(face_region)) {}

    int region_of_face(CellIndex c) const {
        return face_region_[static_cast<std::size_t>(c.row) * cols_ + c.col];
    }

    int region_of_edge(const EdgeRef& e) const {
        return face_region_[static_cast<std::size_t>(e.row) * cols_ + e.col];
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

private:
    int rows_;
    int cols_;
    std::vector<int> face_region_;
};

RegionMap region_of(const PartitionSet& ps);

std::string partition_to_json(const PartitionSet& ps);
PartitionSet partition_from_json(const std::string& text);

}  // namespace privhist
