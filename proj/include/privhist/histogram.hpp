#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "privhist/matrix.hpp"

namespace privhist {

struct CellIndex {
    int row = 0;
    int col = 0;

    friend bool operator==(const CellIndex& a, const CellIndex& b) {
        return a.row == b.row && a.col == b.col;
    }
};

enum class EdgeKind {
    vertical,    ///< between (r,c) and (r,c+1), stored at edges_v(r,c)
    horizontal,  ///< between (r,c) and (r+1,c), stored at edges_h(r,c)
};

struct EdgeRef {
    EdgeKind kind = EdgeKind::vertical;
    int row = 0;
    int col = 0;

    friend bool operator==(const EdgeRef& a, const EdgeRef& b) {
        return a.kind == b.kind && a.row == b.row && a.col == b.col;
    }
};

/// Axis-aligned rectangle of cells, inclusive on all four bounds.
struct RangeQuery {
    int row_lo = 0;
    int row_hi = 0;
    int col_lo = 0;
    int col_hi = 0;

    bool contains(CellIndex c) const {
        return c.row >= row_lo && c.row <= row_hi && c.col >= col_lo && c.col <= col_hi;
    }

    static RangeQuery full_grid(int rows, int cols) { return {0, rows - 1, 0, cols - 1}; }

    friend bool operator==(const RangeQuery& a, const RangeQuery& b) {
        return a.row_lo == b.row_lo && a.row_hi == b.row_hi && a.col_lo == b.col_lo &&
               a.col_hi == b.col_hi;
    }
};

/// Grid summary of a trajectory data set: per-cell visit counts (faces) plus
/// crossing counts between adjacent cells (edges). Treated as an immutable
/// value after construction; algorithms that modify counts work on copies.
///
/// `normalized_faces` holds the length-normalized visit mass recorded at
/// ingestion (each trajectory spreads a total mass of 1 over its cells). It
/// is required by the partitioner and absent on synthetic histograms.
struct SpatialHistogram {
    int rows = 0;
    int cols = 0;
    Matrix faces;
    Matrix edges_v;  ///< rows x (cols-1)
    Matrix edges_h;  ///< (rows-1) x cols
    double total = 0.0;  ///< number of trajectories, public
    std::optional<Matrix> normalized_faces;

    SpatialHistogram() = default;
    SpatialHistogram(int rows_, int cols_)
        : rows(rows_),
          cols(cols_),
          faces(rows_, cols_),
          edges_v(rows_, cols_ > 0 ? cols_ - 1 : 0),
          edges_h(rows_ > 0 ? rows_ - 1 : 0, cols_) {}

    /// Total number of countable entries |H| = faces + edges.
    std::size_t entry_count() const {
        return faces.size() + edges_v.size() + edges_h.size();
    }
};

/// Builds a histogram from cell paths. Every path must be a loop-free
/// sequence of 4-adjacent in-bounds cells; each visited cell's face and each
/// crossed edge is incremented by one. Records length-normalized mass.
SpatialHistogram build_from_cell_paths(const std::vector<std::vector<CellIndex>>& paths,
                                       int rows, int cols);

/// Number of distinct trajectories intersecting the rectangle: sum of faces
/// inside minus sum of edges whose both endpoint faces are inside. Border
/// edges do not count.
double eval_range_query(const SpatialHistogram& h, const RangeQuery& q);

/// Batch evaluation, parallelized over queries. Per-query results are
/// bit-identical to eval_range_query regardless of thread count.
std::vector<double> eval_queries(const SpatialHistogram& h, std::span<const RangeQuery> queries);

/// Serial reference for eval_queries, kept for testing and benchmarks.
std::vector<double> eval_queries_serial(const SpatialHistogram& h,
                                        std::span<const RangeQuery> queries);

/// Returns the edges violating e <= min(adjacent faces) beyond `tol`.
std::vector<EdgeRef> check_consistency(const SpatialHistogram& h, double tol = 1e-9);

void validate_query(const SpatialHistogram& h, const RangeQuery& q);

std::string histogram_to_json(const SpatialHistogram& h);
SpatialHistogram histogram_from_json(const std::string& text);
void save_histogram(const SpatialHistogram& h, const std::string& path);
SpatialHistogram load_histogram(const std::string& path);

}  // namespace privhist
