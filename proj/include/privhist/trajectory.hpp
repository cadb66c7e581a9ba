#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "privhist/histogram.hpp"

namespace privhist {

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;
};

struct RawTrajectory {
    std::string id;
    std::vector<GeoPoint> points;
};

struct BoundingBox {
    double min_lat = 0.0;
    double min_lon = 0.0;
    double max_lat = 0.0;
    double max_lon = 0.0;
};

/// Square 2^k x 2^k grid laid over a bounding box. Rows follow latitude,
/// columns follow longitude.
struct GridSpec {
    BoundingBox bbox;
    int resolution = 8;  ///< k, grid is 2^k x 2^k

    int side() const { return 1 << resolution; }
};

void validate_grid_spec(const GridSpec& g);

/// Maps a trajectory onto the grid as a 4-adjacent, loop-free cell sequence.
/// Consecutive GPS points are connected by a supercover grid-line walk; the
/// sequence is truncated at the first revisited cell. Throws if any point
/// lies outside the bounding box.
std::vector<CellIndex> rasterize(const RawTrajectory& t, const GridSpec& g);

/// Parses `traj_id,seq,lat,lon` CSV (extra columns are ignored). Rows are
/// grouped by traj_id and ordered by seq; trajectories come out in first-
/// appearance order.
std::vector<RawTrajectory> parse_csv(std::istream& in);

void write_csv(std::ostream& out, std::span<const RawTrajectory> trajectories);

/// Random-walk trajectories with uniformly distributed start cells.
/// Deterministic under a fixed seed.
std::vector<RawTrajectory> gen_uniform(int n_traj, double mean_len, const GridSpec& g,
                                       std::uint64_t seed);

/// Random-walk trajectories with start cells and drift biased toward a
/// hotspot cell; larger concentration pulls mass tighter around it.
std::vector<RawTrajectory> gen_skewed(int n_traj, double mean_len, const GridSpec& g,
                                      CellIndex hotspot, double concentration,
                                      std::uint64_t seed);

}  // namespace privhist
