#include "privhist/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "privhist/dp.hpp"

namespace privhist {

void validate_grid_spec(const GridSpec& g) {
    if (g.resolution < 1 || g.resolution > 12) {
        throw std::invalid_argument("grid spec: resolution must be in [1, 12]");
    }
    if (!(g.bbox.max_lat > g.bbox.min_lat) || !(g.bbox.max_lon > g.bbox.min_lon)) {
        throw std::invalid_argument("grid spec: bbox max must exceed min on both axes");
    }
    if (!std::isfinite(g.bbox.min_lat) || !std::isfinite(g.bbox.min_lon) ||
        !std::isfinite(g.bbox.max_lat) || !std::isfinite(g.bbox.max_lon)) {
        throw std::invalid_argument("grid spec: bbox must be finite");
    }
}

namespace {

struct GridGeometry {
    double origin_lat;
    double origin_lon;
    double cell_h;
    double cell_w;
    int side;

    // Continuous grid coordinates: x along columns, y along rows.
    double x_of(const GeoPoint& p) const { return (p.lon - origin_lon) / cell_w; }
    double y_of(const GeoPoint& p) const { return (p.lat - origin_lat) / cell_h; }

    CellIndex cell_of(const GeoPoint& p) const {
        int row = static_cast<int>(std::floor(y_of(p)));
        int col = static_cast<int>(std::floor(x_of(p)));
        row = std::clamp(row, 0, side - 1);
        col = std::clamp(col, 0, side - 1);
        return {row, col};
    }
};

GridGeometry geometry(const GridSpec& g) {
    const int side = g.side();
    return {g.bbox.min_lat, g.bbox.min_lon, (g.bbox.max_lat - g.bbox.min_lat) / side,
            (g.bbox.max_lon - g.bbox.min_lon) / side, side};
}

bool inside_bbox(const GeoPoint& p, const BoundingBox& b) {
    return p.lat >= b.min_lat && p.lat <= b.max_lat && p.lon >= b.min_lon && p.lon <= b.max_lon;
}

/// Supercover walk from the cell of p0 to the cell of p1, crossing one grid
/// line per step so every intermediate cell is 4-adjacent to its predecessor.
/// Appends all cells after the current one to `out`.
void walk_segment(const GridGeometry& geo, const GeoPoint& p0, const GeoPoint& p1,
                  CellIndex from, CellIndex to, std::vector<CellIndex>& out) {
    const double x0 = geo.x_of(p0);
    const double y0 = geo.y_of(p0);
    const double dx = geo.x_of(p1) - x0;
    const double dy = geo.y_of(p1) - y0;

    int col = from.col;
    int row = from.row;
    const int step_c = to.col > col ? 1 : -1;
    const int step_r = to.row > row ? 1 : -1;

    const double inf = std::numeric_limits<double>::infinity();
    // Parameter t in [0,1] at which the walk crosses the next column/row line.
    auto next_tx = [&](int cur_col) {
        if (dx == 0.0) return inf;
        const double boundary = cur_col + (step_c > 0 ? 1.0 : 0.0);
        return (boundary - x0) / dx;
    };
    auto next_ty = [&](int cur_row) {
        if (dy == 0.0) return inf;
        const double boundary = cur_row + (step_r > 0 ? 1.0 : 0.0);
        return (boundary - y0) / dy;
    };

    int cols_left = std::abs(to.col - col);
    int rows_left = std::abs(to.row - row);
    while (cols_left > 0 || rows_left > 0) {
        bool advance_col;
        if (cols_left == 0) {
            advance_col = false;
        } else if (rows_left == 0) {
            advance_col = true;
        } else {
            advance_col = next_tx(col) <= next_ty(row);
        }
        if (advance_col) {
            col += step_c;
            --cols_left;
        } else {
            row += step_r;
            --rows_left;
        }
        out.push_back({row, col});
    }
}

}  // namespace

std::vector<CellIndex> rasterize(const RawTrajectory& t, const GridSpec& g) {
    validate_grid_spec(g);
    if (t.points.empty()) {
        throw std::invalid_argument("rasterize: trajectory '" + t.id + "' has no points");
    }
    for (const GeoPoint& p : t.points) {
        if (!std::isfinite(p.lat) || !std::isfinite(p.lon)) {
            throw std::invalid_argument("rasterize: trajectory '" + t.id +
                                        "' has a non-finite coordinate");
        }
        if (!inside_bbox(p, g.bbox)) {
            std::ostringstream os;
            os << "rasterize: trajectory '" << t.id << "' rejected, point (" << p.lat << ", "
               << p.lon << ") outside bbox";
            throw std::invalid_argument(os.str());
        }
    }
    const GridGeometry geo = geometry(g);

    std::vector<CellIndex> full;
    full.push_back(geo.cell_of(t.points.front()));
    for (std::size_t i = 1; i < t.points.size(); ++i) {
        const CellIndex from = full.back();
        const CellIndex to = geo.cell_of(t.points[i]);
        walk_segment(geo, t.points[i - 1], t.points[i], from, to, full);
    }

    // Loop-free prefix: stop right before the first revisited cell.
    std::vector<CellIndex> result;
    std::unordered_set<long long> seen;
    for (const CellIndex& c : full) {
        const long long key = static_cast<long long>(c.row) * (geo.side + 1) + c.col;
        if (!seen.insert(key).second) break;
        result.push_back(c);
    }
    return result;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    std::size_t e = s.find_last_not_of(" \t");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, int line_no, const char* what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("csv line " + std::to_string(line_no) + ": non-numeric " +
                                 what + " '" + s + "'");
    }
}

long long parse_seq(const std::string& s, int line_no) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("csv line " + std::to_string(line_no) + ": non-numeric seq '" +
                                 s + "'");
    }
}

}  // namespace

std::vector<RawTrajectory> parse_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("csv: missing header");
    }
    const std::vector<std::string> header = split_fields(line);
    int idx_id = -1, idx_seq = -1, idx_lat = -1, idx_lon = -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name = trim(header[i]);
        if (name == "traj_id") idx_id = static_cast<int>(i);
        else if (name == "seq") idx_seq = static_cast<int>(i);
        else if (name == "lat") idx_lat = static_cast<int>(i);
        else if (name == "lon") idx_lon = static_cast<int>(i);
    }
    if (idx_id < 0 || idx_seq < 0 || idx_lat < 0 || idx_lon < 0) {
        throw std::runtime_error("csv: header must contain traj_id,seq,lat,lon");
    }
    const int needed = std::max({idx_id, idx_seq, idx_lat, idx_lon}) + 1;

    struct Row {
        long long seq;
        GeoPoint point;
    };
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<Row>> groups;
    std::unordered_map<std::string, std::unordered_set<long long>> seen_seq;

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split_fields(line);
        if (static_cast<int>(fields.size()) < needed) {
            throw std::runtime_error("csv line " + std::to_string(line_no) + ": missing column");
        }
        const std::string id = trim(fields[idx_id]);
        if (id.empty()) {
            throw std::runtime_error("csv line " + std::to_string(line_no) + ": empty traj_id");
        }
        const long long seq = parse_seq(trim(fields[idx_seq]), line_no);
        const double lat = parse_double(trim(fields[idx_lat]), line_no, "lat");
        const double lon = parse_double(trim(fields[idx_lon]), line_no, "lon");
        auto it = groups.find(id);
        if (it == groups.end()) {
            order.push_back(id);
            it = groups.emplace(id, std::vector<Row>{}).first;
        }
        if (!seen_seq[id].insert(seq).second) {
            throw std::runtime_error("csv line " + std::to_string(line_no) + ": duplicate (" +
                                     id + ", " + std::to_string(seq) + ")");
        }
        it->second.push_back({seq, {lat, lon}});
    }

    std::vector<RawTrajectory> out;
    out.reserve(order.size());
    for (const std::string& id : order) {
        auto& rows = groups[id];
        std::sort(rows.begin(), rows.end(),
                  [](const Row& a, const Row& b) { return a.seq < b.seq; });
        RawTrajectory t;
        t.id = id;
        t.points.reserve(rows.size());
        for (const Row& r : rows) t.points.push_back(r.point);
        out.push_back(std::move(t));
    }
    return out;
}

void write_csv(std::ostream& out, std::span<const RawTrajectory> trajectories) {
    out << "traj_id,seq,lat,lon\n";
    out.precision(17);
    for (const RawTrajectory& t : trajectories) {
        for (std::size_t i = 0; i < t.points.size(); ++i) {
            out << t.id << ',' << i << ',' << t.points[i].lat << ',' << t.points[i].lon << '\n';
        }
    }
}

namespace {

int poisson_draw(NoiseSource& ns, double mean) {
    if (mean <= 0.0) return 0;
    const double u = ns.uniform01();
    double p = std::exp(-mean);
    double cum = p;
    int k = 0;
    const int cap = static_cast<int>(10.0 * mean) + 100;
    while (u > cum && k < cap) {
        ++k;
        p *= mean / k;
        cum += p;
    }
    return k;
}

GeoPoint cell_center(const GridSpec& g, CellIndex c) {
    const int side = g.side();
    const double ch = (g.bbox.max_lat - g.bbox.min_lat) / side;
    const double cw = (g.bbox.max_lon - g.bbox.min_lon) / side;
    return {g.bbox.min_lat + (c.row + 0.5) * ch, g.bbox.min_lon + (c.col + 0.5) * cw};
}

/// Loop-free random walk of target length; stops early if boxed in.
std::vector<CellIndex> random_walk(NoiseSource& ns, int side, CellIndex start, int target_len,
                                   CellIndex hotspot, double drift_prob) {
    std::vector<CellIndex> cells{start};
    std::unordered_set<long long> visited{static_cast<long long>(start.row) * side + start.col};
    static constexpr int kDr[4] = {-1, 1, 0, 0};
    static constexpr int kDc[4] = {0, 0, -1, 1};
    while (static_cast<int>(cells.size()) < target_len) {
        const CellIndex cur = cells.back();
        CellIndex options[4];
        int count = 0;
        for (int d = 0; d < 4; ++d) {
            const int r = cur.row + kDr[d];
            const int c = cur.col + kDc[d];
            if (r < 0 || r >= side || c < 0 || c >= side) continue;
            if (visited.count(static_cast<long long>(r) * side + c)) continue;
            options[count++] = {r, c};
        }
        if (count == 0) break;
        int pick;
        if (drift_prob > 0.0 && ns.uniform01() < drift_prob) {
            pick = 0;
            auto dist2 = [&](CellIndex c) {
                const double dr = c.row - hotspot.row;
                const double dc = c.col - hotspot.col;
                return dr * dr + dc * dc;
            };
            for (int i = 1; i < count; ++i) {
                if (dist2(options[i]) < dist2(options[pick])) pick = i;
            }
        } else {
            pick = static_cast<int>(ns.uniform_below(count));
        }
        const CellIndex next = options[pick];
        visited.insert(static_cast<long long>(next.row) * side + next.col);
        cells.push_back(next);
    }
    return cells;
}

std::vector<RawTrajectory> generate(int n_traj, double mean_len, const GridSpec& g,
                                    std::uint64_t seed, const std::vector<double>& start_cdf,
                                    CellIndex hotspot, double drift_prob, const char* prefix) {
    validate_grid_spec(g);
    if (n_traj < 1) throw std::invalid_argument("generator: n_traj must be at least 1");
    if (mean_len < 1.0) throw std::invalid_argument("generator: mean_len must be at least 1");
    const int side = g.side();
    NoiseSource ns(seed);
    std::vector<RawTrajectory> out;
    out.reserve(n_traj);
    for (int i = 0; i < n_traj; ++i) {
        CellIndex start;
        if (start_cdf.empty()) {
            start = {static_cast<int>(ns.uniform_below(side)),
                     static_cast<int>(ns.uniform_below(side))};
        } else {
            const double u = ns.uniform01() * start_cdf.back();
            const auto it = std::lower_bound(start_cdf.begin(), start_cdf.end(), u);
            const int flat = static_cast<int>(it - start_cdf.begin());
            start = {flat / side, flat % side};
        }
        const int target_len = 1 + poisson_draw(ns, mean_len - 1.0);
        const std::vector<CellIndex> cells =
            random_walk(ns, side, start, target_len, hotspot, drift_prob);
        RawTrajectory t;
        t.id = prefix + std::to_string(i);
        t.points.reserve(cells.size());
        for (const CellIndex& c : cells) t.points.push_back(cell_center(g, c));
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

std::vector<RawTrajectory> gen_uniform(int n_traj, double mean_len, const GridSpec& g,
                                       std::uint64_t seed) {
    return generate(n_traj, mean_len, g, seed, {}, {0, 0}, 0.0, "u");
}

std::vector<RawTrajectory> gen_skewed(int n_traj, double mean_len, const GridSpec& g,
                                      CellIndex hotspot, double concentration,
                                      std::uint64_t seed) {
    validate_grid_spec(g);
    if (!(concentration > 0.0)) {
        throw std::invalid_argument("gen_skewed: concentration must be positive");
    }
    const int side = g.side();
    if (hotspot.row < 0 || hotspot.row >= side || hotspot.col < 0 || hotspot.col >= side) {
        throw std::invalid_argument("gen_skewed: hotspot outside grid");
    }
    const double sigma = std::max(0.25, side / (2.0 * concentration));
    std::vector<double> cdf(static_cast<std::size_t>(side) * side);
    double acc = 0.0;
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            const double dr = r - hotspot.row;
            const double dc = c - hotspot.col;
            acc += std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma));
            cdf[static_cast<std::size_t>(r) * side + c] = acc;
        }
    }
    const double drift_prob = concentration / (concentration + 1.0);
    return generate(n_traj, mean_len, g, seed, cdf, hotspot, drift_prob, "s");
}

}  // namespace privhist
