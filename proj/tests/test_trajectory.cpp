#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "privhist/histogram.hpp"
#include "privhist/trajectory.hpp"

using namespace privhist;

namespace {

GridSpec unit_grid(int resolution) {
    GridSpec g;
    g.bbox = {0.0, 0.0, static_cast<double>(1 << resolution),
              static_cast<double>(1 << resolution)};
    g.resolution = resolution;
    return g;
}

GeoPoint center(int row, int col) { return {row + 0.5, col + 0.5}; }

bool is_valid_cell_path(const std::vector<CellIndex>& path, int side) {
    std::map<std::pair<int, int>, int> seen;
    for (std::size_t i = 0; i < path.size(); ++i) {
        const CellIndex& c = path[i];
        if (c.row < 0 || c.row >= side || c.col < 0 || c.col >= side) return false;
        if (seen.count({c.row, c.col})) return false;
        seen[{c.row, c.col}] = 1;
        if (i > 0) {
            const int dr = std::abs(c.row - path[i - 1].row);
            const int dc = std::abs(c.col - path[i - 1].col);
            if (dr + dc != 1) return false;
        }
    }
    return !path.empty();
}

}  // namespace

TEST_CASE("two points in the same cell rasterize to a single cell") {
    const GridSpec g = unit_grid(3);
    const RawTrajectory t{"a", {{0.2, 0.2}, {0.7, 0.7}}};
    const auto cells = rasterize(t, g);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0] == CellIndex{0, 0});
}

TEST_CASE("a straight segment walks every cell in its row") {
    const GridSpec g = unit_grid(3);
    const RawTrajectory t{"a", {center(0, 0), center(0, 3)}};
    const auto cells = rasterize(t, g);
    REQUIRE(cells.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(cells[i] == CellIndex{0, i});
}

TEST_CASE("random two-point trajectories always give 4-adjacent loop-free paths") {
    const GridSpec g = unit_grid(4);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> coord(0.0, 16.0);
    for (int i = 0; i < 100; ++i) {
        const RawTrajectory t{"r", {{coord(rng), coord(rng)}, {coord(rng), coord(rng)}}};
        const auto cells = rasterize(t, g);
        CHECK(is_valid_cell_path(cells, g.side()));
    }
}

TEST_CASE("diagonal segments stay 4-adjacent through corner crossings") {
    const GridSpec g = unit_grid(3);
    const RawTrajectory t{"d", {center(0, 0), center(3, 3)}};
    const auto cells = rasterize(t, g);
    CHECK(is_valid_cell_path(cells, g.side()));
    CHECK(cells.front() == CellIndex{0, 0});
    CHECK(cells.back() == CellIndex{3, 3});
}

TEST_CASE("points outside the bounding box reject the whole trajectory") {
    const GridSpec g = unit_grid(3);
    const RawTrajectory t{"x", {center(0, 0), {9.5, 4.0}}};
    CHECK_THROWS_WITH_AS(rasterize(t, g), doctest::Contains("outside bbox"),
                         std::invalid_argument);
}

TEST_CASE("a self-crossing walk is truncated at the first revisited cell") {
    const GridSpec g = unit_grid(3);
    // Clockwise square that returns to the start cell.
    const RawTrajectory t{
        "loop", {center(0, 0), center(0, 2), center(2, 2), center(2, 0), center(0, 0)}};
    const auto cells = rasterize(t, g);
    CHECK(is_valid_cell_path(cells, g.side()));
    // The walk covers the square's perimeter once and stops before re-entering.
    CHECK(cells.size() == 8);
}

TEST_CASE("rasterized output always satisfies the histogram builder preconditions") {
    const GridSpec g = unit_grid(4);
    const auto data = gen_uniform(200, 6.0, g, 99);
    std::vector<std::vector<CellIndex>> paths;
    for (const auto& t : data) {
        paths.push_back(rasterize(t, g));
        CHECK(is_valid_cell_path(paths.back(), g.side()));
    }
    CHECK_NOTHROW(build_from_cell_paths(paths, g.side(), g.side()));
}

TEST_CASE("csv parser groups and orders rows") {
    std::istringstream in(
        "traj_id,seq,lat,lon\n"
        "a,1,0.5,0.5\n"
        "a,0,0.25,0.25\n");
    const auto trajectories = parse_csv(in);
    REQUIRE(trajectories.size() == 1);
    REQUIRE(trajectories[0].points.size() == 2);
    CHECK(trajectories[0].id == "a");
    CHECK(trajectories[0].points[0].lat == 0.25);
    CHECK(trajectories[0].points[1].lat == 0.5);
}

TEST_CASE("csv parser accepts an empty body and extra columns") {
    std::istringstream empty("traj_id,seq,lat,lon\n");
    CHECK(parse_csv(empty).empty());

    std::istringstream extra(
        "traj_id,seq,lat,lon,t\n"
        "a,0,1.0,2.0,1700000000\n");
    const auto trajectories = parse_csv(extra);
    REQUIRE(trajectories.size() == 1);
    CHECK(trajectories[0].points[0].lon == 2.0);
}

TEST_CASE("csv parser rejects malformed input") {
    std::istringstream missing_col("traj_id,seq,lat\na,0,1.0\n");
    CHECK_THROWS_AS(parse_csv(missing_col), std::runtime_error);

    std::istringstream non_numeric("traj_id,seq,lat,lon\na,0,abc,1.0\n");
    CHECK_THROWS_AS(parse_csv(non_numeric), std::runtime_error);

    std::istringstream duplicate(
        "traj_id,seq,lat,lon\n"
        "a,0,1.0,1.0\n"
        "a,0,2.0,2.0\n");
    CHECK_THROWS_AS(parse_csv(duplicate), std::runtime_error);

    std::istringstream short_row("traj_id,seq,lat,lon\na,0,1.0\n");
    CHECK_THROWS_AS(parse_csv(short_row), std::runtime_error);
}

TEST_CASE("csv fuzz: parse+regroup matches an independent line-by-line grouping") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> coord(0.0, 8.0);
    std::uniform_int_distribution<int> traj_pick(0, 199);

    // Build rows in shuffled order with an independent reference grouping.
    std::map<int, std::map<int, GeoPoint>> reference;
    std::vector<std::string> lines;
    std::map<int, int> next_seq;
    std::vector<int> first_appearance;
    for (int i = 0; i < 10000; ++i) {
        const int traj = traj_pick(rng);
        const int seq = next_seq[traj]++;
        const GeoPoint p{coord(rng), coord(rng)};
        if (seq == 0) first_appearance.push_back(traj);
        reference[traj][seq] = p;
        std::ostringstream line;
        line.precision(17);
        line << "t" << traj << ',' << seq << ',' << p.lat << ',' << p.lon;
        lines.push_back(line.str());
    }
    std::shuffle(lines.begin(), lines.end(), rng);

    // Shuffling changes first-appearance order, so recompute it from lines.
    std::ostringstream csv;
    csv << "traj_id,seq,lat,lon\n";
    std::vector<std::string> expect_order;
    std::map<std::string, bool> seen;
    for (const std::string& line : lines) {
        csv << line << '\n';
        const std::string id = line.substr(0, line.find(','));
        if (!seen.count(id)) {
            seen[id] = true;
            expect_order.push_back(id);
        }
    }

    std::istringstream in(csv.str());
    const auto trajectories = parse_csv(in);
    REQUIRE(trajectories.size() == reference.size());
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        CHECK(trajectories[i].id == expect_order[i]);
        const int traj = std::stoi(trajectories[i].id.substr(1));
        const auto& expected = reference.at(traj);
        REQUIRE(trajectories[i].points.size() == expected.size());
        int seq = 0;
        for (const auto& [key, p] : expected) {
            CHECK(trajectories[i].points[seq].lat == p.lat);
            CHECK(trajectories[i].points[seq].lon == p.lon);
            ++seq;
        }
    }
}

TEST_CASE("csv round-trip through write_csv") {
    const GridSpec g = unit_grid(3);
    const auto data = gen_uniform(20, 5.0, g, 3);
    std::ostringstream out;
    write_csv(out, data);
    std::istringstream in(out.str());
    const auto back = parse_csv(in);
    REQUIRE(back.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(back[i].id == data[i].id);
        REQUIRE(back[i].points.size() == data[i].points.size());
        for (std::size_t k = 0; k < data[i].points.size(); ++k) {
            CHECK(back[i].points[k].lat == data[i].points[k].lat);
            CHECK(back[i].points[k].lon == data[i].points[k].lon);
        }
    }
}

TEST_CASE("generators are pure functions of params and seed") {
    const GridSpec g = unit_grid(4);
    const auto a = gen_uniform(50, 6.0, g, 77);
    const auto b = gen_uniform(50, 6.0, g, 77);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        REQUIRE(a[i].points.size() == b[i].points.size());
        for (std::size_t k = 0; k < a[i].points.size(); ++k) {
            CHECK(a[i].points[k].lat == b[i].points[k].lat);
            CHECK(a[i].points[k].lon == b[i].points[k].lon);
        }
    }

    const auto s1 = gen_skewed(50, 6.0, g, {8, 8}, 8.0, 5);
    const auto s2 = gen_skewed(50, 6.0, g, {8, 8}, 8.0, 5);
    REQUIRE(s1.size() == s2.size());
    for (std::size_t i = 0; i < s1.size(); ++i) {
        REQUIRE(s1[i].points.size() == s2[i].points.size());
    }
}

TEST_CASE("uniform generator spreads mass almost evenly") {
    const GridSpec g = unit_grid(4);
    const auto data = gen_uniform(100000, 4.0, g, 1234);
    std::vector<std::vector<CellIndex>> paths;
    for (const auto& t : data) paths.push_back(rasterize(t, g));
    const SpatialHistogram h = build_from_cell_paths(paths, 16, 16);
    double min_face = 1e300, max_face = 0.0;
    for (double v : h.faces.data()) {
        min_face = std::min(min_face, v);
        max_face = std::max(max_face, v);
    }
    CHECK(min_face > 0.0);
    CHECK(max_face / min_face < 3.0);
}

TEST_CASE("high-concentration skew puts at least half the mass near the hotspot") {
    const GridSpec g = unit_grid(4);
    const CellIndex hotspot{8, 8};
    const auto data = gen_skewed(20000, 8.0, g, hotspot, 8.0, 4321);
    std::vector<std::vector<CellIndex>> paths;
    for (const auto& t : data) paths.push_back(rasterize(t, g));
    const SpatialHistogram h = build_from_cell_paths(paths, 16, 16);

    // 4x4 block centred on the hotspot.
    double block = 0.0;
    for (int r = hotspot.row - 2; r < hotspot.row + 2; ++r) {
        for (int c = hotspot.col - 2; c < hotspot.col + 2; ++c) {
            block += h.faces(r, c);
        }
    }
    CHECK(block / h.faces.sum() >= 0.5);
}

TEST_CASE("generator input validation") {
    const GridSpec g = unit_grid(3);
    CHECK_THROWS_AS(gen_uniform(0, 4.0, g, 1), std::invalid_argument);
    CHECK_THROWS_AS(gen_uniform(10, 0.5, g, 1), std::invalid_argument);
    CHECK_THROWS_AS(gen_skewed(10, 4.0, g, {100, 0}, 2.0, 1), std::invalid_argument);
    GridSpec bad = g;
    bad.bbox.max_lat = bad.bbox.min_lat;
    CHECK_THROWS_AS(gen_uniform(10, 4.0, bad, 1), std::invalid_argument);
    bad = g;
    bad.resolution = 0;
    CHECK_THROWS_AS(gen_uniform(10, 4.0, bad, 1), std::invalid_argument);
}
