#include "privhist/histogram.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace privhist {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

struct CellHash {
    std::size_t operator()(const CellIndex& c) const {
        return static_cast<std::size_t>(c.row) * 1000003u + static_cast<std::size_t>(c.col);
    }
};

}  // namespace

SpatialHistogram build_from_cell_paths(const std::vector<std::vector<CellIndex>>& paths,
                                       int rows, int cols) {
    if (!is_power_of_two(rows) || !is_power_of_two(cols)) {
        throw std::invalid_argument("build_from_cell_paths: grid sides must be powers of two");
    }
    SpatialHistogram h(rows, cols);
    Matrix mass(rows, cols);

    std::unordered_set<CellIndex, CellHash> seen;
    for (std::size_t p = 0; p < paths.size(); ++p) {
        const auto& path = paths[p];
        if (path.empty()) {
            throw std::invalid_argument("build_from_cell_paths: empty path at index " +
                                        std::to_string(p));
        }
        seen.clear();
        const double share = 1.0 / static_cast<double>(path.size());
        for (std::size_t i = 0; i < path.size(); ++i) {
            const CellIndex c = path[i];
            if (c.row < 0 || c.row >= rows || c.col < 0 || c.col >= cols) {
                throw std::invalid_argument("build_from_cell_paths: out-of-bounds cell in path " +
                                            std::to_string(p));
            }
            if (!seen.insert(c).second) {
                throw std::invalid_argument("build_from_cell_paths: repeated cell in path " +
                                            std::to_string(p));
            }
            if (i > 0) {
                const CellIndex prev = path[i - 1];
                const int dr = c.row - prev.row;
                const int dc = c.col - prev.col;
                if (std::abs(dr) + std::abs(dc) != 1) {
                    throw std::invalid_argument(
                        "build_from_cell_paths: non-adjacent consecutive cells in path " +
                        std::to_string(p));
                }
                if (dr == 0) {
                    h.edges_v(c.row, std::min(c.col, prev.col)) += 1.0;
                } else {
                    h.edges_h(std::min(c.row, prev.row), c.col) += 1.0;
                }
            }
            h.faces(c.row, c.col) += 1.0;
            mass(c.row, c.col) += share;
        }
    }
    h.total = static_cast<double>(paths.size());
    h.normalized_faces = std::move(mass);
    return h;
}

void validate_query(const SpatialHistogram& h, const RangeQuery& q) {
    if (q.row_lo < 0 || q.col_lo < 0 || q.row_hi >= h.rows || q.col_hi >= h.cols ||
        q.row_lo > q.row_hi || q.col_lo > q.col_hi) {
        std::ostringstream os;
        os << "range query [" << q.row_lo << "," << q.row_hi << "]x[" << q.col_lo << ","
           << q.col_hi << "] invalid for " << h.rows << "x" << h.cols << " histogram";
        throw std::out_of_range(os.str());
    }
}

double eval_range_query(const SpatialHistogram& h, const RangeQuery& q) {
    validate_query(h, q);
    double acc = 0.0;
    for (int r = q.row_lo; r <= q.row_hi; ++r) {
        for (int c = q.col_lo; c <= q.col_hi; ++c) {
            acc += h.faces(r, c);
        }
    }
    for (int r = q.row_lo; r <= q.row_hi; ++r) {
        for (int c = q.col_lo; c < q.col_hi; ++c) {
            acc -= h.edges_v(r, c);
        }
    }
    for (int r = q.row_lo; r < q.row_hi; ++r) {
        for (int c = q.col_lo; c <= q.col_hi; ++c) {
            acc -= h.edges_h(r, c);
        }
    }
    return acc;
}

std::vector<double> eval_queries_serial(const SpatialHistogram& h,
                                        std::span<const RangeQuery> queries) {
    std::vector<double> out(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        out[i] = eval_range_query(h, queries[i]);
    }
    return out;
}

std::vector<double> eval_queries(const SpatialHistogram& h, std::span<const RangeQuery> queries) {
    std::vector<double> out(queries.size());
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[i] = eval_range_query(h, queries[i]);
    }
    return out;
}

std::vector<EdgeRef> check_consistency(const SpatialHistogram& h, double tol) {
    std::vector<EdgeRef> violated;
    for (int r = 0; r < h.rows; ++r) {
        for (int c = 0; c + 1 < h.cols; ++c) {
            const double bound = std::min(h.faces(r, c), h.faces(r, c + 1));
            if (h.edges_v(r, c) > bound + tol) {
                violated.push_back({EdgeKind::vertical, r, c});
            }
        }
    }
    for (int r = 0; r + 1 < h.rows; ++r) {
        for (int c = 0; c < h.cols; ++c) {
            const double bound = std::min(h.faces(r, c), h.faces(r + 1, c));
            if (h.edges_h(r, c) > bound + tol) {
                violated.push_back({EdgeKind::horizontal, r, c});
            }
        }
    }
    return violated;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, int rows, int cols, const char* name) {
    if (!j.is_array() || static_cast<int>(j.size()) != rows) {
        throw std::runtime_error(std::string("histogram json: '") + name +
                                 "' has wrong row count");
    }
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const auto& row = j[r];
        if (!row.is_array() || static_cast<int>(row.size()) != cols) {
            throw std::runtime_error(std::string("histogram json: '") + name +
                                     "' has wrong column count in row " + std::to_string(r));
        }
        for (int c = 0; c < cols; ++c) {
            if (!row[c].is_number()) {
                throw std::runtime_error(std::string("histogram json: '") + name +
                                         "' contains a non-numeric entry");
            }
            const double v = row[c].get<double>();
            if (!std::isfinite(v) || v < 0.0) {
                throw std::runtime_error(std::string("histogram json: '") + name +
                                         "' contains a negative or non-finite entry");
            }
            m(r, c) = v;
        }
    }
    return m;
}

}  // namespace

std::string histogram_to_json(const SpatialHistogram& h) {
    nlohmann::json j;
    j["version"] = 1;
    j["rows"] = h.rows;
    j["cols"] = h.cols;
    j["n"] = h.total;
    j["faces"] = matrix_to_json(h.faces);
    j["edges_v"] = matrix_to_json(h.edges_v);
    j["edges_h"] = matrix_to_json(h.edges_h);
    if (h.normalized_faces) {
        j["normalized_faces"] = matrix_to_json(*h.normalized_faces);
    }
    return j.dump();
}

SpatialHistogram histogram_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("histogram json: parse failure: ") + e.what());
    }
    if (!j.is_object() || !j.contains("version") || j["version"] != 1) {
        throw std::runtime_error("histogram json: missing or unsupported version");
    }
    for (const char* key : {"rows", "cols", "n", "faces", "edges_v", "edges_h"}) {
        if (!j.contains(key)) {
            throw std::runtime_error(std::string("histogram json: missing field '") + key + "'");
        }
    }
    int rows = 0;
    int cols = 0;
    SpatialHistogram h;
    try {
        rows = j["rows"].get<int>();
        cols = j["cols"].get<int>();
        if (!is_power_of_two(rows) || !is_power_of_two(cols)) {
            throw std::runtime_error("histogram json: grid sides must be powers of two");
        }
        h = SpatialHistogram(rows, cols);
        h.total = j["n"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("histogram json: malformed field: ") + e.what());
    }
    if (!std::isfinite(h.total) || h.total < 0.0) {
        throw std::runtime_error("histogram json: 'n' must be a non-negative number");
    }
    h.faces = matrix_from_json(j["faces"], rows, cols, "faces");
    h.edges_v = matrix_from_json(j["edges_v"], rows, cols - 1, "edges_v");
    h.edges_h = matrix_from_json(j["edges_h"], rows - 1, cols, "edges_h");
    if (j.contains("normalized_faces")) {
        h.normalized_faces = matrix_from_json(j["normalized_faces"], rows, cols,
                                              "normalized_faces");
    }
    return h;
}

void save_histogram(const SpatialHistogram& h, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    out << histogram_to_json(h) << '\n';
}

SpatialHistogram load_histogram(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open for reading: " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return histogram_from_json(buf.str());
}

}  // namespace privhist
