#include "privhist/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <vector>

namespace privhist {

namespace {

/// Linear ids: faces first, then vertical edges, then horizontal edges.
struct EntryLayout {
    int rows;
    int cols;
    int nf;
    int nev;
    int neh;

    explicit EntryLayout(const SpatialHistogram& h)
        : rows(h.rows),
          cols(h.cols),
          nf(h.rows * h.cols),
          nev(h.rows * (h.cols - 1)),
          neh((h.rows - 1) * h.cols) {}

    int total() const { return nf + nev + neh; }
    int num_edges() const { return nev + neh; }

    int face_id(int r, int c) const { return r * cols + c; }
    int ev_id(int r, int c) const { return nf + r * (cols - 1) + c; }
    int eh_id(int r, int c) const { return nf + nev + r * cols + c; }

    int edge_id(const EdgeRef& e) const {
        return e.kind == EdgeKind::vertical ? ev_id(e.row, e.col) : eh_id(e.row, e.col);
    }

    /// Endpoint faces of edge entry `id`.
    std::pair<int, int> edge_faces(int id) const {
        if (id < nf + nev) {
            const int k = id - nf;
            const int r = k / (cols - 1);
            const int c = k % (cols - 1);
            return {face_id(r, c), face_id(r, c + 1)};
        }
        const int k = id - nf - nev;
        const int r = k / cols;
        const int c = k % cols;
        return {face_id(r, c), face_id(r + 1, c)};
    }

    double get(const SpatialHistogram& h, int id) const {
        if (id < nf) return h.faces.data()[id];
        if (id < nf + nev) return h.edges_v.data()[id - nf];
        return h.edges_h.data()[id - nf - nev];
    }

    void set(SpatialHistogram& h, int id, double v) const {
        if (id < nf) {
            h.faces.data()[id] = v;
        } else if (id < nf + nev) {
            h.edges_v.data()[id - nf] = v;
        } else {
            h.edges_h.data()[id - nf - nev] = v;
        }
    }
};

struct UnionFind {
    std::vector<int> parent;

    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }

    void unite(int a, int b) { parent[find(a)] = find(b); }
};

/// LP over a subset of entries; ids map into the local variable order.
LinearProgram build_lp_for(const SpatialHistogram& h, const EntryLayout& layout,
                           const std::vector<int>& entry_ids,
                           const std::vector<int>& edge_entry_ids) {
    const int n_local = static_cast<int>(entry_ids.size());
    std::map<int, int> local_of;
    for (int i = 0; i < n_local; ++i) local_of[entry_ids[i]] = i;

    LinearProgram lp;
    lp.num_vars = 2 * n_local;  // entries then deviation auxiliaries
    lp.objective.assign(lp.num_vars, 0.0);
    for (int i = 0; i < n_local; ++i) lp.objective[n_local + i] = 1.0;

    auto add_row = [&lp](std::vector<double> row, double rhs) {
        lp.rows.push_back(std::move(row));
        lp.rhs.push_back(rhs);
    };

    for (int edge_id : edge_entry_ids) {
        const auto [fa, fb] = layout.edge_faces(edge_id);
        for (int face_id : {fa, fb}) {
            std::vector<double> row(lp.num_vars, 0.0);
            row[local_of.at(edge_id)] = 1.0;
            row[local_of.at(face_id)] = -1.0;
            add_row(std::move(row), 0.0);
        }
    }
    for (int i = 0; i < n_local; ++i) {
        const double v = layout.get(h, entry_ids[i]);
        std::vector<double> up(lp.num_vars, 0.0);
        up[i] = 1.0;
        up[n_local + i] = -1.0;
        add_row(std::move(up), v);
        std::vector<double> down(lp.num_vars, 0.0);
        down[i] = -1.0;
        down[n_local + i] = -1.0;
        add_row(std::move(down), -v);
    }
    return lp;
}

}  // namespace

LpProblem build_consistency_lp(const SpatialHistogram& h) {
    const EntryLayout layout(h);
    std::vector<int> all_entries(layout.total());
    std::iota(all_entries.begin(), all_entries.end(), 0);
    std::vector<int> all_edges(layout.num_edges());
    std::iota(all_edges.begin(), all_edges.end(), layout.nf);
    LpProblem problem;
    problem.program = build_lp_for(h, layout, all_entries, all_edges);
    problem.num_entries = layout.total();
    return problem;
}

std::string lp_to_debug_string(const LpProblem& lp) {
    const int n = lp.num_entries;
    auto var_name = [n](int j) {
        return j < n ? "x" + std::to_string(j) : "t" + std::to_string(j - n);
    };
    std::ostringstream os;
    os << "minimize";
    bool first = true;
    for (int j = 0; j < lp.program.num_vars; ++j) {
        if (lp.program.objective[j] == 0.0) continue;
        os << (first ? " " : " + ") << lp.program.objective[j] << "*" << var_name(j);
        first = false;
    }
    os << "\nsubject to (all variables >= 0):\n";
    for (std::size_t i = 0; i < lp.program.rows.size(); ++i) {
        bool lead = true;
        for (int j = 0; j < lp.program.num_vars; ++j) {
            const double a = lp.program.rows[i][j];
            if (a == 0.0) continue;
            if (lead) {
                os << "  " << a << "*" << var_name(j);
                lead = false;
            } else {
                os << (a < 0.0 ? " - " : " + ") << std::fabs(a) << "*" << var_name(j);
            }
        }
        os << " <= " << lp.program.rhs[i] << "\n";
    }
    return os.str();
}

ConsistentInferenceResult consistent_inference(const SpatialHistogram& h,
                                               const ConsistencyOptions& options) {
    for (double v : h.faces.data()) {
        if (!std::isfinite(v)) throw std::invalid_argument("consistent_inference: non-finite face");
    }
    for (double v : h.edges_v.data()) {
        if (!std::isfinite(v)) throw std::invalid_argument("consistent_inference: non-finite edge");
    }
    for (double v : h.edges_h.data()) {
        if (!std::isfinite(v)) throw std::invalid_argument("consistent_inference: non-finite edge");
    }

    const std::vector<EdgeRef> violations = check_consistency(h);
    ConsistentInferenceResult result{h, 0.0};
    if (violations.empty()) {
        return result;
    }
    // The repair may raise faces, so ingestion metadata no longer applies.
    result.histogram.normalized_faces.reset();

    const EntryLayout layout(h);

    if (!options.decompose) {
        const LpProblem problem = build_consistency_lp(h);
        const SimplexResult sol = solve_simplex(problem.program, options.simplex);
        for (int id = 0; id < layout.total(); ++id) {
            layout.set(result.histogram, id, std::max(0.0, sol.solution[id]));
        }
        result.objective = sol.objective;
        return result;
    }

    // Components of the violation graph: violated edges joined through
    // shared faces. Entries outside every component keep their values.
    UnionFind uf(layout.nf);
    std::vector<int> violated_edge_ids;
    violated_edge_ids.reserve(violations.size());
    for (const EdgeRef& e : violations) {
        const int id = layout.edge_id(e);
        violated_edge_ids.push_back(id);
        const auto [fa, fb] = layout.edge_faces(id);
        uf.unite(fa, fb);
    }

    std::map<int, std::vector<int>> component_edges;
    for (int id : violated_edge_ids) {
        component_edges[uf.find(layout.edge_faces(id).first)].push_back(id);
    }

    for (auto& [root, edge_ids] : component_edges) {
        std::vector<int> entry_ids;
        for (int id : edge_ids) {
            const auto [fa, fb] = layout.edge_faces(id);
            entry_ids.push_back(fa);
            entry_ids.push_back(fb);
        }
        std::sort(entry_ids.begin(), entry_ids.end());
        entry_ids.erase(std::unique(entry_ids.begin(), entry_ids.end()), entry_ids.end());
        entry_ids.insert(entry_ids.end(), edge_ids.begin(), edge_ids.end());

        const LinearProgram lp = build_lp_for(h, layout, entry_ids, edge_ids);
        const SimplexResult sol = solve_simplex(lp, options.simplex);
        for (std::size_t i = 0; i < entry_ids.size(); ++i) {
            layout.set(result.histogram, entry_ids[i], std::max(0.0, sol.solution[i]));
        }
        result.objective += sol.objective;
    }
    return result;
}

ConsistentInferenceResult greedy_repair(const SpatialHistogram& h) {
    ConsistentInferenceResult result{h, 0.0};
    SpatialHistogram& out = result.histogram;
    for (int r = 0; r < h.rows; ++r) {
        for (int c = 0; c + 1 < h.cols; ++c) {
            const double bound = std::min(out.faces(r, c), out.faces(r, c + 1));
            if (out.edges_v(r, c) > bound) {
                result.objective += out.edges_v(r, c) - bound;
                out.edges_v(r, c) = bound;
            }
        }
    }
    for (int r = 0; r + 1 < h.rows; ++r) {
        for (int c = 0; c < h.cols; ++c) {
            const double bound = std::min(out.faces(r, c), out.faces(r + 1, c));
            if (out.edges_h(r, c) > bound) {
                result.objective += out.edges_h(r, c) - bound;
                out.edges_h(r, c) = bound;
            }
        }
    }
    return result;
}

}  // namespace privhist
