#include "privhist/partition.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace privhist {

namespace {

constexpr double kCostSensitivity = 2.0;  // one length-normalized trajectory shifts a
                                          // region cost by at most 2

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

double region_mass(const Matrix& m, const Region& reg) {
    double s = 0.0;
    for (int r = reg.row_lo; r <= reg.row_hi; ++r) {
        for (int c = reg.col_lo; c <= reg.col_hi; ++c) {
            s += m(r, c);
        }
    }
    return s;
}

}  // namespace

Matrix normalized_counts(const SpatialHistogram& h) {
    if (!h.normalized_faces) {
        throw std::runtime_error(
            "normalized_counts: histogram lacks length-normalized ingestion metadata; "
            "rebuild it with build_from_cell_paths or ingest the raw trajectories again");
    }
    return *h.normalized_faces;
}

double uniformity_cost(const Matrix& m, const Region& region) {
    const int cells = region.cell_count();
    const double mean = region_mass(m, region) / cells;
    double cost = 0.0;
    for (int r = region.row_lo; r <= region.row_hi; ++r) {
        for (int c = region.col_lo; c <= region.col_hi; ++c) {
            cost += std::fabs(m(r, c) - mean);
        }
    }
    return cost;
}

namespace {

struct PartitionState {
    const Matrix& mass;
    double total;
    double delta;
    double cost_scale;     // 0 disables noise
    double density_scale;  // 0 disables noise
    NoiseSource& ns;
    PartitionSet& out;

    double noisy_cost(const Region& reg) {
        double cost = uniformity_cost(mass, reg);
        if (cost_scale > 0.0) cost += laplace(ns, cost_scale);
        return cost;
    }

    void emit_leaf(const Region& reg) {
        double density = total > 0.0 ? region_mass(mass, reg) / total : 0.0;
        if (density_scale > 0.0) density += laplace(ns, density_scale);
        out.regions.push_back(reg);
        out.densities.push_back(std::clamp(density, 0.0, 1.0));
    }

    void recurse(const Region& reg) {
        if (reg.cell_count() == 1) {
            emit_leaf(reg);
            return;
        }
        const double pcost = noisy_cost(reg);

        Region children[4];
        const int n_children = split(reg, children);
        double chcost = 0.0;
        for (int i = 0; i < n_children; ++i) {
            chcost += noisy_cost(children[i]);
        }
        chcost /= n_children;

        if (pcost - chcost <= delta) {
            emit_leaf(reg);
        } else {
            for (int i = 0; i < n_children; ++i) {
                recurse(children[i]);
            }
        }
    }

    static int split(const Region& reg, Region out_children[4]) {
        const bool split_rows = reg.row_hi > reg.row_lo;
        const bool split_cols = reg.col_hi > reg.col_lo;
        const int mid_r = (reg.row_lo + reg.row_hi) / 2;
        const int mid_c = (reg.col_lo + reg.col_hi) / 2;
        int n = 0;
        if (split_rows && split_cols) {
            out_children[n++] = {reg.row_lo, mid_r, reg.col_lo, mid_c};
            out_children[n++] = {reg.row_lo, mid_r, mid_c + 1, reg.col_hi};
            out_children[n++] = {mid_r + 1, reg.row_hi, reg.col_lo, mid_c};
            out_children[n++] = {mid_r + 1, reg.row_hi, mid_c + 1, reg.col_hi};
        } else if (split_cols) {
            out_children[n++] = {reg.row_lo, reg.row_hi, reg.col_lo, mid_c};
            out_children[n++] = {reg.row_lo, reg.row_hi, mid_c + 1, reg.col_hi};
        } else {
            out_children[n++] = {reg.row_lo, mid_r, reg.col_lo, reg.col_hi};
            out_children[n++] = {mid_r + 1, reg.row_hi, reg.col_lo, reg.col_hi};
        }
        return n;
    }
};

}  // namespace

PartitionSet partition(const SpatialHistogram& h, const PrivacyBudget& budget, NoiseSource& ns,
                       const PartitionOptions& options, BudgetAccountant* accountant) {
    if (!is_power_of_two(h.rows) || !is_power_of_two(h.cols)) {
        throw std::invalid_argument("partition: grid sides must be powers of two");
    }
    const Matrix mass = normalized_counts(h);

    PartitionSet ps;
    ps.rows = h.rows;
    ps.cols = h.cols;
    ps.delta = options.delta ? *options.delta
                             : (std::isinf(budget.eps1) ? 0.0 : 4.0 / (budget.eps1 * budget.eps1));

    PartitionState state{mass,
                         h.total,
                         ps.delta,
                         std::isinf(budget.eps1) ? 0.0 : kCostSensitivity / budget.eps1,
                         std::isinf(budget.eps2) ? 0.0 : 1.0 / budget.eps2,
                         ns,
                         ps};
    state.recurse({0, h.rows - 1, 0, h.cols - 1});

    if (accountant) {
        accountant->charge_stage1_cost();
        accountant->charge_stage1_density();
    }
    return ps;
}

RegionMap region_of(const PartitionSet& ps) {
    std::vector<int> face_region(static_cast<std::size_t>(ps.rows) * ps.cols, -1);
    for (std::size_t i = 0; i < ps.regions.size(); ++i) {
        const Region& reg = ps.regions[i];
        for (int r = reg.row_lo; r <= reg.row_hi; ++r) {
            for (int c = reg.col_lo; c <= reg.col_hi; ++c) {
                face_region[static_cast<std::size_t>(r) * ps.cols + c] = static_cast<int>(i);
            }
        }
    }
    for (int id : face_region) {
        if (id < 0) {
            throw std::runtime_error("region_of: partition set does not cover the grid");
        }
    }
    return RegionMap(ps.rows, ps.cols, std::move(face_region));
}

std::string partition_to_json(const PartitionSet& ps) {
    nlohmann::json j;
    j["version"] = 1;
    j["rows"] = ps.rows;
    j["cols"] = ps.cols;
    j["delta"] = ps.delta;
    nlohmann::json regions = nlohmann::json::array();
    for (const Region& r : ps.regions) {
        regions.push_back({r.row_lo, r.row_hi, r.col_lo, r.col_hi});
    }
    j["regions"] = std::move(regions);
    j["densities"] = ps.densities;
    return j.dump();
}

PartitionSet partition_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("partition json: parse failure: ") + e.what());
    }
    PartitionSet ps;
    try {
        if (j.at("version") != 1) {
            throw std::runtime_error("partition json: unsupported version");
        }
        ps.rows = j.at("rows").get<int>();
        ps.cols = j.at("cols").get<int>();
        ps.delta = j.at("delta").get<double>();
        for (const auto& r : j.at("regions")) {
            if (!r.is_array() || r.size() != 4) {
                throw std::runtime_error("partition json: malformed region rectangle");
            }
            ps.regions.push_back({r[0].get<int>(), r[1].get<int>(), r[2].get<int>(),
                                  r[3].get<int>()});
        }
        ps.densities = j.at("densities").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("partition json: malformed field: ") + e.what());
    }
    if (ps.regions.size() != ps.densities.size()) {
        throw std::runtime_error("partition json: regions and densities differ in length");
    }
    return ps;
}

}  // namespace privhist
