#include "privhist/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

namespace privhist {

SpatialHistogram init_uniform(int rows, int cols, double n) {
    if (rows < 1 || cols < 1) {
        throw std::invalid_argument("init_uniform: invalid dimensions");
    }
    if (!(n >= 0.0) || !std::isfinite(n)) {
        throw std::invalid_argument("init_uniform: n must be a non-negative finite number");
    }
    SpatialHistogram h(rows, cols);
    const double face_value = n / (static_cast<double>(rows) * cols);
    const double edge_value = face_value / 2.0;
    for (double& v : h.faces.data()) v = face_value;
    for (double& v : h.edges_v.data()) v = edge_value;
    for (double& v : h.edges_h.data()) v = edge_value;
    h.total = n;
    return h;
}

namespace {

std::vector<double> abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::fabs(a[i] - b[i]);
    return out;
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<double> score_queries(const SpatialHistogram& truth, const SpatialHistogram& estimate,
                                  std::span<const RangeQuery> queries) {
    return abs_diff(eval_queries(truth, queries), eval_queries(estimate, queries));
}

std::vector<double> score_queries_serial(const SpatialHistogram& truth,
                                         const SpatialHistogram& estimate,
                                         std::span<const RangeQuery> queries) {
    return abs_diff(eval_queries_serial(truth, queries), eval_queries_serial(estimate, queries));
}

double noisy_error(const SpatialHistogram& truth, const SpatialHistogram& estimate,
                   const RangeQuery& q, NoiseSource& ns, double eps4, int iterations) {
    if (!(eps4 > 0.0)) {
        throw std::invalid_argument("noisy_error: eps4 must be positive");
    }
    const double noise = std::isinf(eps4) ? 0.0 : laplace(ns, iterations / eps4);
    return (eval_range_query(truth, q) + noise) - eval_range_query(estimate, q);
}

SpatialHistogram apply_update(const SpatialHistogram& estimate, const RangeQuery& q, double werr,
                              const PartitionSet& ps, const RegionMap& regions, double n) {
    validate_query(estimate, q);
    if (n <= 0.0) {
        return estimate;  // empty data set, nothing to rescale
    }
    std::vector<double> factor(ps.regions.size(), 1.0);
    for (std::size_t i = 0; i < ps.regions.size(); ++i) {
        if (ps.regions[i].intersects(q)) {
            // exponent clamped below the exp overflow threshold so extreme
            // noise draws cannot produce infinities
            const double exponent =
                std::clamp(werr * ps.densities[i] / (2.0 * n), -700.0, 700.0);
            factor[i] = std::exp(exponent);
        }
    }

    // Updated estimates are synthetic; any ingestion metadata on the input
    // no longer describes the rescaled faces and is not carried over.
    SpatialHistogram out(estimate.rows, estimate.cols);
    out.faces = estimate.faces;
    out.edges_v = estimate.edges_v;
    out.edges_h = estimate.edges_h;
    out.total = estimate.total;
    const double before = out.faces.sum();
    for (int r = 0; r < out.rows; ++r) {
        for (int c = 0; c < out.cols; ++c) {
            out.faces(r, c) *= factor[regions.region_of_face({r, c})];
        }
    }
    for (int r = 0; r < out.rows; ++r) {
        for (int c = 0; c + 1 < out.cols; ++c) {
            out.edges_v(r, c) *= factor[regions.region_of_edge({EdgeKind::vertical, r, c})];
        }
    }
    for (int r = 0; r + 1 < out.rows; ++r) {
        for (int c = 0; c < out.cols; ++c) {
            out.edges_h(r, c) *= factor[regions.region_of_edge({EdgeKind::horizontal, r, c})];
        }
    }

    const double after = out.faces.sum();
    if (after > 0.0) {
        const double renorm = before / after;
        for (double& v : out.faces.data()) v *= renorm;
        for (double& v : out.edges_v.data()) v *= renorm;
        for (double& v : out.edges_h.data()) v *= renorm;
    }
    return out;
}

SpatialHistogram apply_update(const SpatialHistogram& estimate, const RangeQuery& q, double werr,
                              const PartitionSet& ps, double n) {
    return apply_update(estimate, q, werr, ps, region_of(ps), n);
}

SynthesisResult synthesize(const SpatialHistogram& truth, std::span<const RangeQuery> queries,
                           const PartitionSet& ps, const SynthesisConfig& config, NoiseSource& ns,
                           BudgetAccountant* accountant) {
    if (queries.empty()) {
        throw std::invalid_argument("synthesize: query set is empty");
    }
    if (ps.rows != truth.rows || ps.cols != truth.cols) {
        throw std::invalid_argument("synthesize: partition set does not match histogram");
    }
    const PrivacyBudget& budget = config.budget;
    const int iterations = budget.iterations;
    const RegionMap regions = region_of(ps);

    SpatialHistogram estimate = init_uniform(truth.rows, truth.cols, truth.total);
    const std::vector<double> true_answers = eval_queries(truth, queries);
    std::vector<double> est_answers = eval_queries(estimate, queries);

    SynthesisResult result;
    result.trace.reserve(iterations);
    for (int i = 0; i < iterations; ++i) {
        const std::vector<double> scores = abs_diff(true_answers, est_answers);
        const std::size_t picked =
            exp_mechanism_select(ns, scores, budget.eps3_iteration_share(), 1.0);
        if (accountant) accountant->charge_selection_share();

        const double noise =
            std::isinf(budget.eps4) ? 0.0 : laplace(ns, iterations / budget.eps4);
        const double werr = (true_answers[picked] + noise) - est_answers[picked];
        if (accountant) accountant->charge_error_share();

        estimate = apply_update(estimate, queries[picked], werr, ps, regions, truth.total);

        bool repaired = false;
        if (!check_consistency(estimate).empty() &&
            (werr < 0.0 || config.repair_scale_up_violations)) {
            estimate = consistent_inference(estimate, config.consistency).histogram;
            repaired = true;
        }

        est_answers = eval_queries(estimate, queries);
        result.trace.push_back(
            {i, picked, werr, repaired, mean(abs_diff(true_answers, est_answers))});
    }
    result.histogram = std::move(estimate);
    return result;
}

std::string trace_to_jsonl(const SynthesisTrace& trace) {
    std::ostringstream os;
    for (const IterationRecord& rec : trace) {
        nlohmann::json j;
        j["iteration"] = rec.iteration;
        j["query"] = rec.query_index;
        j["werr"] = rec.noisy_err;
        j["lp_repair"] = rec.lp_repaired;
        j["workload_avg_l1"] = rec.workload_avg_l1;
        os << j.dump() << '\n';
    }
    return os.str();
}

}  // namespace privhist
