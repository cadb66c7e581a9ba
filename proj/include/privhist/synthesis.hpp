#pragma once

#include <span>
#include <vector>

#include "privhist/consistency.hpp"
#include "privhist/dp.hpp"
#include "privhist/histogram.hpp"
#include "privhist/partition.hpp"

namespace privhist {

/// Uniform starting estimate: every face n/|F|, every edge n/(2|F|).
/// Consistent by construction.
SpatialHistogram init_uniform(int rows, int cols, double n);

/// Per-query absolute error |q(truth) - q(estimate)|; utility scores for the
/// exponential mechanism (sensitivity 1). Parallel over queries.
std::vector<double> score_queries(const SpatialHistogram& truth, const SpatialHistogram& estimate,
                                  std::span<const RangeQuery> queries);

/// Serial reference for score_queries, kept for testing.
std::vector<double> score_queries_serial(const SpatialHistogram& truth,
                                         const SpatialHistogram& estimate,
                                         std::span<const RangeQuery> queries);

/// Noisy workload error of one query: (q(truth) + Lap(T/eps4)) - q(estimate).
/// An infinite eps4 disables the noise.
double noisy_error(const SpatialHistogram& truth, const SpatialHistogram& estimate,
                   const RangeQuery& q, NoiseSource& ns, double eps4, int iterations);

/// Density-weighted multiplicative update. Every face and edge whose region
/// intersects the query rectangle is scaled by exp(werr * b_region / (2n));
/// faces are then renormalized to their pre-update total and edges follow
/// the same global factor.
SpatialHistogram apply_update(const SpatialHistogram& estimate, const RangeQuery& q, double werr,
                              const PartitionSet& ps, const RegionMap& regions, double n);

/// Convenience overload that derives the region map on the fly.
SpatialHistogram apply_update(const SpatialHistogram& estimate, const RangeQuery& q, double werr,
                              const PartitionSet& ps, double n);

struct SynthesisConfig {
    PrivacyBudget budget;
    /// Run the consistency repair whenever a violation appears, not only on
    /// scale-down updates. Scale-ups can violate consistency through edges
    /// that straddle two regions with different densities, so leaving this
    /// off can publish an inconsistent histogram.
    bool repair_scale_up_violations = true;
    ConsistencyOptions consistency;
};

struct IterationRecord {
    int iteration = 0;
    std::size_t query_index = 0;
    double noisy_err = 0.0;
    bool lp_repaired = false;
    double workload_avg_l1 = 0.0;  ///< post-iteration average L1 over the query set
};

using SynthesisTrace = std::vector<IterationRecord>;

struct SynthesisResult {
    SpatialHistogram histogram;
    SynthesisTrace trace;
};

/// Iterative private estimation: per iteration select the worst query via
/// the exponential mechanism (budget eps3/T), measure its noisy error
/// (eps4/T), rescale region-wise, and repair consistency with the LP when
/// needed. Deterministic given the noise source.
SynthesisResult synthesize(const SpatialHistogram& truth, std::span<const RangeQuery> queries,
                           const PartitionSet& ps, const SynthesisConfig& config, NoiseSource& ns,
                           BudgetAccountant* accountant = nullptr);

std::string trace_to_jsonl(const SynthesisTrace& trace);

}  // namespace privhist
