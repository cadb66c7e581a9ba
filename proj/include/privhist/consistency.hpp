#pragma once

#include <string>

#include "privhist/histogram.hpp"
#include "privhist/simplex.hpp"

namespace privhist {

/// Consistency LP over a histogram: variables are all faces, then all edges,
/// then one absolute-deviation auxiliary per entry; constraints are
/// non-negativity, edge <= each adjacent face, and the two-sided deviation
/// bounds. Always feasible (the all-zeros point satisfies everything).
struct LpProblem {
    LinearProgram program;
    int num_entries = 0;  ///< faces + edges; auxiliaries follow at the same count
};

/// Full-histogram LP used by tests and the oracle path; the default
/// consistent_inference route solves per violation component instead.
LpProblem build_consistency_lp(const SpatialHistogram& h);

std::string lp_to_debug_string(const LpProblem& lp);

struct ConsistentInferenceResult {
    SpatialHistogram histogram;
    double objective = 0.0;  ///< sum of |out - in| over all entries
};

struct ConsistencyOptions {
    /// Solve one LP per connected component of the violated-edge graph.
    /// Entries outside every component are provably already optimal, so
    /// this is an exact decomposition; the full-LP mode exists to prove
    /// that in tests.
    bool decompose = true;
    SimplexOptions simplex;
};

/// L1-nearest histogram satisfying every edge constraint and non-negativity.
ConsistentInferenceResult consistent_inference(const SpatialHistogram& h,
                                               const ConsistencyOptions& options = {});

/// Baseline local fix: every edge clamped to the minimum of its adjacent
/// faces, faces unchanged. Never better than the LP.
ConsistentInferenceResult greedy_repair(const SpatialHistogram& h);

}  // namespace privhist
