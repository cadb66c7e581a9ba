#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "privhist/dp.hpp"
#include "privhist/histogram.hpp"
#include "privhist/partition.hpp"
#include "privhist/synthesis.hpp"
#include "privhist/trajectory.hpp"

namespace privhist {

struct QuerySet {
    int rows = 0;
    int cols = 0;
    std::uint64_t seed = 0;
    std::vector<RangeQuery> queries;
};

/// Rectangles with corners drawn uniformly from the domain and ordered.
QuerySet gen_queries(int rows, int cols, int count, std::uint64_t seed);

std::string queries_to_json(const QuerySet& qs);
QuerySet queries_from_json(const std::string& text);
void save_queries(const QuerySet& qs, const std::string& path);
QuerySet load_queries(const std::string& path);

/// Mean |q(truth) - q(published)| over the query set.
double avg_l1_error(const SpatialHistogram& truth, const SpatialHistogram& published,
                    std::span<const RangeQuery> queries);

/// Relative entropy of the published histogram against the truth, summed
/// over faces and edges and normalized by the trajectory count. Zero truth
/// entries contribute nothing; published entries are floored at
/// 1e-6 * (published mass) / |H| to keep the value finite.
double kld(const SpatialHistogram& truth, const SpatialHistogram& published);

/// Per-entry noise scale of the Laplace baseline: one trajectory of length
/// k_max touches at most k_max faces and k_max - 1 edges.
double lm_noise_scale(int k_max, double epsilon);

/// Laplace-mechanism baseline: independent noise on every face and edge,
/// negatives clamped to zero, no consistency repair.
SpatialHistogram lm_publish(const SpatialHistogram& truth, double epsilon, int k_max,
                            NoiseSource& ns);

/// Face-only multiplicative-weights baseline: single global region of
/// density one, updates restricted to faces inside the selected query,
/// edges left at their uniform initialization, no consistency step. The
/// budget is split evenly between selection and error measurement.
SpatialHistogram mwem_face_publish(const SpatialHistogram& truth,
                                   std::span<const RangeQuery> queries, double epsilon,
                                   int iterations, NoiseSource& ns);

struct DqamOptions {
    std::optional<double> delta;  ///< partition threshold override
    bool repair_scale_up_violations = true;
};

struct DqamResult {
    SpatialHistogram histogram;
    SynthesisTrace trace;
    PartitionSet partitions;
    double budget_spent = 0.0;
    bool budget_fully_spent = false;
};

/// Full two-stage mechanism: private partitioning then data- and query-aware
/// synthesis, with the four-way budget split and exact budget accounting.
DqamResult dqam_publish(const SpatialHistogram& truth, std::span<const RangeQuery> queries,
                        double epsilon, int iterations, std::uint64_t seed,
                        const DqamOptions& options = {});

struct DatasetSpec {
    std::string name;
    std::string model;  ///< "uniform" or "skewed"
    int n_traj = 1000;
    double mean_len = 8.0;
    int resolution = 4;
    CellIndex hotspot{0, 0};
    double concentration = 8.0;
    std::uint64_t seed = 1;
};

/// Materialized dataset: histogram plus the public max path length.
struct BuiltDataset {
    std::string name;
    SpatialHistogram histogram;
    int k_max = 1;
};

BuiltDataset build_dataset(const DatasetSpec& spec);

struct ExperimentConfig {
    std::vector<std::string> mechanisms;  ///< subset of {"lm", "mwem", "dqam"}
    std::vector<double> epsilons;
    std::vector<DatasetSpec> datasets;
    std::vector<std::uint64_t> seeds;
    int iterations = 10;
    int query_count = 16000;
};

ExperimentConfig experiment_config_from_json(const std::string& text);

struct EvalReport {
    std::string mechanism;
    std::string dataset;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    double avg_l1 = 0.0;
    double kld_value = 0.0;
    double runtime_s = 0.0;
    int violations = 0;
    std::string error;  ///< non-empty when the cell aborted
};

/// Runs every mechanism x epsilon x dataset x seed cell, in parallel with
/// independently seeded noise sources; reports come back in deterministic
/// configuration order.
std::vector<EvalReport> run_experiment(const ExperimentConfig& config);

void write_report_csv(std::ostream& out, std::span<const EvalReport> reports);

struct SummaryRow {
    std::string mechanism;
    std::string dataset;
    double epsilon = 0.0;
    double mean_avg_l1 = 0.0;
    double std_avg_l1 = 0.0;
    double mean_kld = 0.0;
    double std_kld = 0.0;
    int total_violations = 0;
};

/// Mean and standard deviation over seeds for each mechanism/dataset/epsilon
/// cell, skipping aborted runs.
std::vector<SummaryRow> summarize_reports(std::span<const EvalReport> reports);
void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows);

}  // namespace privhist
