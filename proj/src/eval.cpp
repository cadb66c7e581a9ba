#include "privhist/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace privhist {

QuerySet gen_queries(int rows, int cols, int count, std::uint64_t seed) {
    if (rows < 1 || cols < 1) {
        throw std::invalid_argument("gen_queries: invalid dimensions");
    }
    if (count < 1) {
        throw std::invalid_argument("gen_queries: count must be at least 1");
    }
    NoiseSource ns(seed);
    QuerySet qs;
    qs.rows = rows;
    qs.cols = cols;
    qs.seed = seed;
    qs.queries.reserve(count);
    for (int i = 0; i < count; ++i) {
        int r1 = static_cast<int>(ns.uniform_below(rows));
        int r2 = static_cast<int>(ns.uniform_below(rows));
        int c1 = static_cast<int>(ns.uniform_below(cols));
        int c2 = static_cast<int>(ns.uniform_below(cols));
        if (r1 > r2) std::swap(r1, r2);
        if (c1 > c2) std::swap(c1, c2);
        qs.queries.push_back({r1, r2, c1, c2});
    }
    return qs;
}

std::string queries_to_json(const QuerySet& qs) {
    nlohmann::json j;
    j["version"] = 1;
    j["rows"] = qs.rows;
    j["cols"] = qs.cols;
    j["seed"] = qs.seed;
    nlohmann::json arr = nlohmann::json::array();
    for (const RangeQuery& q : qs.queries) {
        arr.push_back({q.row_lo, q.row_hi, q.col_lo, q.col_hi});
    }
    j["queries"] = std::move(arr);
    return j.dump();
}

QuerySet queries_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("query json: parse failure: ") + e.what());
    }
    QuerySet qs;
    try {
        if (j.at("version") != 1) throw std::runtime_error("query json: unsupported version");
        qs.rows = j.at("rows").get<int>();
        qs.cols = j.at("cols").get<int>();
        qs.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& q : j.at("queries")) {
            if (!q.is_array() || q.size() != 4) {
                throw std::runtime_error("query json: malformed rectangle");
            }
            RangeQuery rq{q[0].get<int>(), q[1].get<int>(), q[2].get<int>(), q[3].get<int>()};
            if (rq.row_lo < 0 || rq.row_lo > rq.row_hi || rq.row_hi >= qs.rows ||
                rq.col_lo < 0 || rq.col_lo > rq.col_hi || rq.col_hi >= qs.cols) {
                throw std::runtime_error("query json: rectangle out of bounds");
            }
            qs.queries.push_back(rq);
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("query json: malformed field: ") + e.what());
    }
    return qs;
}

void save_queries(const QuerySet& qs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << queries_to_json(qs) << '\n';
}

QuerySet load_queries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return queries_from_json(buf.str());
}

double avg_l1_error(const SpatialHistogram& truth, const SpatialHistogram& published,
                    std::span<const RangeQuery> queries) {
    if (truth.rows != published.rows || truth.cols != published.cols) {
        throw std::invalid_argument("avg_l1_error: histogram dimensions differ");
    }
    if (queries.empty()) return 0.0;
    const std::vector<double> a = eval_queries(truth, queries);
    const std::vector<double> b = eval_queries(published, queries);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
    return s / static_cast<double>(queries.size());
}

namespace {

double entry_mass(const SpatialHistogram& h) {
    return h.faces.sum() + h.edges_v.sum() + h.edges_h.sum();
}

double kld_sum(const std::vector<double>& truth, const std::vector<double>& pub, double floor) {
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] <= 0.0) continue;
        s += truth[i] * std::log(truth[i] / std::max(pub[i], floor));
    }
    return s;
}

}  // namespace

double kld(const SpatialHistogram& truth, const SpatialHistogram& published) {
    if (truth.rows != published.rows || truth.cols != published.cols) {
        throw std::invalid_argument("kld: histogram dimensions differ");
    }
    if (truth.total <= 0.0) return 0.0;
    const double floor = 1e-6 * entry_mass(published) / static_cast<double>(truth.entry_count());
    const double safe_floor = floor > 0.0 ? floor : std::numeric_limits<double>::min();
    double s = 0.0;
    s += kld_sum(truth.faces.data(), published.faces.data(), safe_floor);
    s += kld_sum(truth.edges_v.data(), published.edges_v.data(), safe_floor);
    s += kld_sum(truth.edges_h.data(), published.edges_h.data(), safe_floor);
    return s / truth.total;
}

double lm_noise_scale(int k_max, double epsilon) {
    if (k_max < 1) throw std::invalid_argument("lm_noise_scale: k_max must be at least 1");
    if (!(epsilon > 0.0)) throw std::invalid_argument("lm_noise_scale: epsilon must be positive");
    return (2.0 * k_max - 1.0) / epsilon;
}

SpatialHistogram lm_publish(const SpatialHistogram& truth, double epsilon, int k_max,
                            NoiseSource& ns) {
    const double scale = lm_noise_scale(k_max, epsilon);
    SpatialHistogram out = truth;
    out.normalized_faces.reset();
    auto perturb = [&](std::vector<double>& values) {
        for (double& v : values) {
            if (std::isfinite(scale) && scale > 0.0) v += laplace(ns, scale);
            v = std::max(0.0, v);
        }
    };
    perturb(out.faces.data());
    perturb(out.edges_v.data());
    perturb(out.edges_h.data());
    return out;
}

SpatialHistogram mwem_face_publish(const SpatialHistogram& truth,
                                   std::span<const RangeQuery> queries, double epsilon,
                                   int iterations, NoiseSource& ns) {
    if (queries.empty()) {
        throw std::invalid_argument("mwem_face_publish: query set is empty");
    }
    if (iterations < 1) {
        throw std::invalid_argument("mwem_face_publish: iterations must be at least 1");
    }
    const double eps_half = epsilon / 2.0;
    const double n = truth.total;
    SpatialHistogram estimate = init_uniform(truth.rows, truth.cols, n);
    if (n <= 0.0) return estimate;

    // Face-only query answers: no edge subtraction.
    auto face_sum = [](const SpatialHistogram& h, const RangeQuery& q) {
        double s = 0.0;
        for (int r = q.row_lo; r <= q.row_hi; ++r) {
            for (int c = q.col_lo; c <= q.col_hi; ++c) {
                s += h.faces(r, c);
            }
        }
        return s;
    };
    std::vector<double> true_answers(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        validate_query(truth, queries[i]);
        true_answers[i] = face_sum(truth, queries[i]);
    }

    std::vector<double> scores(queries.size());
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < queries.size(); ++i) {
            scores[i] = std::fabs(true_answers[i] - face_sum(estimate, queries[i]));
        }
        const std::size_t picked = exp_mechanism_select(ns, scores, eps_half / iterations, 1.0);
        const double noise =
            std::isinf(eps_half) ? 0.0 : laplace(ns, iterations / eps_half);
        const double werr = (true_answers[picked] + noise) - face_sum(estimate, queries[picked]);

        const RangeQuery& q = queries[picked];
        const double factor = std::exp(std::clamp(werr / (2.0 * n), -700.0, 700.0));
        const double before = estimate.faces.sum();
        for (int r = q.row_lo; r <= q.row_hi; ++r) {
            for (int c = q.col_lo; c <= q.col_hi; ++c) {
                estimate.faces(r, c) *= factor;
            }
        }
        const double after = estimate.faces.sum();
        if (after > 0.0) {
            const double renorm = before / after;
            for (double& v : estimate.faces.data()) v *= renorm;
        }
    }
    return estimate;
}

DqamResult dqam_publish(const SpatialHistogram& truth, std::span<const RangeQuery> queries,
                        double epsilon, int iterations, std::uint64_t seed,
                        const DqamOptions& options) {
    const PrivacyBudget budget = split_budget(epsilon, iterations);
    BudgetAccountant accountant(epsilon, iterations);

    NoiseSource partition_ns(derive_seed(seed, "partition"));
    PartitionOptions popt;
    popt.delta = options.delta;
    const PartitionSet ps = partition(truth, budget, partition_ns, popt, &accountant);

    NoiseSource synthesis_ns(derive_seed(seed, "synthesis"));
    SynthesisConfig config;
    config.budget = budget;
    config.repair_scale_up_violations = options.repair_scale_up_violations;
    SynthesisResult synth = synthesize(truth, queries, ps, config, synthesis_ns, &accountant);

    DqamResult result;
    result.histogram = std::move(synth.histogram);
    result.trace = std::move(synth.trace);
    result.partitions = ps;
    result.budget_spent = accountant.spent();
    result.budget_fully_spent = accountant.fully_spent();
    if (!result.budget_fully_spent) {
        throw std::logic_error("dqam_publish: run ended without spending the whole budget");
    }
    return result;
}

BuiltDataset build_dataset(const DatasetSpec& spec) {
    GridSpec grid;
    grid.bbox = {0.0, 0.0, 10.0, 10.0};
    grid.resolution = spec.resolution;
    std::vector<RawTrajectory> raw;
    if (spec.model == "uniform") {
        raw = gen_uniform(spec.n_traj, spec.mean_len, grid, spec.seed);
    } else if (spec.model == "skewed") {
        raw = gen_skewed(spec.n_traj, spec.mean_len, grid, spec.hotspot, spec.concentration,
                         spec.seed);
    } else {
        throw std::invalid_argument("dataset model must be 'uniform' or 'skewed', got '" +
                                    spec.model + "'");
    }
    std::vector<std::vector<CellIndex>> paths;
    paths.reserve(raw.size());
    int k_max = 1;
    for (const RawTrajectory& t : raw) {
        paths.push_back(rasterize(t, grid));
        k_max = std::max(k_max, static_cast<int>(paths.back().size()));
    }
    BuiltDataset out;
    out.name = spec.name;
    out.histogram = build_from_cell_paths(paths, grid.side(), grid.side());
    out.k_max = k_max;
    return out;
}

namespace {

DatasetSpec dataset_spec_from_json(const nlohmann::json& j) {
    DatasetSpec spec;
    spec.name = j.at("name").get<std::string>();
    spec.model = j.at("model").get<std::string>();
    if (j.contains("n_traj")) spec.n_traj = j["n_traj"].get<int>();
    if (j.contains("mean_len")) spec.mean_len = j["mean_len"].get<double>();
    if (j.contains("resolution")) spec.resolution = j["resolution"].get<int>();
    if (j.contains("hotspot")) {
        spec.hotspot = {j["hotspot"][0].get<int>(), j["hotspot"][1].get<int>()};
    }
    if (j.contains("concentration")) spec.concentration = j["concentration"].get<double>();
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    return spec;
}

}  // namespace

ExperimentConfig experiment_config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("experiment config: parse failure: ") + e.what());
    }
    ExperimentConfig config;
    try {
        config.mechanisms = j.at("mechanisms").get<std::vector<std::string>>();
        config.epsilons = j.at("epsilons").get<std::vector<double>>();
        for (const auto& d : j.at("datasets")) {
            config.datasets.push_back(dataset_spec_from_json(d));
        }
        config.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("T")) config.iterations = j["T"].get<int>();
        if (j.contains("query_count")) config.query_count = j["query_count"].get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("experiment config: malformed field: ") + e.what());
    }
    for (const std::string& m : config.mechanisms) {
        if (m != "lm" && m != "mwem" && m != "dqam") {
            throw std::runtime_error("experiment config: unknown mechanism '" + m + "'");
        }
    }
    if (config.mechanisms.empty() || config.epsilons.empty() || config.datasets.empty() ||
        config.seeds.empty()) {
        throw std::runtime_error(
            "experiment config: mechanisms, epsilons, datasets, and seeds must be non-empty");
    }
    return config;
}

namespace {

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    std::string s = os.str();
    // shortest representation that round-trips
    for (int prec = 1; prec < 17; ++prec) {
        std::ostringstream trial;
        trial.precision(prec);
        trial << v;
        if (std::stod(trial.str()) == v) {
            s = trial.str();
            break;
        }
    }
    return s;
}

EvalReport run_cell(const BuiltDataset& dataset, const QuerySet& queries,
                    const std::string& mechanism, double epsilon, std::uint64_t seed,
                    int iterations) {
    EvalReport report;
    report.mechanism = mechanism;
    report.dataset = dataset.name;
    report.epsilon = epsilon;
    report.seed = seed;
    const auto start = std::chrono::steady_clock::now();
    try {
        const std::string label =
            dataset.name + "/" + mechanism + "/eps=" + format_double(epsilon);
        const std::uint64_t cell_seed = derive_seed(seed, label);
        SpatialHistogram published;
        if (mechanism == "lm") {
            NoiseSource ns(cell_seed);
            published = lm_publish(dataset.histogram, epsilon, dataset.k_max, ns);
        } else if (mechanism == "mwem") {
            NoiseSource ns(cell_seed);
            published =
                mwem_face_publish(dataset.histogram, queries.queries, epsilon, iterations, ns);
        } else {
            published =
                dqam_publish(dataset.histogram, queries.queries, epsilon, iterations, cell_seed)
                    .histogram;
        }
        report.avg_l1 = avg_l1_error(dataset.histogram, published, queries.queries);
        report.kld_value = kld(dataset.histogram, published);
        report.violations = static_cast<int>(check_consistency(published).size());
    } catch (const std::exception& e) {
        report.error = e.what();
        report.avg_l1 = std::nan("");
        report.kld_value = std::nan("");
    }
    report.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace

std::vector<EvalReport> run_experiment(const ExperimentConfig& config) {
    struct Cell {
        int dataset_index;
        std::string mechanism;
        double epsilon;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (int d = 0; d < static_cast<int>(config.datasets.size()); ++d) {
        for (const std::string& m : config.mechanisms) {
            for (double eps : config.epsilons) {
                for (std::uint64_t seed : config.seeds) {
                    cells.push_back({d, m, eps, seed});
                }
            }
        }
    }

    std::vector<BuiltDataset> datasets;
    std::vector<QuerySet> query_sets;
    datasets.reserve(config.datasets.size());
    for (const DatasetSpec& spec : config.datasets) {
        datasets.push_back(build_dataset(spec));
        const int side = datasets.back().histogram.rows;
        query_sets.push_back(gen_queries(side, side, config.query_count,
                                         derive_seed(spec.seed, spec.name + "/queries")));
    }

    std::vector<EvalReport> reports(cells.size());
    const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < total; ++i) {
        const Cell& cell = cells[i];
        reports[i] = run_cell(datasets[cell.dataset_index], query_sets[cell.dataset_index],
                              cell.mechanism, cell.epsilon, cell.seed, config.iterations);
    }
    return reports;
}

void write_report_csv(std::ostream& out, std::span<const EvalReport> reports) {
    out << "mechanism,epsilon,dataset,seed,avg_l1,kld,runtime_s,violations\n";
    for (const EvalReport& r : reports) {
        out << r.mechanism << ',' << format_double(r.epsilon) << ',' << r.dataset << ','
            << r.seed << ',' << format_double(r.avg_l1) << ',' << format_double(r.kld_value)
            << ',' << format_double(r.runtime_s) << ',' << r.violations << '\n';
    }
}

std::vector<SummaryRow> summarize_reports(std::span<const EvalReport> reports) {
    struct Key {
        std::string mechanism;
        std::string dataset;
        double epsilon;
        bool operator<(const Key& o) const {
            if (mechanism != o.mechanism) return mechanism < o.mechanism;
            if (dataset != o.dataset) return dataset < o.dataset;
            return epsilon < o.epsilon;
        }
    };
    std::map<Key, std::vector<const EvalReport*>> groups;
    for (const EvalReport& r : reports) {
        if (!r.error.empty()) continue;
        groups[{r.mechanism, r.dataset, r.epsilon}].push_back(&r);
    }
    std::vector<SummaryRow> rows;
    for (const auto& [key, group] : groups) {
        SummaryRow row;
        row.mechanism = key.mechanism;
        row.dataset = key.dataset;
        row.epsilon = key.epsilon;
        const double count = static_cast<double>(group.size());
        double sum_l1 = 0.0, sum_kld = 0.0;
        for (const EvalReport* r : group) {
            sum_l1 += r->avg_l1;
            sum_kld += r->kld_value;
            row.total_violations += r->violations;
        }
        row.mean_avg_l1 = sum_l1 / count;
        row.mean_kld = sum_kld / count;
        double var_l1 = 0.0, var_kld = 0.0;
        for (const EvalReport* r : group) {
            var_l1 += (r->avg_l1 - row.mean_avg_l1) * (r->avg_l1 - row.mean_avg_l1);
            var_kld += (r->kld_value - row.mean_kld) * (r->kld_value - row.mean_kld);
        }
        row.std_avg_l1 = std::sqrt(var_l1 / count);
        row.std_kld = std::sqrt(var_kld / count);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
    out << "mechanism,dataset,epsilon,mean_avg_l1,std_avg_l1,mean_kld,std_kld,"
           "total_violations\n";
    for (const SummaryRow& r : rows) {
        out << r.mechanism << ',' << r.dataset << ',' << format_double(r.epsilon) << ','
            << format_double(r.mean_avg_l1) << ',' << format_double(r.std_avg_l1) << ','
            << format_double(r.mean_kld) << ',' << format_double(r.std_kld) << ','
            << r.total_violations << '\n';
    }
}

}  // namespace privhist
