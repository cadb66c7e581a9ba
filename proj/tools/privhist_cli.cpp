// Command-line front end: ingestion, synthetic data and query generation,
// private synthesis, evaluation, and the experiment grid runner.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "privhist/eval.hpp"

namespace {

using namespace privhist;

struct CliError : std::runtime_error {
    std::string category;
    CliError(std::string cat, const std::string& what)
        : std::runtime_error(what), category(std::move(cat)) {}
};

BoundingBox parse_bbox(const std::string& text) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string field;
    while (std::getline(ss, field, ',')) {
        try {
            parts.push_back(std::stod(field));
        } catch (const std::exception&) {
            throw CliError("validation", "bbox: non-numeric component '" + field + "'");
        }
    }
    if (parts.size() != 4) {
        throw CliError("validation", "bbox must be min_lat,min_lon,max_lat,max_lon");
    }
    return {parts[0], parts[1], parts[2], parts[3]};
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CliError("io", "cannot open for reading: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw CliError("io", "cannot open for writing: " + path);
    out << content;
}

int cmd_ingest(const std::string& input, const std::string& bbox_text, int resolution,
               const std::string& out_path) {
    GridSpec grid;
    grid.bbox = parse_bbox(bbox_text);
    grid.resolution = resolution;
    validate_grid_spec(grid);
    std::cout << "command=ingest input=" << input << " bbox=" << bbox_text
              << " resolution=" << resolution << " out=" << out_path << "\n";

    std::ifstream in(input);
    if (!in) throw CliError("io", "cannot open for reading: " + input);
    const std::vector<RawTrajectory> raw = parse_csv(in);

    std::vector<std::vector<CellIndex>> paths;
    int rejected = 0;
    int k_max = 0;
    for (const RawTrajectory& t : raw) {
        try {
            paths.push_back(rasterize(t, grid));
            k_max = std::max(k_max, static_cast<int>(paths.back().size()));
        } catch (const std::invalid_argument& e) {
            ++rejected;
            std::cerr << "rejected: " << e.what() << "\n";
        }
    }
    const SpatialHistogram h = build_from_cell_paths(paths, grid.side(), grid.side());
    save_histogram(h, out_path);
    std::cout << "n=" << h.total << " rejected=" << rejected << " k_max=" << k_max << "\n";
    return 0;
}

int cmd_gen_data(const std::string& model, int n, double len, std::uint64_t seed,
                 const std::string& bbox_text, int resolution, const std::string& hotspot_text,
                 double concentration, const std::string& out_path) {
    GridSpec grid;
    grid.bbox = parse_bbox(bbox_text);
    grid.resolution = resolution;
    validate_grid_spec(grid);
    std::cout << "command=gen-data model=" << model << " n=" << n << " len=" << len
              << " seed=" << seed << " bbox=" << bbox_text << " resolution=" << resolution
              << " out=" << out_path << "\n";

    std::vector<RawTrajectory> data;
    if (model == "uniform") {
        data = gen_uniform(n, len, grid, seed);
    } else if (model == "skewed") {
        CellIndex hotspot{grid.side() / 2, grid.side() / 2};
        if (!hotspot_text.empty()) {
            std::stringstream ss(hotspot_text);
            std::string a, b;
            if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) {
                throw CliError("validation", "hotspot must be row,col");
            }
            hotspot = {std::stoi(a), std::stoi(b)};
        }
        std::cout << "hotspot=" << hotspot.row << "," << hotspot.col
                  << " concentration=" << concentration << "\n";
        data = gen_skewed(n, len, grid, hotspot, concentration, seed);
    } else {
        throw CliError("validation", "model must be 'uniform' or 'skewed'");
    }
    std::ofstream out(out_path);
    if (!out) throw CliError("io", "cannot open for writing: " + out_path);
    write_csv(out, data);
    std::cout << "trajectories=" << data.size() << "\n";
    return 0;
}

int cmd_gen_queries(int count, std::uint64_t seed, int resolution, const std::string& out_path) {
    std::cout << "command=gen-queries count=" << count << " seed=" << seed
              << " resolution=" << resolution << " out=" << out_path << "\n";
    const int side = 1 << resolution;
    const QuerySet qs = gen_queries(side, side, count, seed);
    save_queries(qs, out_path);
    return 0;
}

int cmd_synthesize(const std::string& hist_path, const std::string& queries_path, double epsilon,
                   int iterations, std::uint64_t seed, double delta_override,
                   const std::string& out_path, const std::string& trace_path,
                   const std::string& partition_path) {
    std::cout << "command=synthesize hist=" << hist_path << " queries=" << queries_path
              << " epsilon=" << epsilon << " iterations=" << iterations << " seed=" << seed
              << " out=" << out_path << "\n";
    const SpatialHistogram truth = load_histogram(hist_path);
    const QuerySet qs = load_queries(queries_path);
    if (qs.rows != truth.rows || qs.cols != truth.cols) {
        throw CliError("validation", "query set and histogram dimensions differ");
    }
    DqamOptions options;
    if (delta_override >= 0.0) {
        options.delta = delta_override;
        std::cout << "delta_override=" << delta_override << "\n";
    }
    const DqamResult result = dqam_publish(truth, qs.queries, epsilon, iterations, seed, options);
    save_histogram(result.histogram, out_path);
    if (!trace_path.empty()) {
        write_file(trace_path, trace_to_jsonl(result.trace));
    }
    if (!partition_path.empty()) {
        write_file(partition_path, partition_to_json(result.partitions) + "\n");
    }
    std::cout << "regions=" << result.partitions.regions.size()
              << " budget_spent=" << result.budget_spent
              << " fully_spent=" << (result.budget_fully_spent ? "yes" : "no") << "\n";
    return 0;
}

int cmd_evaluate(const std::string& true_path, const std::string& published_path,
                 const std::string& queries_path, const std::string& out_path) {
    std::cout << "command=evaluate true=" << true_path << " published=" << published_path
              << " queries=" << queries_path << " out=" << out_path << "\n";
    const SpatialHistogram truth = load_histogram(true_path);
    const SpatialHistogram published = load_histogram(published_path);
    const QuerySet qs = load_queries(queries_path);
    if (qs.rows != truth.rows || qs.cols != truth.cols) {
        throw CliError("validation", "query set and histogram dimensions differ");
    }
    const double l1 = avg_l1_error(truth, published, qs.queries);
    const double divergence = kld(truth, published);
    const int violations = static_cast<int>(check_consistency(published).size());
    std::ostringstream csv;
    csv << "avg_l1,kld,violations\n" << l1 << ',' << divergence << ',' << violations << '\n';
    write_file(out_path, csv.str());
    std::cout << "avg_l1=" << l1 << " kld=" << divergence << " violations=" << violations
              << "\n";
    return 0;
}

int cmd_experiment(const std::string& config_path, const std::string& out_path,
                   const std::string& summary_path) {
    std::cout << "command=experiment config=" << config_path << " out=" << out_path << "\n";
    const ExperimentConfig config = experiment_config_from_json(read_file(config_path));
    const std::vector<EvalReport> reports = run_experiment(config);

    std::ostringstream csv;
    write_report_csv(csv, reports);
    write_file(out_path, csv.str());

    const std::vector<SummaryRow> summary = summarize_reports(reports);
    std::ostringstream summary_csv;
    write_summary_csv(summary_csv, summary);
    const std::string spath = summary_path.empty() ? out_path + ".summary.csv" : summary_path;
    write_file(spath, summary_csv.str());

    int failed = 0;
    for (const EvalReport& r : reports) {
        if (!r.error.empty()) {
            ++failed;
            std::cerr << "cell failed: " << r.mechanism << " eps=" << r.epsilon << " dataset="
                      << r.dataset << " seed=" << r.seed << ": " << r.error << "\n";
        }
    }
    std::cout << "cells=" << reports.size() << " failed=" << failed << " summary=" << spath
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differentially private spatial histograms for trajectory range queries"};
    app.require_subcommand(1);

    std::string input, out, bbox = "0,0,10,10", hotspot_text, model = "uniform";
    std::string hist_path, queries_path, true_path, published_path, config_path, trace_path;
    std::string summary_path, partition_path;
    int resolution = 8;
    int count = 16000;
    int n_traj = 1000;
    int iterations = 10;
    double mean_len = 8.0;
    double epsilon = 0.1;
    double concentration = 8.0;
    double delta_override = -1.0;
    std::uint64_t seed = 1;

    CLI::App* ingest = app.add_subcommand("ingest", "Rasterize a trajectory CSV into a histogram");
    ingest->add_option("--input", input, "trajectory CSV")->required();
    ingest->add_option("--bbox", bbox, "min_lat,min_lon,max_lat,max_lon");
    ingest->add_option("--resolution", resolution, "grid is 2^k x 2^k");
    ingest->add_option("--out", out, "output histogram JSON")->required();

    CLI::App* gen_data = app.add_subcommand("gen-data", "Generate synthetic trajectories");
    gen_data->add_option("--model", model, "uniform|skewed");
    gen_data->add_option("--n", n_traj, "number of trajectories");
    gen_data->add_option("--len", mean_len, "mean path length in cells");
    gen_data->add_option("--seed", seed, "RNG seed");
    gen_data->add_option("--bbox", bbox, "min_lat,min_lon,max_lat,max_lon");
    gen_data->add_option("--resolution", resolution, "grid is 2^k x 2^k");
    gen_data->add_option("--hotspot", hotspot_text, "row,col (skewed model)");
    gen_data->add_option("--concentration", concentration, "skew strength (skewed model)");
    gen_data->add_option("--out", out, "output CSV")->required();

    CLI::App* gen_q = app.add_subcommand("gen-queries", "Generate a random query set");
    gen_q->add_option("--count", count, "number of queries");
    gen_q->add_option("--seed", seed, "RNG seed");
    gen_q->add_option("--resolution", resolution, "grid is 2^k x 2^k");
    gen_q->add_option("--out", out, "output query JSON")->required();

    CLI::App* synth = app.add_subcommand("synthesize", "Publish a private histogram");
    synth->add_option("--hist", hist_path, "true histogram JSON")->required();
    synth->add_option("--queries", queries_path, "query set JSON")->required();
    synth->add_option("--epsilon", epsilon, "total privacy budget");
    synth->add_option("--iterations", iterations, "synthesis iterations T");
    synth->add_option("--seed", seed, "RNG seed");
    synth->add_option("--delta", delta_override, "partition threshold override");
    synth->add_option("--trace", trace_path, "optional JSONL trace output");
    synth->add_option("--partition-out", partition_path, "optional partition JSON output");
    synth->add_option("--out", out, "output histogram JSON")->required();

    CLI::App* evaluate = app.add_subcommand("evaluate", "Compare a published histogram");
    evaluate->add_option("--true", true_path, "true histogram JSON")->required();
    evaluate->add_option("--published", published_path, "published histogram JSON")->required();
    evaluate->add_option("--queries", queries_path, "query set JSON")->required();
    evaluate->add_option("--out", out, "output CSV")->required();

    CLI::App* experiment = app.add_subcommand("experiment", "Run a mechanism/epsilon grid");
    experiment->add_option("--config", config_path, "experiment config JSON")->required();
    experiment->add_option("--out", out, "report CSV")->required();
    experiment->add_option("--summary-out", summary_path, "summary CSV (default <out>.summary.csv)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) return cmd_ingest(input, bbox, resolution, out);
        if (gen_data->parsed()) {
            return cmd_gen_data(model, n_traj, mean_len, seed, bbox, resolution, hotspot_text,
                                concentration, out);
        }
        if (gen_q->parsed()) return cmd_gen_queries(count, seed, resolution, out);
        if (synth->parsed()) {
            return cmd_synthesize(hist_path, queries_path, epsilon, iterations, seed,
                                  delta_override, out, trace_path, partition_path);
        }
        if (evaluate->parsed()) return cmd_evaluate(true_path, published_path, queries_path, out);
        if (experiment->parsed()) return cmd_experiment(config_path, out, summary_path);
    } catch (const CliError& e) {
        std::cerr << "error: " << e.category << ": " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: validation: " << e.what() << "\n";
        return 1;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: validation: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
