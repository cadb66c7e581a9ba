// End-to-end exercises of the command-line tool: golden ingestion, the full
// generate -> ingest -> synthesize -> evaluate pipeline, determinism, and
// error exits. Commands run through std::system against the built binary.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "privhist/eval.hpp"

namespace fs = std::filesystem;
using namespace privhist;

namespace {

const std::string kCli = CLI_BINARY_PATH;
const std::string kDataDir = TEST_DATA_DIR;

struct Scratch {
    fs::path dir;
    Scratch() {
        dir = fs::temp_directory_path() /
              ("privhist_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
    const std::string command = kCli + " " + args + " >/dev/null 2>&1";
    return std::system(command.c_str());
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("ingest matches the golden two-trajectory histogram") {
    Scratch scratch;
    const std::string out = scratch.path("hist.json");
    const int rc = run("ingest --input " + kDataDir + "/two_traj.csv --bbox 0,0,4,4 "
                       "--resolution 2 --out " + out);
    REQUIRE(rc == 0);
    CHECK(slurp(out) == slurp(kDataDir + "/golden_hist.json"));

    const SpatialHistogram h = load_histogram(out);
    CHECK(h.total == 2.0);
    CHECK(eval_range_query(h, {1, 1, 1, 2}) == 1.0);
}

TEST_CASE("ingesting an empty csv yields the zero histogram") {
    Scratch scratch;
    const std::string csv = scratch.path("empty.csv");
    {
        std::ofstream out(csv);
        out << "traj_id,seq,lat,lon\n";
    }
    const std::string out = scratch.path("hist.json");
    REQUIRE(run("ingest --input " + csv + " --bbox 0,0,4,4 --resolution 2 --out " + out) == 0);
    const SpatialHistogram h = load_histogram(out);
    CHECK(h.total == 0.0);
    CHECK(h.faces.sum() == 0.0);
}

TEST_CASE("bad bbox order is a validation error") {
    Scratch scratch;
    const int rc = run("ingest --input " + kDataDir + "/two_traj.csv --bbox 4,0,0,4 "
                       "--resolution 2 --out " + scratch.path("h.json"));
    CHECK(rc != 0);
}

TEST_CASE("full pipeline runs and the synthesize step is deterministic") {
    const auto pipeline_start = std::chrono::steady_clock::now();
    Scratch scratch;
    const std::string csv = scratch.path("data.csv");
    const std::string hist = scratch.path("hist.json");
    const std::string queries = scratch.path("queries.json");
    const std::string published_a = scratch.path("pub_a.json");
    const std::string published_b = scratch.path("pub_b.json");
    const std::string eval_csv = scratch.path("eval.csv");

    REQUIRE(run("gen-data --model skewed --n 300 --len 6 --seed 7 --bbox 0,0,10,10 "
                "--resolution 4 --hotspot 8,8 --concentration 8 --out " + csv) == 0);
    REQUIRE(run("ingest --input " + csv + " --bbox 0,0,10,10 --resolution 4 --out " + hist) ==
            0);
    REQUIRE(run("gen-queries --count 400 --seed 11 --resolution 4 --out " + queries) == 0);
    REQUIRE(run("synthesize --hist " + hist + " --queries " + queries +
                " --epsilon 0.5 --iterations 10 --seed 13 --out " + published_a +
                " --trace " + scratch.path("trace.jsonl") +
                " --partition-out " + scratch.path("partitions.json")) == 0);
    const PartitionSet partitions =
        partition_from_json(slurp(scratch.path("partitions.json")));
    CHECK(partitions.rows == 16);
    CHECK(!partitions.regions.empty());
    REQUIRE(run("synthesize --hist " + hist + " --queries " + queries +
                " --epsilon 0.5 --iterations 10 --seed 13 --out " + published_b) == 0);
    CHECK(slurp(published_a) == slurp(published_b));

    REQUIRE(run("evaluate --true " + hist + " --published " + published_a + " --queries " +
                queries + " --out " + eval_csv) == 0);
    const std::string report = slurp(eval_csv);
    CHECK(report.rfind("avg_l1,kld,violations\n", 0) == 0);
    // A consistent publication reports zero violations.
    CHECK(report.find(",0\n") != std::string::npos);

    // Input files are untouched by downstream commands.
    const std::string hist_before = slurp(hist);
    REQUIRE(run("evaluate --true " + hist + " --published " + hist + " --queries " + queries +
                " --out " + eval_csv) == 0);
    CHECK(slurp(hist) == hist_before);
    CHECK(slurp(eval_csv).find("0,0,0") != std::string::npos);

    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                         pipeline_start)
                               .count();
    CHECK(seconds < 60.0);
}

TEST_CASE("evaluating a histogram against itself reports zero error") {
    Scratch scratch;
    const std::string hist = scratch.path("hist.json");
    REQUIRE(run("ingest --input " + kDataDir + "/two_traj.csv --bbox 0,0,4,4 "
                "--resolution 2 --out " + hist) == 0);
    const std::string queries = scratch.path("queries.json");
    REQUIRE(run("gen-queries --count 50 --seed 3 --resolution 2 --out " + queries) == 0);
    const std::string eval_csv = scratch.path("eval.csv");
    REQUIRE(run("evaluate --true " + hist + " --published " + hist + " --queries " + queries +
                " --out " + eval_csv) == 0);
    CHECK(slurp(eval_csv) == "avg_l1,kld,violations\n0,0,0\n");
}

TEST_CASE("experiment command writes report and summary csv files") {
    Scratch scratch;
    const std::string config = scratch.path("config.json");
    {
        std::ofstream out(config);
        out << R"({
            "mechanisms": ["lm", "mwem", "dqam"],
            "epsilons": [0.5],
            "datasets": [{"name": "mini", "model": "skewed", "n_traj": 120,
                          "mean_len": 6, "resolution": 3, "hotspot": [4, 4],
                          "concentration": 8, "seed": 3}],
            "seeds": [1, 2],
            "T": 5,
            "query_count": 200
        })";
    }
    const std::string report = scratch.path("report.csv");
    REQUIRE(run("experiment --config " + config + " --out " + report) == 0);
    const std::string text = slurp(report);
    CHECK(text.rfind("mechanism,epsilon,dataset,seed,avg_l1,kld,runtime_s,violations\n", 0) ==
          0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 7);  // header + 3 mechanisms x 2 seeds
    const std::string summary = slurp(report + ".summary.csv");
    CHECK(summary.find("std_avg_l1") != std::string::npos);
    CHECK(summary.find("dqam") != std::string::npos);
}

TEST_CASE("missing files and bad arguments exit nonzero") {
    Scratch scratch;
    CHECK(run("ingest --input /nonexistent.csv --bbox 0,0,4,4 --resolution 2 --out " +
              scratch.path("h.json")) != 0);
    CHECK(run("synthesize --hist /nonexistent.json --queries /nonexistent.json --out " +
              scratch.path("o.json")) != 0);
    CHECK(run("gen-data --model nosuch --out " + scratch.path("d.csv")) != 0);
    CHECK(run("") != 0);  // a subcommand is required
}
