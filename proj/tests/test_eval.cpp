#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "privhist/eval.hpp"

using namespace privhist;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SpatialHistogram skewed_truth(int resolution, int n_traj, std::uint64_t seed) {
    GridSpec g;
    g.bbox = {0.0, 0.0, 10.0, 10.0};
    g.resolution = resolution;
    const int side = g.side();
    const auto data = gen_skewed(n_traj, 8.0, g, {side / 2, side / 2}, 8.0, seed);
    std::vector<std::vector<CellIndex>> paths;
    for (const auto& t : data) paths.push_back(rasterize(t, g));
    return build_from_cell_paths(paths, side, side);
}

}  // namespace

TEST_CASE("query generation is deterministic, in bounds, and ordered") {
    const QuerySet a = gen_queries(16, 16, 500, 42);
    const QuerySet b = gen_queries(16, 16, 500, 42);
    REQUIRE(a.queries.size() == 500);
    for (std::size_t i = 0; i < a.queries.size(); ++i) {
        CHECK(a.queries[i] == b.queries[i]);
        CHECK(a.queries[i].row_lo >= 0);
        CHECK(a.queries[i].row_lo <= a.queries[i].row_hi);
        CHECK(a.queries[i].row_hi < 16);
        CHECK(a.queries[i].col_lo <= a.queries[i].col_hi);
        CHECK(a.queries[i].col_hi < 16);
    }
}

TEST_CASE("the only query on a 1x1 grid is the single cell") {
    const QuerySet qs = gen_queries(1, 1, 1, 7);
    REQUIRE(qs.queries.size() == 1);
    CHECK(qs.queries[0] == RangeQuery{0, 0, 0, 0});
}

TEST_CASE("ordered corner pairs follow the two-uniform-draws distribution") {
    // Corners are drawn uniformly and then ordered, so an ordered pair
    // (lo, hi) has probability 2/N^2 when lo < hi and 1/N^2 when lo == hi.
    const int side = 8;
    const int draws = 100000;
    const QuerySet qs = gen_queries(side, side, draws, 1234);

    std::vector<long long> observed(side * side, 0);
    for (const RangeQuery& q : qs.queries) {
        ++observed[q.row_lo * side + q.row_hi];
    }
    std::vector<long long> compact_obs;
    std::vector<double> expected;
    for (int lo = 0; lo < side; ++lo) {
        for (int hi = lo; hi < side; ++hi) {
            compact_obs.push_back(observed[lo * side + hi]);
            expected.push_back(draws * (lo == hi ? 1.0 : 2.0) / (side * side));
        }
    }
    const double stat = oracle::chi_square_stat(compact_obs, expected);
    CHECK(stat < oracle::chi_square_quantile_999(static_cast<int>(expected.size()) - 1));
}

TEST_CASE("query json round-trip") {
    const QuerySet qs = gen_queries(16, 16, 200, 5);
    const QuerySet back = queries_from_json(queries_to_json(qs));
    CHECK(back.rows == qs.rows);
    CHECK(back.cols == qs.cols);
    CHECK(back.seed == qs.seed);
    REQUIRE(back.queries.size() == qs.queries.size());
    for (std::size_t i = 0; i < qs.queries.size(); ++i) {
        CHECK(back.queries[i] == qs.queries[i]);
    }
    CHECK_THROWS_AS(queries_from_json("{\"version\":1,\"rows\":4,\"cols\":4,\"seed\":0,"
                                      "\"queries\":[[0,5,0,1]]}"),
                    std::runtime_error);
}

TEST_CASE("average L1 error agrees with the straight-line reference") {
    const SpatialHistogram truth = skewed_truth(3, 100, 3);
    const SpatialHistogram uniform = init_uniform(8, 8, truth.total);
    const QuerySet qs = gen_queries(8, 8, 300, 9);

    CHECK(avg_l1_error(truth, truth, qs.queries) == 0.0);
    CHECK(avg_l1_error(truth, uniform, qs.queries) ==
          doctest::Approx(oracle::avg_l1_reference(truth, uniform, qs.queries)).epsilon(1e-12));

    // Two known answers differing by 2.
    SpatialHistogram a(1, 2), b(1, 2);
    a.faces(0, 0) = 5.0;
    b.faces(0, 0) = 3.0;
    const std::vector<RangeQuery> single{{0, 0, 0, 0}};
    CHECK(avg_l1_error(a, b, single) == 2.0);

    const SpatialHistogram other(4, 4);
    CHECK_THROWS_AS(avg_l1_error(truth, other, qs.queries), std::invalid_argument);
}

TEST_CASE("kld is zero on identical histograms and log|F| on a point mass") {
    const SpatialHistogram truth = skewed_truth(3, 100, 13);
    CHECK(kld(truth, truth) == doctest::Approx(0.0).epsilon(1e-12));

    const int side = 8;
    SpatialHistogram point(side, side);
    point.faces(3, 4) = 50.0;
    point.total = 50.0;
    const SpatialHistogram uniform = init_uniform(side, side, 50.0);
    CHECK(kld(point, uniform) ==
          doctest::Approx(std::log(static_cast<double>(side * side))).epsilon(1e-9));
}

TEST_CASE("kld matches the straight-line reference on random fixtures") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> value(0.0, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        SpatialHistogram truth(4, 4), pub(4, 4);
        for (double& v : truth.faces.data()) v = value(rng);
        for (double& v : truth.edges_v.data()) v = value(rng) * 0.3;
        for (double& v : truth.edges_h.data()) v = value(rng) * 0.3;
        truth.total = truth.faces.sum();
        for (double& v : pub.faces.data()) v = value(rng);
        for (double& v : pub.edges_v.data()) v = value(rng) * 0.3;
        for (double& v : pub.edges_h.data()) v = value(rng) * 0.3;
        // Match the total entry mass: the relative entropy is only
        // sign-definite between equal-mass histograms.
        const double truth_mass =
            truth.faces.sum() + truth.edges_v.sum() + truth.edges_h.sum();
        const double pub_mass = pub.faces.sum() + pub.edges_v.sum() + pub.edges_h.sum();
        const double rescale = truth_mass / pub_mass;
        for (double& v : pub.faces.data()) v *= rescale;
        for (double& v : pub.edges_v.data()) v *= rescale;
        for (double& v : pub.edges_h.data()) v *= rescale;
        pub.total = truth.total;
        CHECK(kld(truth, pub) ==
              doctest::Approx(oracle::kld_reference(truth, pub)).epsilon(1e-9));
        CHECK(kld(truth, pub) >= -1e-5);
    }
}

TEST_CASE("laplace baseline noise scale is (2k-1)/eps") {
    CHECK(lm_noise_scale(10, 0.5) == doctest::Approx(38.0).epsilon(1e-12));
    CHECK(lm_noise_scale(1, 1.0) == 1.0);
    CHECK_THROWS_AS(lm_noise_scale(0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(lm_noise_scale(10, 0.0), std::invalid_argument);
}

TEST_CASE("laplace baseline with infinite budget is the identity plus clamp") {
    const SpatialHistogram truth = skewed_truth(3, 100, 19);
    NoiseSource ns(7);
    const SpatialHistogram published = lm_publish(truth, kInf, 10, ns);
    CHECK(published.faces == truth.faces);
    CHECK(published.edges_v == truth.edges_v);
    CHECK(published.edges_h == truth.edges_h);
}

TEST_CASE("laplace baseline output is non-negative and unrepaired") {
    const SpatialHistogram truth = skewed_truth(3, 50, 23);
    NoiseSource ns(11);
    const SpatialHistogram published = lm_publish(truth, 0.1, 10, ns);
    for (double v : published.faces.data()) CHECK(v >= 0.0);
    for (double v : published.edges_v.data()) CHECK(v >= 0.0);
    for (double v : published.edges_h.data()) CHECK(v >= 0.0);
}

TEST_CASE("face-only baseline learns a uniform truth with noise disabled") {
    const SpatialHistogram truth = init_uniform(8, 8, 64.0);
    const QuerySet qs = gen_queries(8, 8, 200, 29);
    NoiseSource ns(13);
    const SpatialHistogram published = mwem_face_publish(truth, qs.queries, kInf, 10, ns);
    double max_face_err = 0.0;
    for (std::size_t i = 0; i < truth.faces.size(); ++i) {
        max_face_err =
            std::max(max_face_err, std::fabs(truth.faces.data()[i] - published.faces.data()[i]));
    }
    CHECK(max_face_err < 1e-9);
}

TEST_CASE("face-only baseline is deterministic and may violate consistency") {
    const SpatialHistogram truth = skewed_truth(4, 800, 31);
    const QuerySet qs = gen_queries(16, 16, 500, 37);
    NoiseSource a(17), b(17);
    const SpatialHistogram pa = mwem_face_publish(truth, qs.queries, 0.5, 10, a);
    const SpatialHistogram pb = mwem_face_publish(truth, qs.queries, 0.5, 10, b);
    CHECK(pa.faces == pb.faces);

    // Scale-downs push faces below the untouched uniform edges somewhere on
    // at least one seed.
    int violating_runs = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        NoiseSource ns(seed);
        const SpatialHistogram published = mwem_face_publish(truth, qs.queries, 0.5, 10, ns);
        if (!check_consistency(published).empty()) ++violating_runs;
    }
    CHECK(violating_runs >= 1);
}

TEST_CASE("dqam publishing spends exactly epsilon and stays consistent") {
    const SpatialHistogram truth = skewed_truth(4, 500, 41);
    const QuerySet qs = gen_queries(16, 16, 500, 43);
    const DqamResult result = dqam_publish(truth, qs.queries, 0.5, 10, 99);
    CHECK(result.budget_fully_spent);
    CHECK(result.budget_spent == 0.5);
    CHECK(check_consistency(result.histogram).empty());
    CHECK(result.trace.size() == 10);

    const DqamResult again = dqam_publish(truth, qs.queries, 0.5, 10, 99);
    CHECK(again.histogram.faces == result.histogram.faces);
    CHECK(again.histogram.edges_v == result.histogram.edges_v);
    CHECK(again.histogram.edges_h == result.histogram.edges_h);
}

TEST_CASE("a single-region partition makes every update cancel against renormalization") {
    // With the default threshold 4/eps1^2, any data set with 2n below the
    // threshold keeps the root as one region; a factor applied to every face
    // and edge is undone exactly by the renormalization, so the published
    // histogram is the uniform initialization.
    const SpatialHistogram truth = skewed_truth(4, 1000, 41);
    const QuerySet qs = gen_queries(16, 16, 300, 43);
    const DqamResult result = dqam_publish(truth, qs.queries, 0.1, 10, 77);
    REQUIRE(result.partitions.regions.size() == 1);
    const SpatialHistogram uniform = init_uniform(16, 16, truth.total);
    for (std::size_t i = 0; i < uniform.faces.size(); ++i) {
        CHECK(result.histogram.faces.data()[i] ==
              doctest::Approx(uniform.faces.data()[i]).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < uniform.edges_v.size(); ++i) {
        CHECK(result.histogram.edges_v.data()[i] ==
              doctest::Approx(uniform.edges_v.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("experiment config parses and validates") {
    const std::string text = R"({
        "mechanisms": ["lm", "dqam"],
        "epsilons": [0.1, 0.5],
        "datasets": [{"name": "skew", "model": "skewed", "n_traj": 100,
                      "mean_len": 6, "resolution": 3, "hotspot": [4, 4],
                      "concentration": 8, "seed": 2}],
        "seeds": [1, 2, 3],
        "T": 5,
        "query_count": 100
    })";
    const ExperimentConfig config = experiment_config_from_json(text);
    CHECK(config.mechanisms.size() == 2);
    CHECK(config.epsilons.size() == 2);
    CHECK(config.datasets[0].hotspot.row == 4);
    CHECK(config.iterations == 5);
    CHECK(config.query_count == 100);

    CHECK_THROWS_AS(experiment_config_from_json("{\"mechanisms\":[\"bad\"]}"),
                    std::runtime_error);
    CHECK_THROWS_AS(experiment_config_from_json("not json"), std::runtime_error);
}

TEST_CASE("a single cell produces a single reproducible report row") {
    ExperimentConfig config;
    config.mechanisms = {"lm"};
    config.epsilons = {0.5};
    DatasetSpec spec;
    spec.name = "mini";
    spec.model = "uniform";
    spec.n_traj = 50;
    spec.mean_len = 4.0;
    spec.resolution = 3;
    spec.seed = 5;
    config.datasets = {spec};
    config.seeds = {11};
    config.query_count = 50;

    const auto reports = run_experiment(config);
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].mechanism == "lm");
    CHECK(reports[0].dataset == "mini");
    CHECK(reports[0].error.empty());
    CHECK(reports[0].avg_l1 >= 0.0);

    const auto again = run_experiment(config);
    CHECK(again[0].avg_l1 == reports[0].avg_l1);
    CHECK(again[0].kld_value == reports[0].kld_value);
    CHECK(again[0].violations == reports[0].violations);
}

TEST_CASE("a full experiment grid reproduces bit-for-bit in deterministic order") {
    ExperimentConfig config;
    config.mechanisms = {"lm", "mwem", "dqam"};
    config.epsilons = {0.1, 0.5};
    DatasetSpec spec;
    spec.name = "grid";
    spec.model = "skewed";
    spec.n_traj = 100;
    spec.mean_len = 5.0;
    spec.resolution = 3;
    spec.hotspot = {4, 4};
    spec.seed = 9;
    config.datasets = {spec};
    config.seeds = {1, 2};
    config.iterations = 5;
    config.query_count = 100;

    const auto a = run_experiment(config);
    const auto b = run_experiment(config);
    REQUIRE(a.size() == 12);
    REQUIRE(b.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].mechanism == b[i].mechanism);
        CHECK(a[i].epsilon == b[i].epsilon);
        CHECK(a[i].seed == b[i].seed);
        CHECK(a[i].avg_l1 == b[i].avg_l1);
        CHECK(a[i].kld_value == b[i].kld_value);
        CHECK(a[i].violations == b[i].violations);
        CHECK(a[i].error.empty());
    }
    // Cells come back in configuration order regardless of scheduling.
    CHECK(a[0].mechanism == "lm");
    CHECK(a[4].mechanism == "mwem");
    CHECK(a[8].mechanism == "dqam");
    CHECK(a[0].epsilon == 0.1);
    CHECK(a[2].epsilon == 0.5);
}

TEST_CASE("report csv carries the documented schema and summary has std-dev") {
    ExperimentConfig config;
    config.mechanisms = {"lm"};
    config.epsilons = {0.5};
    DatasetSpec spec;
    spec.name = "mini";
    spec.model = "uniform";
    spec.n_traj = 40;
    spec.mean_len = 4.0;
    spec.resolution = 3;
    spec.seed = 5;
    config.datasets = {spec};
    config.seeds = {1, 2, 3, 4, 5};
    config.query_count = 50;

    const auto reports = run_experiment(config);
    std::ostringstream csv;
    write_report_csv(csv, reports);
    const std::string text = csv.str();
    CHECK(text.rfind("mechanism,epsilon,dataset,seed,avg_l1,kld,runtime_s,violations\n", 0) ==
          0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 6);

    const auto summary = summarize_reports(reports);
    REQUIRE(summary.size() == 1);
    CHECK(summary[0].mechanism == "lm");
    std::ostringstream scsv;
    write_summary_csv(scsv, summary);
    CHECK(scsv.str().find("std_avg_l1") != std::string::npos);
    CHECK(summary[0].std_avg_l1 >= 0.0);
}
