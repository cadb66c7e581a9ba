// Times the serial reference against the OpenMP batch kernels for range-query
// evaluation and query scoring, and checks that both produce identical
// results.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "privhist/eval.hpp"
#include "privhist/synthesis.hpp"
#include "privhist/trajectory.hpp"

using namespace privhist;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
    double best = 1e300;
    for (int i = 0; i < repeats; ++i) {
        const auto start = std::chrono::steady_clock::now();
        fn();
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();
        if (ms < best) best = ms;
    }
    return best;
}

}  // namespace

int main(int argc, char** argv) {
    int resolution = 6;
    int query_count = 16000;
    int repeats = 5;
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string flag = argv[i];
        if (flag == "--resolution") resolution = std::stoi(argv[i + 1]);
        else if (flag == "--queries") query_count = std::stoi(argv[i + 1]);
        else if (flag == "--repeats") repeats = std::stoi(argv[i + 1]);
    }

    GridSpec grid;
    grid.bbox = {0.0, 0.0, 10.0, 10.0};
    grid.resolution = resolution;
    const int side = grid.side();

    const auto raw = gen_skewed(2000, 12.0, grid, {side / 2, side / 2}, 6.0, 42);
    std::vector<std::vector<CellIndex>> paths;
    for (const auto& t : raw) paths.push_back(rasterize(t, grid));
    const SpatialHistogram truth = build_from_cell_paths(paths, side, side);
    const SpatialHistogram estimate = init_uniform(side, side, truth.total);
    const QuerySet qs = gen_queries(side, side, query_count, 7);

#ifdef _OPENMP
    const int threads = omp_get_max_threads();
#else
    const int threads = 1;
#endif
    std::printf("grid %dx%d, %d queries, %d threads, best of %d runs\n", side, side, query_count,
                threads, repeats);

    std::vector<double> serial_values, parallel_values;
    const double eval_serial =
        time_ms([&] { serial_values = eval_queries_serial(truth, qs.queries); }, repeats);
    const double eval_parallel =
        time_ms([&] { parallel_values = eval_queries(truth, qs.queries); }, repeats);
    const bool eval_match = serial_values == parallel_values;

    std::vector<double> serial_scores, parallel_scores;
    const double score_serial =
        time_ms([&] { serial_scores = score_queries_serial(truth, estimate, qs.queries); },
                repeats);
    const double score_parallel =
        time_ms([&] { parallel_scores = score_queries(truth, estimate, qs.queries); }, repeats);
    const bool score_match = serial_scores == parallel_scores;

    std::printf("%-22s %10s %10s %8s %6s\n", "kernel", "serial ms", "omp ms", "speedup",
                "equal");
    std::printf("%-22s %10.2f %10.2f %7.2fx %6s\n", "eval_queries", eval_serial, eval_parallel,
                eval_serial / eval_parallel, eval_match ? "yes" : "NO");
    std::printf("%-22s %10.2f %10.2f %7.2fx %6s\n", "score_queries", score_serial,
                score_parallel, score_serial / score_parallel, score_match ? "yes" : "NO");

    return eval_match && score_match ? 0 : 1;
}
