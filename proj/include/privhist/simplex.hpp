#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace privhist {

/// minimize objective . x  subject to  rows . x <= rhs,  x >= 0.
struct LinearProgram {
    int num_vars = 0;
    std::vector<double> objective;
    std::vector<std::vector<double>> rows;
    std::vector<double> rhs;
};

struct SimplexOptions {
    long long max_pivots = 2'000'000;
    double tol = 1e-9;
};

struct SimplexResult {
    std::vector<double> solution;
    double objective = 0.0;
    long long pivots = 0;
};

class SimplexError : public std::runtime_error {
public:
    explicit SimplexError(const std::string& what) : std::runtime_error(what) {}
};

/// Dense two-phase tableau simplex with Bland's rule, exact and deterministic
/// at small scale. Throws SimplexError on infeasible or unbounded problems
/// and when the pivot limit is exceeded.
SimplexResult solve_simplex(const LinearProgram& lp, const SimplexOptions& options = {});

}  // namespace privhist
