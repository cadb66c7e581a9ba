#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>

namespace privhist {

/// Counter-based pseudorandom stream. Identical seeds yield identical draw
/// sequences; independent streams come from derive_seed.
class NoiseSource {
public:
    explicit NoiseSource(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ULL * ++counter_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform draw in the open interval (0, 1).
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound).
    std::uint64_t uniform_below(std::uint64_t bound) {
        if (bound == 0) {
            throw std::invalid_argument("uniform_below: bound must be positive");
        }
        return static_cast<std::uint64_t>(uniform01() * static_cast<double>(bound)) % bound;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t draws() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

/// Stable labeled sub-seed derivation; adding a new label never shifts the
/// stream of an existing one.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

/// One draw from Laplace(0, scale) via inverse CDF of a single uniform draw.
double laplace(NoiseSource& ns, double scale);

/// Samples index i with probability proportional to
/// exp(eps_share * scores[i] / (2 * sensitivity)). Weights are computed with
/// max-score subtraction, so scores of any magnitude are safe. An infinite
/// eps_share degenerates to argmax and consumes no draw.
std::size_t exp_mechanism_select(NoiseSource& ns, std::span<const double> scores,
                                 double eps_share, double sensitivity);

/// Four-way split of the total budget: partition cost, densities, query
/// selection, and error measurement, each epsilon/4, with per-iteration
/// shares for the last two.
struct PrivacyBudget {
    double epsilon_total = 0.0;
    double eps1 = 0.0;  ///< partition cost noise
    double eps2 = 0.0;  ///< density noise
    double eps3 = 0.0;  ///< query selection
    double eps4 = 0.0;  ///< error measurement
    int iterations = 1;

    double eps3_iteration_share() const { return eps3 / iterations; }
    double eps4_iteration_share() const { return eps4 / iterations; }
};

PrivacyBudget split_budget(double epsilon, int iterations);

/// Tracks budget consumption in exact units of epsilon/(4T), so a complete
/// run totals exactly epsilon with no floating-point drift. Throws when a
/// charge would exceed the total.
class BudgetAccountant {
public:
    BudgetAccountant(double epsilon, int iterations);

    void charge_stage1_cost();      ///< epsilon/4
    void charge_stage1_density();   ///< epsilon/4
    void charge_selection_share();  ///< epsilon/(4T)
    void charge_error_share();      ///< epsilon/(4T)

    double epsilon() const { return epsilon_; }
    double spent() const;
    bool fully_spent() const { return spent_units_ == total_units_; }

private:
    void charge_units(long long units);

    double epsilon_;
    long long total_units_;
    long long spent_units_ = 0;
    long long units_per_quarter_;
};

}  // namespace privhist
