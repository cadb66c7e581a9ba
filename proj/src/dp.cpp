#include "privhist/dp.hpp"

#include <cmath>
#include <vector>

namespace privhist {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
    // FNV-1a over the label, then one splitmix round against the parent seed.
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    for (char ch : label) {
        hash ^= static_cast<unsigned char>(ch);
        hash *= 0x100000001B3ULL;
    }
    std::uint64_t z = seed ^ hash;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double laplace(NoiseSource& ns, double scale) {
    if (!(scale > 0.0)) {
        throw std::invalid_argument("laplace: scale must be positive");
    }
    const double u = ns.uniform01() - 0.5;
    const double sign = u < 0.0 ? -1.0 : 1.0;
    return -scale * sign * std::log1p(-2.0 * std::fabs(u));
}

std::size_t exp_mechanism_select(NoiseSource& ns, std::span<const double> scores,
                                 double eps_share, double sensitivity) {
    if (scores.empty()) {
        throw std::invalid_argument("exp_mechanism_select: empty score list");
    }
    if (!(sensitivity > 0.0)) {
        throw std::invalid_argument("exp_mechanism_select: sensitivity must be positive");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = i;
    }
    if (std::isinf(eps_share)) {
        return best;
    }
    const double max_score = scores[best];
    std::vector<double> weights(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        weights[i] = std::exp(eps_share * (scores[i] - max_score) / (2.0 * sensitivity));
        total += weights[i];
    }
    const double target = ns.uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        acc += weights[i];
        if (target <= acc) return i;
    }
    return scores.size() - 1;
}

PrivacyBudget split_budget(double epsilon, int iterations) {
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("split_budget: epsilon must be positive");
    }
    if (iterations < 1) {
        throw std::invalid_argument("split_budget: iterations must be at least 1");
    }
    PrivacyBudget b;
    b.epsilon_total = epsilon;
    b.eps1 = b.eps2 = b.eps3 = b.eps4 = epsilon / 4.0;
    b.iterations = iterations;
    return b;
}

BudgetAccountant::BudgetAccountant(double epsilon, int iterations) : epsilon_(epsilon) {
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("BudgetAccountant: epsilon must be positive");
    }
    if (iterations < 1) {
        throw std::invalid_argument("BudgetAccountant: iterations must be at least 1");
    }
    units_per_quarter_ = iterations;
    total_units_ = 4LL * iterations;
}

void BudgetAccountant::charge_units(long long units) {
    if (spent_units_ + units > total_units_) {
        throw std::runtime_error("BudgetAccountant: charge exceeds total budget");
    }
    spent_units_ += units;
}

void BudgetAccountant::charge_stage1_cost() { charge_units(units_per_quarter_); }
void BudgetAccountant::charge_stage1_density() { charge_units(units_per_quarter_); }
void BudgetAccountant::charge_selection_share() { charge_units(1); }
void BudgetAccountant::charge_error_share() { charge_units(1); }

double BudgetAccountant::spent() const {
    return epsilon_ * (static_cast<double>(spent_units_) / static_cast<double>(total_units_));
}

}  // namespace privhist
