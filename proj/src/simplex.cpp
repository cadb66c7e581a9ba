#include "privhist/simplex.hpp"

#include <cmath>
#include <limits>

namespace privhist {

namespace {

class Tableau {
public:
    Tableau(const LinearProgram& lp, const SimplexOptions& options)
        : options_(options), n_(lp.num_vars), m_(static_cast<int>(lp.rows.size())) {
        if (static_cast<int>(lp.objective.size()) != n_) {
            throw SimplexError("simplex: objective size mismatch");
        }
        if (lp.rhs.size() != lp.rows.size()) {
            throw SimplexError("simplex: rhs size mismatch");
        }
        // Column layout: structural (n), slack (m), artificial (<= m), rhs last.
        n_slack_ = m_;
        n_art_ = 0;
        for (int i = 0; i < m_; ++i) {
            if (lp.rhs[i] < 0.0) ++n_art_;
        }
        cols_ = n_ + n_slack_ + n_art_ + 1;
        table_.assign(static_cast<std::size_t>(m_) * cols_, 0.0);
        basis_.resize(m_);

        int art = 0;
        for (int i = 0; i < m_; ++i) {
            if (static_cast<int>(lp.rows[i].size()) != n_) {
                throw SimplexError("simplex: constraint row size mismatch");
            }
            const double flip = lp.rhs[i] < 0.0 ? -1.0 : 1.0;
            double* row = row_ptr(i);
            for (int j = 0; j < n_; ++j) {
                row[j] = flip * lp.rows[i][j];
            }
            row[n_ + i] = flip;  // slack
            row[cols_ - 1] = flip * lp.rhs[i];
            if (lp.rhs[i] < 0.0) {
                row[n_ + n_slack_ + art] = 1.0;
                basis_[i] = n_ + n_slack_ + art;
                ++art;
            } else {
                basis_[i] = n_ + i;
            }
        }
        cost_.assign(cols_, 0.0);
    }

    SimplexResult run(const LinearProgram& lp) {
        if (n_art_ > 0) {
            // Phase 1: minimize the sum of artificials.
            for (int j = n_ + n_slack_; j < cols_ - 1; ++j) cost_[j] = 1.0;
            canonicalize();
            iterate(/*allow_artificial_entering=*/false);
            if (objective_value() > 1e-7) {
                throw SimplexError("simplex: infeasible (phase 1 optimum " +
                                   std::to_string(objective_value()) + ")");
            }
            remove_basic_artificials();
        }

        cost_.assign(cols_, 0.0);
        for (int j = 0; j < n_; ++j) cost_[j] = lp.objective[j];
        canonicalize();
        iterate(/*allow_artificial_entering=*/false);

        SimplexResult result;
        result.solution.assign(n_, 0.0);
        for (int i = 0; i < m_; ++i) {
            if (basis_[i] < n_) {
                result.solution[basis_[i]] = row_ptr(i)[cols_ - 1];
            }
        }
        result.objective = 0.0;
        for (int j = 0; j < n_; ++j) {
            result.objective += lp.objective[j] * result.solution[j];
        }
        result.pivots = pivots_;
        return result;
    }

private:
    double* row_ptr(int i) { return table_.data() + static_cast<std::size_t>(i) * cols_; }

    double objective_value() const { return -z_[cols_ - 1]; }

    /// Rebuilds the reduced-cost row from cost_ against the current basis.
    void canonicalize() {
        z_.assign(cols_, 0.0);
        for (int j = 0; j < cols_; ++j) z_[j] = cost_[j];
        for (int i = 0; i < m_; ++i) {
            const double cb = cost_[basis_[i]];
            if (cb == 0.0) continue;
            const double* row = row_ptr(i);
            for (int j = 0; j < cols_; ++j) {
                z_[j] -= cb * row[j];
            }
        }
    }

    void iterate(bool allow_artificial_entering) {
        const int art_begin = n_ + n_slack_;
        while (true) {
            // Bland: entering column is the smallest index with negative
            // reduced cost.
            int enter = -1;
            const int limit = allow_artificial_entering ? cols_ - 1 : art_begin;
            for (int j = 0; j < limit; ++j) {
                if (z_[j] < -options_.tol) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return;

            // Bland: leaving row has the minimum ratio; ties break on the
            // smallest basic variable index.
            int leave = -1;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m_; ++i) {
                const double a = row_ptr(i)[enter];
                if (a > options_.tol) {
                    const double ratio = row_ptr(i)[cols_ - 1] / a;
                    if (leave < 0 || ratio < best_ratio - options_.tol) {
                        best_ratio = ratio;
                        leave = i;
                    } else if (ratio <= best_ratio + options_.tol && basis_[i] < basis_[leave]) {
                        leave = i;
                    }
                }
            }
            if (leave < 0) {
                throw SimplexError("simplex: unbounded objective");
            }
            pivot(leave, enter);
        }
    }

    void pivot(int leave, int enter) {
        if (++pivots_ > options_.max_pivots) {
            throw SimplexError("simplex: pivot limit " + std::to_string(options_.max_pivots) +
                               " exceeded; numerical failure on this instance");
        }
        double* prow = row_ptr(leave);
        const double p = prow[enter];
        for (int j = 0; j < cols_; ++j) prow[j] /= p;
        prow[enter] = 1.0;
        for (int i = 0; i < m_; ++i) {
            if (i == leave) continue;
            double* row = row_ptr(i);
            const double factor = row[enter];
            if (factor == 0.0) continue;
            for (int j = 0; j < cols_; ++j) {
                row[j] -= factor * prow[j];
            }
            row[enter] = 0.0;
        }
        const double zf = z_[enter];
        if (zf != 0.0) {
            for (int j = 0; j < cols_; ++j) z_[j] -= zf * prow[j];
            z_[enter] = 0.0;
        }
        basis_[leave] = enter;
    }

    /// After phase 1, pivots zero-valued artificials out of the basis;
    /// rows that cannot be pivoted are redundant and are dropped.
    void remove_basic_artificials() {
        const int art_begin = n_ + n_slack_;
        for (int i = 0; i < m_; ++i) {
            if (basis_[i] < art_begin) continue;
            int enter = -1;
            for (int j = 0; j < art_begin; ++j) {
                if (std::fabs(row_ptr(i)[j]) > options_.tol) {
                    enter = j;
                    break;
                }
            }
            if (enter >= 0) {
                pivot(i, enter);
            } else {
                drop_row(i);
                --i;
            }
        }
    }

    void drop_row(int i) {
        if (i != m_ - 1) {
            for (int j = 0; j < cols_; ++j) {
                row_ptr(i)[j] = row_ptr(m_ - 1)[j];
            }
            basis_[i] = basis_[m_ - 1];
        }
        --m_;
        basis_.resize(m_);
        table_.resize(static_cast<std::size_t>(m_) * cols_);
    }

    SimplexOptions options_;
    int n_;
    int m_;
    int n_slack_ = 0;
    int n_art_ = 0;
    int cols_ = 0;
    std::vector<double> table_;
    std::vector<double> cost_;
    std::vector<double> z_;
    std::vector<int> basis_;
    long long pivots_ = 0;
};

}  // namespace

SimplexResult solve_simplex(const LinearProgram& lp, const SimplexOptions& options) {
    Tableau tableau(lp, options);
    return tableau.run(lp);
}

}  // namespace privhist
