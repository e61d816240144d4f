#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "signalcraft/common.hpp"

namespace signalcraft {

// max c'x  subject to  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0.
struct LpProblem {
    std::size_t num_vars = 0;
    std::vector<double> objective;
    std::vector<std::vector<double>> eq_coeffs;
    std::vector<double> eq_rhs;
    std::vector<std::vector<double>> ub_coeffs;
    std::vector<double> ub_rhs;

    // set when built as a design LP over (states x buckets)
    std::size_t n_states = 0;
    std::size_t n_buckets = 0;

    void add_eq(std::vector<double> row, double rhs) {
        eq_coeffs.push_back(std::move(row));
        eq_rhs.push_back(rhs);
    }
    void add_ub(std::vector<double> row, double rhs) {
        ub_coeffs.push_back(std::move(row));
        ub_rhs.push_back(rhs);
    }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
    LpStatus status = LpStatus::Optimal;
    double objective = 0.0;
    std::vector<double> x;
    int iterations = 0;
};

inline const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::Optimal: return "optimal";
        case LpStatus::Infeasible: return "infeasible";
        default: return "unbounded";
    }
}

namespace detail {

// Dense two-phase tableau simplex. Dantzig pricing, falling back to Bland's
// rule after a degenerate stall.
class DenseSimplex {
  public:
    explicit DenseSimplex(const LpProblem& lp) : lp_(lp) {
        m_ = lp.eq_coeffs.size() + lp.ub_coeffs.size();
        n_struct_ = lp.num_vars;
        n_slack_ = lp.ub_coeffs.size();

        std::vector<std::vector<double>> rows(m_);
        std::vector<double> rhs(m_);
        std::vector<std::size_t> art_rows;
        for (std::size_t i = 0; i < lp.ub_coeffs.size(); ++i) {
            auto& row = rows[i];
            row.assign(n_struct_ + n_slack_, 0.0);
            for (std::size_t v = 0; v < n_struct_; ++v) row[v] = lp.ub_coeffs[i][v];
            row[n_struct_ + i] = 1.0;
            rhs[i] = lp.ub_rhs[i];
        }
        for (std::size_t i = 0; i < lp.eq_coeffs.size(); ++i) {
            auto& row = rows[n_slack_ + i];
            row.assign(n_struct_ + n_slack_, 0.0);
            for (std::size_t v = 0; v < n_struct_; ++v) row[v] = lp.eq_coeffs[i][v];
            rhs[n_slack_ + i] = lp.eq_rhs[i];
        }
        for (std::size_t i = 0; i < m_; ++i) {
            if (rhs[i] < 0.0) {
                for (auto& v : rows[i]) v = -v;
                rhs[i] = -rhs[i];
            }
            const bool slack_basic = i < n_slack_ && rows[i][n_struct_ + i] > 0.5;
            if (!slack_basic) art_rows.push_back(i);
        }

        n_art_ = art_rows.size();
        n_ = n_struct_ + n_slack_ + n_art_;
        tab_.assign(m_, std::vector<double>(n_ + 1, 0.0));
        basis_.assign(m_, -1);
        for (std::size_t i = 0; i < m_; ++i) {
            std::copy(rows[i].begin(), rows[i].end(), tab_[i].begin());
            tab_[i][n_] = rhs[i];
            if (i < n_slack_ && rows[i][n_struct_ + i] > 0.5)
                basis_[i] = static_cast<int>(n_struct_ + i);
        }
        for (std::size_t k = 0; k < n_art_; ++k) {
            tab_[art_rows[k]][n_struct_ + n_slack_ + k] = 1.0;
            basis_[art_rows[k]] = static_cast<int>(n_struct_ + n_slack_ + k);
        }
    }

    LpSolution solve() {
        LpSolution sol;
        if (n_art_ > 0) {
            std::vector<double> phase1(n_, 0.0);
            for (std::size_t k = 0; k < n_art_; ++k) phase1[n_struct_ + n_slack_ + k] = -1.0;
            if (!run(phase1, /*allow_artificials=*/true, sol))
                throw SolverError("simplex: phase 1 unbounded");
            double art_sum = 0.0;
            for (std::size_t i = 0; i < m_; ++i)
                if (basis_[i] >= static_cast<int>(n_struct_ + n_slack_)) art_sum += tab_[i][n_];
            if (art_sum > 1e-8) {
                sol.status = LpStatus::Infeasible;
                return sol;
            }
            expel_artificials();
        }

        std::vector<double> cost(n_, 0.0);
        for (std::size_t v = 0; v < n_struct_; ++v) cost[v] = lp_.objective[v];
        if (!run(cost, /*allow_artificials=*/false, sol)) {
            sol.status = LpStatus::Unbounded;
            return sol;
        }
        sol.status = LpStatus::Optimal;
        sol.x.assign(n_struct_, 0.0);
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] >= 0 && basis_[i] < static_cast<int>(n_struct_))
                sol.x[basis_[i]] = tab_[i][n_];
        for (std::size_t v = 0; v < n_struct_; ++v) sol.objective += lp_.objective[v] * sol.x[v];
        return sol;
    }

  private:
    bool run(const std::vector<double>& cost, bool allow_artificials, LpSolution& sol) {
        const std::size_t limit = allow_artificials ? n_ : n_struct_ + n_slack_;
        std::vector<double> reduced(limit);
        std::vector<char> basic_mark(n_, 0);
        const long max_iter = 2000 + 200L * static_cast<long>(m_ + n_);
        long stall = 0;
        bool bland = false;
        for (long it = 0;; ++it) {
            if (it > max_iter) throw SolverError("simplex: iteration limit exceeded");
            std::fill(basic_mark.begin(), basic_mark.end(), 0);
            for (std::size_t i = 0; i < m_; ++i)
                if (basis_[i] >= 0) basic_mark[basis_[i]] = 1;
            compute_reduced(cost, limit, reduced);
            int enter = -1;
            double best = 1e-9;
            for (std::size_t v = 0; v < limit; ++v) {
                if (basic_mark[v]) continue;
                if (reduced[v] > best) {
                    enter = static_cast<int>(v);
                    if (bland) break;
                    best = reduced[v];
                }
            }
            if (enter < 0) return true;
            int leave = -1;
            double best_ratio = 0.0, best_pivot = 0.0;
            for (std::size_t i = 0; i < m_; ++i) {
                if (basis_[i] < 0) continue;
                const double a = tab_[i][enter];
                if (a <= 1e-11) continue;
                const double ratio = tab_[i][n_] / a;
                const bool better =
                    leave < 0 || ratio < best_ratio - 1e-12 ||
                    (ratio < best_ratio + 1e-12 &&
                     (bland ? basis_[i] < basis_[leave] : a > best_pivot));
                if (better) {
                    leave = static_cast<int>(i);
                    best_ratio = ratio;
                    best_pivot = a;
                }
            }
            if (leave < 0) return false;
            if (best_ratio < 1e-12) {
                if (++stall > 500) bland = true;
            } else {
                stall = 0;
                bland = false;
            }
            pivot(static_cast<std::size_t>(leave), static_cast<std::size_t>(enter));
            ++sol.iterations;
        }
    }

    void compute_reduced(const std::vector<double>& cost, std::size_t limit,
                         std::vector<double>& reduced) const {
        std::vector<double> y(m_, 0.0);
        bool any = false;
        for (std::size_t i = 0; i < m_; ++i)
            if (basis_[i] >= 0 && cost[basis_[i]] != 0.0) {
                y[i] = cost[basis_[i]];
                any = true;
            }
        for (std::size_t v = 0; v < limit; ++v) reduced[v] = cost[v];
        if (!any) return;
        for (std::size_t i = 0; i < m_; ++i) {
            if (y[i] == 0.0) continue;
            const auto& row = tab_[i];
            for (std::size_t v = 0; v < limit; ++v) reduced[v] -= y[i] * row[v];
        }
    }

    void pivot(std::size_t row, std::size_t col) {
        auto& prow = tab_[row];
        const double piv = prow[col];
        for (auto& v : prow) v /= piv;
        prow[col] = 1.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == row) continue;
            const double f = tab_[i][col];
            if (f == 0.0) continue;
            auto& trow = tab_[i];
            for (std::size_t v = 0; v <= n_; ++v) trow[v] -= f * prow[v];
            trow[col] = 0.0;
        }
        basis_[row] = static_cast<int>(col);
    }

    void expel_artificials() {
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] < static_cast<int>(n_struct_ + n_slack_)) continue;
            std::size_t col = n_;
            for (std::size_t v = 0; v < n_struct_ + n_slack_; ++v)
                if (std::abs(tab_[i][v]) > 1e-9) {
                    col = v;
                    break;
                }
            if (col < n_)
                pivot(i, col);
            else
                basis_[i] = -1;  // redundant row
        }
    }

    const LpProblem& lp_;
    std::size_t m_ = 0, n_ = 0, n_struct_ = 0, n_slack_ = 0, n_art_ = 0;
    std::vector<std::vector<double>> tab_;
    std::vector<int> basis_;
};

}  // namespace detail

inline LpSolution solve_lp(const LpProblem& lp) {
    if (lp.objective.size() != lp.num_vars)
        throw std::invalid_argument("solve_lp: objective size mismatch");
    for (const auto& row : lp.eq_coeffs)
        if (row.size() != lp.num_vars) throw std::invalid_argument("solve_lp: eq row size mismatch");
    for (const auto& row : lp.ub_coeffs)
        if (row.size() != lp.num_vars) throw std::invalid_argument("solve_lp: ub row size mismatch");
    detail::DenseSimplex simplex(lp);
    return simplex.solve();
}

// Plain-text dump: objective row, then equality rows, then upper-bound rows.
inline void dump_lp(const LpProblem& lp, std::ostream& os) {
    char buf[40];
    auto put = [&](double v, const char* prefix) {
        std::snprintf(buf, sizeof(buf), "%s%.17g", prefix, v);
        os << buf;
    };
    os << "max";
    for (double c : lp.objective) put(c, " ");
    os << '\n';
    for (std::size_t i = 0; i < lp.eq_coeffs.size(); ++i) {
        os << "eq";
        for (double v : lp.eq_coeffs[i]) put(v, " ");
        put(lp.eq_rhs[i], " = ");
        os << '\n';
    }
    for (std::size_t i = 0; i < lp.ub_coeffs.size(); ++i) {
        os << "ub";
        for (double v : lp.ub_coeffs[i]) put(v, " ");
        put(lp.ub_rhs[i], " <= ");
        os << '\n';
    }
}

}  // namespace signalcraft
