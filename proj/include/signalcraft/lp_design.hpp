#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "signalcraft/common.hpp"
#include "signalcraft/design_result.hpp"
#include "signalcraft/dist.hpp"
#include "signalcraft/equilibrium.hpp"
#include "signalcraft/evaluate.hpp"
#include "signalcraft/lp.hpp"
#include "signalcraft/mechanism.hpp"
#include "signalcraft/preference.hpp"
#include "signalcraft/rng.hpp"

namespace signalcraft {

// Signal-assignment program over (state, bucket) mass variables: states carry
// fixed mass, every bucket constrains the mean of the mass pooled into it.
struct BucketLp {
    std::vector<double> nu, p;       // states
    std::vector<double> lo, hi;      // bucket posterior-mean windows; hi may be +inf
    std::vector<std::vector<double>> c;  // objective per unit mass, states x buckets

    std::size_t states() const { return nu.size(); }
    std::size_t buckets() const { return lo.size(); }

    void validate() const {
        if (nu.empty() || nu.size() != p.size() || c.size() != nu.size())
            throw std::invalid_argument("bucket lp: state arrays mismatch");
        if (lo.empty() || lo.size() != hi.size())
            throw std::invalid_argument("bucket lp: bucket arrays mismatch");
        for (std::size_t j = 1; j < nu.size(); ++j)
            if (!(nu[j] > nu[j - 1])) throw std::invalid_argument("bucket lp: states must increase");
        for (std::size_t b = 0; b < lo.size(); ++b) {
            if (!(lo[b] <= hi[b])) throw std::invalid_argument("bucket lp: empty window");
            if (b > 0 && lo[b] < lo[b - 1] - 1e-12)
                throw std::invalid_argument("bucket lp: windows must be sorted");
            if (b > 0 && lo[b] > hi[b - 1] + 1e-9)
                throw std::invalid_argument("bucket lp: windows must cover the state range");
        }
        for (const auto& row : c)
            if (row.size() != lo.size()) throw std::invalid_argument("bucket lp: ragged objective");
        if (lo.front() > nu.front() + 1e-12 || hi.back() < nu.back() - 1e-12)
            throw std::invalid_argument("bucket lp: windows must cover the state range");
    }

    std::size_t bucket_of(double x) const {
        auto it = std::upper_bound(lo.begin(), lo.end(), x);
        std::size_t b = it == lo.begin() ? 0 : static_cast<std::size_t>(it - lo.begin()) - 1;
        while (b + 1 < lo.size() && x > hi[b] + 1e-12) ++b;
        return b;
    }
};

struct BucketSolution {
    double objective = 0.0;
    // nonzero mass per state as (bucket, mass) pairs
    std::vector<std::vector<std::pair<std::size_t, double>>> z;
    long iterations = 0;
};

namespace detail {

// Revised simplex specialized to the bucket assignment family. The state-mass
// equalities are handled through one key column per state, so the explicit
// working inverse only spans the bucket mean rows.
class BucketSimplex {
  public:
    explicit BucketSimplex(const BucketLp& lp) : in_(lp) {
        lp.validate();
        for (std::size_t j = 0; j < lp.states(); ++j)
            if (lp.p[j] > 0.0) states_.push_back(j);
        if (states_.empty()) throw std::invalid_argument("bucket lp: no mass");
        nu_min_ = lp.nu[states_.front()];
        nu_max_ = lp.nu[states_.back()];
        for (std::size_t b = 0; b < lp.buckets(); ++b) {
            if (lp.lo[b] > nu_max_ + 1e-12) continue;  // unreachable above
            if (lp.hi[b] < nu_min_ - 1e-12) continue;  // unreachable below
            buckets_.push_back(b);
        }
        if (buckets_.empty()) throw std::invalid_argument("bucket lp: no reachable bucket");
        n_ = states_.size();
        k_ = buckets_.size();
        low_row_.assign(k_, -1);
        up_row_.assign(k_, -1);
        for (std::size_t b = 0; b < k_; ++b) {
            if (win_lo(b) > nu_min_ + 1e-15) {
                low_row_[b] = static_cast<int>(rows_.size());
                rows_.push_back({b, false});
            }
            if (win_hi(b) < nu_max_ - 1e-15) {
                up_row_[b] = static_cast<int>(rows_.size());
                rows_.push_back({b, true});
            }
        }
        r_ = rows_.size();
    }

    BucketSolution solve(long iteration_cap = 400000) {
        // a corrupted working inverse is recoverable by restarting from the
        // warm basis with a shifted pricing cursor
        for (int attempt = 0;; ++attempt) {
            try {
                return solve_once(iteration_cap);
            } catch (const SolverError&) {
                if (attempt >= 2) throw;
                cursor_ = (n_ / 3) * static_cast<std::size_t>(attempt + 1);
            }
        }
    }

  private:
    BucketSolution solve_once(long iteration_cap) {
        init_basis();
        BucketSolution out;
        long stall = 0;
        bool bland = false;
        for (long it = 0;; ++it) {
            if (it > iteration_cap) throw SolverError("bucket simplex: iteration limit");
            compute_duals();
            std::size_t enter = 0;
            double enter_reduced = 0.0;
            if (!pick_entering(bland, enter, enter_reduced)) {
                out.iterations = it;
                break;
            }
            const double step = pivot(enter);
            if (step < 1e-13) {
                if (++stall > 8000 && !bland) bland = true;
            } else {
                stall = 0;
                bland = false;
            }
            if (--check_countdown_ <= 0) {
                check_countdown_ = kCheckEvery;
                if (--hard_refresh_countdown_ <= 0 || drifted()) refactorize();
            }
        }
        collect(out);
        return out;
    }

    // Cheap feasibility audit of the incrementally maintained values.
    bool drifted() const {
        std::vector<double> cover(n_, 0.0);
        std::vector<double> activity(r_, 0.0);
        for (std::size_t j = 0; j < n_; ++j) {
            cover[j] += x_key_[j];
            column_rows(j, key_[j], [&](std::size_t row, double coef) {
                activity[row] += coef * x_key_[j];
            });
        }
        for (std::size_t s = 0; s < r_; ++s) {
            const Extra& e = extras_[s];
            if (e.is_slack) {
                activity[e.row] -= x_extra_[s];
            } else {
                cover[e.state] += x_extra_[s];
                column_rows(e.state, e.bucket, [&](std::size_t row, double coef) {
                    activity[row] += coef * x_extra_[s];
                });
            }
        }
        for (std::size_t j = 0; j < n_; ++j)
            if (std::abs(cover[j] - state_p(j)) > 1e-10) return true;
        for (std::size_t row = 0; row < r_; ++row)
            if (std::abs(activity[row]) > 1e-9 * (1.0 + nu_max_)) return true;
        return false;
    }

  private:
    struct Row {
        std::size_t bucket;
        bool upper;
    };
    struct Extra {
        bool is_slack;
        std::size_t row;     // slack row
        std::size_t state;   // local state for mass columns
        std::size_t bucket;  // local bucket for mass columns
    };

    double win_lo(std::size_t b) const { return in_.lo[buckets_[b]]; }
    double win_hi(std::size_t b) const { return in_.hi[buckets_[b]]; }
    double state_nu(std::size_t j) const { return in_.nu[states_[j]]; }
    double state_p(std::size_t j) const { return in_.p[states_[j]]; }
    double cost(std::size_t j, std::size_t b) const { return in_.c[states_[j]][buckets_[b]]; }

    // side-row coefficients of the (j, b) mass column
    template <class Fn>
    void column_rows(std::size_t j, std::size_t b, Fn&& fn) const {
        if (low_row_[b] >= 0) fn(static_cast<std::size_t>(low_row_[b]), state_nu(j) - win_lo(b));
        if (up_row_[b] >= 0) fn(static_cast<std::size_t>(up_row_[b]), win_hi(b) - state_nu(j));
    }

    void init_basis() {
        // start from the better of the revealing and the pooling assignment
        std::vector<std::size_t> reveal(n_), pool(n_);
        double mu = 0.0, mass = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            mu += state_nu(j) * state_p(j);
            mass += state_p(j);
        }
        mu /= mass;
        std::size_t pool_bucket = k_ - 1;
        for (std::size_t b = 0; b < k_; ++b)
            if (win_lo(b) <= mu + 1e-12 && mu <= win_hi(b) + 1e-12) {
                pool_bucket = b;
                break;
            }
        double reveal_obj = 0.0, pool_obj = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            std::size_t b = k_ - 1;
            const double x = state_nu(j);
            for (std::size_t cand = 0; cand < k_; ++cand)
                if (win_lo(cand) <= x + 1e-12 && x <= win_hi(cand) + 1e-12) {
                    b = cand;
                    break;
                }
            reveal[j] = b;
            pool[j] = pool_bucket;
            reveal_obj += state_p(j) * cost(j, b);
            pool_obj += state_p(j) * cost(j, pool_bucket);
        }
        key_ = pool_obj > reveal_obj ? pool : reveal;

        x_key_.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) x_key_[j] = state_p(j);
        extras_.clear();
        x_extra_.assign(r_, 0.0);
        z_of_state_.assign(n_, {});
        for (std::size_t row = 0; row < r_; ++row)
            extras_.push_back(Extra{true, row, 0, 0});
        for (std::size_t j = 0; j < n_; ++j)
            column_rows(j, key_[j], [&](std::size_t row, double coef) {
                x_extra_[row] += coef * state_p(j);
            });
        for (double v : x_extra_)
            if (v < -1e-9) throw SolverError("bucket simplex: warm start infeasible");
        for (auto& v : x_extra_) v = std::max(v, 0.0);
        w_inv_.assign(r_ * r_, 0.0);
        for (std::size_t s = 0; s < r_; ++s) w_inv_[s * r_ + s] = -1.0;
        lam_key_.assign(n_, 0.0);
        state_seen_.assign(n_, 0);
        touched_.clear();
        check_countdown_ = kCheckEvery;
        hard_refresh_countdown_ = kHardRefreshEvery;
    }

    void compute_duals() {
        // pi solves W' pi = (extra costs net of key costs); u follows from keys
        pi_.assign(r_, 0.0);
        for (std::size_t s = 0; s < r_; ++s) {
            const Extra& e = extras_[s];
            if (e.is_slack) continue;
            const double chat = cost(e.state, e.bucket) - cost(e.state, key_[e.state]);
            if (chat == 0.0) continue;
            const double* row = &w_inv_[s * r_];
            for (std::size_t t = 0; t < r_; ++t) pi_[t] += chat * row[t];
        }
        u_.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            double dot = 0.0;
            column_rows(j, key_[j], [&](std::size_t row, double coef) { dot += pi_[row] * coef; });
            u_[j] = cost(j, key_[j]) - dot;
        }
        pi_lo_.assign(k_, 0.0);
        pi_up_.assign(k_, 0.0);
        for (std::size_t b = 0; b < k_; ++b) {
            if (low_row_[b] >= 0) pi_lo_[b] = pi_[low_row_[b]];
            if (up_row_[b] >= 0) pi_up_[b] = pi_[up_row_[b]];
        }
    }

    double reduced_cost(std::size_t col) const {
        if (col < n_ * k_) {
            const std::size_t j = col / k_, b = col % k_;
            double d = cost(j, b) - u_[j];
            if (low_row_[b] >= 0) d -= pi_lo_[b] * (state_nu(j) - win_lo(b));
            if (up_row_[b] >= 0) d -= pi_up_[b] * (win_hi(b) - state_nu(j));
            return d;
        }
        return pi_[col - n_ * k_];  // slack column
    }

    bool column_is_basic(std::size_t col) const {
        if (col < n_ * k_) {
            const std::size_t j = col / k_, b = col % k_;
            if (key_[j] == b) return true;
            for (std::size_t s : z_of_state_[j])
                if (extras_[s].bucket == b) return true;
            return false;
        }
        const std::size_t row = col - n_ * k_;
        for (const Extra& e : extras_)
            if (e.is_slack && e.row == row) return true;
        return false;
    }

    // Dantzig pricing over the slacks plus a rotating block of states; a full
    // revolution without an improving column certifies optimality under the
    // current duals.
    bool pick_entering(bool bland, std::size_t& enter, double& reduced) {
        const double tol = 1e-9;
        if (bland) {
            for (std::size_t col = 0; col < n_ * k_ + r_; ++col) {
                const double d = reduced_cost(col);
                if (d > tol && !column_is_basic(col)) {
                    enter = col;
                    reduced = d;
                    return true;
                }
            }
            return false;
        }
        long best_col = -1;
        double best_d = tol;
        for (std::size_t row = 0; row < r_; ++row)
            if (pi_[row] > best_d) {
                best_d = pi_[row];
                best_col = static_cast<long>(n_ * k_ + row);
            }
        const std::size_t block = std::max<std::size_t>(64, n_ / 24);
        std::size_t scanned = 0;
        while (scanned < n_) {
            const std::size_t count = std::min(block, n_ - scanned);
            for (std::size_t step = 0; step < count; ++step) {
                const std::size_t j = (cursor_ + step) % n_;
                const double* row = in_.c[states_[j]].data();
                const double nu_j = state_nu(j);
                const double uj = u_[j];
                for (std::size_t b = 0; b < k_; ++b) {
                    double d = row[buckets_[b]] - uj;
                    if (low_row_[b] >= 0) d -= pi_lo_[b] * (nu_j - win_lo(b));
                    if (up_row_[b] >= 0) d -= pi_up_[b] * (win_hi(b) - nu_j);
                    if (d > best_d) {
                        best_d = d;
                        best_col = static_cast<long>(j * k_ + b);
                    }
                }
            }
            cursor_ = (cursor_ + count) % n_;
            scanned += count;
            if (best_col >= 0) break;
        }
        if (best_col < 0) return false;
        if (column_is_basic(static_cast<std::size_t>(best_col))) {
            // stale duals made a basic column look attractive; resolve exactly
            refactorize();
            compute_duals();
            return pick_entering(true, enter, reduced);
        }
        enter = static_cast<std::size_t>(best_col);
        reduced = best_d;
        return true;
    }

    // FTRAN of the entering column, ratio test and basis exchange. Returns
    // the step length.
    double pivot(std::size_t enter) {
        const bool enter_is_slack = enter >= n_ * k_;
        const std::size_t ej = enter_is_slack ? 0 : enter / k_;
        const std::size_t eb = enter_is_slack ? 0 : enter % k_;
        const std::size_t erow = enter_is_slack ? enter - n_ * k_ : 0;

        // vtil = side part of the entering column net of the key of its state
        vtil_.assign(r_, 0.0);
        if (enter_is_slack) {
            vtil_[erow] = -1.0;
        } else {
            column_rows(ej, eb, [&](std::size_t row, double coef) { vtil_[row] += coef; });
            column_rows(ej, key_[ej],
                        [&](std::size_t row, double coef) { vtil_[row] -= coef; });
        }
        lam_extra_.assign(r_, 0.0);
        for (std::size_t row = 0; row < r_; ++row) {
            const double v = vtil_[row];
            if (v == 0.0) continue;
            for (std::size_t s = 0; s < r_; ++s) lam_extra_[s] += w_inv_[s * r_ + row] * v;
        }
        // only states owning affected extras (plus the entering state) move
        for (std::size_t j : touched_) {
            lam_key_[j] = 0.0;
            state_seen_[j] = 0;
        }
        touched_.clear();
        auto touch = [&](std::size_t j) {
            if (!state_seen_[j]) {
                state_seen_[j] = 1;
                touched_.push_back(j);
            }
        };
        if (!enter_is_slack) {
            touch(ej);
            lam_key_[ej] = 1.0;
        }
        for (std::size_t s = 0; s < r_; ++s) {
            if (lam_extra_[s] == 0.0 || extras_[s].is_slack) continue;
            const std::size_t j = extras_[s].state;
            touch(j);
            lam_key_[j] -= lam_extra_[s];
        }

        // ratio test; among tied extras the largest pivot wins, and a key only
        // leaves on a strictly better ratio
        const double piv_tol = 1e-11;
        double step = kInf;
        int leave_extra = -1;
        int leave_key = -1;
        double best_rate = 0.0;
        for (std::size_t s = 0; s < r_; ++s) {
            const double rate = lam_extra_[s];
            if (rate <= piv_tol) continue;
            const double ratio = std::max(x_extra_[s], 0.0) / rate;
            if (ratio < step - 1e-13 || (ratio < step + 1e-13 && rate > best_rate)) {
                step = std::min(step, ratio);
                best_rate = rate;
                leave_extra = static_cast<int>(s);
                leave_key = -1;
            }
        }
        for (std::size_t j : touched_) {
            const double rate = lam_key_[j];
            // a key pivot rebuilds more of the working basis, so demand a
            // sturdier pivot before letting one leave
            if (rate <= 1e-9) continue;
            const double ratio = std::max(x_key_[j], 0.0) / rate;
            if (ratio < step - 1e-13) {
                step = ratio;
                best_rate = rate;
                leave_key = static_cast<int>(j);
                leave_extra = -1;
            }
        }
        if (!(step < kInf)) throw SolverError("bucket simplex: unbounded direction");

        // move along the direction
        if (step > 0.0) {
            for (std::size_t s = 0; s < r_; ++s)
                if (lam_extra_[s] != 0.0) x_extra_[s] = std::max(0.0, x_extra_[s] - step * lam_extra_[s]);
            for (std::size_t j : touched_)
                x_key_[j] = std::max(0.0, x_key_[j] - step * lam_key_[j]);
        }

        if (leave_extra >= 0) {
            exchange_extra(static_cast<std::size_t>(leave_extra), enter, step);
        } else {
            exchange_key(static_cast<std::size_t>(leave_key), enter, step);
        }
        return step;
    }

    static Extra column_extra(std::size_t enter, std::size_t n, std::size_t k) {
        if (enter >= n * k) return Extra{true, enter - n * k, 0, 0};
        return Extra{false, 0, enter / k, enter % k};
    }

    // Replace the extra at the given slot by the entering column.
    void exchange_extra(std::size_t slot, std::size_t enter, double step) {
        const Extra old = extras_[slot];
        if (!old.is_slack) detach_from_state(old.state, slot);
        const Extra incoming = column_extra(enter, n_, k_);
        extras_[slot] = incoming;
        if (!incoming.is_slack) z_of_state_[incoming.state].push_back(slot);
        x_extra_[slot] = step;
        replace_w_column(slot, incoming);
    }

    // The key of state j leaves the basis.
    void exchange_key(std::size_t j, std::size_t enter, double step) {
        const bool enter_same_state = enter < n_ * k_ && enter / k_ == j;
        if (enter_same_state) {
            x_key_[j] = step;
            shift_state_key(j, enter % k_);
            return;
        }
        // promote an extra of state j to key, then admit the entering column
        // into the freed slot
        int promote = -1;
        double best = 0.0;
        for (std::size_t s : z_of_state_[j]) {
            if (std::abs(lam_extra_[s]) > best) {
                best = std::abs(lam_extra_[s]);
                promote = static_cast<int>(s);
            }
        }
        if (promote < 0) throw SolverError("bucket simplex: basis lost a state cover");
        const std::size_t slot = static_cast<std::size_t>(promote);
        const std::size_t new_key = extras_[slot].bucket;
        detach_from_state(j, slot);
        x_key_[j] = x_extra_[slot];

        const Extra incoming = column_extra(enter, n_, k_);
        extras_[slot] = incoming;
        if (!incoming.is_slack) z_of_state_[incoming.state].push_back(slot);
        x_extra_[slot] = step;
        // structures are final from here on, so a fallback rebuild inside
        // either update leaves a consistent basis
        if (shift_state_key(j, new_key)) replace_w_column(slot, incoming);
    }

    void detach_from_state(std::size_t j, std::size_t slot) {
        auto& list = z_of_state_[j];
        list.erase(std::find(list.begin(), list.end(), slot));
    }

    // W column at the slot becomes the side vector of the incoming column net
    // of its state key; Gauss-Jordan update of the explicit inverse.
    void replace_w_column(std::size_t slot, const Extra& incoming) {
        w_new_.assign(r_, 0.0);
        if (incoming.is_slack) {
            w_new_[incoming.row] = -1.0;
        } else {
            column_rows(incoming.state, incoming.bucket,
                        [&](std::size_t row, double coef) { w_new_[row] += coef; });
            column_rows(incoming.state, key_[incoming.state],
                        [&](std::size_t row, double coef) { w_new_[row] -= coef; });
        }
        d_.assign(r_, 0.0);
        for (std::size_t row = 0; row < r_; ++row) {
            const double v = w_new_[row];
            if (v == 0.0) continue;
            for (std::size_t s = 0; s < r_; ++s) d_[s] += w_inv_[s * r_ + row] * v;
        }
        const double alpha = d_[slot];
        if (std::abs(alpha) < 1e-9) {
            refactorize();
            return;
        }
        double* pivot_row = &w_inv_[slot * r_];
        const double inv_alpha = 1.0 / alpha;
        for (std::size_t t = 0; t < r_; ++t) pivot_row[t] *= inv_alpha;
        for (std::size_t s = 0; s < r_; ++s) {
            if (s == slot) continue;
            const double f = d_[s];
            if (f == 0.0) continue;
            double* row = &w_inv_[s * r_];
            for (std::size_t t = 0; t < r_; ++t) row[t] -= f * pivot_row[t];
        }
    }

    // Key change within a state: every remaining extra of that state shifts
    // by the key difference, a rank-one change of W. Returns false when the
    // inverse had to be rebuilt outright.
    bool shift_state_key(std::size_t j, std::size_t new_key) {
        const std::size_t old_key = key_[j];
        key_[j] = new_key;
        if (z_of_state_[j].empty() || old_key == new_key) return true;
        delta_.assign(r_, 0.0);
        column_rows(j, old_key, [&](std::size_t row, double coef) { delta_[row] += coef; });
        column_rows(j, new_key, [&](std::size_t row, double coef) { delta_[row] -= coef; });
        // W += delta * sum_of_slots'; Sherman-Morrison on the inverse
        a_.assign(r_, 0.0);
        for (std::size_t row = 0; row < r_; ++row) {
            const double v = delta_[row];
            if (v == 0.0) continue;
            for (std::size_t s = 0; s < r_; ++s) a_[s] += w_inv_[s * r_ + row] * v;
        }
        b_.assign(r_, 0.0);
        double beta = 1.0;
        for (std::size_t s : z_of_state_[j]) {
            const double* row = &w_inv_[s * r_];
            for (std::size_t t = 0; t < r_; ++t) b_[t] += row[t];
            beta += a_[s];
        }
        if (std::abs(beta) < 1e-9) {
            refactorize();
            return false;
        }
        const double inv_beta = 1.0 / beta;
        for (std::size_t s = 0; s < r_; ++s) {
            const double f = a_[s] * inv_beta;
            if (f == 0.0) continue;
            double* row = &w_inv_[s * r_];
            for (std::size_t t = 0; t < r_; ++t) row[t] -= f * b_[t];
        }
        return true;
    }

    // Rebuild the working inverse and the basic values from scratch.
    void refactorize() {
        std::vector<double> w(r_ * r_, 0.0);
        for (std::size_t s = 0; s < r_; ++s) {
            const Extra& e = extras_[s];
            if (e.is_slack) {
                w[e.row * r_ + s] = -1.0;
            } else {
                column_rows(e.state, e.bucket,
                            [&](std::size_t row, double coef) { w[row * r_ + s] += coef; });
                column_rows(e.state, key_[e.state],
                            [&](std::size_t row, double coef) { w[row * r_ + s] -= coef; });
            }
        }
        // Gauss-Jordan inversion with partial pivoting
        std::vector<double> inv(r_ * r_, 0.0);
        for (std::size_t s = 0; s < r_; ++s) inv[s * r_ + s] = 1.0;
        std::vector<std::size_t> perm(r_);
        for (std::size_t col = 0; col < r_; ++col) {
            std::size_t piv = col;
            for (std::size_t s = col + 1; s < r_; ++s)
                if (std::abs(w[s * r_ + col]) > std::abs(w[piv * r_ + col])) piv = s;
            if (std::abs(w[piv * r_ + col]) < 1e-12)
                throw SolverError("bucket simplex: singular working basis");
            if (piv != col) {
                for (std::size_t t = 0; t < r_; ++t) {
                    std::swap(w[piv * r_ + t], w[col * r_ + t]);
                    std::swap(inv[piv * r_ + t], inv[col * r_ + t]);
                }
            }
            const double inv_piv = 1.0 / w[col * r_ + col];
            for (std::size_t t = 0; t < r_; ++t) {
                w[col * r_ + t] *= inv_piv;
                inv[col * r_ + t] *= inv_piv;
            }
            for (std::size_t s = 0; s < r_; ++s) {
                if (s == col) continue;
                const double f = w[s * r_ + col];
                if (f == 0.0) continue;
                for (std::size_t t = 0; t < r_; ++t) {
                    w[s * r_ + t] -= f * w[col * r_ + t];
                    inv[s * r_ + t] -= f * inv[col * r_ + t];
                }
            }
        }
        w_inv_ = std::move(inv);

        // basic values from the right-hand side
        vtil_.assign(r_, 0.0);
        for (std::size_t j = 0; j < n_; ++j)
            column_rows(j, key_[j], [&](std::size_t row, double coef) {
                vtil_[row] -= coef * state_p(j);
            });
        lam_extra_.assign(r_, 0.0);
        for (std::size_t row = 0; row < r_; ++row) {
            const double v = vtil_[row];
            if (v == 0.0) continue;
            for (std::size_t s = 0; s < r_; ++s) lam_extra_[s] += w_inv_[s * r_ + row] * v;
        }
        for (std::size_t j = 0; j < n_; ++j) x_key_[j] = state_p(j);
        for (std::size_t s = 0; s < r_; ++s) {
            const double v = lam_extra_[s];
            if (v < -1e-7) throw SolverError("bucket simplex: infeasible after refresh");
            x_extra_[s] = std::max(0.0, v);
            if (!extras_[s].is_slack) x_key_[extras_[s].state] -= v;
        }
        for (double& v : x_key_) {
            if (v < -1e-7) throw SolverError("bucket simplex: infeasible after refresh");
            v = std::max(0.0, v);
        }
        hard_refresh_countdown_ = kHardRefreshEvery;
    }

    void collect(BucketSolution& out) {
        refactorize();  // clean values before reporting
        out.z.assign(in_.states(), {});
        double obj = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            if (x_key_[j] > 1e-13)
                out.z[states_[j]].emplace_back(buckets_[key_[j]], x_key_[j]);
            obj += cost(j, key_[j]) * x_key_[j];
        }
        for (std::size_t s = 0; s < r_; ++s) {
            const Extra& e = extras_[s];
            if (e.is_slack || x_extra_[s] <= 1e-13) continue;
            out.z[states_[e.state]].emplace_back(buckets_[e.bucket], x_extra_[s]);
            obj += cost(e.state, e.bucket) * x_extra_[s];
        }
        for (auto& list : out.z) std::sort(list.begin(), list.end());
        out.objective = obj;
    }

    static constexpr long kCheckEvery = 256;
    static constexpr long kHardRefreshEvery = 24;  // in units of checks

    const BucketLp& in_;
    std::vector<std::size_t> states_, buckets_;
    double nu_min_ = 0.0, nu_max_ = 0.0;
    std::size_t n_ = 0, k_ = 0, r_ = 0;
    std::vector<int> low_row_, up_row_;
    std::vector<Row> rows_;

    std::size_t cursor_ = 0;
    std::vector<std::size_t> key_;
    std::vector<double> x_key_;
    std::vector<Extra> extras_;
    std::vector<double> x_extra_;
    std::vector<std::vector<std::size_t>> z_of_state_;
    std::vector<double> w_inv_;
    long check_countdown_ = 0;
    long hard_refresh_countdown_ = 0;

    std::vector<double> pi_, u_, pi_lo_, pi_up_;
    std::vector<double> vtil_, lam_extra_, w_new_, d_, delta_, a_, b_;
    std::vector<double> lam_key_;
    std::vector<char> state_seen_;
    std::vector<std::size_t> touched_;
};

}  // namespace detail

inline BucketSolution solve_bucket_lp(const BucketLp& lp) {
    detail::BucketSimplex simplex(lp);
    return simplex.solve();
}

// The same program in dense form, one variable per (state, bucket) pair.
inline LpProblem build_design_lp(const DiscretePrior& dprior,
                                 const std::vector<double>& bucket_bounds,
                                 const std::vector<std::vector<double>>& c) {
    const std::size_t n = dprior.nu.size();
    if (bucket_bounds.size() < 2) throw std::invalid_argument("design lp: need at least one bucket");
    const std::size_t k = bucket_bounds.size() - 1;
    for (std::size_t i = 0; i + 1 < bucket_bounds.size(); ++i)
        if (!(bucket_bounds[i] < bucket_bounds[i + 1]))
            throw std::invalid_argument("design lp: bucket bounds must increase");
    if (c.size() != n) throw std::invalid_argument("design lp: objective rows mismatch");
    for (const auto& row : c)
        if (row.size() != k) throw std::invalid_argument("design lp: objective cols mismatch");

    LpProblem lp;
    lp.n_states = n;
    lp.n_buckets = k;
    lp.num_vars = n * k;
    lp.objective.assign(n * k, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < k; ++i) lp.objective[j * k + i] = c[j][i];
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> row(n * k, 0.0);
        for (std::size_t i = 0; i < k; ++i) row[j * k + i] = 1.0;
        lp.add_eq(std::move(row), dprior.p[j]);
    }
    for (std::size_t i = 0; i < k; ++i) {
        std::vector<double> low(n * k, 0.0);
        for (std::size_t j = 0; j < n; ++j) low[j * k + i] = bucket_bounds[i] - dprior.nu[j];
        lp.add_ub(std::move(low), 0.0);
        if (bucket_bounds[i + 1] == kInf) continue;  // last bucket open above
        std::vector<double> up(n * k, 0.0);
        for (std::size_t j = 0; j < n; ++j) up[j * k + i] = dprior.nu[j] - bucket_bounds[i + 1];
        lp.add_ub(std::move(up), 0.0);
    }
    return lp;
}

// Routes small programs through the dense simplex and large ones through the
// specialized solver; both produce the same vertices up to degeneracy.
inline BucketSolution solve_design_lp(const BucketLp& lp, std::size_t dense_limit = 5000) {
    lp.validate();
    if (lp.states() * lp.buckets() <= dense_limit) {
        DiscretePrior d;
        d.nu = lp.nu;
        d.p = lp.p;
        std::vector<double> bounds;
        bounds.push_back(lp.lo.front());
        for (std::size_t b = 0; b < lp.buckets(); ++b) bounds.push_back(lp.hi[b]);
        // guard against overlapping closed windows: tighten to a strict grid
        for (std::size_t i = 1; i < bounds.size(); ++i)
            if (bounds[i] <= bounds[i - 1]) bounds[i] = bounds[i - 1] + 1e-12;
        const LpProblem dense = build_design_lp(d, bounds, lp.c);
        const LpSolution sol = solve_lp(dense);
        if (sol.status != LpStatus::Optimal)
            throw SolverError(std::string("design lp: ") + to_string(sol.status));
        BucketSolution out;
        out.objective = sol.objective;
        out.iterations = sol.iterations;
        out.z.assign(lp.states(), {});
        for (std::size_t j = 0; j < lp.states(); ++j)
            for (std::size_t b = 0; b < lp.buckets(); ++b) {
                const double v = sol.x[j * lp.buckets() + b];
                if (v > 1e-13) out.z[j].emplace_back(b, v);
            }
        return out;
    }
    return solve_bucket_lp(lp);
}

// Interval mechanism from an assignment solution: the state cells of the
// discretization carry their bucket shares as signal rows.
inline IntervalMechanism mechanism_from_lp(const BucketSolution& sol, const DiscretePrior& dprior,
                                           const std::vector<double>& cell_breaks) {
    const std::size_t n = dprior.nu.size();
    if (cell_breaks.size() != n + 1)
        throw std::invalid_argument("mechanism_from_lp: cell breakpoints mismatch");
    std::size_t n_buckets = 1;
    for (const auto& list : sol.z)
        for (const auto& [b, v] : list) n_buckets = std::max(n_buckets, b + 1);

    std::vector<char> used(n_buckets, 0);
    used[0] = 1;  // states without mass park on the first signal
    for (const auto& list : sol.z)
        for (const auto& [b, v] : list)
            if (v > 0.0) used[b] = 1;
    std::vector<int> slot(n_buckets, -1);
    int n_signals = 0;
    for (std::size_t b = 0; b < n_buckets; ++b)
        if (used[b]) slot[b] = n_signals++;

    std::vector<std::vector<double>> rows(n, std::vector<double>(n_signals, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        if (dprior.p[j] <= 0.0 || sol.z[j].empty()) {
            rows[j][0] = 1.0;
            continue;
        }
        double total = 0.0;
        for (const auto& [b, v] : sol.z[j]) {
            rows[j][slot[b]] += v / dprior.p[j];
            total += v / dprior.p[j];
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw SolverError("mechanism_from_lp: state mass not fully assigned");
        for (auto& v : rows[j]) v /= total;
    }
    return IntervalMechanism(cell_breaks, std::move(rows));
}

inline std::vector<double> default_cells(const DiscretePrior& dprior) {
    std::vector<double> breaks;
    const std::size_t n = dprior.nu.size();
    if (dprior.delta > 0.0) {
        for (std::size_t j = 0; j <= n; ++j)
            breaks.push_back(static_cast<double>(j) / dprior.delta);
        return breaks;
    }
    breaks.push_back(0.0);
    for (std::size_t j = 0; j + 1 < n; ++j) breaks.push_back(0.5 * (dprior.nu[j] + dprior.nu[j + 1]));
    breaks.push_back(std::max(dprior.upper, dprior.nu.back()));
    if (breaks.back() <= breaks[breaks.size() - 2])
        breaks.back() = breaks[breaks.size() - 2] + 1e-9;
    return breaks;
}

struct LpDesignResult {
    IntervalMechanism mechanism;
    DirectMechanism direct;
    double value = 0.0;          // planner value of the constructed mechanism
    double lp_objective = 0.0;   // optimum of the discretized program
    std::vector<double> conditional;
    Diagnostics diagnostics;
};

// Optimal disclosure under capacity thresholds that tighten with the state:
// state j complies exactly when the induced posterior mean reaches gammas[j].
inline LpDesignResult design_scaled_capacity(const DiscretePrior& dprior,
                                             const std::vector<double>& gammas,
                                             const std::vector<double>* weights = nullptr) {
    const std::size_t n = dprior.nu.size();
    if (gammas.size() != n)
        throw std::invalid_argument("design_scaled_capacity: one threshold per state");
    for (std::size_t j = 0; j < n; ++j) {
        if (!(gammas[j] >= 0.0)) throw std::invalid_argument("design_scaled_capacity: negative threshold");
        if (j > 0 && !(gammas[j] > gammas[j - 1]))
            throw std::invalid_argument("design_scaled_capacity: thresholds must strictly increase");
    }
    if (weights && weights->size() != n)
        throw std::invalid_argument("design_scaled_capacity: one weight per state");

    BucketLp lp;
    lp.nu = dprior.nu;
    lp.p = dprior.p;
    lp.lo.push_back(0.0);
    lp.hi.push_back(gammas.front());
    for (std::size_t i = 0; i < n; ++i) {
        lp.lo.push_back(gammas[i]);
        lp.hi.push_back(i + 1 < n ? gammas[i + 1] : kInf);
    }
    lp.c.assign(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        if (dprior.p[j] <= 0.0) continue;  // forced-empty state carries no objective
        const double coef = weights ? (*weights)[j] / dprior.p[j] : 1.0;
        for (std::size_t i = j + 1; i <= n; ++i) lp.c[j][i] = coef;
    }

    const BucketSolution sol = solve_design_lp(lp);

    LpDesignResult res{mechanism_from_lp(sol, dprior, default_cells(dprior)), {}, 0.0, 0.0, {}, {}};
    res.lp_objective = sol.objective;
    res.value = sol.objective;
    res.direct = direct_of(res.mechanism, dprior.as_prior());
    res.conditional.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        if (dprior.p[j] <= 0.0) continue;
        double compliant = 0.0;
        for (const auto& [b, v] : sol.z[j])
            if (b >= j + 1) compliant += v;
        res.conditional[j] = compliant / dprior.p[j];
    }
    res.diagnostics.metrics["iterations"] = static_cast<double>(sol.iterations);
    return res;
}

struct LipschitzOptions {
    double eps = 0.0;             // > 0 picks the discretization from the error target
    double delta = 0.0;           // explicit prior discretization rate
    double tau = 0.0;             // explicit utility discretization
    double delta_cap = 2000.0;
    double tau_cap = 2000.0;
    bool allow_capped = true;
    EvalSettings eval;
};

// Near-optimal disclosure for a utility jointly Lipschitz in mass and state:
// discretize the prior and the mass axis, solve the assignment program, and
// extend the per-cell signal rows back to the continuous state space.
inline LpDesignResult design_lipschitz(const Prior& prior, const SmoothPref& pref,
                                       const EquilibriumMap& map,
                                       const LipschitzOptions& opt = {}) {
    Diagnostics diag;
    double delta = opt.delta, tau = opt.tau;
    if (!(tau > 0.0) || (!(delta > 0.0) && !prior.is_discrete())) {
        if (!(opt.eps > 0.0))
            throw std::invalid_argument("design_lipschitz: need eps or explicit delta/tau");
        const auto kappa = map.value_density_bound();
        if (!kappa.has_value())
            throw std::invalid_argument("design_lipschitz: value distribution needs a density bound");
        const double c_upper = map.cost_upper();
        if (!(delta > 0.0))
            delta = std::ceil((8.0 * pref.eta2 + 8.0 * c_upper * pref.eta1 * *kappa) / opt.eps);
        if (!(tau > 0.0)) tau = std::ceil(4.0 * pref.eta1 / opt.eps);
    }
    delta = std::max(delta, 1.0);
    tau = std::max(std::ceil(tau), 1.0);
    if (delta > opt.delta_cap) {
        if (!opt.allow_capped) throw SolverError("design_lipschitz: delta exceeds its cap");
        diag.notes.push_back("delta capped");
        delta = opt.delta_cap;
    }
    if (tau > opt.tau_cap) {
        if (!opt.allow_capped) throw SolverError("design_lipschitz: tau exceeds its cap");
        diag.notes.push_back("tau capped");
        tau = opt.tau_cap;
    }

    DiscretePrior dprior;
    if (prior.is_discrete()) {
        dprior.nu = prior.atoms();
        dprior.p = prior.masses();
        dprior.upper = prior.upper();
        diag.notes.push_back("discrete prior used as its own grid");
    } else {
        dprior = prior.delta_discretize(delta);
        if (dprior.grid_extended) diag.notes.push_back("state grid extended past the support");
    }

    BucketLp lp;
    lp.nu = dprior.nu;
    lp.p = dprior.p;
    const double nu_max = dprior.nu.back();
    const int levels = static_cast<int>(tau);
    double lower = 0.0;
    for (int k = 1; k <= levels; ++k) {
        const double y_hi = static_cast<double>(k) / tau;
        const auto bound = map.remote_mass_inverse(std::min(y_hi, 1.0), nu_max);
        lp.lo.push_back(lower);
        if (!bound.has_value() || k == levels) {
            lp.hi.push_back(kInf);
            break;
        }
        lp.hi.push_back(*bound);
        lower = *bound;
    }
    const std::size_t n = dprior.nu.size();
    const std::size_t buckets = lp.lo.size();
    lp.c.assign(n, std::vector<double>(buckets, 0.0));
    for (std::size_t k = 0; k < buckets; ++k) {
        const double y_mid = (2.0 * static_cast<double>(k) + 1.0) / (2.0 * tau);
        for (std::size_t j = 0; j < n; ++j) lp.c[j][k] = pref.h(y_mid, dprior.nu[j]);
    }

    const BucketSolution sol = solve_design_lp(lp);

    LpDesignResult res{mechanism_from_lp(sol, dprior, default_cells(dprior)), {}, 0.0, 0.0, {}, diag};
    res.lp_objective = sol.objective;
    res.direct = direct_of(res.mechanism, prior);
    res.value = value(prior, Preference{pref}, res.mechanism, map, opt.eval);
    res.diagnostics.metrics["delta"] = delta;
    res.diagnostics.metrics["tau"] = tau;
    res.diagnostics.metrics["states"] = static_cast<double>(n);
    res.diagnostics.metrics["buckets"] = static_cast<double>(buckets);
    res.diagnostics.metrics["iterations"] = static_cast<double>(sol.iterations);
    return res;
}

}  // namespace signalcraft
