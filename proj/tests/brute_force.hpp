#pragma once

// Test-only oracle: exhaustive optimal stopping on a discrete type grid.
// Types live on n midpoints, transitions are density weights normalized by
// summation, and values are computed by full path enumeration — no state
// grids, no interpolation, no quadrature. Kept independent of the solver's
// evaluation path on purpose.

#include <map>
#include <vector>

#include "selltime/solver.hpp"
#include "selltime/virtual_value.hpp"

namespace selltime::testing {

class BruteForceStopper {
public:
    BruteForceStopper(KernelPtr kernel, int horizon, double discount, int n_types,
                      double tie_tol = 1e-12)
        : k_(std::move(kernel)), T_(horizon), delta_(discount), n_(n_types), tie_(tie_tol) {
        const double lo = k_->support_lo(), hi = k_->support_hi();
        nodes_.resize(n_);
        for (int i = 0; i < n_; ++i) nodes_[i] = lo + (hi - lo) * (i + 0.5) / n_;
        trans_.resize(std::max(0, T_ - 1));
        for (int t = 2; t <= T_; ++t) {
            auto& M = trans_[t - 2];
            M.assign(n_, std::vector<double>(n_, 0.0));
            for (int i = 0; i < n_; ++i) {
                const Interval cs = k_->conditional_support(t, nodes_[i]);
                double tot = 0.0;
                for (int j = 0; j < n_; ++j) {
                    if (nodes_[j] < cs.lo || nodes_[j] > cs.hi) continue;
                    M[i][j] = k_->transition_pdf(t, nodes_[j], nodes_[i]);
                    tot += M[i][j];
                }
                if (tot <= 0.0)
                    M[i][i] = 1.0;
                else
                    for (int j = 0; j < n_; ++j) M[i][j] /= tot;
            }
        }
    }

    const std::vector<double>& nodes() const { return nodes_; }

    struct State {
        int t;
        double theta;
        double distortion;
        bool sell;
    };

    // Every positive-probability state reachable before a (brute) sale,
    // with the brute decision at that state.
    std::vector<State> reachable_decisions() {
        std::vector<State> out;
        for (int i = 0; i < n_; ++i) {
            PathState s = initial_state(*k_, nodes_[i]);
            walk(s, i, out);
        }
        return out;
    }

private:
    void walk(const PathState& s, int node, std::vector<State>& out) {
        const bool sell = decide_brute(s, node);
        out.push_back({s.t, s.theta, s.distortion, sell});
        if (sell || s.t == T_) return;
        const auto& row = trans_[s.t - 1][node];
        for (int j = 0; j < n_; ++j) {
            if (!(row[j] > 0.0)) continue;
            walk(advance(*k_, s, nodes_[j]), j, out);
        }
    }

    bool decide_brute(const PathState& s, int node) {
        const double psi = virtual_value(s);
        if (!(psi > 0.0)) return false;
        return psi - cont(s, node) > tie_;
    }

    double cont(const PathState& s, int node) {
        if (s.t >= T_) return 0.0;
        const auto key = std::make_pair(s.t, std::make_pair(node, s.distortion));
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        const auto& row = trans_[s.t - 1][node];
        double m = 0.0;
        for (int j = 0; j < n_; ++j) {
            if (!(row[j] > 0.0)) continue;
            const PathState nx = advance(*k_, s, nodes_[j]);
            const double psi = virtual_value(nx);
            const double v = (psi > 0.0 && psi - cont(nx, j) > tie_) ? psi : cont(nx, j);
            m += row[j] * v;
        }
        m *= delta_;
        memo_[key] = m;
        return m;
    }

    KernelPtr k_;
    int T_;
    double delta_;
    int n_;
    double tie_;
    std::vector<double> nodes_;
    std::vector<std::vector<std::vector<double>>> trans_;
    std::map<std::pair<int, std::pair<int, double>>, double> memo_;
};

} // namespace selltime::testing
