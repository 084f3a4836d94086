#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

#include "selltime/kernel.hpp"

namespace selltime {

/**
 * The solver's sufficient statistic for a type history: period t, current
 * valuation theta_t, and the cumulative information-rent distortion L_t.
 * The virtual valuation is psi_t = theta_t - L_t.
 *
 * L starts at (1-F1)/f1 and updates multiplicatively by the impulse
 * response r_{t+1}(theta_{t+1}, theta_t), so the state (t, theta, L)
 * carries everything the history contributes.
 */
struct PathState {
    int t = 1;
    double theta = 0.0;
    double distortion = 0.0;  // L_t >= 0 under FOSD
};

inline double virtual_value(const PathState& s) { return s.theta - s.distortion; }

// State at t = 1 for realized theta1.
PathState initial_state(const Kernel& k, double theta1);

// L_{t+1} = L_t * r_{t+1}(theta_next, theta_prev). Propagates the kernel's
// singularity error when the density vanishes at (theta_next, theta_prev).
double distortion_update(const Kernel& k, double distortion, double theta_next, double theta_prev,
                         int t_next, double action = 0.0);

// Advance a path state by one observed valuation.
PathState advance(const Kernel& k, const PathState& s, double theta_next, double action = 0.0);

/**
 * Discretization of the (theta, L) state space. theta_nodes span the
 * support inclusively; distortion_nodes hold an exact 0 plus a geometric
 * ladder on [l_min, l_max] (L is multiplicative, so relative spacing).
 */
struct StateGrid {
    std::vector<double> theta_nodes;
    std::vector<double> distortion_nodes;
    int horizon = 1;

    static StateGrid make(const Kernel& k, int horizon, int n_theta, int n_distortion,
                          double l_min = 0.0, double l_max = 0.0);  // 0 = derive from hazard

    int n_theta() const { return static_cast<int>(theta_nodes.size()); }
    int n_distortion() const { return static_cast<int>(distortion_nodes.size()); }
};

// Bilinear interpolation of a row-major table over (theta, L) nodes.
// Queries outside the L ladder clamp to the end nodes and count the event;
// theta queries clamp likewise (they only occur at support edges).
class TableView {
public:
    TableView(const StateGrid& grid, const std::vector<double>& values,
              std::atomic<std::int64_t>* clamp_counter = nullptr)
        : grid_(grid), values_(values), clamps_(clamp_counter) {}

    double operator()(double theta, double distortion) const;

private:
    const StateGrid& grid_;
    const std::vector<double>& values_;
    std::atomic<std::int64_t>* clamps_;
};

} // namespace selltime
