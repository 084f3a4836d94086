#include "selltime/virtual_value.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace selltime {

PathState initial_state(const Kernel& k, double theta1) {
    return {1, theta1, k.initial_distortion(theta1)};
}

double distortion_update(const Kernel& k, double distortion, double theta_next, double theta_prev,
                         int t_next, double action) {
    if (distortion == 0.0) return 0.0;
    return distortion * k.impulse_response(t_next, theta_next, theta_prev, action);
}

PathState advance(const Kernel& k, const PathState& s, double theta_next, double action) {
    return {s.t + 1, theta_next, distortion_update(k, s.distortion, theta_next, s.theta, s.t + 1, action)};
}

StateGrid StateGrid::make(const Kernel& k, int horizon, int n_theta, int n_distortion,
                          double l_min, double l_max) {
    if (horizon < 1) throw std::invalid_argument("horizon: must be >= 1");
    if (n_theta < 2 || n_distortion < 2) throw std::invalid_argument("grid sizes: must be >= 2");

    StateGrid g;
    g.horizon = horizon;
    g.theta_nodes.resize(n_theta);
    const double lo = k.support_lo(), hi = k.support_hi();
    for (int i = 0; i < n_theta; ++i)
        g.theta_nodes[i] = lo + (hi - lo) * i / (n_theta - 1);
    g.theta_nodes.back() = hi;

    if (l_max <= 0.0) {
        // Cover ten times the largest period-1 distortion seen on the grid.
        double m = 0.0;
        for (int i = 0; i < n_theta; ++i) {
            const double d = k.initial_distortion(g.theta_nodes[i]);
            if (std::isfinite(d)) m = std::max(m, d);
        }
        l_max = 10.0 * std::max(m, 1e-6);
    }
    if (l_min <= 0.0) l_min = 1e-6 * l_max;

    g.distortion_nodes.resize(n_distortion);
    g.distortion_nodes[0] = 0.0;
    const int m = n_distortion - 1;
    if (m == 1) {
        g.distortion_nodes[1] = l_max;
    } else {
        const double ratio = std::pow(l_max / l_min, 1.0 / (m - 1));
        double v = l_min;
        for (int j = 1; j <= m; ++j) {
            g.distortion_nodes[j] = v;
            v *= ratio;
        }
        g.distortion_nodes.back() = l_max;
    }
    return g;
}

double TableView::operator()(double theta, double distortion) const {
    const auto& th = grid_.theta_nodes;
    const auto& ln = grid_.distortion_nodes;
    const int nth = static_cast<int>(th.size());
    const int nl = static_cast<int>(ln.size());

    double x = theta;
    if (x <= th.front()) {
        x = th.front();
    } else if (x >= th.back()) {
        x = th.back();
    }
    double y = distortion;
    if (y < ln.front() || y > ln.back()) {
        if (clamps_) clamps_->fetch_add(1, std::memory_order_relaxed);
        y = std::clamp(y, ln.front(), ln.back());
    }

    const int i = std::min<int>(nth - 2, static_cast<int>(std::upper_bound(th.begin(), th.end(), x) - th.begin()) - 1);
    const int j = std::min<int>(nl - 2, static_cast<int>(std::upper_bound(ln.begin(), ln.end(), y) - ln.begin()) - 1);
    const int i0 = std::max(i, 0), j0 = std::max(j, 0);

    const double tx = (th[i0 + 1] > th[i0]) ? (x - th[i0]) / (th[i0 + 1] - th[i0]) : 0.0;
    const double ty = (ln[j0 + 1] > ln[j0]) ? (y - ln[j0]) / (ln[j0 + 1] - ln[j0]) : 0.0;

    const auto at = [&](int a, int b) { return values_[static_cast<size_t>(a) * nl + b]; };
    const double v0 = at(i0, j0) * (1 - ty) + at(i0, j0 + 1) * ty;
    const double v1 = at(i0 + 1, j0) * (1 - ty) + at(i0 + 1, j0 + 1) * ty;
    return v0 * (1 - tx) + v1 * tx;
}

} // namespace selltime
