#pragma once

#include <functional>
#include <span>
#include <vector>

namespace selltime {

// Gauss-Legendre rule on [-1,1]. Nodes/weights are computed once per order
// by Newton iteration on the Legendre polynomial and cached.
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    static const GaussLegendre& rule(int n);
};

// Integrate f over [a,b] with an n-node Gauss-Legendre rule.
double gl_integrate(const std::function<double(double)>& f, double a, double b, int n);

// Same, but the interval is split at the given interior break points
// (values outside (a,b) are ignored). Used for integrands with kinks or
// jumps at known locations.
double gl_integrate_split(const std::function<double(double)>& f, double a, double b, int n,
                          std::span<const double> breaks);

// Numerically stable pairwise summation; the result does not depend on
// how callers chunk their work.
double pairwise_sum(std::span<const double> xs);

// Root of a scalar function by bisection. Requires f(lo) and f(hi) of
// opposite sign; tightens to ~1e-14 relative width.
double bisect_root(const std::function<double(double)>& f, double lo, double hi, int max_iter = 120);

} // namespace selltime
