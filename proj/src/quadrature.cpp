#include "selltime/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace selltime {

namespace {

GaussLegendre build_rule(int n) {
    if (n < 1) throw std::invalid_argument("Gauss-Legendre order must be >= 1");
    GaussLegendre r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Chebyshev-based initial guess, then Newton on P_n.
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        r.nodes[i] = -z;
        r.nodes[n - 1 - i] = z;
        r.weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        r.weights[n - 1 - i] = r.weights[i];
    }
    return r;
}

} // namespace

const GaussLegendre& GaussLegendre::rule(int n) {
    static std::mutex mu;
    static std::map<int, GaussLegendre> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, build_rule(n)).first;
    return it->second;
}

double gl_integrate(const std::function<double(double)>& f, double a, double b, int n) {
    if (!(b > a)) return 0.0;
    const auto& r = GaussLegendre::rule(n);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    std::vector<double> terms(r.nodes.size());
    for (size_t i = 0; i < r.nodes.size(); ++i)
        terms[i] = r.weights[i] * f(mid + half * r.nodes[i]);
    return half * pairwise_sum(terms);
}

double gl_integrate_split(const std::function<double(double)>& f, double a, double b, int n,
                          std::span<const double> breaks) {
    if (!(b > a)) return 0.0;
    std::vector<double> pts;
    pts.push_back(a);
    for (double x : breaks)
        if (x > a && x < b) pts.push_back(x);
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    std::vector<double> parts;
    for (size_t i = 0; i + 1 < pts.size(); ++i)
        if (pts[i + 1] > pts[i]) parts.push_back(gl_integrate(f, pts[i], pts[i + 1], n));
    return pairwise_sum(parts);
}

double pairwise_sum(std::span<const double> xs) {
    const size_t n = xs.size();
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const size_t h = n / 2;
    return pairwise_sum(xs.first(h)) + pairwise_sum(xs.subspan(h));
}

double bisect_root(const std::function<double(double)>& f, double lo, double hi, int max_iter) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0))
        throw std::invalid_argument("bisect_root: endpoints do not bracket a sign change");
    for (int i = 0; i < max_iter; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace selltime
