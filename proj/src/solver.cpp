#include "selltime/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "selltime/quadrature.hpp"
#include "selltime/rng.hpp"

namespace selltime {

std::string to_string(SaleMode m) {
    return m == SaleMode::one_object ? "one_object" : "repeated_sales";
}

SaleMode sale_mode_from_string(const std::string& s) {
    if (s == "one_object") return SaleMode::one_object;
    if (s == "repeated_sales") return SaleMode::repeated_sales;
    throw std::invalid_argument("mode: expected one_object or repeated_sales, got '" + s + "'");
}

void SolveConfig::validate() const {
    if (horizon < 1) throw std::invalid_argument("horizon: must be >= 1");
    if (!(discount >= 0.0 && discount <= 1.0)) throw std::invalid_argument("discount: must lie in [0,1]");
    if (n_theta < 2) throw std::invalid_argument("n_theta: must be >= 2");
    if (n_distortion < 2) throw std::invalid_argument("n_distortion: must be >= 2");
    if (n_quad < 2) throw std::invalid_argument("n_quad: must be >= 2");
    if (!(tie_tol > 0.0)) throw std::invalid_argument("tie_tol: must be > 0");
    if (!(sale_cost >= 0.0)) throw std::invalid_argument("sale_cost: must be >= 0");
}

namespace {

struct EvalCtx {
    const Kernel& k;
    const SolveConfig& cfg;
    const StateGrid& grid;
    const std::vector<PeriodTable>& tables;
    const std::vector<double>& margin_nodes;
    const std::vector<std::vector<double>>& cont_surface;
    std::atomic<std::int64_t>* clamps = nullptr;
};

// Bilinear lookup on the (theta, psi) continuation surface.
double surface_cont(const EvalCtx& c, int t, double theta, double psi) {
    const auto& th = c.grid.theta_nodes;
    const auto& mn = c.margin_nodes;
    const auto& vals = c.cont_surface[t - 1];
    const int nth = static_cast<int>(th.size());
    const int nm = static_cast<int>(mn.size());

    double x = std::clamp(theta, th.front(), th.back());
    double y = psi;
    if (y < mn.front() || y > mn.back()) {
        if (c.clamps) c.clamps->fetch_add(1, std::memory_order_relaxed);
        y = std::clamp(y, mn.front(), mn.back());
    }
    const int i = std::clamp<int>(
        static_cast<int>(std::upper_bound(th.begin(), th.end(), x) - th.begin()) - 1, 0, nth - 2);
    const int j = std::clamp<int>(
        static_cast<int>(std::upper_bound(mn.begin(), mn.end(), y) - mn.begin()) - 1, 0, nm - 2);
    const double tx = (th[i + 1] > th[i]) ? (x - th[i]) / (th[i + 1] - th[i]) : 0.0;
    const double ty = (mn[j + 1] > mn[j]) ? (y - mn[j]) / (mn[j + 1] - mn[j]) : 0.0;
    const auto at = [&](int a, int b) { return vals[static_cast<size_t>(a) * nm + b]; };
    const double v0 = at(i, j) * (1 - ty) + at(i, j + 1) * ty;
    const double v1 = at(i + 1, j) * (1 - ty) + at(i + 1, j + 1) * ty;
    return v0 * (1 - tx) + v1 * tx;
}

double next_value(const EvalCtx& c, int t_next, double theta, double distortion) {
    const double psi = theta - distortion;
    const double net = psi - c.cfg.sale_cost;
    if (t_next == c.cfg.horizon) return std::max(net, 0.0);
    const double cont = surface_cont(c, t_next, theta, psi);
    if (c.cfg.mode == SaleMode::one_object) return std::max(net, cont);
    return std::max(net, 0.0) + cont;
}

// Margin of the next period's decision, used only to locate integrand
// kinks before quadrature. Exact in the last period, composed with the
// interpolated continuation before.
double next_margin(const EvalCtx& c, int t_next, double theta, double distortion) {
    const double psi = theta - distortion;
    const double net = psi - c.cfg.sale_cost;
    if (t_next == c.cfg.horizon || c.cfg.mode == SaleMode::repeated_sales) return net;
    return net - surface_cont(c, t_next, theta, psi);
}

double propagate_distortion(const EvalCtx& c, int t_next, double theta_next, double theta,
                            double distortion) {
    if (distortion == 0.0) return 0.0;
    return distortion * c.k.impulse_response(t_next, theta_next, theta);
}

// M = delta * E[V_{t+1}(theta', L * r(theta', theta)) | theta].
double continuation(const EvalCtx& c, int t, double theta, double distortion) {
    const int T = c.cfg.horizon;
    if (t >= T || c.cfg.discount == 0.0) return 0.0;
    const Interval cs = c.k.conditional_support(t + 1, theta);
    if (!(cs.width() > 0.0)) return 0.0;

    const auto integrand = [&](double th) {
        const double f = c.k.transition_pdf(t + 1, th, theta);
        if (!(f > 0.0)) return 0.0;
        const double ln = propagate_distortion(c, t + 1, th, theta, distortion);
        return next_value(c, t + 1, th, ln) * f;
    };

    // Split the integral where the next period's policy switches; the value
    // function is kinked there.
    const auto flip_margin = [&](double th) {
        const double f = c.k.transition_pdf(t + 1, th, theta);
        const double ln = (f > 0.0) ? propagate_distortion(c, t + 1, th, theta, distortion)
                                    : distortion;
        return next_margin(c, t + 1, th, ln);
    };
    std::vector<double> breaks;
    const int n_scan = 33;
    double prev_x = cs.lo;
    double prev_m = flip_margin(prev_x);
    for (int s = 1; s <= n_scan; ++s) {
        const double x = (s == n_scan) ? cs.hi : cs.lo + cs.width() * s / n_scan;
        const double m = flip_margin(x);
        if ((m > 0.0) != (prev_m > 0.0)) {
            breaks.push_back(bisect_root([&](double z) { return flip_margin(z) > 0.0 ? 1.0 : -1.0; },
                                         prev_x, x, 60));
        }
        prev_x = x;
        prev_m = m;
    }

    return c.cfg.discount * gl_integrate_split(integrand, cs.lo, cs.hi, c.cfg.n_quad, breaks);
}

Decision decide_ctx(const EvalCtx& c, int t, double theta, double distortion) {
    Decision d;
    d.psi = theta - distortion;
    const double net = d.psi - c.cfg.sale_cost;  // seller nets the cost at a sale
    d.cont = (t >= c.cfg.horizon) ? 0.0 : continuation(c, t, theta, distortion);
    d.margin = (c.cfg.mode == SaleMode::one_object) ? net - d.cont : net;
    d.sell = d.margin > c.cfg.tie_tol;
    return d;
}

EvalCtx make_ctx(const SolveResult& r, std::atomic<std::int64_t>* clamps) {
    return EvalCtx{*r.kernel, r.config, r.grid, r.tables, r.margin_nodes, r.cont_surface, clamps};
}

void check_finite(double v, int t, double theta, double distortion) {
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "non-finite value at t=" << t << ", theta=" << theta << ", L=" << distortion;
        throw NumericError(os.str());
    }
}

void probe_interp_residual(SolveResult& r) {
    // Compare midpoint re-evaluations against the stored tables; a large
    // residual means the grid is too coarse for the value function.
    std::atomic<std::int64_t> dummy{0};
    EvalCtx c = make_ctx(r, &dummy);
    const int T = r.config.horizon;
    double worst = 0.0;
    for (int t = std::max(2, T - 2); t < T; ++t) {
        const auto& tab = r.tables[t - 1];
        TableView view(r.grid, tab.value, nullptr);
        const int nth = r.grid.n_theta(), nl = r.grid.n_distortion();
        const int stride_i = std::max(1, nth / 12), stride_j = std::max(1, nl / 8);
        for (int i = 0; i + 1 < nth; i += stride_i) {
            for (int j = 0; j + 1 < nl; j += stride_j) {
                const double th = 0.5 * (r.grid.theta_nodes[i] + r.grid.theta_nodes[i + 1]);
                const double ln = 0.5 * (r.grid.distortion_nodes[j] + r.grid.distortion_nodes[j + 1]);
                const Decision d = decide_ctx(c, t, th, ln);
                const double direct = (r.config.mode == SaleMode::one_object)
                                          ? (d.sell ? d.psi : d.cont)
                                          : std::max(d.psi, 0.0) + d.cont;
                worst = std::max(worst, std::abs(direct - view(th, ln)));
            }
        }
    }
    r.diagnostics.max_interp_residual = worst;
}

} // namespace

namespace {

// Two-sided geometric ladder around an exact 0, ascending. The fine
// resolution sits where decisions flip.
std::vector<double> make_margin_nodes(const Kernel& k, const StateGrid& grid, int n_half) {
    const double pos = std::max(k.support_hi(), 1e-6);
    const double neg = std::max(grid.distortion_nodes.back(), 1e-6);
    const double eps = 1e-6 * std::max(pos, neg);
    std::vector<double> nodes;
    nodes.reserve(2 * n_half + 1);
    const auto ladder = [&](double top) {
        std::vector<double> v(n_half);
        if (n_half == 1) {
            v[0] = top;
            return v;
        }
        const double ratio = std::pow(top / eps, 1.0 / (n_half - 1));
        double x = eps;
        for (int i = 0; i < n_half; ++i) {
            v[i] = x;
            x *= ratio;
        }
        v.back() = top;
        return v;
    };
    const auto up = ladder(pos);
    const auto down = ladder(neg);
    for (auto it = down.rbegin(); it != down.rend(); ++it) nodes.push_back(-*it);
    nodes.push_back(0.0);
    nodes.insert(nodes.end(), up.begin(), up.end());
    return nodes;
}

} // namespace

SolveResult solve(const KernelPtr& kernel, const SolveConfig& config) {
    if (!kernel) throw std::invalid_argument("kernel: null");
    config.validate();

    SolveResult r;
    r.kernel = kernel;
    r.config = config;
    r.grid = StateGrid::make(*kernel, config.horizon, config.n_theta, config.n_distortion,
                             config.distortion_min, config.distortion_max);
    r.tables.resize(config.horizon);
    r.margin_nodes = make_margin_nodes(*kernel, r.grid, config.n_distortion);
    r.cont_surface.assign(config.horizon, {});

    std::atomic<std::int64_t> clamps{0};
    EvalCtx ctx = make_ctx(r, &clamps);
    const int T = config.horizon;
    const int nth = r.grid.n_theta(), nl = r.grid.n_distortion();
    const int nm = static_cast<int>(r.margin_nodes.size());

    for (int t = T; t >= 1; --t) {
        PeriodTable& tab = r.tables[t - 1];
        tab.t = t;
        const int rows = (t == 1) ? nth : nth * nl;
        tab.value.resize(rows);
        tab.cont.resize(rows);
        tab.margin.resize(rows);
        tab.sell.resize(rows);
        if (t == 1) tab.distortion_row.resize(nth);

        for (int i = 0; i < nth; ++i) {
            const double theta = r.grid.theta_nodes[i];
            const int jmax = (t == 1) ? 1 : nl;
            for (int j = 0; j < jmax; ++j) {
                const double ln = (t == 1) ? kernel->initial_distortion(theta)
                                           : r.grid.distortion_nodes[j];
                const Decision d = decide_ctx(ctx, t, theta, ln);
                const double net = d.psi - config.sale_cost;
                const double v = (config.mode == SaleMode::one_object)
                                     ? (d.sell ? net : d.cont)
                                     : std::max(net, 0.0) + d.cont;
                check_finite(v, t, theta, ln);
                const size_t idx = (t == 1) ? i : static_cast<size_t>(i) * nl + j;
                if (t == 1) tab.distortion_row[i] = ln;
                tab.value[idx] = v;
                tab.cont[idx] = d.cont;
                tab.margin[idx] = d.margin;
                tab.sell[idx] = d.sell ? 1 : 0;
            }
        }

        // Continuation surface in (theta, psi); the state's distortion is
        // theta - psi, extended constantly past psi = theta (where the
        // distortion would turn negative; real queries never reach it).
        if (t >= 2 && t < T) {
            auto& surf = r.cont_surface[t - 1];
            surf.resize(static_cast<size_t>(nth) * nm);
            for (int i = 0; i < nth; ++i) {
                const double theta = r.grid.theta_nodes[i];
                for (int j = 0; j < nm; ++j) {
                    const double ln = std::max(theta - r.margin_nodes[j], 0.0);
                    const double m = continuation(ctx, t, theta, ln);
                    check_finite(m, t, theta, ln);
                    surf[static_cast<size_t>(i) * nm + j] = m;
                }
            }
        }
    }

    r.diagnostics.distortion_clamps = clamps.load();
    probe_interp_residual(r);
    r.thresholds = extract_thresholds(r);
    for (const auto& curve : r.thresholds)
        if (!curve.threshold_structure) ++r.diagnostics.nonmonotone_margins;
    return r;
}

SolveResult solve_repeated_sales(const KernelPtr& kernel, SolveConfig config) {
    config.mode = SaleMode::repeated_sales;
    return solve(kernel, config);
}

Decision decide(const SolveResult& r, int t, double theta, double distortion) {
    if (t < 1 || t > r.config.horizon) throw std::invalid_argument("decide: t outside 1..horizon");
    EvalCtx c = make_ctx(r, nullptr);
    return decide_ctx(c, t, theta, distortion);
}

double continuation_value(const SolveResult& r, int t, double theta, double distortion) {
    if (t < 1 || t > r.config.horizon) throw std::invalid_argument("continuation_value: t outside 1..horizon");
    EvalCtx c = make_ctx(r, nullptr);
    return continuation(c, t, theta, distortion);
}

std::vector<ThresholdCurve> extract_thresholds(const SolveResult& r) {
    EvalCtx c = make_ctx(r, nullptr);
    std::vector<ThresholdCurve> out;
    const int nth = r.grid.n_theta(), nl = r.grid.n_distortion();

    for (int t = 1; t <= r.config.horizon; ++t) {
        const auto& tab = r.tables[t - 1];
        ThresholdCurve curve;
        curve.t = t;
        const int jmax = (t == 1) ? 1 : nl;
        for (int j = 0; j < jmax; ++j) {
            std::vector<double> xs;
            for (int i = 0; i + 1 < nth; ++i) {
                const size_t a = (t == 1) ? i : static_cast<size_t>(i) * nl + j;
                const size_t b = (t == 1) ? i + 1 : static_cast<size_t>(i + 1) * nl + j;
                const double ma = tab.margin[a], mb = tab.margin[b];
                if ((ma > 0.0) == (mb > 0.0)) continue;
                const double Lj = (t == 1) ? 0.0 : r.grid.distortion_nodes[j];
                const auto margin_at = [&](double th) {
                    const double ln = (t == 1) ? r.kernel->initial_distortion(th) : Lj;
                    return decide_ctx(c, t, th, ln).margin;
                };
                xs.push_back(bisect_root(margin_at, r.grid.theta_nodes[i], r.grid.theta_nodes[i + 1]));
            }
            curve.crossings.push_back(xs);
            if (xs.size() == 1) {
                curve.k.push_back(xs[0]);
            } else {
                curve.k.push_back(std::nullopt);
                if (xs.size() > 1) curve.threshold_structure = false;
            }
        }
        out.push_back(std::move(curve));
    }
    return out;
}

namespace {

double expected_psi(const Kernel& k, int s_target, int s_cur, double theta, double distortion,
                    int n_quad, int depth) {
    if (s_cur == s_target) return theta - distortion;
    const Interval cs = k.conditional_support(s_cur + 1, theta);
    if (!(cs.width() > 0.0)) return theta - distortion;  // absorbing degenerate state
    const int nq = std::max(12, n_quad >> depth);
    return gl_integrate(
        [&](double th) {
            const double f = k.transition_pdf(s_cur + 1, th, theta);
            if (!(f > 0.0)) return 0.0;
            const double ln = (distortion == 0.0)
                                  ? 0.0
                                  : distortion * k.impulse_response(s_cur + 1, th, theta);
            return expected_psi(k, s_target, s_cur + 1, th, ln, n_quad, depth + 1) * f;
        },
        cs.lo, cs.hi, nq);
}

} // namespace

double expected_virtual_value(const Kernel& k, int s_target, int t, double theta,
                              double distortion, int n_quad) {
    if (s_target < t) throw std::invalid_argument("expected_virtual_value: s_target < t");
    return expected_psi(k, s_target, t, theta, distortion, n_quad, 0);
}

MPrimeResult m_prime(const Kernel& k, double discount, int horizon, int t, double theta,
                     double distortion, int n_quad, int premise_samples, uint64_t seed) {
    MPrimeResult res;
    if (t >= horizon) return res;  // M' = 0 at the last period

    double best = -std::numeric_limits<double>::infinity();
    int best_s = t + 1;
    for (int s = t + 1; s <= horizon; ++s) {
        const double e = expected_psi(k, s, t, theta, distortion, n_quad, 0);
        const double v = std::pow(discount, s - t) * e;
        if (v > best) {
            best = v;
            best_s = s;
        }
    }
    res.value = best;
    res.argmax_s = best_s;

    res.min_sampled_psi = std::numeric_limits<double>::infinity();
    for (int p = 0; p < premise_samples; ++p) {
        PathRng rng(seed, static_cast<uint64_t>(p));
        double th = theta, ln = distortion;
        bool singular = false;
        for (int s = t + 1; s <= horizon; ++s) {
            const double next = k.sample_transition(s, rng.uniform01(), th);
            try {
                ln = (ln == 0.0) ? 0.0 : ln * k.impulse_response(s, next, th);
            } catch (const SingularDensityError&) {
                singular = true;
                break;
            }
            th = next;
            res.min_sampled_psi = std::min(res.min_sampled_psi, th - ln);
        }
        if (singular) {
            res.min_sampled_psi = -std::numeric_limits<double>::infinity();
            break;
        }
    }
    if (premise_samples <= 0) res.min_sampled_psi = 0.0;
    res.premise_ok = res.min_sampled_psi > 0.0;
    return res;
}

} // namespace selltime
