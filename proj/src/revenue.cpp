#include "selltime/revenue.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "selltime/quadrature.hpp"
#include "selltime/rng.hpp"

namespace selltime {

namespace {

std::vector<double> decision_flips(const SolveResult& r, int t, double theta_prev,
                                   double distortion, const Interval& cs) {
    // Flip points of the next period's decision along the integration axis.
    std::vector<double> flips;
    if (!(cs.width() > 0.0)) return flips;
    const Kernel& k = *r.kernel;
    const auto sells = [&](double th) {
        double ln = distortion;
        if (ln != 0.0) ln *= k.impulse_response(t, th, theta_prev);
        return decide(r, t, th, ln).sell;
    };
    const int n_scan = 33;
    double px = cs.lo;
    bool pv = sells(px);
    for (int s = 1; s <= n_scan; ++s) {
        const double x = (s == n_scan) ? cs.hi : cs.lo + cs.width() * s / n_scan;
        const bool v = sells(x);
        if (v != pv)
            flips.push_back(bisect_root([&](double z) { return sells(z) ? 1.0 : -1.0; }, px, x, 60));
        px = x;
        pv = v;
    }
    return flips;
}

double revenue_rec(const SolveResult& r, int t, double theta, double distortion, int n_quad) {
    const Kernel& k = *r.kernel;
    const Decision d = decide(r, t, theta, distortion);
    const bool one_obj = r.config.mode == SaleMode::one_object;

    double now = 0.0;
    if (d.sell) now = d.psi - r.config.sale_cost;
    if (one_obj && d.sell) return now;
    if (t == r.config.horizon || r.config.discount == 0.0) return now;

    const Interval cs = k.conditional_support(t + 1, theta);
    if (!(cs.width() > 0.0)) return now;
    const int nq = std::max(12, n_quad >> (t - 1));
    const auto flips = decision_flips(r, t + 1, theta, distortion, cs);
    const double cont = gl_integrate_split(
        [&](double th) {
            const double f = k.transition_pdf(t + 1, th, theta);
            if (!(f > 0.0)) return 0.0;
            double ln = distortion;
            if (ln != 0.0) ln *= k.impulse_response(t + 1, th, theta);
            return revenue_rec(r, t + 1, th, ln, n_quad) * f;
        },
        cs.lo, cs.hi, nq, flips);
    return now + r.config.discount * cont;
}

void sale_dist_rec(const SolveResult& r, int t, double theta, double distortion, double weight,
                   int n_quad, std::vector<double>& acc) {
    const Kernel& k = *r.kernel;
    const Decision d = decide(r, t, theta, distortion);
    if (d.sell) {
        acc[t] += weight;
        return;
    }
    if (t == r.config.horizon) {
        acc[0] += weight;
        return;
    }
    const Interval cs = k.conditional_support(t + 1, theta);
    if (!(cs.width() > 0.0)) {
        acc[0] += weight;
        return;
    }
    // Probabilities are integrated in CDF space (exact unit mass even for
    // kernels with singular edge densities), splitting at the decision
    // boundary images.
    const int nq = std::max(12, n_quad >> (t - 1));
    const auto flips = decision_flips(r, t + 1, theta, distortion, cs);
    std::vector<double> pts{0.0, 1.0};
    for (double x : flips)
        if (x > cs.lo && x < cs.hi) pts.push_back(k.transition_cdf(t + 1, x, theta));
    std::sort(pts.begin(), pts.end());
    const auto& rule = GaussLegendre::rule(nq);
    for (size_t seg = 0; seg + 1 < pts.size(); ++seg) {
        const double mid = 0.5 * (pts[seg] + pts[seg + 1]);
        const double half = 0.5 * (pts[seg + 1] - pts[seg]);
        if (!(half > 0.0)) continue;
        for (int i = 0; i < nq; ++i) {
            const double u = mid + half * rule.nodes[i];
            const double th = k.sample_transition(t + 1, u, theta);
            double ln = distortion;
            if (ln != 0.0) ln *= k.impulse_response(t + 1, th, theta);
            sale_dist_rec(r, t + 1, th, ln, weight * half * rule.weights[i], n_quad, acc);
        }
    }
}

} // namespace

Transfers transfers_from_policy(const SolveResult& result, int n_quad, double tol) {
    Transfers tr;
    tr.rule = TransferRule{1.0, 0.0};
    const SolvedPolicy policy(result);
    const SalePriceSchedule schedule(tr.rule);
    const Kernel& k = *result.kernel;
    const ReportContext root{1, 0.0, 0.0, true};
    const double lo = k.support_lo(), hi = k.support_hi();

    const auto q1_sells = [&](double th) {
        return decide(result, 1, th, k.initial_distortion(th)).sell;
    };
    std::vector<double> flips;
    {
        const int n_scan = 65;
        double px = lo;
        bool pv = q1_sells(px);
        for (int s = 1; s <= n_scan; ++s) {
            const double x = (s == n_scan) ? hi : lo + (hi - lo) * s / n_scan;
            const bool v = q1_sells(x);
            if (v != pv)
                flips.push_back(
                    bisect_root([&](double z) { return q1_sells(z) ? 1.0 : -1.0; }, px, x, 60));
            px = x;
            pv = v;
        }
    }

    // E_{F1}[U_truthful] against E_{F1}[int D1] = int D1 (1 - F1).
    const double mean_direct = gl_integrate_split(
        [&](double th) {
            return truthful_payoff(policy, schedule, root, th, n_quad) * k.initial_pdf(th);
        },
        lo, hi, n_quad, flips);
    const double mean_envelope = gl_integrate_split(
        [&](double x) {
            return d_function(policy, root, x, x, n_quad) * (1.0 - k.initial_cdf(x));
        },
        lo, hi, n_quad, flips);

    tr.envelope_average.tol = tol;
    tr.envelope_average.max_abs_gap = std::abs(mean_direct - mean_envelope);
    tr.envelope_average.pass = tr.envelope_average.max_abs_gap <= tol;
    return tr;
}

double expected_revenue(const SolveResult& result, int n_quad) {
    const Kernel& k = *result.kernel;
    if (n_quad <= 0) n_quad = result.config.n_quad;
    const double lo = k.support_lo(), hi = k.support_hi();
    const auto q1_flips = [&]() {
        std::vector<double> flips;
        const auto sells = [&](double th) {
            return decide(result, 1, th, k.initial_distortion(th)).sell;
        };
        const int n_scan = 65;
        double px = lo;
        bool pv = sells(px);
        for (int s = 1; s <= n_scan; ++s) {
            const double x = (s == n_scan) ? hi : lo + (hi - lo) * s / n_scan;
            const bool v = sells(x);
            if (v != pv)
                flips.push_back(
                    bisect_root([&](double z) { return sells(z) ? 1.0 : -1.0; }, px, x, 60));
            px = x;
            pv = v;
        }
        return flips;
    }();
    return gl_integrate_split(
        [&](double th) {
            return revenue_rec(result, 1, th, k.initial_distortion(th), n_quad) * k.initial_pdf(th);
        },
        lo, hi, n_quad, q1_flips);
}

double expected_revenue_from_value(const SolveResult& result) {
    // Trapezoid over the stored period-1 row of V against f1.
    const Kernel& k = *result.kernel;
    const auto& th = result.grid.theta_nodes;
    const auto& v = result.tables[0].value;
    std::vector<double> terms;
    terms.reserve(th.size());
    for (size_t i = 0; i + 1 < th.size(); ++i) {
        const double a = v[i] * k.initial_pdf(th[i]);
        const double b = v[i + 1] * k.initial_pdf(th[i + 1]);
        terms.push_back(0.5 * (a + b) * (th[i + 1] - th[i]));
    }
    return pairwise_sum(terms);
}

std::vector<double> sale_period_distribution(const SolveResult& result, int n_quad) {
    if (result.config.mode != SaleMode::one_object)
        throw std::invalid_argument("sale_period_distribution: defined for one_object mode");
    const Kernel& k = *result.kernel;
    if (n_quad <= 0) n_quad = std::min(result.config.n_quad, 32);
    std::vector<double> acc(result.config.horizon + 1, 0.0);
    const int nq = n_quad;
    const auto& rule = GaussLegendre::rule(nq);
    // Outer integral over F1 in CDF space, split at the period-1 threshold
    // images.
    std::vector<double> pts{0.0, 1.0};
    if (!result.thresholds.empty())
        for (const auto& xs : result.thresholds[0].crossings)
            for (double x : xs) pts.push_back(k.initial_cdf(x));
    std::sort(pts.begin(), pts.end());
    for (size_t seg = 0; seg + 1 < pts.size(); ++seg) {
        const double mid = 0.5 * (pts[seg] + pts[seg + 1]);
        const double half = 0.5 * (pts[seg + 1] - pts[seg]);
        if (!(half > 0.0)) continue;
        for (int i = 0; i < nq; ++i) {
            const double u = mid + half * rule.nodes[i];
            const double th = k.sample_initial(u);
            sale_dist_rec(result, 1, th, k.initial_distortion(th), half * rule.weights[i], n_quad,
                          acc);
        }
    }
    return acc;
}

namespace {

int resolve_threads(int threads) {
    if (threads > 0) return threads;
    if (const char* env = std::getenv("SELLTIME_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

struct BlockStats {
    double sum_rev = 0.0;
    double sum_rev2 = 0.0;
    double sum_payoff = 0.0;
    double min_payoff = std::numeric_limits<double>::infinity();
    std::vector<std::uint64_t> sale_counts;
};

} // namespace

SimSummary simulate(const SolveResult& result, const TransferRule& transfers,
                    std::uint64_t n_paths, std::uint64_t seed,
                    const std::function<void(const Transcript&)>& sink, int threads) {
    if (result.config.mode != SaleMode::one_object)
        throw std::invalid_argument("simulate: transcripts are defined for one_object mode");
    const Kernel& k = *result.kernel;
    const int T = result.config.horizon;
    const double delta = result.config.discount;

    const auto play = [&](std::uint64_t idx) {
        Transcript tr;
        tr.path_index = idx;
        PathRng rng(seed, idx);
        double theta = k.sample_initial(rng.uniform01());
        double ln = k.initial_distortion(theta);
        for (int t = 1; t <= T; ++t) {
            tr.types.push_back(theta);
            tr.reports.push_back(theta);
            const Decision d = decide(result, t, theta, ln);
            if (d.sell) {
                tr.sale_period = t;
                tr.price = transfers.price(d.psi);
                const double disc = std::pow(delta, t - 1);
                tr.buyer_payoff = disc * (theta - tr.price);
                tr.seller_revenue = disc * (tr.price - result.config.sale_cost);
                break;
            }
            if (t < T) {
                const double next = k.sample_transition(t + 1, rng.uniform01(), theta);
                ln = (ln == 0.0) ? 0.0 : ln * k.impulse_response(t + 1, next, theta);
                theta = next;
            }
        }
        return tr;
    };

    const std::uint64_t block_size = 8192;
    const std::uint64_t n_blocks = (n_paths + block_size - 1) / block_size;
    std::vector<BlockStats> blocks(static_cast<size_t>(n_blocks));

    const auto run_block = [&](std::uint64_t b) {
        BlockStats st;
        st.sale_counts.assign(T + 1, 0);
        std::vector<double> revs, revs2, pays;
        const std::uint64_t begin = b * block_size;
        const std::uint64_t end = std::min(n_paths, begin + block_size);
        revs.reserve(end - begin);
        revs2.reserve(end - begin);
        pays.reserve(end - begin);
        for (std::uint64_t idx = begin; idx < end; ++idx) {
            const Transcript tr = play(idx);
            revs.push_back(tr.seller_revenue);
            revs2.push_back(tr.seller_revenue * tr.seller_revenue);
            pays.push_back(tr.buyer_payoff);
            st.min_payoff = std::min(st.min_payoff, tr.sale_period ? tr.buyer_payoff : 0.0);
            ++st.sale_counts[tr.sale_period];
        }
        st.sum_rev = pairwise_sum(revs);
        st.sum_rev2 = pairwise_sum(revs2);
        st.sum_payoff = pairwise_sum(pays);
        blocks[static_cast<size_t>(b)] = std::move(st);
    };

    const int n_threads = sink ? 1 : std::min<int>(resolve_threads(threads), 64);
    if (n_threads <= 1 || n_blocks <= 1) {
        for (std::uint64_t b = 0; b < n_blocks; ++b) {
            run_block(b);
            if (sink) {
                const std::uint64_t begin = b * block_size;
                const std::uint64_t end = std::min(n_paths, begin + block_size);
                for (std::uint64_t idx = begin; idx < end; ++idx) sink(play(idx));
            }
        }
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::uint64_t> next{0};
        for (int w = 0; w < n_threads; ++w) {
            pool.emplace_back([&]() {
                for (;;) {
                    const std::uint64_t b = next.fetch_add(1);
                    if (b >= n_blocks) return;
                    run_block(b);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    SimSummary sum;
    sum.n_paths = n_paths;
    sum.seed = seed;
    sum.sale_counts.assign(T + 1, 0);
    std::vector<double> rs, r2s, ps;
    sum.min_buyer_payoff = n_paths ? std::numeric_limits<double>::infinity() : 0.0;
    for (const auto& st : blocks) {
        rs.push_back(st.sum_rev);
        r2s.push_back(st.sum_rev2);
        ps.push_back(st.sum_payoff);
        sum.min_buyer_payoff = std::min(sum.min_buyer_payoff, st.min_payoff);
        for (size_t t = 0; t < st.sale_counts.size(); ++t) sum.sale_counts[t] += st.sale_counts[t];
    }
    if (n_paths > 0) {
        const double n = static_cast<double>(n_paths);
        const double total = pairwise_sum(rs);
        sum.mean_revenue = total / n;
        const double var =
            std::max(0.0, pairwise_sum(r2s) / n - sum.mean_revenue * sum.mean_revenue);
        sum.se_revenue = std::sqrt(var / n);
        sum.mean_buyer_payoff = pairwise_sum(ps) / n;
    }
    return sum;
}

MyopicReport myopic_check(const Kernel& k, double delta, int horizon, int n_theta, int n_paths,
                          int premise_samples, int n_quad, double tol, std::uint64_t seed) {
    MyopicReport rep;
    rep.worst_margin = std::numeric_limits<double>::infinity();

    // Candidate states: the period-1 row plus path-visited later states.
    std::vector<MyopicStateRecord> states;
    const double lo = k.support_lo(), hi = k.support_hi();
    for (int i = 0; i < n_theta; ++i) {
        const double th = lo + (hi - lo) * (i + 0.5) / n_theta;
        states.push_back({1, th, k.initial_distortion(th), 0, 0, true});
    }
    for (int ppp = 0; ppp < n_paths; ++ppp) {
        PathRng rng(seed, static_cast<uint64_t>(ppp));
        double th = k.sample_initial(rng.uniform01());
        double ln = k.initial_distortion(th);
        for (int t = 2; t < horizon; ++t) {
            const double next = k.sample_transition(t, rng.uniform01(), th);
            ln = (ln == 0.0) ? 0.0 : ln * k.impulse_response(t, next, th);
            th = next;
            states.push_back({t, th, ln, 0, 0, true});
        }
    }

    for (auto& st : states) {
        if (st.t >= horizon) continue;
        // Premise: strictly positive virtual values along sampled continuations.
        bool premise = (st.theta - st.distortion) > 0.0;
        for (int s = 0; s < premise_samples && premise; ++s) {
            PathRng rng(seed ^ 0xABCDEFull, static_cast<uint64_t>(s));
            double th = st.theta, ln = st.distortion;
            for (int u = st.t + 1; u <= horizon; ++u) {
                const double next = k.sample_transition(u, rng.uniform01(), th);
                ln = (ln == 0.0) ? 0.0 : ln * k.impulse_response(u, next, th);
                th = next;
                if (!(th - ln > 0.0)) {
                    premise = false;
                    break;
                }
            }
        }
        st.premise_ok = premise;
        if (!premise) {
            ++rep.n_premise_failed;
            continue;
        }
        st.one_step = expected_virtual_value(k, st.t + 1, st.t, st.theta, st.distortion, n_quad);
        st.two_step = (st.t + 2 <= horizon)
                          ? expected_virtual_value(k, st.t + 2, st.t, st.theta, st.distortion, n_quad)
                          : 0.0;
        ++rep.n_checked;
        const double margin = st.one_step - delta * st.two_step;
        if (margin < rep.worst_margin) {
            rep.worst_margin = margin;
            rep.worst = st;
        }
        if (margin <= -tol) {
            rep.pass = false;
            if (rep.violations.size() < 32) rep.violations.push_back(st);
        }
    }
    if (!std::isfinite(rep.worst_margin)) rep.worst_margin = 0.0;
    return rep;
}

SweepResult sweep(const std::string& kernel_name, std::map<std::string, double> kernel_params,
                  SolveConfig base, const std::string& axis, const std::vector<double>& values) {
    SweepResult out;
    out.axis = axis;
    if (axis != "delta" && axis != "gamma" && axis != "hazard_scale")
        throw std::invalid_argument("axis: expected delta, gamma, or hazard_scale");
    if (axis == "gamma" && kernel_name != "ar1")
        throw std::invalid_argument("axis: gamma sweeps require the ar1 kernel");

    for (const double v : values) {
        SolveConfig cfg = base;
        auto params = kernel_params;
        if (axis == "delta")
            cfg.discount = v;
        else
            params[axis] = v;
        const KernelPtr k = make_kernel(kernel_name, params);
        const SolveResult r = solve(k, cfg);

        SweepPoint pt;
        pt.value = v;
        pt.revenue = expected_revenue(r);
        if (!r.thresholds.empty() && !r.thresholds[0].k.empty()) pt.k1 = r.thresholds[0].k[0];
        pt.sale_dist = sale_period_distribution(r);
        pt.sale_by_t.assign(cfg.horizon, 0.0);
        double cum = 0.0;
        for (int t = 1; t <= cfg.horizon; ++t) {
            cum += pt.sale_dist[t];
            pt.sale_by_t[t - 1] = cum;
        }
        out.points.push_back(std::move(pt));
    }

    if (axis == "delta" && out.points.size() >= 2) {
        // Directional claims: revenue nondecreasing, early sales nonincreasing.
        const double tol = 1e-6;
        for (size_t i = 0; i + 1 < out.points.size(); ++i) {
            const bool inc = values[i + 1] >= values[i];
            const auto& a = inc ? out.points[i] : out.points[i + 1];
            const auto& b = inc ? out.points[i + 1] : out.points[i];
            if (b.revenue < a.revenue - tol) out.revenue_monotone = false;
            for (size_t t = 0; t < a.sale_by_t.size(); ++t)
                if (b.sale_by_t[t] > a.sale_by_t[t] + tol) out.early_sale_monotone = false;
        }
        if (!out.revenue_monotone || !out.early_sale_monotone)
            out.note = "directional comparative statics violated along the discount axis";
    }
    return out;
}

} // namespace selltime
