#include <doctest.h>

#include <cmath>
#include <functional>

#include "selltime/ic.hpp"
#include "selltime/quadrature.hpp"
#include "selltime/revenue.hpp"

using namespace selltime;

namespace {

SolveConfig cfg2(double delta, int n_theta = 401) {
    SolveConfig c;
    c.horizon = 2;
    c.discount = delta;
    c.n_theta = n_theta;
    c.n_distortion = 32;
    return c;
}

// Hand-rolled policy for negative controls and degenerate cases.
class LambdaPolicy final : public Policy {
public:
    LambdaPolicy(KernelPtr k, int T, double delta, SaleMode mode,
                 std::function<bool(int, double, double)> sell)
        : k_(std::move(k)), T_(T), delta_(delta), mode_(mode), sell_(std::move(sell)) {}

    int horizon() const override { return T_; }
    double discount() const override { return delta_; }
    SaleMode mode() const override { return mode_; }
    const Kernel& kernel() const override { return *k_; }
    bool sell(int t, double th, double lh) const override { return sell_(t, th, lh); }

private:
    KernelPtr k_;
    int T_;
    double delta_;
    SaleMode mode_;
    std::function<bool(int, double, double)> sell_;
};

// A process that violates FOSD: higher previous types shift next-period
// mass downward.
class AntiPersistentKernel final : public Kernel {
public:
    AntiPersistentKernel() : Kernel("anti_persistent", {0.0, 1.0}) {}

protected:
    double t_cdf(int, double th, double prev, double) const override {
        return std::pow(th, 1.0 / (0.5 + prev));
    }
    double t_pdf(int, double th, double prev, double) const override {
        const double e = 1.0 / (0.5 + prev);
        return e * std::pow(th, e - 1.0);
    }
    double t_dcdf_dprev(int, double th, double prev, double) const override {
        if (th <= 0.0) return 0.0;
        const double e = 1.0 / (0.5 + prev);
        return std::pow(th, e) * std::log(th) * (-e * e);
    }
};

} // namespace

TEST_CASE("d_function at the last period is the report allocation") {
    const auto k = make_power();
    const SolveResult r = solve(k, cfg2(1.0));
    const SolvedPolicy p(r);
    const ReportContext ctx{2, 0.4, k->initial_distortion(0.4), true};
    for (double report : {0.1, 0.5, 0.9}) {
        const double lhat = report_distortion(*k, 2, report, 0.4, k->initial_distortion(0.4));
        const double expect = p.sell(2, report, lhat) ? 1.0 : 0.0;
        for (double true_type : {0.2, 0.6, 0.95})  // independent of the true type
            CHECK(d_function(p, ctx, report, true_type) == doctest::Approx(expect));
    }
}

TEST_CASE("d_function collapses to the allocation under independence") {
    const auto k = make_independent();
    SolveConfig c = cfg2(0.9);
    c.horizon = 3;
    const SolveResult r = solve(k, c);
    const SolvedPolicy p(r);
    const ReportContext root{1, 0.0, 0.0, true};
    for (double report : {0.3, 0.8, 0.95}) {
        const double lhat = k->initial_distortion(report);
        const double q = p.sell(1, report, lhat) ? 1.0 : 0.0;
        for (double true_type : {0.2, 0.9})
            CHECK(d_function(p, root, report, true_type) == doctest::Approx(q).epsilon(1e-12));
    }
}

TEST_CASE("d_function vanishes for the never-sell policy") {
    const auto k = make_quadratic_tilt();
    const LambdaPolicy p(k, 3, 1.0, SaleMode::one_object,
                         [](int, double, double) { return false; });
    const ReportContext root{1, 0.0, 0.0, true};
    CHECK(d_function(p, root, 0.7, 0.4) == 0.0);
    const ReportContext mid{2, 0.5, 0.5, true};
    CHECK(d_function(p, mid, 0.2, 0.9) == 0.0);
}

TEST_CASE("d_function matches the directly coded first-period integrand") {
    // Cross-validation against an independent evaluation of
    //   q1(hat) - delta * Int q2(hat-history, y) dF2(y|x)/dtheta dy.
    const auto k = make_power();
    const SolveResult r = solve(k, cfg2(1.0, 801));
    const SolvedPolicy p(r);
    const double delta = 1.0;

    const auto direct = [&](double hat, double x) {
        const double L1 = k->initial_distortion(hat);
        const bool q1 = p.sell(1, hat, L1);
        const bool avail = !q1;
        const auto q2 = [&](double y) {
            return avail && p.sell(2, y, L1 * k->impulse_response(2, y, hat));
        };
        // The allocation boundary is exp(-hat/(1-hat)) when available.
        const double c = std::exp(-hat / (1.0 - hat));
        const double inner = gl_integrate(
            [&](double y) { return (q2(y) ? 1.0 : 0.0) * k->transition_dcdf_dprev(2, y, x); },
            c, 1.0, 96);
        return (q1 ? 1.0 : 0.0) - delta * inner;
    };

    const ReportContext root{1, 0.0, 0.0, true};
    for (double hat : {0.3, 0.55, 0.9}) {
        for (double x : {0.2, 0.5, 0.8}) {
            CHECK(d_function(p, root, hat, x, 48) ==
                  doctest::Approx(direct(hat, x)).epsilon(1e-8));
        }
    }
}

TEST_CASE("integral monotonicity passes on the solved worked examples") {
    SamplePlan plan;
    plan.n_pairs = 120;
    for (auto make : {&make_shrinking_uniform, &make_power, &make_quadratic_tilt}) {
        const auto k = (*make)(1.0);
        const SolveResult r = solve(k, cfg2(1.0));
        const SolvedPolicy p(r);
        const CheckEntry e = integral_monotonicity_check(p, plan);
        INFO(k->name() << " worst slack " << e.worst);
        CHECK(e.status == CheckStatus::pass);
        CHECK(e.worst >= -1e-6);
    }
}

TEST_CASE("integral monotonicity at a three-period horizon") {
    // Exercises the two-level D recursion with report contexts at t = 2, 3.
    const auto k = make_shrinking_uniform();
    SolveConfig c = cfg2(0.9, 301);
    c.horizon = 3;
    const SolveResult r = solve(k, c);
    const SolvedPolicy p(r);
    SamplePlan plan;
    plan.n_ctx = 3;
    plan.n_pairs = 25;
    plan.n_quad = 16;
    const CheckEntry e = integral_monotonicity_check(p, plan);
    CHECK(e.status == CheckStatus::pass);
    CHECK(e.worst >= -1e-6);
}

TEST_CASE("first-period slack reproduces the worked case analysis") {
    for (double delta : {0.5, 1.0}) {
        const auto k = make_quadratic_tilt();
        const SolveResult r = solve(k, cfg2(delta));
        const SolvedPolicy p(r);
        const double k1 = 3.0 / (6.0 - 2.0 * delta);

        // Both reports below the threshold: both sides equal, slack 0.
        CHECK(two_period_slack_first(p, 0.2, 0.4) == doctest::Approx(0.0).epsilon(1e-9));
        // Straddling the threshold: slack (1 - delta/3)(theta1 - k1).
        for (double hat : {0.1, 0.3}) {
            for (double th1 : {k1 + 0.05, k1 + 0.2}) {
                const double expect = (1.0 - delta / 3.0) * (th1 - k1);
                CHECK(two_period_slack_first(p, hat, th1) ==
                      doctest::Approx(expect).epsilon(1e-6));
            }
        }
        // Both above: both sides theta1 - hat, slack 0.
        CHECK(two_period_slack_first(p, k1 + 0.05, k1 + 0.15) ==
              doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("integral monotonicity detects a non-monotone allocation") {
    const auto k = make_independent();
    const LambdaPolicy bad(k, 2, 1.0, SaleMode::one_object, [](int t, double th, double) {
        return t == 1 && th > 0.3 && th < 0.6;  // sell only on an interior band
    });
    SamplePlan plan;
    plan.n_pairs = 400;
    const CheckEntry e = integral_monotonicity_check(bad, plan);
    CHECK(e.status == CheckStatus::fail);
    CHECK(e.worst <= -0.05);
    // The witness reproduces the violation.
    const ReportContext root{1, 0.0, 0.0, true};
    const double lo = std::min(e.witness.theta_hat, e.witness.theta_true);
    const double hi = std::max(e.witness.theta_hat, e.witness.theta_true);
    CHECK(lo < 0.6);
    CHECK(hi > 0.6);
    (void)root;
}

TEST_CASE("corollary-2 verdicts on the worked examples") {
    // Shrinking uniform, one object: q2 vanishes, all conditions hold.
    {
        const auto k = make_shrinking_uniform();
        const SolveResult r = solve(k, cfg2(1.0));
        const SolvedPolicy p(r);
        const Corollary2Report rep = corollary2_check(p);
        CHECK(rep.overall.status == CheckStatus::pass);
    }
    // Exponent process, one object: the period-2 allocation drops when the
    // first report crosses the selling threshold, so the sufficient
    // condition is unavailable.
    {
        const auto k = make_power();
        const SolveResult r = solve(k, cfg2(1.0));
        const SolvedPolicy p(r);
        const Corollary2Report rep = corollary2_check(p);
        CHECK(rep.downstream_monotone.status == CheckStatus::fail);
        CHECK(rep.overall.status == CheckStatus::inconclusive);
        CHECK(rep.monotone_report.status == CheckStatus::pass);
        CHECK(rep.fosd.status == CheckStatus::pass);
    }
    // Never-sell policy: trivially monotone everywhere.
    {
        const auto k = make_power();
        const LambdaPolicy p(k, 2, 1.0, SaleMode::one_object,
                             [](int, double, double) { return false; });
        CHECK(corollary2_check(p).overall.status == CheckStatus::pass);
    }
    // ar1 with uniform (hence IFR) initial distribution, repeated sales:
    // thresholds fall in the first report and are flat in later ones.
    {
        const auto k = make_ar1(0.6);
        SolveConfig c = cfg2(0.95);
        c.horizon = 4;
        c.n_theta = 201;
        const SolveResult r = solve_repeated_sales(k, c);
        const SolvedPolicy p(r);
        const Corollary2Report rep = corollary2_check(p);
        INFO(rep.overall.note);
        CHECK(rep.overall.status == CheckStatus::pass);
    }
}

TEST_CASE("two-period checks pass on the worked examples and gate on the horizon") {
    SamplePlan plan;
    plan.n_pairs = 150;
    for (auto make : {&make_power, &make_quadratic_tilt}) {
        const auto k = (*make)(1.0);
        const SolveResult r = solve(k, cfg2(1.0));
        const SolvedPolicy p(r);
        const TwoPeriodReport rep = two_period_ic_check(p, plan);
        INFO(k->name());
        CHECK(rep.overall.status == CheckStatus::pass);
        CHECK(rep.own_period.worst >= -1e-9);
        CHECK(rep.first_period.worst >= -1e-6);
    }
    // Wrong horizon: not applicable.
    const auto k = make_power();
    SolveConfig c = cfg2(1.0);
    c.horizon = 3;
    c.n_theta = 101;
    const SolveResult r3 = solve(k, c);
    const SolvedPolicy p3(r3);
    CHECK(two_period_ic_check(p3).overall.status == CheckStatus::inconclusive);
}

TEST_CASE("two-period own-period inequality catches a decreasing allocation") {
    const auto k = make_independent();
    const LambdaPolicy bad(k, 2, 1.0, SaleMode::one_object, [](int t, double th, double) {
        if (t == 1) return false;
        return th < 0.5;  // period-2 allocation decreasing in the report
    });
    SamplePlan plan;
    plan.n_pairs = 200;
    const TwoPeriodReport rep = two_period_ic_check(bad, plan);
    CHECK(rep.own_period.status == CheckStatus::fail);
    CHECK(rep.own_period.worst < -0.01);
    // Witness is a genuine violation of the displayed inequality.
    CHECK(two_period_slack_own(bad, rep.own_period.witness.theta_hat_prev,
                               rep.own_period.witness.theta_hat,
                               rep.own_period.witness.theta_true) ==
          doctest::Approx(rep.own_period.worst));
}

TEST_CASE("envelope flow transfers reduce to posted prices in the first worked example") {
    // Selling at t=1 only: the flow payment at a sale is the threshold 1/2
    // (not the reported virtual value), and waiting is free.
    const auto k = make_shrinking_uniform();
    const SolveResult r = solve(k, cfg2(1.0, 801));
    const SolvedPolicy p(r);
    const EnvelopeFlowSchedule z(p);
    const ReportContext root{1, 0.0, 0.0, true};
    for (double th : {0.55, 0.8, 0.97})
        CHECK(z.charge(root, th, k->initial_distortion(th), true) ==
              doctest::Approx(0.5).epsilon(5e-6));
    for (double th : {0.1, 0.4})
        CHECK(z.charge(root, th, k->initial_distortion(th), false) ==
              doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("envelope flow transfers charge a waiting fee in the tilted example") {
    // Below the threshold the mechanism charges delta/3 upfront and hands
    // the object over for free in period 2.
    const double delta = 1.0;
    const auto k = make_quadratic_tilt();
    const SolveResult r = solve(k, cfg2(delta, 801));
    const SolvedPolicy p(r);
    const EnvelopeFlowSchedule z(p);
    const ReportContext root{1, 0.0, 0.0, true};
    for (double th : {0.2, 0.5, 0.7})
        CHECK(z.charge(root, th, k->initial_distortion(th), false) ==
              doctest::Approx(delta / 3.0).epsilon(1e-5));
    const double th1 = 0.4;
    const ReportContext ctx2{2, th1, k->initial_distortion(th1), true};
    const double l2 = report_distortion(*k, 2, 0.6, th1, k->initial_distortion(th1));
    CHECK(z.charge(ctx2, 0.6, l2, true) == doctest::Approx(0.0).epsilon(1e-5));
}

TEST_CASE("best-response oracle: truthful play optimal under envelope transfers") {
    const auto k = make_shrinking_uniform();
    const SolveResult r = solve(k, cfg2(1.0, 801));
    const SolvedPolicy p(r);
    const EnvelopeFlowSchedule transfers(p);
    const BestResponseReport rep = best_response_oracle(p, transfers);
    CHECK(rep.entry.status == CheckStatus::pass);
    CHECK(rep.max_gain <= rep.entry.tol);

    // Never-sell, zero-transfer mechanism: no strategy earns anything.
    const LambdaPolicy zero(k, 2, 1.0, SaleMode::one_object,
                            [](int, double, double) { return false; });
    const BestResponseReport zrep = best_response_oracle(zero, SalePriceSchedule{{0.0, 0.0}});
    CHECK(zrep.max_gain == doctest::Approx(0.0));
    CHECK(zrep.entry.status == CheckStatus::pass);
}

TEST_CASE("best-response oracle flags envelope-breaking transfers") {
    const auto k = make_shrinking_uniform();
    const SolveResult r = solve(k, cfg2(1.0, 801));
    const SolvedPolicy p(r);
    // Scaled-down flow payments invite deviations.
    const BestResponseReport rep = best_response_oracle(p, EnvelopeFlowSchedule(p, 24, 0.5));
    CHECK(rep.entry.status == CheckStatus::fail);
    CHECK(rep.max_gain > rep.entry.tol);

    // Charging the reported virtual value at the sale is manipulable too:
    // high types shade toward the threshold to buy cheaply.
    const BestResponseReport srep = best_response_oracle(p, SalePriceSchedule{});
    CHECK(srep.entry.status == CheckStatus::fail);
    CHECK(srep.max_gain > 0.5);
}

TEST_CASE("best-response oracle guards its state space") {
    const auto k = make_power();
    SolveConfig c = cfg2(1.0, 101);
    c.horizon = 6;
    const SolveResult r = solve(k, c);
    const SolvedPolicy p(r);
    BestResponseOptions opts;
    opts.n_types = 40;
    const BestResponseReport rep = best_response_oracle(p, SalePriceSchedule{}, opts);
    CHECK(rep.entry.status == CheckStatus::inconclusive);
    CHECK(rep.entry.note.find("state space") != std::string::npos);
}

TEST_CASE("ex-post participation holds on solved grids under FOSD") {
    const auto k = make_shrinking_uniform();
    const SolveResult r = solve(k, cfg2(1.0));
    const CheckEntry e = expost_ir_check(r);
    CHECK(e.status == CheckStatus::pass);
    CHECK(e.worst >= 0.0);
}

TEST_CASE("ex-post participation is inconclusive without FOSD") {
    const auto k = std::make_shared<AntiPersistentKernel>();
    CHECK_FALSE(fosd_check(*k).pass);
    SolveConfig c = cfg2(0.9, 101);
    c.n_distortion = 8;
    const SolveResult r = solve(k, c);
    const CheckEntry e = expost_ir_check(r);
    CHECK(e.status == CheckStatus::inconclusive);
}

TEST_CASE("envelope consistency holds pointwise for the flow transfers") {
    for (auto make : {&make_shrinking_uniform, &make_quadratic_tilt}) {
        const auto k = (*make)(1.0);
        const SolveResult r = solve(k, cfg2(1.0));
        const SolvedPolicy p(r);
        const EnvelopeFlowSchedule z(p);
        const EnvelopeCheck chk = envelope_consistency_check(p, z, 24, 32, 2e-4);
        INFO(k->name() << " gap " << chk.max_abs_gap);
        CHECK(chk.pass);
    }
}

TEST_CASE("envelope check rejects the sale-price rule pointwise") {
    // The reported-virtual-value price is revenue-equivalent on average but
    // its truthful payoff decreases in the type on the selling region.
    const auto k = make_shrinking_uniform();
    const SolveResult r = solve(k, cfg2(1.0));
    const SolvedPolicy p(r);
    const EnvelopeCheck chk = envelope_consistency_check(p, SalePriceSchedule{});
    CHECK_FALSE(chk.pass);
    CHECK(chk.max_abs_gap > 1e-2);
}

TEST_CASE("sale-price transfers satisfy the revenue-equivalence average") {
    for (auto make : {&make_shrinking_uniform, &make_power, &make_quadratic_tilt}) {
        const auto k = (*make)(1.0);
        const SolveResult r = solve(k, cfg2(1.0));
        const Transfers tr = transfers_from_policy(r);
        INFO(k->name() << " gap " << tr.envelope_average.max_abs_gap);
        CHECK(tr.envelope_average.pass);
    }
}

TEST_CASE("truthful payoff equals the information rent at a sale") {
    const auto k = make_shrinking_uniform();
    const SolveResult r = solve(k, cfg2(1.0));
    const SolvedPolicy p(r);
    const SalePriceSchedule rule{};
    const ReportContext root{1, 0.0, 0.0, true};
    // theta1 = 0.8 sells immediately at price psi1; the rent is L1 = 0.2.
    CHECK(truthful_payoff(p, rule, root, 0.8) == doctest::Approx(0.2).epsilon(1e-12));
    // theta1 = 0.3 never sells.
    CHECK(truthful_payoff(p, rule, root, 0.3) == doctest::Approx(0.0));
}
