#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selltime/ic.hpp"
#include "selltime/policy.hpp"
#include "selltime/solver.hpp"

namespace selltime {

// One simulated play of the mechanism under truthful reporting.
struct Transcript {
    std::uint64_t path_index = 0;
    std::vector<double> types;    // realized theta_1.. up to the sale (or horizon)
    std::vector<double> reports;  // truthful, so identical to types
    int sale_period = 0;          // 0 = never sold
    double price = 0.0;           // paid at the sale period, undiscounted
    double buyer_payoff = 0.0;    // discounted to period 1
    double seller_revenue = 0.0;  // discounted to period 1
};

struct SimSummary {
    std::uint64_t n_paths = 0;
    std::uint64_t seed = 0;
    double mean_revenue = 0.0;
    double se_revenue = 0.0;
    double mean_buyer_payoff = 0.0;
    double min_buyer_payoff = 0.0;
    std::vector<std::uint64_t> sale_counts;  // index 0: never; index t: sale at t
};

// Sale-price transfers: charge psi_hat at the sale period, nothing
// otherwise. Pointwise these do not implement the envelope representation
// (the incentive-compatible implementation is the flow schedule in the
// incentive module); what they satisfy is the revenue-equivalence average:
// the expected truthful payoff under the initial distribution equals the
// expectation of the envelope integral. That identity is verified here.
struct Transfers {
    TransferRule rule;
    EnvelopeCheck envelope_average;
};

Transfers transfers_from_policy(const SolveResult& result, int n_quad = 48, double tol = 1e-6);

// Total expected revenue of the solved policy by nested path quadrature
// (policy decisions re-evaluated at the quadrature nodes).
double expected_revenue(const SolveResult& result, int n_quad = 0 /* 0: config value */);

// The same quantity through the other route: E_{F1}[V1].
double expected_revenue_from_value(const SolveResult& result);

// Probability of a sale in each period (index 0: never; index t: at t),
// by the same nested quadrature.
std::vector<double> sale_period_distribution(const SolveResult& result, int n_quad = 0);

// Monte Carlo play of the mechanism. Reproducible for fixed (seed, n);
// the path partitioning into blocks is fixed, so results do not depend on
// the worker-thread count (threads = 0 reads SELLTIME_THREADS, default 1).
// The sink, when set, receives transcripts in path order.
SimSummary simulate(const SolveResult& result, const TransferRule& transfers,
                    std::uint64_t n_paths, std::uint64_t seed,
                    const std::function<void(const Transcript&)>& sink = nullptr,
                    int threads = 0);

// --- myopic rule ------------------------------------------------------------

struct MyopicStateRecord {
    int t = 1;
    double theta = 0.0;
    double distortion = 0.0;
    double one_step = 0.0;    // E[psi_{t+1} | state]
    double two_step = 0.0;    // E[psi_{t+2} | state] (0 when t+2 > horizon)
    bool premise_ok = true;   // psi > 0 along sampled continuations
};

struct MyopicReport {
    bool pass = true;                 // no violation among premise-holding states
    int n_checked = 0;
    int n_premise_failed = 0;
    double worst_margin = 0.0;        // min of one_step - delta*two_step over checked states
    MyopicStateRecord worst;
    std::vector<MyopicStateRecord> violations;  // capped
};

// Evaluates the one-step-ahead optimality inequality
//   E[psi_{s+1} | state] > delta * E[psi_{s+2} | state]
// at period-1 grid states and at states visited by simulated paths, with
// the premise (strictly positive future virtual values) sampled per state.
MyopicReport myopic_check(const Kernel& k, double delta, int horizon, int n_theta = 21,
                          int n_paths = 64, int premise_samples = 32, int n_quad = 32,
                          double tol = 1e-9, std::uint64_t seed = 2718);

// --- comparative statics -----------------------------------------------------

struct SweepPoint {
    double value = 0.0;
    double revenue = 0.0;
    std::optional<double> k1;
    std::vector<double> sale_by_t;   // P(sale <= t), t = 1..horizon
    std::vector<double> sale_dist;   // index 0: never; index t: sale at t
};

struct SweepResult {
    std::string axis;
    std::vector<SweepPoint> points;
    bool revenue_monotone = true;     // checked for the discount axis
    bool early_sale_monotone = true;  // P(sale <= t) nonincreasing in the discount
    std::string note;
};

// Re-solves the model along one parameter axis ("delta", "gamma", or
// "hazard_scale") and reports revenue and selling-time curves. For the
// discount axis the two directional claims are asserted into the flags.
SweepResult sweep(const std::string& kernel_name, std::map<std::string, double> kernel_params,
                  SolveConfig base, const std::string& axis, const std::vector<double>& values);

} // namespace selltime
