#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "selltime/kernel.hpp"
#include "selltime/virtual_value.hpp"

namespace selltime {

enum class SaleMode { one_object, repeated_sales };

std::string to_string(SaleMode m);
SaleMode sale_mode_from_string(const std::string& s);

struct SolveConfig {
    int horizon = 2;
    double discount = 1.0;
    SaleMode mode = SaleMode::one_object;
    int n_theta = 600;
    int n_distortion = 48;
    int n_quad = 64;
    double tie_tol = 1e-12;       // indifference breaks to not-sell
    double sale_cost = 0.0;       // per-period cost netted from a sale; off by default
    double distortion_min = 0.0;  // 0 = auto from the hazard range
    double distortion_max = 0.0;

    void validate() const;  // throws std::invalid_argument naming the field
};

// Non-finite intermediate values abort the solve with the offending state.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Per-period tables. Period 1 has one row per theta node at the
// path-consistent distortion L1(theta); later periods are (theta x L)
// grids stored row-major as [i_theta * n_L + j].
struct PeriodTable {
    int t = 1;
    std::vector<double> distortion_row;  // t == 1 only: L1 per theta node
    std::vector<double> value;
    std::vector<double> cont;    // M = delta * E[V_{t+1}]; 0 in the last period
    std::vector<double> margin;  // decision margin: psi - M (one_object) or psi
    std::vector<uint8_t> sell;
};

// Zero crossings of the decision margin in theta, per distortion node.
// `k` is the selling threshold when the margin crosses once from - to +;
// absent when the margin has constant sign. Non-monotone margins keep all
// crossings and clear `threshold_structure`.
struct ThresholdCurve {
    int t = 1;
    std::vector<std::optional<double>> k;            // one entry per L node (single entry at t=1)
    std::vector<std::vector<double>> crossings;
    bool threshold_structure = true;
};

struct Diagnostics {
    std::int64_t distortion_clamps = 0;   // interpolation queries outside the L ladder
    double max_interp_residual = 0.0;     // table vs direct re-evaluation at probe points
    int nonmonotone_margins = 0;
};

struct SolveResult {
    KernelPtr kernel;
    SolveConfig config;
    StateGrid grid;
    std::vector<PeriodTable> tables;  // index t-1
    std::vector<ThresholdCurve> thresholds;
    Diagnostics diagnostics;

    // Evaluation surface: continuation values indexed by (theta, psi) with
    // an exact node at psi = 0. Interpolating along psi keeps the value
    // function's kink grid-aligned (bilinear tables in (theta, L) carry a
    // first-order bias for processes whose paths ride the kink, like the
    // shrinking uniform at theta1 = 1/2). The (theta, L) tables above stay
    // the exported artifact; this surface is what evaluation reads.
    std::vector<double> margin_nodes;
    std::vector<std::vector<double>> cont_surface;  // [t-1], row-major (theta x margin)

    int horizon() const { return config.horizon; }
};

struct Decision {
    bool sell = false;
    double psi = 0.0;
    double cont = 0.0;    // M; 0 in the last period and in repeated mode
    double margin = 0.0;
};

// Backward induction over the (theta, L) grid following the stopping rule:
// never sell at psi <= 0; otherwise sell iff psi exceeds the continuation
// M = delta * E[V_{t+1}], with indifference resolved to waiting.
SolveResult solve(const KernelPtr& kernel, const SolveConfig& config);

// Relaxed benchmark: sell whenever psi > 0, every period independently.
SolveResult solve_repeated_sales(const KernelPtr& kernel, SolveConfig config);

// Policy-consistent evaluation at an arbitrary state. The continuation is
// recomputed by quadrature against the stored next-period table (analytic
// in the last step), so path states need not sit on the grid.
Decision decide(const SolveResult& r, int t, double theta, double distortion);

// M = delta * E[V_{t+1} | theta_t, L_t]; zero at t == horizon.
double continuation_value(const SolveResult& r, int t, double theta, double distortion);

// Threshold curves recovered by root-finding on the exact decision margin
// between bracketing grid nodes.
std::vector<ThresholdCurve> extract_thresholds(const SolveResult& r);

// Fixed-time cross-check: max over s > t of delta^{s-t} E[psi_s | state].
// Valid as the continuation only under its premise (psi > 0 on every
// future path), which is sampled and reported; the solver itself always
// uses the full backward recursion.
struct MPrimeResult {
    double value = 0.0;
    int argmax_s = 0;
    bool premise_ok = true;
    double min_sampled_psi = 0.0;
};

// E[psi_s | theta_t = theta, L_t = distortion] by nested quadrature with the
// distortion propagated multiplicatively along the integration paths.
double expected_virtual_value(const Kernel& k, int s_target, int t, double theta,
                              double distortion, int n_quad = 32);

MPrimeResult m_prime(const Kernel& k, double discount, int horizon, int t, double theta,
                     double distortion, int n_quad = 32, int premise_samples = 200,
                     uint64_t seed = 8901);

} // namespace selltime
