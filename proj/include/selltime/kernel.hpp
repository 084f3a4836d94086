#pragma once

#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace selltime {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    double width() const { return hi - lo; }
};

// Thrown when an impulse-response evaluation divides by a vanishing
// transition density; carries the offending point.
class SingularDensityError : public std::runtime_error {
public:
    SingularDensityError(int t, double theta, double prev);
    int period;
    double theta;
    double prev;
};

/**
 * A Markov valuation process on [support_lo, support_hi]:
 * an initial distribution F1 plus per-period conditional transitions
 * F_t(theta_t | theta_{t-1}) with analytic density and dF_t/dtheta_{t-1}.
 *
 * The transition signatures carry an `action` argument for custom kernels
 * whose law reacts to the allocation; every built-in ignores it.
 *
 * Kernels are immutable after construction; all evaluations are pure and
 * safe to call concurrently.
 */
class Kernel {
public:
    Kernel(std::string name, Interval support, double hazard_scale = 1.0);
    virtual ~Kernel() = default;

    const std::string& name() const { return name_; }
    double support_lo() const { return support_.lo; }
    double support_hi() const { return support_.hi; }
    double hazard_scale() const { return hazard_scale_; }

    // --- initial distribution -------------------------------------------
    // Default: uniform on the support, tilted by the proportional-hazards
    // parameter lambda: F1 = 1 - (1-u)^lambda with u the uniform CDF.
    // lambda = 1 reproduces the plain uniform.
    virtual double initial_cdf(double theta) const;
    virtual double initial_pdf(double theta) const;
    virtual double sample_initial(double u) const;

    // f1/(1-F1); returns +inf at the upper support end.
    double hazard(double theta) const;
    // (1-F1)/f1 — the period-1 information-rent distortion. The base class
    // uses the closed form width*(1-u)/lambda of the tilted uniform, which
    // stays finite at the upper end for lambda > 1.
    virtual double initial_distortion(double theta) const;

    // --- conditional transitions (t >= 2) -------------------------------
    // CDF clamps to {0,1} outside the conditional support; the density is a
    // domain error there; dF/dprev is 0 on the clamped region.
    double transition_cdf(int t, double theta, double prev, double action = 0.0) const;
    double transition_pdf(int t, double theta, double prev, double action = 0.0) const;
    double transition_dcdf_dprev(int t, double theta, double prev, double action = 0.0) const;

    virtual Interval conditional_support(int t, double prev) const;

    // r_t = -(dF_t/dprev)/f_t. Built-ins override with closed forms whose
    // natural domain extends past the conditional support; the incentive
    // checks rely on that extension when probing off-path reports.
    virtual double impulse_response(int t, double theta, double prev, double action = 0.0) const;

    // Inverse-CDF draw of theta_t given theta_{t-1}.
    virtual double sample_transition(int t, double u, double prev) const;

protected:
    // Unchecked analytic pieces, evaluated inside the conditional support.
    virtual double t_cdf(int t, double theta, double prev, double action) const = 0;
    virtual double t_pdf(int t, double theta, double prev, double action) const = 0;
    virtual double t_dcdf_dprev(int t, double theta, double prev, double action) const = 0;

    void require_in_support(double theta, const char* what) const;

private:
    std::string name_;
    Interval support_;
    double hazard_scale_;
};

using KernelPtr = std::shared_ptr<const Kernel>;

// --- built-in processes --------------------------------------------------

// F_t(theta|prev) = theta/prev on [0, prev]; F1 uniform on [0,1].
KernelPtr make_shrinking_uniform(double hazard_scale = 1.0);

// F_t(theta|prev) = theta^prev on [0,1]; F1 uniform on [0,1].
KernelPtr make_power(double hazard_scale = 1.0);

// F_t(theta|prev) = theta - (2*prev-1)*theta*(1-theta) on [0,1]; F1 uniform.
KernelPtr make_quadratic_tilt(double hazard_scale = 1.0);

// Independent draws with per-period uniform marginals. bounds[0] is the
// period-1 marginal; later periods use successive entries, repeating the
// last one past the end of the list.
KernelPtr make_independent(std::vector<Interval> bounds = {{0.0, 1.0}}, double hazard_scale = 1.0);

// Innovation law on [0,1] (rescaled to the support internally): CDF,
// density, and quantile. Default: uniform.
struct InnovationLaw {
    std::function<double(double)> cdf;
    std::function<double(double)> pdf;
    std::function<double(double)> quantile;
};

// theta_t = gamma*theta_{t-1} + (1-gamma)*eps_t with eps_t iid on the
// support; gamma in [0,1). Because the innovations live on the support
// itself, the conditional support stays inside it and no truncation is
// needed. The impulse response is gamma for any innovation law.
KernelPtr make_ar1(double gamma, Interval support = {0.0, 1.0}, double hazard_scale = 1.0,
                   InnovationLaw innovation = {});

// --- registry / FOSD ------------------------------------------------------

struct KernelParamDoc {
    std::string name;
    double default_value;
    std::string doc;
};

struct KernelInfo {
    std::string name;
    std::string description;
    std::vector<KernelParamDoc> params;
};

const std::vector<KernelInfo>& kernel_catalog();

// Construct a built-in by name. Unknown names or out-of-range parameters
// throw std::invalid_argument naming the offending field.
KernelPtr make_kernel(const std::string& name, const std::map<std::string, double>& params);

struct FosdReport {
    bool pass = true;
    double max_dcdf = 0.0;    // sup of dF/dprev over the probe grid
    double arg_prev = 0.0;
    double arg_theta = 0.0;
    int arg_t = 2;
    double tol = 1e-12;
};

// Grid check of first-order stochastic dominance: dF_t/dprev <= tol on an
// n_prev x n_theta grid of interior points for t = 2..t_max.
FosdReport fosd_check(const Kernel& k, int n_prev = 50, int n_theta = 50, int t_max = 3,
                      double tol = 1e-12);

} // namespace selltime
