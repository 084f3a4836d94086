#include "selltime/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace selltime {

namespace {

std::string point_str(int t, double theta, double prev) {
    std::ostringstream os;
    os << "t=" << t << ", theta=" << theta << ", prev=" << prev;
    return os.str();
}

} // namespace

SingularDensityError::SingularDensityError(int t, double th, double pv)
    : std::runtime_error("impulse response undefined at zero density (" + point_str(t, th, pv) + ")"),
      period(t), theta(th), prev(pv) {}

Kernel::Kernel(std::string name, Interval support, double hazard_scale)
    : name_(std::move(name)), support_(support), hazard_scale_(hazard_scale) {
    if (!(support.lo >= 0.0 && support.lo < support.hi))
        throw std::invalid_argument("kernel support: need 0 <= lo < hi");
    if (!(hazard_scale > 0.0))
        throw std::invalid_argument("hazard_scale: must be > 0");
}

void Kernel::require_in_support(double theta, const char* what) const {
    if (!(theta >= support_.lo && theta <= support_.hi)) {
        std::ostringstream os;
        os << what << ": theta=" << theta << " outside support [" << support_.lo << ", "
           << support_.hi << "]";
        throw std::domain_error(os.str());
    }
}

double Kernel::initial_cdf(double theta) const {
    require_in_support(theta, "initial_cdf");
    const double u = (theta - support_.lo) / support_.width();
    if (hazard_scale_ == 1.0) return u;
    return 1.0 - std::pow(1.0 - u, hazard_scale_);
}

double Kernel::initial_pdf(double theta) const {
    require_in_support(theta, "initial_pdf");
    const double u = (theta - support_.lo) / support_.width();
    if (hazard_scale_ == 1.0) return 1.0 / support_.width();
    return hazard_scale_ * std::pow(1.0 - u, hazard_scale_ - 1.0) / support_.width();
}

double Kernel::sample_initial(double u) const {
    const double uq = 1.0 - std::pow(1.0 - u, 1.0 / hazard_scale_);
    return support_.lo + support_.width() * uq;
}

double Kernel::hazard(double theta) const {
    const double s = 1.0 - initial_cdf(theta);
    if (s <= 0.0) return std::numeric_limits<double>::infinity();
    return initial_pdf(theta) / s;
}

double Kernel::initial_distortion(double theta) const {
    require_in_support(theta, "initial_distortion");
    const double u = (theta - support_.lo) / support_.width();
    return support_.width() * (1.0 - u) / hazard_scale_;
}

double Kernel::transition_cdf(int t, double theta, double prev, double action) const {
    require_in_support(prev, "transition_cdf(prev)");
    const Interval cs = conditional_support(t, prev);
    if (theta <= cs.lo) return 0.0;
    if (theta >= cs.hi) return 1.0;
    return t_cdf(t, theta, prev, action);
}

double Kernel::transition_pdf(int t, double theta, double prev, double action) const {
    require_in_support(prev, "transition_pdf(prev)");
    const Interval cs = conditional_support(t, prev);
    if (theta < cs.lo || theta > cs.hi) {
        std::ostringstream os;
        os << "transition_pdf: theta=" << theta << " outside conditional support [" << cs.lo
           << ", " << cs.hi << "] of prev=" << prev;
        throw std::domain_error(os.str());
    }
    return t_pdf(t, theta, prev, action);
}

double Kernel::transition_dcdf_dprev(int t, double theta, double prev, double action) const {
    require_in_support(prev, "transition_dcdf_dprev(prev)");
    const Interval cs = conditional_support(t, prev);
    if (theta <= cs.lo || theta >= cs.hi) return 0.0;  // CDF is constant on the clamped region
    return t_dcdf_dprev(t, theta, prev, action);
}

Interval Kernel::conditional_support(int, double) const {
    return {support_.lo, support_.hi};
}

double Kernel::impulse_response(int t, double theta, double prev, double action) const {
    const double f = t_pdf(t, theta, prev, action);
    if (!(f > 0.0)) throw SingularDensityError(t, theta, prev);
    return -t_dcdf_dprev(t, theta, prev, action) / f;
}

double Kernel::sample_transition(int t, double u, double prev) const {
    // Generic inverse CDF by bisection; built-ins override with closed forms.
    const Interval cs = conditional_support(t, prev);
    double lo = cs.lo, hi = cs.hi;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (transition_cdf(t, mid, prev) < u)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// --------------------------------------------------------------------------

namespace {

class ShrinkingUniformKernel final : public Kernel {
public:
    explicit ShrinkingUniformKernel(double lambda)
        : Kernel("shrinking_uniform", {0.0, 1.0}, lambda) {}

    Interval conditional_support(int, double prev) const override { return {0.0, prev}; }

    double impulse_response(int t, double theta, double prev, double) const override {
        if (!(prev > 0.0)) throw SingularDensityError(t, theta, prev);
        return theta / prev;
    }

    double sample_transition(int, double u, double prev) const override { return u * prev; }

protected:
    double t_cdf(int, double theta, double prev, double) const override { return theta / prev; }
    double t_pdf(int t, double theta, double prev, double) const override {
        if (!(prev > 0.0)) throw SingularDensityError(t, theta, prev);
        return 1.0 / prev;
    }
    double t_dcdf_dprev(int, double theta, double prev, double) const override {
        return -theta / (prev * prev);
    }
};

class PowerKernel final : public Kernel {
public:
    explicit PowerKernel(double lambda) : Kernel("power", {0.0, 1.0}, lambda) {}

    double impulse_response(int t, double theta, double prev, double) const override {
        if (!(prev > 0.0)) throw SingularDensityError(t, theta, prev);
        if (theta <= 0.0) return 0.0;  // theta*log(theta) -> 0
        return -theta * std::log(theta) / prev;
    }

    double sample_transition(int, double u, double prev) const override {
        if (!(prev > 0.0)) return 0.0;
        return std::pow(u, 1.0 / prev);
    }

protected:
    double t_cdf(int, double theta, double prev, double) const override {
        return std::pow(theta, prev);
    }
    double t_pdf(int, double theta, double prev, double) const override {
        return prev * std::pow(theta, prev - 1.0);
    }
    double t_dcdf_dprev(int, double theta, double prev, double) const override {
        if (theta <= 0.0) return 0.0;
        return std::pow(theta, prev) * std::log(theta);
    }
};

class QuadraticTiltKernel final : public Kernel {
public:
    explicit QuadraticTiltKernel(double lambda) : Kernel("quadratic_tilt", {0.0, 1.0}, lambda) {}

    double impulse_response(int t, double theta, double prev, double) const override {
        const double den = 1.0 - prev - theta + 2.0 * prev * theta;
        if (!(den > 0.0)) throw SingularDensityError(t, theta, prev);
        return theta * (1.0 - theta) / den;
    }

    double sample_transition(int, double u, double prev) const override {
        const double a = 2.0 * prev - 1.0;  // F = a*th^2 + (1-a)*th
        if (std::abs(a) < 1e-12) return u;
        const double b = 1.0 - a;
        const double th = (-b + std::sqrt(b * b + 4.0 * a * u)) / (2.0 * a);
        return std::clamp(th, 0.0, 1.0);
    }

protected:
    double t_cdf(int, double theta, double prev, double) const override {
        return theta - (2.0 * prev - 1.0) * theta * (1.0 - theta);
    }
    double t_pdf(int, double theta, double prev, double) const override {
        return 2.0 * (1.0 - prev - theta + 2.0 * prev * theta);
    }
    double t_dcdf_dprev(int, double theta, double prev, double) const override {
        (void)prev;
        return -2.0 * theta * (1.0 - theta);
    }
};

class IndependentKernel final : public Kernel {
public:
    IndependentKernel(std::vector<Interval> bounds, double lambda)
        : Kernel("independent", envelope(bounds), lambda), bounds_(std::move(bounds)) {}

    double initial_cdf(double theta) const override {
        const Interval b = marginal(1);
        const double u = std::clamp((theta - b.lo) / b.width(), 0.0, 1.0);
        require_in_support(theta, "initial_cdf");
        if (hazard_scale() == 1.0) return u;
        return 1.0 - std::pow(1.0 - u, hazard_scale());
    }

    double initial_pdf(double theta) const override {
        const Interval b = marginal(1);
        if (theta < b.lo || theta > b.hi) {
            require_in_support(theta, "initial_pdf");
            return 0.0;
        }
        const double u = (theta - b.lo) / b.width();
        if (hazard_scale() == 1.0) return 1.0 / b.width();
        return hazard_scale() * std::pow(1.0 - u, hazard_scale() - 1.0) / b.width();
    }

    double sample_initial(double u) const override {
        const Interval b = marginal(1);
        const double uq = 1.0 - std::pow(1.0 - u, 1.0 / hazard_scale());
        return b.lo + b.width() * uq;
    }

    double initial_distortion(double theta) const override {
        const Interval b = marginal(1);
        const double u = std::clamp((theta - b.lo) / b.width(), 0.0, 1.0);
        return b.width() * (1.0 - u) / hazard_scale();
    }

    Interval conditional_support(int t, double) const override { return marginal(t); }

    double impulse_response(int, double, double, double) const override { return 0.0; }

    double sample_transition(int t, double u, double) const override {
        const Interval b = marginal(t);
        return b.lo + b.width() * u;
    }

    Interval marginal(int t) const {
        const size_t i = std::min<size_t>(static_cast<size_t>(std::max(t, 1)) - 1, bounds_.size() - 1);
        return bounds_[i];
    }

protected:
    double t_cdf(int t, double theta, double, double) const override {
        const Interval b = marginal(t);
        return (theta - b.lo) / b.width();
    }
    double t_pdf(int t, double, double, double) const override { return 1.0 / marginal(t).width(); }
    double t_dcdf_dprev(int, double, double, double) const override { return 0.0; }

private:
    static Interval envelope(const std::vector<Interval>& bs) {
        if (bs.empty()) throw std::invalid_argument("independent: need at least one marginal");
        Interval e = bs[0];
        for (const auto& b : bs) {
            if (!(b.lo >= 0.0 && b.lo < b.hi))
                throw std::invalid_argument("independent: marginal bounds need 0 <= lo < hi");
            e.lo = std::min(e.lo, b.lo);
            e.hi = std::max(e.hi, b.hi);
        }
        return e;
    }

    std::vector<Interval> bounds_;
};

class Ar1Kernel final : public Kernel {
public:
    Ar1Kernel(double gamma, Interval support, double lambda, InnovationLaw innovation)
        : Kernel("ar1", support, lambda), gamma_(gamma), law_(std::move(innovation)) {
        if (!(gamma >= 0.0 && gamma < 1.0))
            throw std::invalid_argument("gamma: must lie in [0,1)");
        if (!law_.cdf) {  // uniform default
            law_.cdf = [](double u) { return u; };
            law_.pdf = [](double) { return 1.0; };
            law_.quantile = [](double q) { return q; };
        }
        if (!(law_.cdf && law_.pdf && law_.quantile))
            throw std::invalid_argument("innovation: need cdf, pdf, and quantile together");
    }

    Interval conditional_support(int, double prev) const override {
        return {gamma_ * prev + (1.0 - gamma_) * support_lo(),
                gamma_ * prev + (1.0 - gamma_) * support_hi()};
    }

    // -(dF/dprev)/f = gamma regardless of the innovation law.
    double impulse_response(int, double, double, double) const override { return gamma_; }

    double sample_transition(int, double u, double prev) const override {
        const double eps = support_lo() + law_.quantile(u) * (support_hi() - support_lo());
        return gamma_ * prev + (1.0 - gamma_) * eps;
    }

    double gamma() const { return gamma_; }

protected:
    // z is the innovation rescaled to [0,1].
    double z_of(double theta, double prev) const {
        const double eps = (theta - gamma_ * prev) / (1.0 - gamma_);
        return (eps - support_lo()) / (support_hi() - support_lo());
    }
    double t_cdf(int, double theta, double prev, double) const override {
        return law_.cdf(z_of(theta, prev));
    }
    double t_pdf(int, double theta, double prev, double) const override {
        return law_.pdf(z_of(theta, prev)) /
               ((1.0 - gamma_) * (support_hi() - support_lo()));
    }
    double t_dcdf_dprev(int, double theta, double prev, double) const override {
        return -gamma_ * law_.pdf(z_of(theta, prev)) /
               ((1.0 - gamma_) * (support_hi() - support_lo()));
    }

private:
    double gamma_;
    InnovationLaw law_;
};

double get_param(const std::map<std::string, double>& params, const std::string& key,
                 double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

} // namespace

KernelPtr make_shrinking_uniform(double hazard_scale) {
    return std::make_shared<ShrinkingUniformKernel>(hazard_scale);
}

KernelPtr make_power(double hazard_scale) {
    return std::make_shared<PowerKernel>(hazard_scale);
}

KernelPtr make_quadratic_tilt(double hazard_scale) {
    return std::make_shared<QuadraticTiltKernel>(hazard_scale);
}

KernelPtr make_independent(std::vector<Interval> bounds, double hazard_scale) {
    return std::make_shared<IndependentKernel>(std::move(bounds), hazard_scale);
}

KernelPtr make_ar1(double gamma, Interval support, double hazard_scale,
                   InnovationLaw innovation) {
    return std::make_shared<Ar1Kernel>(gamma, support, hazard_scale, std::move(innovation));
}

const std::vector<KernelInfo>& kernel_catalog() {
    static const std::vector<KernelInfo> catalog = {
        {"shrinking_uniform",
         "uniform re-draw on [0, theta_prev]; conditional support shrinks along the path",
         {{"hazard_scale", 1.0, "proportional-hazards tilt of the initial distribution"}}},
        {"power",
         "F(theta|prev) = theta^prev on [0,1]; persistence through the exponent",
         {{"hazard_scale", 1.0, "proportional-hazards tilt of the initial distribution"}}},
        {"quadratic_tilt",
         "uniform tilted by (2*prev-1)*theta*(1-theta) on [0,1]",
         {{"hazard_scale", 1.0, "proportional-hazards tilt of the initial distribution"}}},
        {"independent",
         "independent uniform draws each period on [theta_lo, theta_hi]",
         {{"theta_lo", 0.0, "lower bound of every marginal"},
          {"theta_hi", 1.0, "upper bound of every marginal"},
          {"hazard_scale", 1.0, "proportional-hazards tilt of the initial distribution"}}},
        {"ar1",
         "theta_t = gamma*theta_prev + (1-gamma)*eps, eps uniform on [theta_lo, theta_hi]",
         {{"gamma", 0.5, "persistence in [0,1)"},
          {"theta_lo", 0.0, "lower bound of the support"},
          {"theta_hi", 1.0, "upper bound of the support"},
          {"hazard_scale", 1.0, "proportional-hazards tilt of the initial distribution"}}},
    };
    return catalog;
}

KernelPtr make_kernel(const std::string& name, const std::map<std::string, double>& params) {
    const double lambda = get_param(params, "hazard_scale", 1.0);
    if (!(lambda > 0.0)) throw std::invalid_argument("hazard_scale: must be > 0");
    if (name == "shrinking_uniform") return make_shrinking_uniform(lambda);
    if (name == "power") return make_power(lambda);
    if (name == "quadratic_tilt") return make_quadratic_tilt(lambda);
    if (name == "independent") {
        const Interval b{get_param(params, "theta_lo", 0.0), get_param(params, "theta_hi", 1.0)};
        return make_independent({b}, lambda);
    }
    if (name == "ar1") {
        const Interval b{get_param(params, "theta_lo", 0.0), get_param(params, "theta_hi", 1.0)};
        return make_ar1(get_param(params, "gamma", 0.5), b, lambda);
    }
    throw std::invalid_argument("kernel: unknown name '" + name + "'");
}

FosdReport fosd_check(const Kernel& k, int n_prev, int n_theta, int t_max, double tol) {
    FosdReport rep;
    rep.tol = tol;
    rep.max_dcdf = -std::numeric_limits<double>::infinity();
    const double lo = k.support_lo(), hi = k.support_hi();
    for (int t = 2; t <= std::max(2, t_max); ++t) {
        for (int i = 0; i < n_prev; ++i) {
            const double prev = lo + (hi - lo) * (i + 0.5) / n_prev;
            const Interval cs = k.conditional_support(t, prev);
            for (int j = 0; j < n_theta; ++j) {
                const double th = cs.lo + cs.width() * (j + 0.5) / n_theta;
                const double d = k.transition_dcdf_dprev(t, th, prev);
                if (d > rep.max_dcdf) {
                    rep.max_dcdf = d;
                    rep.arg_prev = prev;
                    rep.arg_theta = th;
                    rep.arg_t = t;
                }
            }
        }
    }
    rep.pass = rep.max_dcdf <= tol;
    return rep;
}

} // namespace selltime
