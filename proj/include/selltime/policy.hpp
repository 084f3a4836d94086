#pragma once

#include "selltime/solver.hpp"

namespace selltime {

/**
 * The allocation rule the incentive checks probe: whether the mechanism
 * sells in period t given the current report and the distortion state the
 * mechanism has accumulated from past reports. Availability (whether the
 * object is still unsold in one-object mode) is tracked by the callers,
 * which replay the mechanism along report paths.
 */
class Policy {
public:
    virtual ~Policy() = default;
    virtual int horizon() const = 0;
    virtual double discount() const = 0;
    virtual SaleMode mode() const = 0;
    virtual const Kernel& kernel() const = 0;
    virtual bool sell(int t, double theta_report, double distortion_hat) const = 0;
};

// Adapter over a finished solve.
class SolvedPolicy final : public Policy {
public:
    explicit SolvedPolicy(const SolveResult& r) : r_(&r) {}

    int horizon() const override { return r_->config.horizon; }
    double discount() const override { return r_->config.discount; }
    SaleMode mode() const override { return r_->config.mode; }
    const Kernel& kernel() const override { return *r_->kernel; }
    bool sell(int t, double theta_report, double distortion_hat) const override {
        return decide(*r_, t, theta_report, distortion_hat).sell;
    }

    const SolveResult& result() const { return *r_; }

private:
    const SolveResult* r_;
};

// Transfers: the buyer pays price(psi_hat) at the sale period and nothing
// otherwise. scale=1, offset=0 charges the virtual valuation itself, which
// implements the envelope payment rule; anything else breaks it (useful as
// a negative control for the best-response oracle).
struct TransferRule {
    double scale = 1.0;
    double offset = 0.0;
    double price(double psi_hat) const { return scale * psi_hat + offset; }
};

// Mechanism-side distortion implied by a report following (theta_hat_prev,
// distortion_prev); at t = 1 it is the initial distortion of the report.
inline double report_distortion(const Kernel& k, int t, double theta_report,
                                double theta_hat_prev, double distortion_prev) {
    if (t == 1) return k.initial_distortion(theta_report);
    if (distortion_prev == 0.0) return 0.0;
    return distortion_prev * k.impulse_response(t, theta_report, theta_hat_prev);
}

} // namespace selltime
