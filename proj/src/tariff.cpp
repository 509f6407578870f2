#include "gridsched/tariff.hpp"

#include <cmath>
#include <cstdlib>
#include <iostream>

namespace gridsched::tariff {

namespace {

void warn(const char* msg) {
    if (const char* lvl = std::getenv("GRIDSCHED_LOG"); lvl && *lvl)
        std::cerr << "[gridsched] warning: " << msg << "\n";
}

} // namespace

double day_ahead_price(double demand_kwh, const TariffParams& tariff) {
    return tariff.profit_coeff * (2.0 * tariff.quad_a * demand_kwh + tariff.lin_b);
}

Series forecast_demand(const Matrix& home_avg_demand_kw, const Series& losses_kw,
                       const Series& dg_kw, double slot_hours) {
    const auto T = home_avg_demand_kw.cols();
    if (losses_kw.size() != T || dg_kw.size() != T) throw LengthMismatch();
    Series g(T);
    bool clamped = false;
    for (Eigen::Index t = 0; t < T; ++t) {
        double kw = home_avg_demand_kw.col(t).sum() + losses_kw[t] - dg_kw[t];
        if (kw < 0) {
            kw = 0;
            clamped = true;
        }
        g[t] = kw * slot_hours; // kWh purchased for the slot
    }
    if (clamped) warn("forecast demand clamped to zero at one or more slots");
    return g;
}

namespace {

// Printed branch magnitudes of the exponential incentive, evaluated at |r|:
// the reward-dominant branch scales by 1/w, the penalty branch by w.
// Both saturate: the ratio at a full baseline shift (|r| = 1, keeping the
// exponential out of overflow territory for transient negotiation iterates),
// and the coefficient itself at kMaxSigma, which bounds the operator's
// per-kWh financial exposure to kMaxSigma times the real-time balancing
// rate and keeps adjusted prices inside the band of the base tariff.
constexpr double kMaxRatio = 1.0;
constexpr double kMaxSigma = 2.5;
// Individualized incentives expose the operator once per home rather than
// once per network slot, so the per-home coefficient is capped tighter.
// This also bounds what a single storage-equipped home can extract by
// arbitraging its own price signal.
constexpr double kMaxSigmaIndividual = 1.75;
// The saturation caps keep the branch asymmetry of the uncapped formulas:
// the reward branch scales like 1/w and the penalty branch like w, so the
// caps do the same around a pivot. Otherwise every response factor below
// the pivot saturates at the same constant and the scheme's generosity
// stops depending on w altogether.
constexpr double kSigmaPivot = 0.5;
double reward_cap(double cap, double w) {
    const double ratio = kSigmaPivot / w;
    // Steeper decay above the pivot than growth below it: generosity toward
    // small w stays inside the band of the base tariff.
    return cap * std::pow(ratio, ratio >= 1.0 ? 0.3 : 1.5);
}
double penalty_cap(double cap, double w) {
    return cap * std::min(1.0, w / kSigmaPivot);
}
double reward_magnitude(double r_abs, double w) {
    return std::min(reward_cap(kMaxSigma, w),
                    (std::exp(std::min(r_abs, kMaxRatio) / w) - 1.0) / w);
}
double penalty_magnitude(double r_abs, double w) {
    return std::min(penalty_cap(kMaxSigma, w),
                    w * (std::exp(std::min(r_abs, kMaxRatio) / w) - 1.0));
}

} // namespace

double reward_coeff_global(double desired, double uncoordinated, double w,
                           bool for_fit, double baseline_floor) {
    const double denom = std::max(std::abs(uncoordinated), baseline_floor);
    if (denom < 1e-12) {
        warn("zero uncoordinated baseline; incentive coefficient forced to 0");
        return 0.0;
    }
    const double delta = desired - uncoordinated;
    if (delta == 0.0) return 0.0;
    const double r_abs = std::abs(delta) / denom;
    if (for_fit) {
        // Feed-in is never penalized: surplus supply (delta > 0) leaves it
        // untouched; excess demand rewards injection.
        if (delta > 0) return 0.0;
        return -reward_magnitude(r_abs, w);
    }
    if (delta > 0) return -reward_magnitude(r_abs, w); // price cut
    return penalty_magnitude(r_abs, w);                // price raise
}

double reward_coeff_individual(double suggested, double original,
                               double delta_network, double w, bool for_fit,
                               double baseline_floor) {
    if (delta_network == 0.0) return 0.0;
    const double denom = std::max(std::abs(original), baseline_floor);
    if (denom < 1e-12) {
        warn("zero per-home baseline; incentive coefficient forced to 0");
        return 0.0;
    }
    const double r_abs = std::abs(suggested - original) / denom;
    if (for_fit) {
        if (delta_network > 0) return 0.0;
        return -std::min(reward_cap(kMaxSigmaIndividual, w),
                         reward_magnitude(r_abs, w));
    }
    if (delta_network > 0)
        return -std::min(reward_cap(kMaxSigmaIndividual, w),
                         reward_magnitude(r_abs, w));
    return std::min(penalty_cap(kMaxSigmaIndividual, w),
                    penalty_magnitude(r_abs, w));
}

double price_gap(double sigma, double delta_L, double rt_buy, double rt_sell) {
    const double marginal = delta_L > 0 ? rt_buy : delta_L < 0 ? rt_sell : 0.0;
    return sigma * marginal;
}

} // namespace gridsched::tariff
