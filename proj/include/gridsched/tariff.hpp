#pragma once

// Day-ahead base-price construction and the reward/penalty incentive engine,
// in both its network-wide (global) and per-customer (individualized) forms.
//
// Sign convention, used everywhere: the branch magnitude comes from the
// exponential formula evaluated at |r|, and the sign is tied to the load gap
// so that the consumption price falls when the network wants more load
// (delta > 0, reward) and rises when it wants less (delta < 0, penalty).
// The feed-in rate is only ever adjusted upward.

#include "gridsched/model.hpp"

namespace gridsched::tariff {

class LengthMismatch : public std::runtime_error {
public:
    LengthMismatch() : std::runtime_error("series length mismatch") {}
};

// Prices faced by customers. `adjust`/`fit_adjust` have one row in global
// mode and one row per home in individualized mode; fit_adjust >= 0 always.
struct PriceSchedule {
    Series base;       // pi_t, cents/kWh
    Series fit;        // FiT_t
    Matrix adjust;     // eps, rows x T (rows = 1 or H)
    Matrix fit_adjust; // >= 0 elementwise

    int rows() const { return static_cast<int>(adjust.rows()); }
    double buy(int home, int t) const {
        return base[t] + adjust(rows() == 1 ? 0 : home, t);
    }
    double sell(int home, int t) const {
        return fit[t] + fit_adjust(rows() == 1 ? 0 : home, t);
    }
    static PriceSchedule flat(const Series& base, const Series& fit) {
        const auto T = base.size();
        return PriceSchedule{base, fit, Matrix::Zero(1, T), Matrix::Zero(1, T)};
    }
};

// Marginal day-ahead price: phi * dF/dg with the quadratic cost model.
double day_ahead_price(double demand_kwh, const TariffParams& tariff);

// g_t = sum of average home net demands + forecast losses - DNO generation,
// clamped at zero (a warning is emitted on clamping).
Series forecast_demand(const Matrix& home_avg_demand_kw, const Series& losses_kw,
                       const Series& dg_kw, double slot_hours);

// Reward/penalty coefficient from the network-level gap. `for_fit` selects
// the feed-in variant whose penalty branch is identically zero.
// `baseline_floor` bounds the denominator of the relative deviation away
// from zero: with rooftop PV the baseline load crosses zero around noon and
// the raw ratio (and with it the exponential coefficient) would blow up on a
// vanishing denominator.
double reward_coeff_global(double desired, double uncoordinated, double w,
                           bool for_fit, double baseline_floor = 0.0);

// Individualized variant: the ratio is the customer's own deviation, the
// branch (and sign) still keys on the network-level gap delta_network.
double reward_coeff_individual(double suggested, double original,
                               double delta_network, double w, bool for_fit,
                               double baseline_floor = 0.0);

// eps = sigma * |dF_RT/d(delta L)|, signed so the adjusted consumption price
// falls when delta_L > 0 and rises when delta_L < 0.
double price_gap(double sigma, double delta_L, double rt_buy, double rt_sell);

} // namespace gridsched::tariff
