#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gridsched/tariff.hpp"

#include <cmath>

using namespace gridsched;
using namespace gridsched::tariff;

namespace {

TariffParams appendix_tariff(int T) {
    TariffParams t;
    t.quad_a = 0.2;
    t.lin_b = 2.0;
    t.const_c = 0.0;
    t.profit_coeff = 4.8;
    t.fit_rate = Series::Constant(T, 6.0);
    t.rt_buy = Series::Constant(T, 2.0);
    t.rt_sell = Series::Constant(T, 2.0);
    t.dg_power = Series::Zero(T);
    return t;
}

} // namespace

TEST_CASE("day-ahead price is the scaled marginal of the quadratic cost") {
    const auto t = appendix_tariff(24);
    CHECK(day_ahead_price(0.0, t) == doctest::Approx(9.6));
    CHECK(day_ahead_price(10.0, t) == doctest::Approx(28.8));
    // Linearity in the quadratic coefficient.
    auto t2 = t;
    t2.quad_a *= 2.0;
    CHECK(day_ahead_price(7.0, t2) - day_ahead_price(7.0, t) ==
          doctest::Approx(4.8 * 2.0 * 0.2 * 7.0));
}

TEST_CASE("forecast demand sums homes, losses and DG with a zero floor") {
    Matrix homes(2, 4);
    homes << 1.0, 2.0, 3.0, 0.5,
             0.5, 0.5, 0.5, 0.5;
    const Series losses = Series::Constant(4, 0.1);
    Series dg = Series::Zero(4);

    const Series g = forecast_demand(homes, losses, dg, 1.0);
    CHECK(g[0] == doctest::Approx(1.6));
    CHECK(g[2] == doctest::Approx(3.6));

    // Single home, no losses, no DG: pass-through.
    const Series g1 = forecast_demand(homes.topRows(1), Series::Zero(4), dg, 1.0);
    for (int t = 0; t < 4; ++t) CHECK(g1[t] == doctest::Approx(homes(0, t)));

    // DG covering everything clamps to zero.
    dg = Series::Constant(4, 100.0);
    const Series g0 = forecast_demand(homes, losses, dg, 1.0);
    CHECK((g0 >= 0.0).all());
    CHECK(g0.sum() == doctest::Approx(0.0));

    // Half-hour slots scale the energy.
    const Series gh = forecast_demand(homes.topRows(1), Series::Zero(4),
                                      Series::Zero(4), 0.5);
    CHECK(gh[2] == doctest::Approx(1.5));

    CHECK_THROWS_AS(forecast_demand(homes, Series::Zero(3), Series::Zero(4), 1.0),
                    LengthMismatch);
}

TEST_CASE("global coefficient: hand-evaluated penalty branch") {
    // desired 0.9, uncoordinated 1.0: r = -0.1, delta < 0 -> penalty branch,
    // positive sign (price raise).
    const double sigma = reward_coeff_global(0.9, 1.0, 0.5, false);
    CHECK(sigma == doctest::Approx(0.5 * (std::exp(0.2) - 1.0)));
    CHECK(sigma == doctest::Approx(0.1107).epsilon(1e-3));
    CHECK(sigma > 0.0);

    // Mirror-image reward: delta > 0 -> negative sign, generous branch.
    const double rew = reward_coeff_global(1.1, 1.0, 0.5, false);
    CHECK(rew == doctest::Approx(-(1.0 / 0.5) * (std::exp(0.2) - 1.0)));
    CHECK(rew < 0.0);

    // No gap, no coefficient; zero baseline falls back to zero.
    CHECK(reward_coeff_global(1.0, 1.0, 0.5, false) == 0.0);
    CHECK(reward_coeff_global(1.0, 0.0, 0.5, false) == 0.0);
}

TEST_CASE("feed-in coefficient: zero branch up, incentive branch down") {
    // delta > 0: the feed-in penalty is identically zero.
    CHECK(reward_coeff_global(1.2, 1.0, 0.5, true) == 0.0);
    // delta < 0: negative coefficient so the adjustment raises the rate.
    const double s = reward_coeff_global(0.8, 1.0, 0.5, true);
    CHECK(s < 0.0);
    CHECK(std::abs(s) == doctest::Approx((1.0 / 0.5) * (std::exp(0.4) - 1.0)));
}

TEST_CASE("individualized coefficient keys the branch on the network gap") {
    // Customer ratio r = -0.2 with the network short (delta < 0).
    const double s = reward_coeff_individual(0.8, 1.0, -0.5, 0.5, false);
    CHECK(std::abs(s) == doctest::Approx(0.5 * (std::exp(0.4) - 1.0)));
    CHECK(std::abs(s) == doctest::Approx(0.2459).epsilon(1e-3));
    CHECK(s > 0.0); // network wants less load -> price raise

    // Unchanged customer gets no incentive whatever the network does.
    CHECK(reward_coeff_individual(1.0, 1.0, -0.5, 0.5, false) == 0.0);
    CHECK(reward_coeff_individual(1.0, 1.0, 0.5, 0.5, false) == 0.0);
    // Balanced network zeroes everyone.
    CHECK(reward_coeff_individual(0.7, 1.0, 0.0, 0.5, false) == 0.0);
    // Zero baseline falls back to zero.
    CHECK(reward_coeff_individual(0.7, 0.0, -0.5, 0.5, false) == 0.0);
}

TEST_CASE("price gap multiplies sigma by the real-time marginal") {
    CHECK(price_gap(0.1107, 0.0, 2.0, 2.0) == 0.0);
    CHECK(price_gap(0.1107, -1.0, 2.0, 2.0) == doctest::Approx(0.2214));
    CHECK(price_gap(-0.3, 1.0, 2.0, 5.0) == doctest::Approx(-0.6));
    CHECK(price_gap(0.2, -1.0, 2.0, 5.0) == doctest::Approx(1.0));
    // Reward case propagates the negative sign: adjusted price below base.
    CHECK(price_gap(-0.5, 2.0, 2.0, 2.0) < 0.0);
}

TEST_CASE("|sigma| grows strictly with the relative gap") {
    double prev_pen = 0.0, prev_rew = 0.0;
    for (double r : {0.05, 0.1, 0.2, 0.4, 0.8}) {
        const double pen = reward_coeff_global(1.0 - r, 1.0, 0.5, false);
        const double rew = reward_coeff_global(1.0 + r, 1.0, 0.5, false);
        CHECK(pen > prev_pen);
        CHECK(std::abs(rew) > prev_rew);
        prev_pen = pen;
        prev_rew = std::abs(rew);
    }
}

TEST_CASE("reward beats penalty for w < 1 and they meet at w = 1") {
    // Small enough gap that neither branch touches its saturation cap;
    // beyond the caps the 1/w^2 ratio no longer holds by design.
    const double r = 0.02;
    for (double w : {0.1, 0.2, 0.35, 0.5, 0.75, 0.9}) {
        const double rew = std::abs(reward_coeff_global(1.0 + r, 1.0, w, false));
        const double pen = std::abs(reward_coeff_global(1.0 - r, 1.0, w, false));
        CHECK(rew > pen);
        CHECK(rew / pen == doctest::Approx(1.0 / (w * w)));
    }
    const double rew1 = std::abs(reward_coeff_global(1.0 + r, 1.0, 1.0, false));
    const double pen1 = std::abs(reward_coeff_global(1.0 - r, 1.0, 1.0, false));
    CHECK(rew1 == doctest::Approx(pen1));
}

TEST_CASE("price schedule accessors broadcast the single-row adjustment") {
    const int T = 4;
    PriceSchedule p = PriceSchedule::flat(Series::Constant(T, 10.0),
                                          Series::Constant(T, 6.0));
    CHECK(p.buy(3, 2) == doctest::Approx(10.0));
    CHECK(p.sell(3, 2) == doctest::Approx(6.0));

    p.adjust = Matrix::Zero(2, T);
    p.fit_adjust = Matrix::Zero(2, T);
    p.adjust(1, 2) = -1.5;
    p.fit_adjust(0, 3) = 0.4;
    CHECK(p.buy(1, 2) == doctest::Approx(8.5));
    CHECK(p.buy(0, 2) == doctest::Approx(10.0));
    CHECK(p.sell(0, 3) == doctest::Approx(6.4));
    CHECK((p.fit_adjust.array() >= 0.0).all());
}
