#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gridsched/coordinator.hpp"

#include <cmath>

using namespace gridsched;
using namespace gridsched::coord;

namespace {

// A 2-node feeder with negligible impedance and a slack line limit.
FeederTopology easy_feeder() {
    FeederTopology f;
    f.num_nodes = 2;
    f.base_mva = 1.0;
    f.lines.push_back(Line{0, 1, 0.001, 0.0005, 10.0});
    return f;
}

Scenario one_home_scenario(int T) {
    Scenario s;
    s.grid = TimeGrid{T, 1.0};
    s.feeder = easy_feeder();
    s.tariff.fit_rate = Series::Constant(T, 6.0);
    s.tariff.rt_buy = Series::Constant(T, 2.0);
    s.tariff.rt_sell = Series::Constant(T, 2.0);
    s.tariff.dg_power = Series::Zero(T);
    // Equal weight on bills and balancing cost keeps the negotiation's
    // stationary point identical to the enumerated joint optimum.
    s.admm.alpha = 1.0;
    Home h;
    h.id = "home-1";
    h.node = 1;
    h.base_load_kw = Series::Zero(T);
    h.pv_kw = Series::Zero(T);
    s.homes.push_back(h);
    return s;
}

} // namespace

TEST_CASE("dual update is the printed elementwise recursion") {
    Matrix u = Matrix::Zero(2, 3);
    Matrix L = Matrix::Constant(2, 3, 1.5);
    Matrix Lh = Matrix::Constant(2, 3, 1.5);
    CHECK((dual_update(u, L, Lh) - u).norm() == 0.0);

    Lh = Matrix::Constant(2, 3, 1.0);
    const Matrix u1 = dual_update(u, L, Lh);
    CHECK(u1(0, 0) == doctest::Approx(0.5));
    // Telescoping: three updates with a constant gap accumulate 3 deltas.
    const Matrix u3 = dual_update(dual_update(u1, L, Lh), L, Lh);
    CHECK(u3(1, 2) == doctest::Approx(1.5));
}

TEST_CASE("rho adaptation follows the residual-balancing rule") {
    AdmmParams p; // defaults
    CHECK(p.rho_init == doctest::Approx(0.001));
    CHECK(p.gamma == doctest::Approx(10.0));
    CHECK(p.tau_incr == doctest::Approx(2.0));
    CHECK(p.tau_decr == doctest::Approx(2.0));

    CHECK(adapt_rho(1.0, 1.0, 0.05, p) == doctest::Approx(2.0));
    CHECK(adapt_rho(1.0, 0.05, 1.0, p) == doctest::Approx(0.5));
    CHECK(adapt_rho(1.0, 0.3, 0.3, p) == doctest::Approx(1.0));
    CHECK(adapt_rho(1.0, 1.0, 0.11, p) == doctest::Approx(1.0)); // inside the band
}

TEST_CASE("dual rescaling preserves the unscaled multiplier rho*u") {
    AdmmParams p;
    const double rho = 0.4;
    Matrix u = Matrix::Constant(2, 2, 0.7);
    const double rho2 = adapt_rho(rho, 5.0, 0.01, p);
    REQUIRE(rho2 != rho);
    const Matrix u2 = u * (rho / rho2);
    CHECK((rho2 * u2 - rho * u).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("residual norms specialize the sharing-problem formulas") {
    Matrix L(1, 3), Lh(1, 3), Lp(1, 3);
    L << 1, 2, 3;
    Lh << 1, 2, 3;
    Lp << 0, 0, 0;
    auto [pr, du] = residuals(L, Lh, Lp, 2.0);
    CHECK(pr == 0.0); // L-hat equals L
    CHECK(du == doctest::Approx(2.0 * Lh.norm()));

    auto [pr2, du2] = residuals(L, Lp, Lp, 2.0);
    CHECK(du2 == 0.0); // L-hat frozen
    CHECK(pr2 == doctest::Approx((L - Lp).norm()));
}

TEST_CASE("uncoordinated run with no decisions is the raw profile") {
    Scenario s = one_home_scenario(4);
    s.homes[0].base_load_kw << 1.0, 2.0, 3.0, 1.5;
    s.homes[0].pv_kw << 0.0, 0.5, 1.0, 0.0;
    const auto vs = validate_scenario(s);
    const auto r = run_uncoordinated(vs);
    for (int t = 0; t < 4; ++t) {
        const double net = s.homes[0].base_load_kw[t] - s.homes[0].pv_kw[t];
        CHECK(r.loads(0, t) == doctest::Approx(net));
        CHECK(r.total_load_kw[t] ==
              doctest::Approx(net + r.losses_kw[t]).epsilon(1e-9));
    }
    // Bill consistency: recompute from the stored loads and prices.
    double bill = 0.0;
    for (int t = 0; t < 4; ++t)
        bill += hems::stage_cost(r.loads(0, t), r.prices.buy(0, t),
                                 r.prices.sell(0, t), 1.0);
    CHECK(r.bills[0] == doctest::Approx(bill));
    CHECK(r.cost.profit_cents ==
          doctest::Approx(r.cost.customer_bills_cents - r.cost.dayahead_cost_cents -
                          r.cost.realtime_cost_cents));

    // Determinism: a second run is identical.
    const auto r2 = run_uncoordinated(vs);
    CHECK((r.loads - r2.loads).norm() == 0.0);
    CHECK((r.bills - r2.bills).norm() == 0.0);
}

TEST_CASE("already-balanced scenario converges immediately with no adjustment") {
    Scenario s = one_home_scenario(4);
    s.homes[0].base_load_kw << 2.0, 3.0, 2.5, 1.0;
    const auto vs = validate_scenario(s);
    const auto unc = run_uncoordinated(vs);
    const auto r = run_coordinated(vs, Mode::Global);
    CHECK(r.converged);
    CHECK(r.iterations <= 2);
    CHECK(r.prices.adjust.cwiseAbs().maxCoeff() < 1e-9);
    CHECK((r.bills - unc.bills).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((r.loads - unc.loads).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("battery-only instance: distributed agreement matches the oracle") {
    Scenario s = one_home_scenario(4);
    s.homes[0].base_load_kw << 0.5, 0.5, 4.0, 4.0; // expensive evening
    Battery b;
    b.capacity_kwh = 4.0;
    b.soc_min = 0.0;
    b.soc_max = 1.0;
    b.soc_initial = 0.5;
    b.step_min = -0.25;
    b.step_max = 0.25;
    s.homes[0].battery = b;
    const auto vs = validate_scenario(s);

    RunOptions ro;
    ro.disable_price_adjustment = true;
    ro.soc_levels = 5;
    const auto admm = run_coordinated(vs, Mode::Global, ro);
    const auto oracle = centralized_oracle(vs, OracleOptions{1'000'000, 5});

    REQUIRE(admm.converged);
    for (int t = 0; t < 4; ++t)
        CHECK(std::abs(admm.loads(0, t) - oracle.loads(0, t)) <= 1e-3);

    // Objective comparison: the oracle value is a lower bound on what the
    // negotiation achieved (alpha = 1, base prices in plain mode).
    const double admm_obj = admm.bills.sum() + admm.cost.realtime_cost_cents;
    const double oracle_obj = oracle.iteration_log.at(0).dno_objective;
    CHECK(oracle_obj <= admm_obj + 1e-6);
    CHECK(oracle_obj == doctest::Approx(oracle.bills.sum() +
                                        oracle.cost.realtime_cost_cents));
}

TEST_CASE("oracle with no decisions reproduces the uncoordinated run") {
    Scenario s = one_home_scenario(4);
    s.homes[0].base_load_kw << 1.0, 2.0, 1.0, 2.0;
    const auto vs = validate_scenario(s);
    const auto unc = run_uncoordinated(vs);
    const auto orc = centralized_oracle(vs);
    CHECK((unc.loads - orc.loads).norm() == 0.0);
    CHECK(unc.bills[0] == doctest::Approx(orc.bills[0]));
}

TEST_CASE("oracle enumeration cap raises TooLarge") {
    Scenario s = one_home_scenario(8);
    for (int a = 0; a < 6; ++a)
        s.homes[0].appliances.push_back(Appliance{1.0, 1, 0, 7});
    const auto vs = validate_scenario(s);
    CHECK_THROWS_AS(centralized_oracle(vs, OracleOptions{100, 5}), TooLarge);
}

TEST_CASE("iteration budget exhaustion is reported, not thrown") {
    Scenario s = one_home_scenario(6);
    s.homes[0].base_load_kw = Series::Constant(6, 1.0);
    for (int a = 0; a < 3; ++a)
        s.homes[0].appliances.push_back(Appliance{2.0, 1, 0, 5});
    s.admm.max_iters = 1;
    // A forecast far from reality keeps the negotiation busy.
    s.forecast_demand = Series::Constant(6, 20.0);
    const auto vs = validate_scenario(s);
    const auto r = run_coordinated(vs, Mode::Global);
    CHECK(!r.converged);
    CHECK(r.iterations == 1);
    CHECK(r.iteration_log.size() == 1);
    CHECK(r.loads.rows() == 1); // best iterate still delivered
    CHECK(std::isfinite(r.bills[0]));
}

TEST_CASE("individualized mode produces per-home price rows with FiT floor") {
    Scenario s = one_home_scenario(6);
    s.homes[0].base_load_kw << 1.0, 1.0, 4.0, 4.0, 1.0, 1.0;
    s.homes[0].appliances.push_back(Appliance{2.0, 1, 0, 5});
    Home h2 = s.homes[0];
    h2.id = "home-2";
    h2.appliances[0].power_kw = 1.0;
    s.homes.push_back(h2);
    // Skewed forecast so incentives actually engage.
    s.forecast_demand = Series::Constant(6, 5.0);
    const auto vs = validate_scenario(s);
    const auto r = run_coordinated(vs, Mode::Individualized);
    CHECK(r.prices.adjust.rows() == 2);
    CHECK(r.prices.fit_adjust.rows() == 2);
    CHECK((r.prices.fit_adjust.array() >= 0.0).all());
    CHECK(r.mode == Mode::Individualized);
    // Bill consistency under per-home prices.
    for (int h = 0; h < 2; ++h) {
        double bill = 0.0;
        for (int t = 0; t < 6; ++t)
            bill += hems::stage_cost(r.loads(h, t), r.prices.buy(h, t),
                                     r.prices.sell(h, t), 1.0);
        CHECK(r.bills[h] == doctest::Approx(bill));
    }
}

TEST_CASE("mode names are stable identifiers") {
    CHECK(std::string(mode_name(Mode::Uncoordinated)) == "uncoordinated");
    CHECK(std::string(mode_name(Mode::Global)) == "coordinated-global");
    CHECK(std::string(mode_name(Mode::Individualized)) == "coordinated-individualized");
    CHECK(std::string(mode_name(Mode::CentralizedOracle)) == "centralized-oracle");
}
