#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gridsched/coordinator.hpp"
#include "gridsched/metrics.hpp"

#include <cmath>

using namespace gridsched;
using namespace gridsched::metrics;

namespace {

coord::RunResult run_with_bills(const std::vector<std::string>& ids,
                                const Eigen::VectorXd& bills) {
    coord::RunResult r;
    r.home_ids = ids;
    r.bills = bills;
    return r;
}

} // namespace

TEST_CASE("peak-to-average ratio") {
    CHECK(par(Series::Constant(24, 3.5)) == doctest::Approx(1.0));

    Series p(3);
    p << 1, 2, 3;
    CHECK(par(p) == doctest::Approx(1.5));

    // Single spike of length T has PAR exactly T.
    for (int T : {4, 7, 24}) {
        Series spike = Series::Zero(T);
        spike[T / 2] = 2.7;
        CHECK(par(spike) == doctest::Approx(static_cast<double>(T)));
    }

    CHECK_THROWS_AS(par(Series::Zero(5)), ZeroProfile);
}

TEST_CASE("savings table rows") {
    Eigen::VectorXd before(2), after(2);
    before << 405.872, 200.0;
    after << 387.358, 200.0;
    const auto unc = run_with_bills({"h1", "h2"}, before);
    const auto crd = run_with_bills({"h1", "h2"}, after);

    const auto rows = savings_table(unc, crd);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].home_id == "h1");
    CHECK(rows[0].bill_before == doctest::Approx(405.872));
    CHECK(rows[0].bill_after == doctest::Approx(387.358));
    CHECK(rows[0].saving_fraction * 100.0 == doctest::Approx(4.56).epsilon(1e-3));
    CHECK(rows[1].saving_fraction == doctest::Approx(0.0));

    // Identical runs: all savings zero.
    for (const auto& row : savings_table(unc, unc))
        CHECK(row.saving_fraction == doctest::Approx(0.0));

    // Antisymmetry: swapping the runs gives s' = -s / (1 - s).
    const auto rev = savings_table(crd, unc);
    for (size_t i = 0; i < rows.size(); ++i) {
        const double s = rows[i].saving_fraction;
        CHECK(std::abs(rev[i].saving_fraction + s / (1.0 - s)) < 1e-12);
    }

    const auto other = run_with_bills({"h1", "hX"}, before);
    CHECK_THROWS_AS(savings_table(unc, other), ScenarioMismatch);
}

TEST_CASE("w sweep runs one coordinated negotiation per value") {
    // Small two-home scenario with something to negotiate about.
    Scenario s;
    s.grid = TimeGrid{6, 1.0};
    s.feeder.num_nodes = 2;
    s.feeder.base_mva = 1.0;
    s.feeder.lines.push_back(Line{0, 1, 0.01, 0.004, 10.0});
    s.tariff.fit_rate = Series::Constant(6, 6.0);
    s.tariff.rt_buy = Series::Constant(6, 2.0);
    s.tariff.rt_sell = Series::Constant(6, 2.0);
    s.tariff.dg_power = Series::Zero(6);
    Home h;
    h.id = "a";
    h.node = 1;
    h.base_load_kw = Series::Zero(6);
    h.pv_kw = Series::Zero(6);
    h.base_load_kw << 1.0, 1.0, 3.0, 3.0, 1.0, 1.0;
    h.appliances.push_back(Appliance{2.0, 1, 0, 5});
    s.homes.push_back(h);
    h.id = "b";
    s.homes.push_back(h);
    const auto vs = validate_scenario(s);

    const std::vector<double> ws = {0.25, 0.5, 1.0};
    const auto rows = w_sweep(vs, ws);
    REQUIRE(rows.size() == 3);
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].w == doctest::Approx(ws[i]));
        CHECK(std::isfinite(rows[i].total_bills_cents));
        CHECK(std::isfinite(rows[i].dno_profit_cents));
    }

    // Each row matches a direct run with that w.
    Scenario s2 = s;
    s2.tariff.incentive_w = 0.5;
    const auto direct = coord::run_coordinated(validate_scenario(s2), coord::Mode::Global);
    CHECK(rows[1].total_bills_cents == doctest::Approx(direct.bills.sum()));
    CHECK(rows[1].dno_profit_cents == doctest::Approx(direct.cost.profit_cents));
    CHECK(rows[1].converged == direct.converged);
}
