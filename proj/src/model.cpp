#include "gridsched/model.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace gridsched {

namespace {

std::string join(const std::vector<std::string>& parts) {
    std::ostringstream os;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) os << "; ";
        os << parts[i];
    }
    return os.str();
}

} // namespace

InvariantError::InvariantError(std::vector<std::string> violations)
    : std::runtime_error("scenario invariants violated: " + join(violations)),
      violations_(std::move(violations)) {}

bool is_radial(const FeederTopology& feeder) {
    const int n = feeder.num_nodes;
    if (n < 1) return false;
    if (static_cast<int>(feeder.lines.size()) != n - 1) return false;
    // Union-find: a tree has n-1 edges and no cycle.
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& line : feeder.lines) {
        if (line.from_node < 0 || line.from_node >= n || line.to_node < 0 ||
            line.to_node >= n)
            return false;
        int a = find(line.from_node), b = find(line.to_node);
        if (a == b) return false;
        parent[a] = b;
    }
    return true;
}

ValidatedScenario validate_scenario(Scenario raw) {
    std::vector<std::string> bad;
    auto check = [&](bool ok, const std::string& msg) {
        if (!ok) bad.push_back(msg);
    };

    const int T = raw.grid.num_slots;
    check(T >= 1, "grid.num_slots must be >= 1");
    check(raw.grid.slot_hours > 0, "grid.slot_hours must be > 0");

    check(raw.feeder.num_nodes >= 1, "feeder needs at least the slack node");
    check(is_radial(raw.feeder), "feeder must be a tree rooted at the slack node");
    for (size_t i = 0; i < raw.feeder.lines.size(); ++i) {
        const auto& l = raw.feeder.lines[i];
        check(l.resistance_pu > 0 || l.reactance_pu > 0,
              "line " + std::to_string(i) + ": impedance must be > 0");
        check(l.resistance_pu >= 0, "line " + std::to_string(i) + ": R must be >= 0");
        check(l.current_limit_pu > 0,
              "line " + std::to_string(i) + ": current limit must be > 0");
    }
    check(raw.feeder.base_mva > 0, "feeder.base_mva must be > 0");
    check(raw.feeder.base_kv > 0, "feeder.base_kv must be > 0");

    std::set<std::string> ids;
    for (const auto& home : raw.homes) {
        const std::string tag = "home '" + home.id + "'";
        check(ids.insert(home.id).second, tag + ": duplicate id");
        check(home.node >= 0 && home.node < raw.feeder.num_nodes,
              tag + ": node index out of range");
        check(home.pv_kw.size() == T, tag + ": pv_kw length != T");
        check(home.base_load_kw.size() == T, tag + ": base_load_kw length != T");
        if (home.base_load_kw.size() == T)
            check((home.base_load_kw >= 0.0).all(), tag + ": base_load_kw must be >= 0");
        if (home.pv_kw.size() == T)
            check((home.pv_kw >= 0.0).all(),
                  tag + ": pv_kw stores generation magnitude and must be >= 0");
        for (size_t a = 0; a < home.appliances.size(); ++a) {
            const auto& ap = home.appliances[a];
            const std::string atag = tag + " appliance " + std::to_string(a);
            check(ap.power_kw > 0, atag + ": power_kw must be > 0");
            check(ap.job_length_slots >= 1, atag + ": job_length_slots must be >= 1");
            check(ap.window_start >= 0 && ap.window_end < T,
                  atag + ": window outside the horizon");
            check(ap.window_end - ap.window_start + 1 >= ap.job_length_slots,
                  atag + ": window shorter than the job");
        }
        if (home.battery) {
            const auto& b = *home.battery;
            const std::string btag = tag + " battery";
            check(b.capacity_kwh > 0, btag + ": capacity_kwh must be > 0");
            check(0 <= b.soc_min && b.soc_min <= b.soc_initial &&
                      b.soc_initial <= b.soc_max && b.soc_max <= 1.0,
                  btag + ": need 0 <= soc_min <= soc_initial <= soc_max <= 1");
            check(b.eff_charge > 0 && b.eff_charge <= 1, btag + ": eff_charge in (0,1]");
            check(b.eff_discharge > 0 && b.eff_discharge <= 1,
                  btag + ": eff_discharge in (0,1]");
            check(b.step_min <= 0 && b.step_max >= 0,
                  btag + ": need step_min <= 0 <= step_max");
        }
    }

    const auto& tf = raw.tariff;
    check(tf.profit_coeff > 1, "tariff.profit_coeff must be > 1");
    check(tf.quad_a >= 0, "tariff.quad_a must be >= 0");
    check(tf.incentive_w > 0 && tf.incentive_w <= 1, "tariff.incentive_w must be in (0,1]");
    auto series_ok = [&](const Series& s, const char* name) {
        check(s.size() == T, std::string("tariff.") + name + " length != T");
    };
    series_ok(tf.fit_rate, "fit_rate");
    series_ok(tf.rt_buy, "rt_buy");
    series_ok(tf.rt_sell, "rt_sell");
    series_ok(tf.dg_power, "dg_power");

    const auto& ad = raw.admm;
    check(ad.rho_init > 0, "admm.rho_init must be > 0");
    check(ad.gamma > 1, "admm.gamma must be > 1");
    check(ad.tau_incr > 1, "admm.tau_incr must be > 1");
    check(ad.tau_decr > 1, "admm.tau_decr must be > 1");
    check(ad.eps_primal > 0 && ad.eps_dual > 0, "admm tolerances must be > 0");
    check(ad.max_iters >= 1, "admm.max_iters must be >= 1");
    check(ad.alpha > 0, "admm.alpha must be > 0");

    if (raw.forecast_demand)
        check(raw.forecast_demand->size() == T, "forecast_demand length != T");

    if (!bad.empty()) throw InvariantError(std::move(bad));
    return ValidatedScenario{std::move(raw)};
}

DayProfiles synthesize_profiles(unsigned seed, const TimeGrid& grid, double pv_peak_kw) {
    const int T = grid.num_slots;
    DayProfiles out;
    out.base_load_kw = Series::Zero(T);
    out.pv_kw = Series::Zero(T);

    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> jitter(0.9, 1.1);
    std::uniform_real_distribution<double> scale_dist(0.8, 1.4);
    const double scale = scale_dist(rng);

    auto gauss = [](double x, double mu, double sd) {
        const double z = (x - mu) / sd;
        return std::exp(-0.5 * z * z);
    };

    for (int t = 0; t < T; ++t) {
        const double hour = 24.0 * t / T; // slot-start clock hour
        // Residential shape: morning peak ~7am, daytime shoulder (occupancy,
        // cooling), evening peak ~7pm, on a substantial always-on floor
        // (fridge, standby, hot water) so network load never collapses to
        // zero between the humps.
        double base = 0.85 + 0.7 * gauss(hour, 7.0, 1.8) +
                      0.55 * gauss(hour, 13.5, 3.0) + 0.9 * gauss(hour, 19.0, 2.6);
        out.base_load_kw[t] = scale * base * jitter(rng);
        // Clear-sky bell over 6am-6pm peaking at noon; real-world output
        // tops out well below the nameplate rating.
        if (pv_peak_kw > 0 && hour >= 6.0 && hour <= 18.0)
            out.pv_kw[t] = 0.75 * pv_peak_kw * gauss(hour, 12.0, 2.5);
    }
    return out;
}

Series average_net_demand(const Home& home, const TimeGrid& grid) {
    Series d = home.base_load_kw - home.pv_kw;
    for (const auto& ap : home.appliances) {
        // Spread the appliance energy uniformly over its window: the expected
        // profile if the start slot were drawn uniformly from the window.
        const int len = ap.window_end - ap.window_start + 1;
        const double avg_kw =
            ap.power_kw * ap.job_length_slots / static_cast<double>(len);
        for (int t = ap.window_start; t <= ap.window_end; ++t) d[t] += avg_kw;
    }
    return d;
}

Scenario build_reference_scenario() {
    Scenario s;
    s.grid = TimeGrid{24, 1.0};

    // Radial chain: substation (0) -> home nodes 1..5, identical line
    // impedances, R = 153 % and X = 62.5 % on the 1 MVA base. The published
    // figures describe the feeder as a whole; they are split evenly over the
    // five segments (per-segment values that large would collapse the
    // voltage under any realistic evening peak).
    s.feeder.num_nodes = 6;
    s.feeder.base_mva = 1.0;
    s.feeder.base_kv = 0.4;
    for (int n = 0; n < 5; ++n)
        s.feeder.lines.push_back(Line{n, n + 1, 1.53 / 5.0, 0.625 / 5.0, 1.0});

    const int T = s.grid.num_slots;
    s.tariff.quad_a = 0.2;
    s.tariff.lin_b = 2.0;
    s.tariff.const_c = 0.0;
    s.tariff.profit_coeff = 4.8;
    s.tariff.fit_rate = Series::Constant(T, 6.0);
    s.tariff.rt_buy = Series::Constant(T, 2.0);
    s.tariff.rt_sell = Series::Constant(T, 2.0);
    s.tariff.dg_power = Series::Zero(T);
    s.tariff.incentive_w = 0.5;

    s.admm = AdmmParams{}; // rho0 = 0.001, gamma = 10, tau = 2, tol = 1e-3
    s.admm.fairness_weight = 400.0;

    // Six 1-slot appliances per home with energies 0.4 .. 2.5 kWh. Window
    // slots are 0-based and inclusive; the end slot is the last slot the
    // 1-hour job may start in (e.g. "4pm-11pm" -> slots 16..22).
    const double energies[6] = {0.4, 0.8, 1.2, 1.6, 2.0, 2.5};
    struct Win { int a, b; };
    const Win row2[6] = {{16, 22}, {10, 15}, {5, 8}, {5, 8}, {10, 15}, {16, 22}};
    const Win row4[6] = {{9, 19}, {9, 19}, {9, 19}, {9, 19}, {9, 19}, {9, 19}};
    // The published window table lists only two distinct rows; homes 1, 2 and
    // 5 follow the first, homes 3 and 4 the second.
    auto windows_for = [&](int h) { return (h == 3 || h == 4) ? row4 : row2; };

    for (int h = 1; h <= 5; ++h) {
        Home home;
        home.id = "home" + std::to_string(h);
        home.node = h;
        const double pv_peak = (h == 3) ? 6.0 : (h == 4) ? 4.7 : 0.0;
        const auto prof = synthesize_profiles(1000u + static_cast<unsigned>(h),
                                              s.grid, pv_peak);
        home.base_load_kw = prof.base_load_kw;
        home.pv_kw = prof.pv_kw;
        const Win* win = windows_for(h);
        for (int a = 0; a < 6; ++a)
            home.appliances.push_back(
                Appliance{energies[a] / s.grid.slot_hours, 1, win[a].a, win[a].b});
        if (h == 3) {
            Battery b;
            b.capacity_kwh = 5.0;
            b.soc_min = 0.1;
            b.soc_max = 0.9;
            b.soc_initial = 0.5;
            b.step_min = -0.25;
            b.step_max = 0.25;
            b.eff_charge = 0.95;
            b.eff_discharge = 0.95;
            home.battery = b;
        }
        s.homes.push_back(std::move(home));
    }
    return s;
}

} // namespace gridsched
