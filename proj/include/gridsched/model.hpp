#pragma once

// Domain types for the neighborhood load-scheduling simulator: time grid,
// appliances, batteries, homes, the radial feeder, tariff and ADMM
// parameters, and the Scenario bundle tying them together.

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridsched {

using Series = Eigen::ArrayXd;   // length-T time series
using Matrix = Eigen::MatrixXd;  // H x T load matrices

// Validation failures carry every violation found, not just the first.
class InvariantError : public std::runtime_error {
public:
    explicit InvariantError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TimeGrid {
    int num_slots = 24;      // T
    double slot_hours = 1.0; // dt
};

// A deferrable appliance: runs power_kw for job_length_slots contiguous
// slots, starting no earlier than window_start and finishing no later than
// window_end (both 0-based, inclusive).
struct Appliance {
    double power_kw = 0.0;
    int job_length_slots = 1;
    int window_start = 0;
    int window_end = 0;

    int last_start_slot() const { return window_end - job_length_slots + 1; }
};

struct Battery {
    double capacity_kwh = 0.0;
    double soc_min = 0.0;
    double soc_max = 1.0;
    double soc_initial = 0.5;
    double step_min = -0.25; // fraction of capacity per slot, <= 0
    double step_max = 0.25;  // fraction of capacity per slot, >= 0
    double eff_charge = 0.95;
    double eff_discharge = 0.95;
};

struct Home {
    std::string id;
    int node = 0; // feeder node index
    std::vector<Appliance> appliances;
    std::optional<Battery> battery;
    Series pv_kw;        // nonnegative generation magnitude, subtracted in the load assembly
    Series base_load_kw; // nonnegative non-controllable demand
};

struct Line {
    int from_node = 0;
    int to_node = 0;
    double resistance_pu = 0.0;
    double reactance_pu = 0.0;
    double current_limit_pu = 1.0;
};

struct FeederTopology {
    int num_nodes = 0; // node 0 is the slack (substation) node
    std::vector<Line> lines;
    double base_mva = 1.0;
    double base_kv = 0.4;
};

struct TariffParams {
    double quad_a = 0.2;      // cents/kWh^2
    double lin_b = 2.0;       // cents/kWh
    double const_c = 0.0;
    double profit_coeff = 4.8; // phi > 1
    Series fit_rate;           // cents/kWh, length T
    Series rt_buy;             // mu_b, cents/kWh
    Series rt_sell;            // mu_s, cents/kWh
    Series dg_power;           // kW owned by the DNO
    double incentive_w = 0.5;  // w in (0, 1]
};

struct AdmmParams {
    double rho_init = 0.001;
    double gamma = 10.0;
    double tau_incr = 2.0;
    double tau_decr = 2.0;
    double eps_primal = 1e-3;
    double eps_dual = 1e-3;
    // Weight of the customer bill terms against the operator's real-time
    // balancing cost. Small values make the negotiated profile track the
    // day-ahead plan closely; larger values let households defend their
    // bills against the posted incentives. 0.3 balances the two on the
    // reference scenario.
    double alpha = 0.3;
    double fairness_eps = 0.02;
    double fairness_weight = 0.0;
    int max_iters = 300;
};

struct Scenario {
    TimeGrid grid;
    FeederTopology feeder;
    std::vector<Home> homes;
    TariffParams tariff;
    AdmmParams admm;
    std::optional<Series> forecast_demand; // g_t, computed from homes if absent
};

// A Scenario that has passed validate_scenario. Immutable by convention;
// every downstream module takes it by const reference.
struct ValidatedScenario {
    Scenario scenario;
};

// Checks every type invariant and throws InvariantError listing all
// violations. A zero-home scenario is accepted (coordination degenerates to
// a no-op).
ValidatedScenario validate_scenario(Scenario raw);

// Returns true when `lines` form a tree over nodes 0..num_nodes-1 rooted at
// node 0.
bool is_radial(const FeederTopology& feeder);

// The five-customer test feeder with its published appliance energies,
// operation windows, PV/battery placement, line impedances and tariff
// constants, completed with synthetic base-load and PV shapes.
Scenario build_reference_scenario();

// Deterministic-for-seed synthetic day profiles: a two-hump base load
// (morning/evening peaks with mild multiplicative noise) and a clear-sky PV
// bell centered at noon whose maximum equals pv_peak_kw exactly.
struct DayProfiles {
    Series base_load_kw;
    Series pv_kw;
};
DayProfiles synthesize_profiles(unsigned seed, const TimeGrid& grid, double pv_peak_kw);

// Average net demand of one home used by the DNO demand forecast: base load
// minus PV plus each appliance's energy spread uniformly over its window.
// Battery is energy-neutral over the day and contributes nothing.
Series average_net_demand(const Home& home, const TimeGrid& grid);

} // namespace gridsched
