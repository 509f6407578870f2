#pragma once

// Exact dynamic program for one household's day-ahead schedule: joint state
// over appliance progress counters and a discretized battery SOC grid. Also
// holds the stage-cost and battery-power primitives shared with the tests.

#include "gridsched/model.hpp"

namespace gridsched::hems {

class StepOutOfRange : public std::runtime_error {
public:
    StepOutOfRange() : std::runtime_error("battery step outside [step_min, step_max]") {}
};
class GridTooCoarse : public std::runtime_error {
public:
    GridTooCoarse()
        : std::runtime_error("SOC grid cannot represent soc_initial exactly") {}
};

// AC-side battery power for one SOC step (fraction of capacity). Charging
// draws more than it stores, discharging delivers less.
double battery_power(const Battery& battery, double step, double slot_hours);

// Customer stage cost in cents: buy price for net consumption, feed-in rate
// for net injection (negative cents = revenue).
double stage_cost(double load_kw, double price, double fit, double slot_hours);

// Per-home price series the household optimizes against (already including
// any coordination adjustment).
struct HomePrices {
    Series buy;  // cents/kWh
    Series sell; // cents/kWh
};

// Augments the bill with the coordination penalty of one ADMM iteration:
// alpha * stage cost + (rho/2) (L - suggested + dual)^2 per slot.
struct ProximalTerms {
    Series suggested_load; // L-hat
    Series scaled_dual;    // u
    double rho = 0.0;
    double alpha = 1.0;
};

struct HouseholdSchedule {
    Series net_load_kw;              // L_{h,t}
    std::vector<int> appliance_start; // start slot per appliance
    Series battery_action;           // SOC step per slot (empty if no battery)
    Series soc;                      // length T+1 trajectory (empty if no battery)
    double cost = 0.0;               // optimal objective value
};

struct SolveOptions {
    int soc_levels = 21;
};

// Exact minimizer over the discrete decision space. Ties broken toward the
// earliest appliance start, then the smallest |battery step|.
HouseholdSchedule solve_household(const Home& home, const TimeGrid& grid,
                                  const HomePrices& prices,
                                  const ProximalTerms* prox = nullptr,
                                  const SolveOptions& opts = {});

} // namespace gridsched::hems
