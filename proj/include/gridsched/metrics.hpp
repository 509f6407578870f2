#pragma once

// Post-run analytics: peak-to-average ratio, per-home savings tables and the
// incentive-parameter sweep.

#include "gridsched/model.hpp"

#include <vector>

namespace gridsched::coord {
struct RunResult;
enum class Mode;
} // namespace gridsched::coord

namespace gridsched::metrics {

class ZeroProfile : public std::runtime_error {
public:
    ZeroProfile() : std::runtime_error("profile sums to zero; PAR undefined") {}
};
class ScenarioMismatch : public std::runtime_error {
public:
    ScenarioMismatch() : std::runtime_error("runs come from different scenarios") {}
};

struct MetricsBundle {
    double par = 0.0;
    double total_losses_kwh = 0.0;
    double realtime_cost_cents = 0.0;
    Eigen::VectorXd per_home_bills;
    Eigen::VectorXd max_line_loading_pu; // per line, over the day
    double dno_profit_cents = 0.0;
};

// T * max(profile) / sum(profile).
double par(const Series& profile);

struct SavingsRow {
    std::string home_id;
    double bill_before = 0.0;
    double bill_after = 0.0;
    double saving_fraction = 0.0; // (before - after) / before
};

std::vector<SavingsRow> savings_table(const coord::RunResult& uncoordinated,
                                      const coord::RunResult& coordinated);

struct WSweepRow {
    double w = 0.0;
    double total_bills_cents = 0.0;
    double dno_profit_cents = 0.0;
    bool converged = false;
};

// One coordinated run per w value (global incentives).
std::vector<WSweepRow> w_sweep(const ValidatedScenario& scenario,
                               const std::vector<double>& w_values);

} // namespace gridsched::metrics
