#pragma once

// The ADMM driver: baseline (uncoordinated) runs, the coordinated
// negotiation loop with global or individualized incentives, the residual /
// penalty-adaptation primitives, and a brute-force centralized oracle for
// tiny instances.

#include "gridsched/dno.hpp"
#include "gridsched/hems.hpp"
#include "gridsched/metrics.hpp"
#include "gridsched/model.hpp"
#include "gridsched/tariff.hpp"

#include <vector>

namespace gridsched::coord {

class TooLarge : public std::runtime_error {
public:
    TooLarge() : std::runtime_error("oracle enumeration exceeds the candidate cap") {}
};

enum class Mode { Uncoordinated, Global, Individualized, CentralizedOracle };

const char* mode_name(Mode mode);

struct IterationRecord {
    int k = 0;
    double rho = 0.0;
    double primal_norm = 0.0;
    double dual_norm = 0.0;
    double dno_objective = 0.0;
    double total_bills = 0.0;
};

struct CostBreakdown {
    double customer_bills_cents = 0.0;
    double dayahead_cost_cents = 0.0;
    double realtime_cost_cents = 0.0;
    double profit_cents = 0.0;
};

struct RunResult {
    Mode mode = Mode::Uncoordinated;
    std::vector<std::string> home_ids;
    std::vector<hems::HouseholdSchedule> schedules;
    tariff::PriceSchedule prices;
    Matrix loads;             // H x T agreed net loads
    Eigen::VectorXd bills;    // cents per home, from loads and prices
    Series total_load_kw;     // sum of home loads plus losses, per slot
    Series losses_kw;         // true load-flow losses per slot
    Matrix line_current_pu;   // lines x T
    Series planned_kwh;       // g_t
    CostBreakdown cost;
    metrics::MetricsBundle bundle;
    std::vector<IterationRecord> iteration_log;
    bool converged = true;
    int iterations = 0;
};

struct RunOptions {
    // Algorithm-1 behavior (no price adjustment); used by the oracle
    // equivalence tests where the incentive feedback would change the
    // objective being compared.
    bool disable_price_adjustment = false;
    // Step size for blending freshly computed price adjustments into the
    // active schedule each iteration (1 = replace outright). Smaller values
    // damp the price/response feedback loop without moving its fixed point.
    double price_smoothing = 0.05;
    int soc_levels = 21;
};

// Planned day-ahead purchase g_t (kWh) and the matching base price series.
struct DayAheadPlan {
    Series planned_kwh;
    Series base_price;
};
DayAheadPlan day_ahead_plan(const ValidatedScenario& scenario);

RunResult run_uncoordinated(const ValidatedScenario& scenario,
                            const RunOptions& opts = {});

class MaxItersExceeded : public std::runtime_error {
public:
    MaxItersExceeded() : std::runtime_error("ADMM did not converge") {}
};

RunResult run_coordinated(const ValidatedScenario& scenario, Mode mode,
                          const RunOptions& opts = {});

// u' = u + L - L-hat, elementwise.
Matrix dual_update(const Matrix& duals, const Matrix& loads, const Matrix& suggested);

// Residual-balancing penalty adaptation; the caller rescales the stored
// scaled duals by rho/rho' whenever the value changes.
double adapt_rho(double rho, double primal_norm, double dual_norm,
                 const AdmmParams& params);

// primal = ||L - L-hat||_F, dual = rho * ||L-hat - L-hat_prev||_F.
std::pair<double, double> residuals(const Matrix& loads, const Matrix& suggested,
                                    const Matrix& suggested_prev, double rho);

struct OracleOptions {
    long long candidate_cap = 10'000'000;
    int soc_levels = 5;
};

// Globally optimal joint schedule by exhaustive enumeration with an exact
// load-flow solve per candidate slot. Test oracle only.
RunResult centralized_oracle(const ValidatedScenario& scenario,
                             const OracleOptions& opts = {});

} // namespace gridsched::coord
