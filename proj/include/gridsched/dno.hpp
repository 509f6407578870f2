#pragma once

// Network-operator economics and the DNO side of the coordination loop: the
// real-time balancing cost, profit and rebate bookkeeping, and the proximal
// subproblem that produces the suggested per-home loads under linearized
// network constraints and a soft fairness penalty.

#include "gridsched/loadflow.hpp"
#include "gridsched/model.hpp"
#include "gridsched/tariff.hpp"

#include <limits>

namespace gridsched::dno {

class ZeroBill : public std::runtime_error {
public:
    ZeroBill() : std::runtime_error("uncoordinated bill is zero; rebate undefined") {}
};

// One slot of Eq-style balancing cost, cents: buying shortfall at rt_buy,
// paying rt_sell to dump surplus. Nonnegative whenever both rates are.
double realtime_cost(double total_kwh, double planned_kwh, double rt_buy,
                     double rt_sell);

// Operator profit: customer payments minus day-ahead and real-time costs.
double dno_profit(double customer_bills, double dayahead_cost, double realtime_cost);

struct RebateVector {
    Eigen::VectorXd per_home; // R_h, normalized bill saving
    double average = 0.0;

    double spread() const {
        return (per_home.array() - average).abs().sum();
    }
};

RebateVector rebates(const Eigen::VectorXd& bills_uncoordinated,
                     const Eigen::VectorXd& bills_suggested);

// Losses and line currents linearized at an operating point X0 (H x T kW),
// one true sweep solve per slot.
struct NetworkLinearization {
    Matrix x0;                    // H x T operating point
    Series loss0_kw;              // per slot
    Matrix dloss;                 // H x T, kW loss per kW of home load
    Matrix current0;              // lines x T, |I| pu
    std::vector<Eigen::MatrixXd> dcurrent; // per slot: lines x H, pu per kW
    Eigen::VectorXd line_limits;  // pu
};

NetworkLinearization linearize_network(const FeederTopology& feeder,
                                       const std::vector<int>& home_nodes,
                                       const Matrix& x0_kw);

struct DnoProblem {
    Matrix loads;         // L, H x T (customer iterates)
    Matrix duals;         // u, H x T
    double rho = 0.0;
    double alpha = 1.0;
    Matrix eps_adjust;    // cents/kWh, 1 x T or H x T (zero when incentives off)
    Series planned_kwh;   // g_t
    Series rt_buy;        // mu_b per slot
    Series rt_sell;       // mu_s per slot
    double slot_hours = 1.0;
    NetworkLinearization network;
    bool enforce_line_limits = true;
    // Trust region around the customers' loads. The loss/current
    // linearization is only locally valid, so the suggestion step is kept
    // within a box |L-hat - L| <= radius (infinite = disabled).
    double trust_radius_kw = std::numeric_limits<double>::infinity();
    // Fairness spread soft penalty; disabled when weight == 0 or the
    // uncoordinated bills are absent.
    double fairness_eps = 0.02;
    double fairness_weight = 0.0;
    Eigen::VectorXd bills_uncoordinated;
    tariff::PriceSchedule prices; // adjusted prices used to bill suggested loads
};

struct DnoIterate {
    Matrix suggested_loads;   // L-hat, H x T
    Series suggested_losses;  // linearized losses at the returned point
    double objective_value = 0.0;
    double max_overload_pu = 0.0; // against the linearized currents
    double fairness_spread = 0.0;
    bool stalled = false;
    int inner_iterations = 0;
};

struct DnoSolveOptions {
    int max_inner_iters = 500;
    double rel_obj_tol = 1e-9;
};

// Evaluates the subproblem objective at X; exposed so tests can re-check the
// reported value term by term.
double dno_objective(const DnoProblem& problem, const Matrix& x);

// Projected gradient descent with backtracking, started at the customers'
// loads (projected). Monotone in the objective, so the returned value never
// exceeds the objective at X = L.
DnoIterate dno_update(const DnoProblem& problem, const DnoSolveOptions& opts = {});

} // namespace gridsched::dno
