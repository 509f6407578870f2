#pragma once

// Forward-backward-sweep power flow for radial feeders, plus first-order
// sensitivities of line-current magnitudes and total losses with respect to
// nodal active power. Pure functions; one call per time slot may run in
// parallel.

#include "gridsched/model.hpp"

#include <complex>
#include <vector>

namespace gridsched::loadflow {

class NonRadialError : public std::runtime_error {
public:
    NonRadialError() : std::runtime_error("feeder is not radial") {}
};
class DivergenceError : public std::runtime_error {
public:
    DivergenceError() : std::runtime_error("load flow diverged (|V| < 0.5 pu)") {}
};
class NotConvergedError : public std::runtime_error {
public:
    NotConvergedError() : std::runtime_error("load flow solution not converged") {}
};

struct FlowSolution {
    std::vector<std::complex<double>> node_voltage_pu; // slack fixed at 1.0
    std::vector<double> line_current_pu;               // |I_f|
    std::vector<double> line_loss_kw;
    double total_loss_kw = 0.0;
    double slack_injection_kw = 0.0; // power drawn from the substation
    bool converged = false;
    int iterations = 0;
};

// d|I_f| / dP_node and dLoss / dP_node (per kW of nodal active power, with
// reactive power tied to the same power factor) at a converged operating
// point. Slack column is zero.
struct SensitivityMatrix {
    Eigen::MatrixXd current_per_kw; // lines x nodes
    Eigen::VectorXd loss_per_kw;    // nodes, in kW loss per kW load
};

struct SweepOptions {
    double tol = 1e-6;        // pu voltage mismatch between sweeps
    int max_iter = 100;
    double power_factor = 0.95; // lagging; Q = P tan(acos(pf))
};

// Injections: per-node net active power in kW for one slot, consumption
// positive. The slack entry is ignored.
FlowSolution solve_load_flow(const FeederTopology& feeder,
                             const Eigen::VectorXd& injections_kw,
                             const SweepOptions& opts = {});

// Analytic chain-rule linearization down the tree at the given converged
// solution. Independent of the finite-difference route used to verify it.
SensitivityMatrix current_sensitivities(const FeederTopology& feeder,
                                        const Eigen::VectorXd& injections_kw,
                                        const FlowSolution& solution,
                                        const SweepOptions& opts = {});

// Lines on the path from the slack node to `node`, as indices into
// feeder.lines. Exposed for tests of the tree-path structure.
std::vector<int> path_lines(const FeederTopology& feeder, int node);

} // namespace gridsched::loadflow
