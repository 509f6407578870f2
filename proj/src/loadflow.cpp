#include "gridsched/loadflow.hpp"

#include <algorithm>
#include <cmath>

namespace gridsched::loadflow {

namespace {

using cplx = std::complex<double>;

struct Tree {
    std::vector<int> parent;       // parent node of each node (slack: -1)
    std::vector<int> parent_line;  // line index feeding each node (slack: -1)
    std::vector<int> order;        // nodes in BFS order from the slack
};

Tree build_tree(const FeederTopology& feeder) {
    if (!is_radial(feeder)) throw NonRadialError();
    const int n = feeder.num_nodes;
    std::vector<std::vector<std::pair<int, int>>> adj(n); // (neighbor, line)
    for (size_t f = 0; f < feeder.lines.size(); ++f) {
        const auto& l = feeder.lines[f];
        adj[l.from_node].push_back({l.to_node, static_cast<int>(f)});
        adj[l.to_node].push_back({l.from_node, static_cast<int>(f)});
    }
    Tree tr;
    tr.parent.assign(n, -1);
    tr.parent_line.assign(n, -1);
    tr.order.reserve(n);
    std::vector<bool> seen(n, false);
    std::vector<int> queue = {0};
    seen[0] = true;
    for (size_t q = 0; q < queue.size(); ++q) {
        const int v = queue[q];
        tr.order.push_back(v);
        for (auto [w, f] : adj[v]) {
            if (seen[w]) continue;
            seen[w] = true;
            tr.parent[w] = v;
            tr.parent_line[w] = f;
            queue.push_back(w);
        }
    }
    return tr;
}

} // namespace

std::vector<int> path_lines(const FeederTopology& feeder, int node) {
    const Tree tr = build_tree(feeder);
    std::vector<int> path;
    for (int v = node; tr.parent[v] != -1; v = tr.parent[v])
        path.push_back(tr.parent_line[v]);
    std::reverse(path.begin(), path.end());
    return path;
}

FlowSolution solve_load_flow(const FeederTopology& feeder,
                             const Eigen::VectorXd& injections_kw,
                             const SweepOptions& opts) {
    const Tree tr = build_tree(feeder);
    const int n = feeder.num_nodes;
    const int nf = static_cast<int>(feeder.lines.size());
    const double base_kw = feeder.base_mva * 1000.0;
    const double tan_phi =
        std::tan(std::acos(std::clamp(opts.power_factor, 1e-6, 1.0)));

    // Constant-power nodal injections in pu (consumption positive).
    std::vector<cplx> s_pu(n, cplx(0, 0));
    for (int v = 1; v < n; ++v) {
        const double p = injections_kw[v] / base_kw;
        s_pu[v] = cplx(p, p * tan_phi);
    }

    std::vector<cplx> voltage(n, cplx(1.0, 0.0));
    std::vector<cplx> line_current(nf, cplx(0, 0));
    std::vector<cplx> node_current(n);

    FlowSolution sol;
    sol.converged = false;
    int it = 0;
    for (; it < opts.max_iter; ++it) {
        // Backward sweep: nodal currents, then branch currents leaf-to-root.
        // The current on the line feeding node v carries v's whole subtree.
        for (int v = 0; v < n; ++v)
            node_current[v] = std::conj(s_pu[v] / voltage[v]);
        std::fill(line_current.begin(), line_current.end(), cplx(0, 0));
        std::vector<cplx> subtree = node_current;
        for (auto rit = tr.order.rbegin(); rit != tr.order.rend(); ++rit) {
            const int v = *rit;
            if (v == 0) continue;
            line_current[tr.parent_line[v]] = subtree[v];
            subtree[tr.parent[v]] += subtree[v];
        }

        // Forward sweep: voltage drops root-to-leaf.
        double mismatch = 0.0;
        for (int idx = 1; idx < n; ++idx) {
            const int v = tr.order[idx];
            const auto& l = feeder.lines[tr.parent_line[v]];
            const cplx z(l.resistance_pu, l.reactance_pu);
            const cplx vnew = voltage[tr.parent[v]] - z * line_current[tr.parent_line[v]];
            mismatch = std::max(mismatch, std::abs(vnew - voltage[v]));
            voltage[v] = vnew;
            if (std::abs(vnew) < 0.5) throw DivergenceError();
        }
        if (mismatch < opts.tol) {
            sol.converged = true;
            ++it;
            break;
        }
    }

    sol.iterations = it;
    sol.node_voltage_pu = voltage;
    sol.line_current_pu.resize(nf);
    sol.line_loss_kw.resize(nf);
    sol.total_loss_kw = 0.0;
    for (int f = 0; f < nf; ++f) {
        const double mag = std::abs(line_current[f]);
        sol.line_current_pu[f] = mag;
        sol.line_loss_kw[f] = mag * mag * feeder.lines[f].resistance_pu * base_kw;
        sol.total_loss_kw += sol.line_loss_kw[f];
    }
    // Slack power: head-line flows out of node 0.
    cplx s_slack(0, 0);
    for (size_t f = 0; f < feeder.lines.size(); ++f) {
        const auto& l = feeder.lines[f];
        if (l.from_node == 0)
            s_slack += voltage[0] * std::conj(line_current[f]);
        else if (l.to_node == 0)
            s_slack -= voltage[0] * std::conj(line_current[f]);
    }
    sol.slack_injection_kw = s_slack.real() * base_kw;
    return sol;
}

SensitivityMatrix current_sensitivities(const FeederTopology& feeder,
                                        const Eigen::VectorXd& injections_kw,
                                        const FlowSolution& solution,
                                        const SweepOptions& opts) {
    if (!solution.converged) throw NotConvergedError();
    const Tree tr = build_tree(feeder);
    const int n = feeder.num_nodes;
    const int nf = static_cast<int>(feeder.lines.size());
    const double base_kw = feeder.base_mva * 1000.0;
    const double tan_phi =
        std::tan(std::acos(std::clamp(opts.power_factor, 1e-6, 1.0)));

    // Reconstruct complex line currents from the converged voltages.
    std::vector<cplx> node_current(n, cplx(0, 0));
    for (int v = 1; v < n; ++v) {
        const double p = injections_kw[v] / base_kw;
        const cplx s(p, p * tan_phi);
        node_current[v] = std::conj(s / solution.node_voltage_pu[v]);
    }
    std::vector<cplx> line_current(nf, cplx(0, 0));
    std::vector<cplx> subtree = node_current;
    for (auto rit = tr.order.rbegin(); rit != tr.order.rend(); ++rit) {
        const int v = *rit;
        if (v == 0) continue;
        line_current[tr.parent_line[v]] = subtree[v];
        subtree[tr.parent[v]] += subtree[v];
    }

    SensitivityMatrix sm;
    sm.current_per_kw = Eigen::MatrixXd::Zero(nf, n);
    sm.loss_per_kw = Eigen::VectorXd::Zero(n);

    // Exact differentiation of the sweep fixed point. Perturbing node p's
    // active power by 1 kW perturbs its complex power by dS; the induced
    // current and voltage perturbations solve the linear system obtained by
    // differentiating the backward/forward sweep equations:
    //   dI_inj,v = conj(dS_v)/conj(V_v) - conj(S_v) conj(dV_v)/conj(V_v)^2
    //   dI_f     = sum over the subtree of dI_inj
    //   dV_v     = dV_parent - Z_f dI_f
    // Iterating this contracts exactly like the sweep itself.
    std::vector<cplx> dI_inj(n), dV(n), dI(nf), dsubtree(n);
    for (int p = 1; p < n; ++p) {
        const cplx ds(1.0 / base_kw, tan_phi / base_kw);
        std::fill(dV.begin(), dV.end(), cplx(0, 0));
        for (int pass = 0; pass < 500; ++pass) {
            for (int v = 0; v < n; ++v) {
                const cplx cv = std::conj(solution.node_voltage_pu[v]);
                const double pw = (v == 0) ? 0.0 : injections_kw[v] / base_kw;
                const cplx s(pw, pw * tan_phi);
                dI_inj[v] = -std::conj(s) * std::conj(dV[v]) / (cv * cv);
            }
            dI_inj[p] += std::conj(ds) / std::conj(solution.node_voltage_pu[p]);
            dsubtree = dI_inj;
            std::fill(dI.begin(), dI.end(), cplx(0, 0));
            for (auto rit = tr.order.rbegin(); rit != tr.order.rend(); ++rit) {
                const int v = *rit;
                if (v == 0) continue;
                dI[tr.parent_line[v]] = dsubtree[v];
                dsubtree[tr.parent[v]] += dsubtree[v];
            }
            double mismatch = 0.0;
            for (int idx = 1; idx < n; ++idx) {
                const int v = tr.order[idx];
                const auto& l = feeder.lines[tr.parent_line[v]];
                const cplx z(l.resistance_pu, l.reactance_pu);
                const cplx dvnew = dV[tr.parent[v]] - z * dI[tr.parent_line[v]];
                mismatch = std::max(mismatch, std::abs(dvnew - dV[v]));
                dV[v] = dvnew;
            }
            if (mismatch < 1e-14) break;
        }

        double dloss_pu = 0.0;
        for (int f = 0; f < nf; ++f) {
            const double mag = std::abs(line_current[f]);
            const double re_conj = line_current[f].real() * dI[f].real() +
                                   line_current[f].imag() * dI[f].imag();
            // |.| is nondifferentiable at zero; use 0 there (central-difference
            // convention, and currents that small never bind a limit).
            sm.current_per_kw(f, p) = (mag > 1e-9) ? re_conj / mag : 0.0;
            dloss_pu += 2.0 * feeder.lines[f].resistance_pu * re_conj;
        }
        sm.loss_per_kw[p] = dloss_pu * base_kw; // kW loss per kW load
    }
    return sm;
}

} // namespace gridsched::loadflow
