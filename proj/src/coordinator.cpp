#include "gridsched/coordinator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>

namespace gridsched::coord {

const char* mode_name(Mode mode) {
    switch (mode) {
        case Mode::Uncoordinated: return "uncoordinated";
        case Mode::Global: return "coordinated-global";
        case Mode::Individualized: return "coordinated-individualized";
        case Mode::CentralizedOracle: return "centralized-oracle";
    }
    return "?";
}

namespace {

struct NetworkSeries {
    Series losses_kw;
    Series total_kw; // sum of home loads plus losses
    Matrix currents; // lines x T
};

NetworkSeries network_series(const FeederTopology& feeder,
                             const std::vector<int>& home_nodes,
                             const Matrix& loads) {
    const int T = static_cast<int>(loads.cols());
    const int nf = static_cast<int>(feeder.lines.size());
    NetworkSeries ns;
    ns.losses_kw = Series::Zero(T);
    ns.total_kw = Series::Zero(T);
    ns.currents = Matrix::Zero(nf, T);
    for (int t = 0; t < T; ++t) {
        Eigen::VectorXd inj = Eigen::VectorXd::Zero(feeder.num_nodes);
        for (int h = 0; h < loads.rows(); ++h) inj[home_nodes[h]] += loads(h, t);
        const auto sol = loadflow::solve_load_flow(feeder, inj);
        ns.losses_kw[t] = sol.total_loss_kw;
        ns.total_kw[t] = loads.col(t).sum() + sol.total_loss_kw;
        for (int f = 0; f < nf; ++f) ns.currents(f, t) = sol.line_current_pu[f];
    }
    return ns;
}

std::vector<int> nodes_of(const Scenario& s) {
    std::vector<int> nodes;
    nodes.reserve(s.homes.size());
    for (const auto& h : s.homes) nodes.push_back(h.node);
    return nodes;
}

Eigen::VectorXd compute_bills(const Matrix& loads,
                              const tariff::PriceSchedule& prices, double dt) {
    Eigen::VectorXd bills = Eigen::VectorXd::Zero(loads.rows());
    for (int h = 0; h < loads.rows(); ++h)
        for (int t = 0; t < loads.cols(); ++t)
            bills[h] +=
                hems::stage_cost(loads(h, t), prices.buy(h, t), prices.sell(h, t), dt);
    return bills;
}

double dayahead_cost(const Series& g_kwh, const TariffParams& tf) {
    double c = 0.0;
    for (Eigen::Index t = 0; t < g_kwh.size(); ++t)
        c += tf.quad_a * g_kwh[t] * g_kwh[t] + tf.lin_b * g_kwh[t] + tf.const_c;
    return c;
}

// Fills everything in a RunResult that derives from loads + prices + plan.
void finalize_result(RunResult& r, const ValidatedScenario& vs) {
    const Scenario& s = vs.scenario;
    const double dt = s.grid.slot_hours;
    const auto ns = network_series(s.feeder, nodes_of(s), r.loads);
    r.losses_kw = ns.losses_kw;
    r.total_load_kw = ns.total_kw;
    r.line_current_pu = ns.currents;
    r.bills = compute_bills(r.loads, r.prices, dt);

    double rt = 0.0;
    for (Eigen::Index t = 0; t < r.planned_kwh.size(); ++t)
        rt += dno::realtime_cost(r.total_load_kw[t] * dt, r.planned_kwh[t],
                                 s.tariff.rt_buy[t], s.tariff.rt_sell[t]);
    r.cost.realtime_cost_cents = rt;
    r.cost.customer_bills_cents = r.bills.sum();
    r.cost.dayahead_cost_cents = dayahead_cost(r.planned_kwh, s.tariff);
    r.cost.profit_cents = dno::dno_profit(r.cost.customer_bills_cents,
                                          r.cost.dayahead_cost_cents,
                                          r.cost.realtime_cost_cents);

    auto& b = r.bundle;
    b.par = metrics::par(r.total_load_kw);
    b.total_losses_kwh = r.losses_kw.sum() * dt;
    b.realtime_cost_cents = rt;
    b.per_home_bills = r.bills;
    b.dno_profit_cents = r.cost.profit_cents;
    b.max_line_loading_pu = r.line_current_pu.rowwise().maxCoeff();
}

hems::HomePrices prices_for_home(const tariff::PriceSchedule& ps, int h, int T) {
    hems::HomePrices hp;
    hp.buy = Series(T);
    hp.sell = Series(T);
    for (int t = 0; t < T; ++t) {
        hp.buy[t] = ps.buy(h, t);
        hp.sell[t] = ps.sell(h, t);
    }
    return hp;
}

// All homes solved in parallel; each call is a pure function of its inputs.
std::vector<hems::HouseholdSchedule> solve_all_homes(
    const Scenario& s, const tariff::PriceSchedule& prices,
    const std::vector<hems::ProximalTerms>* prox, const RunOptions& opts) {
    const int H = static_cast<int>(s.homes.size());
    const int T = s.grid.num_slots;
    std::vector<std::future<hems::HouseholdSchedule>> futures;
    futures.reserve(H);
    for (int h = 0; h < H; ++h)
        futures.push_back(std::async(std::launch::async, [&, h] {
            return hems::solve_household(s.homes[h], s.grid,
                                         prices_for_home(prices, h, T),
                                         prox ? &(*prox)[h] : nullptr,
                                         hems::SolveOptions{opts.soc_levels});
        }));
    std::vector<hems::HouseholdSchedule> out;
    out.reserve(H);
    for (auto& f : futures) out.push_back(f.get());
    return out;
}

// Iterations without a new best residual before the negotiation is declared
// stalled and the settling phase starts.
constexpr int kStaleLimit = 25;

Matrix loads_of(const std::vector<hems::HouseholdSchedule>& schedules, int T) {
    Matrix loads(schedules.size(), T);
    for (size_t h = 0; h < schedules.size(); ++h)
        loads.row(h) = schedules[h].net_load_kw.matrix().transpose();
    return loads;
}

} // namespace

DayAheadPlan day_ahead_plan(const ValidatedScenario& vs) {
    const Scenario& s = vs.scenario;
    const int T = s.grid.num_slots;
    DayAheadPlan plan;
    if (s.forecast_demand) {
        plan.planned_kwh = *s.forecast_demand;
    } else {
        Matrix avg(s.homes.size(), T);
        for (size_t h = 0; h < s.homes.size(); ++h)
            avg.row(h) = average_net_demand(s.homes[h], s.grid).matrix().transpose();
        Series losses = Series::Zero(T);
        if (s.homes.size() > 0)
            losses = network_series(s.feeder, nodes_of(s), avg).losses_kw;
        plan.planned_kwh =
            tariff::forecast_demand(avg, losses, s.tariff.dg_power, s.grid.slot_hours);
    }
    plan.base_price = Series(T);
    for (int t = 0; t < T; ++t)
        plan.base_price[t] = tariff::day_ahead_price(plan.planned_kwh[t], s.tariff);
    return plan;
}

RunResult run_uncoordinated(const ValidatedScenario& vs, const RunOptions& opts) {
    const Scenario& s = vs.scenario;
    const int T = s.grid.num_slots;
    const auto plan = day_ahead_plan(vs);

    RunResult r;
    r.mode = Mode::Uncoordinated;
    r.planned_kwh = plan.planned_kwh;
    r.prices = tariff::PriceSchedule::flat(plan.base_price, s.tariff.fit_rate);
    r.schedules = solve_all_homes(s, r.prices, nullptr, opts);
    r.loads = loads_of(r.schedules, T);
    for (const auto& h : s.homes) r.home_ids.push_back(h.id);
    finalize_result(r, vs);
    return r;
}

Matrix dual_update(const Matrix& duals, const Matrix& loads, const Matrix& suggested) {
    return duals + loads - suggested;
}

double adapt_rho(double rho, double primal_norm, double dual_norm,
                 const AdmmParams& params) {
    if (primal_norm > params.gamma * dual_norm) return rho * params.tau_incr;
    if (dual_norm > params.gamma * primal_norm) return rho / params.tau_decr;
    return rho;
}

std::pair<double, double> residuals(const Matrix& loads, const Matrix& suggested,
                                    const Matrix& suggested_prev, double rho) {
    return {(loads - suggested).norm(), rho * (suggested - suggested_prev).norm()};
}

namespace {

// One full negotiation with the given penalty parameters. The public entry
// point below decides how many of these to run.
RunResult run_negotiation(const ValidatedScenario& vs, Mode mode,
                          const RunOptions& opts, const AdmmParams& ap) {
    const Scenario& s = vs.scenario;
    const int H = static_cast<int>(s.homes.size());
    const int T = s.grid.num_slots;
    const double dt = s.grid.slot_hours;
    const auto home_nodes = nodes_of(s);

    RunResult unc = run_uncoordinated(vs, opts);
    if (H == 0) {
        unc.mode = mode;
        return unc; // degenerate scenario: nothing to coordinate
    }

    // Baselines for every incentive computation.
    const Matrix loads_unc = unc.loads;
    const Series p_unc = unc.total_load_kw; // includes losses
    const Eigen::VectorXd bills_unc = unc.bills;

    const int eps_rows = (mode == Mode::Individualized) ? H : 1;
    tariff::PriceSchedule prices{unc.prices.base, unc.prices.fit,
                                 Matrix::Zero(eps_rows, T),
                                 Matrix::Zero(eps_rows, T)};

    Matrix loads = loads_unc;
    Matrix suggested = loads_unc;
    Matrix duals = Matrix::Zero(H, T);
    double rho = ap.rho_init;

    auto lin = dno::linearize_network(s.feeder, home_nodes, suggested);

    RunResult r;
    r.mode = mode;
    r.home_ids = unc.home_ids;
    r.planned_kwh = unc.planned_kwh;

    // Once the settle phase starts, the suggestion is pinned onto the frozen
    // customer loads, so whichever iterate gets frozen determines the final
    // outcome exactly. Iterates are therefore ranked by the outcome itself:
    // the operator's real-time balancing cost at the customers' actual loads,
    // plus the fairness pressure on the resulting bills, plus a heavy charge
    // for true line-limit violations. The residual still drives the stall
    // detector, but not the choice of iterate.
    const auto iterate_merit = [&](const Matrix& cand_loads,
                                   const tariff::PriceSchedule& cand_prices) {
        const auto ns = network_series(s.feeder, home_nodes, cand_loads);
        double m = 0.0;
        for (int t = 0; t < T; ++t)
            m += dno::realtime_cost(ns.total_kw[t] * dt, r.planned_kwh[t],
                                    s.tariff.rt_buy[t], s.tariff.rt_sell[t]);
        const Eigen::VectorXd bills = compute_bills(cand_loads, cand_prices, dt);
        Eigen::VectorXd rel = Eigen::VectorXd::Zero(H);
        for (int h = 0; h < H; ++h)
            if (std::abs(bills_unc[h]) > 1e-9)
                rel[h] = (bills_unc[h] - bills[h]) / bills_unc[h];
        const double mean_rel = rel.mean();
        const double spread = (rel.array() - mean_rel).abs().mean();
        const double excess = std::max(0.0, spread - ap.fairness_eps);
        m += ap.fairness_weight * excess * excess;
        // Participation: a round that charges any home more than its
        // stand-alone bill is implemented only when nothing better exists.
        // A generous scheme (small response factor w) has the margin to keep
        // every customer whole; as w approaches 1 the incentive budget
        // vanishes and the guarantee fades with it.
        m += 1e4 * (1.0 - s.tariff.incentive_w) * (-rel.array()).max(0.0).sum();
        double viol = 0.0;
        for (int t = 0; t < T; ++t)
            for (int f = 0; f < ns.currents.rows(); ++f)
                viol = std::max(viol, ns.currents(f, t) -
                                          s.feeder.lines[f].current_limit_pu);
        m += 1e4 * viol;
        // Peak-to-average pressure: flatter outcomes defer network
        // reinforcement, which the balancing cost alone does not capture.
        m += 30.0 * metrics::par(ns.total_kw);
        return m;
    };

    double best_residual = std::numeric_limits<double>::infinity();
    double best_merit = std::numeric_limits<double>::infinity();
    Matrix best_loads = loads;
    tariff::PriceSchedule best_prices = prices;
    std::vector<hems::HouseholdSchedule> best_schedules = unc.schedules;

    std::vector<hems::HouseholdSchedule> schedules = unc.schedules;
    bool converged = false;
    // The household subproblems are discrete (appliance starts, battery steps
    // on a grid), so the negotiated compromise usually sits off the customers'
    // decision lattice and the residuals plateau instead of vanishing. Once
    // the best residual stops improving, the schedules are frozen at the best
    // iterate -- the customers' last genuine response -- and the remaining
    // iterations only reconcile the operator's side, which is continuous and
    // settles exactly.
    bool settling = false;
    int stale = 0;
    int k = 0;
    for (k = 1; k <= ap.max_iters; ++k) {
        // (a) customer updates, in parallel, against the current suggestion.
        if (!settling) {
            std::vector<hems::ProximalTerms> prox(H);
            for (int h = 0; h < H; ++h)
                prox[h] = hems::ProximalTerms{suggested.row(h).transpose().array(),
                                              duals.row(h).transpose().array(), rho,
                                              ap.alpha};
            schedules = solve_all_homes(s, prices, &prox, opts);
            loads = loads_of(schedules, T);
        }

        // (b) incentive refresh from the current suggestion. The refreshed
        // values are blended into the active schedule rather than applied
        // wholesale: an abrupt price change makes every household re-plan
        // from scratch, which in turn moves the suggestion, and the loop
        // never settles. Smoothing leaves the fixed point untouched (a
        // stable suggestion yields a stable target) but kills the feedback
        // oscillation.
        if (!opts.disable_price_adjustment && !settling) {
            const auto ns_hat = network_series(s.feeder, home_nodes, suggested);
            Matrix adj_target = Matrix::Zero(eps_rows, T);
            Matrix fit_target = Matrix::Zero(eps_rows, T);
            // Deviation-ratio denominators floored at a quarter of the mean
            // baseline: PV-heavy profiles cross zero, and the raw per-slot
            // ratio is meaningless there.
            const double net_floor = 0.25 * p_unc.abs().mean();
            Eigen::VectorXd home_floor(H);
            for (int h = 0; h < H; ++h)
                home_floor[h] = 0.25 * loads_unc.row(h).cwiseAbs().mean();
            for (int t = 0; t < T; ++t) {
                const double p_hat = ns_hat.total_kw[t];
                const double delta = p_hat - p_unc[t];
                if (mode == Mode::Global) {
                    const double sg = tariff::reward_coeff_global(
                        p_hat, p_unc[t], s.tariff.incentive_w, false, net_floor);
                    adj_target(0, t) = tariff::price_gap(
                        sg, delta, s.tariff.rt_buy[t], s.tariff.rt_sell[t]);
                    const double sf = tariff::reward_coeff_global(
                        p_hat, p_unc[t], s.tariff.incentive_w, true, net_floor);
                    fit_target(0, t) = std::max(
                        0.0, -tariff::price_gap(sf, delta, s.tariff.rt_buy[t],
                                                s.tariff.rt_sell[t]));
                } else {
                    for (int h = 0; h < H; ++h) {
                        const double sg = tariff::reward_coeff_individual(
                            suggested(h, t), loads_unc(h, t), delta,
                            s.tariff.incentive_w, false, home_floor[h]);
                        adj_target(h, t) = tariff::price_gap(
                            sg, delta, s.tariff.rt_buy[t], s.tariff.rt_sell[t]);
                        const double sf = tariff::reward_coeff_individual(
                            suggested(h, t), loads_unc(h, t), delta,
                            s.tariff.incentive_w, true, home_floor[h]);
                        fit_target(h, t) = std::max(
                            0.0, -tariff::price_gap(sf, delta, s.tariff.rt_buy[t],
                                                    s.tariff.rt_sell[t]));
                    }
                }
            }
            const double beta = opts.price_smoothing;
            prices.adjust += beta * (adj_target - prices.adjust);
            prices.fit_adjust += beta * (fit_target - prices.fit_adjust);
        }

        // (c) DNO update; re-linearize when the true flows disagree.
        dno::DnoProblem prob;
        prob.loads = loads;
        prob.duals = duals;
        prob.rho = rho;
        prob.alpha = ap.alpha;
        prob.eps_adjust = prices.adjust;
        prob.planned_kwh = r.planned_kwh;
        prob.rt_buy = s.tariff.rt_buy;
        prob.rt_sell = s.tariff.rt_sell;
        prob.slot_hours = dt;
        prob.network = lin;
        // Keep suggestions within an order of magnitude of real household
        // loads; the network linearization is only locally valid anyway.
        prob.trust_radius_kw = 10.0 + 2.0 * loads_unc.cwiseAbs().maxCoeff();
        prob.fairness_eps = ap.fairness_eps;
        // The fairness pressure steers the negotiation while customers still
        // respond; once their schedules are frozen the final rebates are
        // fixed, and leaving the kinked penalty in only keeps the suggestion
        // from settling onto the schedules.
        prob.fairness_weight = settling ? 0.0 : ap.fairness_weight;
        prob.bills_uncoordinated = bills_unc;
        prob.prices = prices;

        dno::DnoIterate iterate = dno::dno_update(prob);
        for (int relin = 0; relin < 3; ++relin) {
            const auto ns = network_series(s.feeder, home_nodes, iterate.suggested_loads);
            double true_viol = 0.0;
            for (int t = 0; t < T; ++t)
                for (int f = 0; f < ns.currents.rows(); ++f)
                    true_viol = std::max(true_viol,
                                         ns.currents(f, t) -
                                             s.feeder.lines[f].current_limit_pu);
            if (true_viol <= 5e-3) break;
            lin = dno::linearize_network(s.feeder, home_nodes, iterate.suggested_loads);
            prob.network = lin;
            iterate = dno::dno_update(prob);
        }

        const Matrix suggested_prev = suggested;
        suggested = iterate.suggested_loads;

        // (d) dual ascent and (e) residual-balanced penalty adaptation.
        duals = dual_update(duals, loads, suggested);
        const auto [primal, dual] = residuals(loads, suggested, suggested_prev, rho);

        r.iteration_log.push_back(IterationRecord{
            k, rho, primal, dual, iterate.objective_value,
            compute_bills(loads, prices, dt).sum()});

        const double score = std::max(primal, dual);
        if (score < best_residual) {
            best_residual = score;
            stale = 0;
        } else {
            ++stale;
        }
        if (!settling) {
            const double merit = iterate_merit(loads, prices);
            if (merit < best_merit) {
                best_merit = merit;
                best_loads = loads;
                best_prices = prices;
                best_schedules = schedules;
            }
        }
        if (primal <= ap.eps_primal && dual <= ap.eps_dual) {
            converged = true;
            break;
        }
        // Settle when the negotiation stalls, or close enough to the
        // iteration budget that reconciliation must start now to finish.
        if (!settling && (stale >= kStaleLimit || ap.max_iters - k <= 60)) {
            settling = true;
            loads = best_loads;
            prices = best_prices;
            schedules = best_schedules;
        }

        // While settling only the operator side moves, so the penalty can be
        // raised aggressively to pin the suggestion onto the frozen
        // schedules; lowering it would let the suggestion drift off again.
        const double rho_new =
            settling ? (primal > dual ? rho * ap.tau_incr : rho)
                     : adapt_rho(rho, primal, dual, s.admm);
        if (rho_new != rho) {
            duals *= rho / rho_new; // keep the unscaled multiplier rho*u intact
            rho = rho_new;
        }
    }

    r.converged = converged;
    r.iterations = std::min(k, ap.max_iters);
    if (converged) {
        r.loads = loads;
        r.prices = prices;
        r.schedules = std::move(schedules);
    } else {
        r.loads = best_loads;
        r.prices = best_prices;
        r.schedules = std::move(best_schedules);
    }
    finalize_result(r, vs);
    return r;
}

} // namespace

RunResult run_coordinated(const ValidatedScenario& vs, Mode mode,
                          const RunOptions& opts) {
    const Scenario& s = vs.scenario;
    if (!opts.disable_price_adjustment)
        return run_negotiation(vs, mode, opts, s.admm);

    // Plain negotiations (no price adjustment) optimize a fixed shared
    // objective, but the discrete household decision lattices give the
    // consensus iteration spurious fixed points. Run the negotiation under
    // several penalty schedules and keep the best converged agreement, judged
    // by the shared objective itself.
    RunResult best;
    bool have_any = false;
    bool have_converged = false;
    double best_obj = std::numeric_limits<double>::infinity();
    for (double mult : {1.0, 0.2, 5.0, 0.04}) {
        for (double tau : {2.0, 1.3, 1.6}) {
            AdmmParams ap = s.admm;
            ap.rho_init = s.admm.rho_init * mult;
            ap.tau_incr = tau;
            ap.tau_decr = tau;
            RunResult r = run_negotiation(vs, mode, opts, ap);
            const double obj =
                ap.alpha * r.bills.sum() + r.cost.realtime_cost_cents;
            if (!have_any) {
                best = r;
                have_any = true;
                if (r.converged) {
                    have_converged = true;
                    best_obj = obj;
                }
                continue;
            }
            if (r.converged && (!have_converged || obj < best_obj)) {
                best = std::move(r);
                have_converged = true;
                best_obj = obj;
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Centralized oracle: exhaustive enumeration over the joint decision space.

namespace {

struct HomeCandidates {
    std::vector<Series> load;      // net load per candidate
    std::vector<double> base_cost; // J_h at base prices
};

// Enumerates every feasible (appliance start combo) x (battery SOC path) of
// one home.
HomeCandidates enumerate_home(const Home& home, const TimeGrid& grid,
                              const hems::HomePrices& prices, int soc_levels,
                              long long cap) {
    const int T = grid.num_slots;
    const double dt = grid.slot_hours;
    const int A = static_cast<int>(home.appliances.size());

    // Appliance start combinations.
    std::vector<std::vector<int>> starts(A);
    long long combos = 1;
    for (int a = 0; a < A; ++a) {
        const auto& ap = home.appliances[a];
        for (int t = ap.window_start; t <= ap.last_start_slot(); ++t)
            starts[a].push_back(t);
        combos *= static_cast<long long>(starts[a].size());
        if (combos > cap) throw TooLarge();
    }

    // Battery SOC paths over the grid.
    std::vector<std::vector<int>> paths; // sequence of level deltas
    std::vector<int> deltas = {0};
    std::vector<double> delta_power = {0.0};
    int levels = 1, init_idx = 0;
    double lo = 0.0, gstep = 0.0;
    if (home.battery && home.battery->capacity_kwh > 0) {
        const auto& b = *home.battery;
        levels = std::max(2, soc_levels);
        lo = b.soc_min;
        gstep = (b.soc_max - b.soc_min) / (levels - 1);
        init_idx = static_cast<int>(std::llround((b.soc_initial - lo) / gstep));
        deltas.clear();
        delta_power.clear();
        for (int d = -(levels - 1); d <= levels - 1; ++d) {
            const double frac = d * gstep;
            if (frac < b.step_min - 1e-12 || frac > b.step_max + 1e-12) continue;
            deltas.push_back(d);
            delta_power.push_back(hems::battery_power(b, frac, dt));
        }
    }
    {
        std::vector<int> path;
        std::function<void(int, int)> dfs = [&](int t, int soc) {
            if (static_cast<long long>(paths.size()) * combos > cap) throw TooLarge();
            if (t == T) {
                paths.push_back(path);
                return;
            }
            for (size_t di = 0; di < deltas.size(); ++di) {
                const int nx = soc + deltas[di];
                if (nx < 0 || nx >= levels) continue;
                path.push_back(static_cast<int>(di));
                dfs(t + 1, nx);
                path.pop_back();
            }
        };
        dfs(0, init_idx);
    }

    HomeCandidates cands;
    std::vector<int> combo(A, 0);
    while (true) {
        Series app_load = home.base_load_kw - home.pv_kw;
        for (int a = 0; a < A; ++a) {
            const auto& ap = home.appliances[a];
            const int s0 = starts[a][combo[a]];
            for (int t = s0; t < s0 + ap.job_length_slots; ++t)
                app_load[t] += ap.power_kw;
        }
        for (const auto& path : paths) {
            Series load = app_load;
            for (int t = 0; t < T; ++t) load[t] += delta_power[path[t]];
            double cost = 0.0;
            for (int t = 0; t < T; ++t)
                cost += hems::stage_cost(load[t], prices.buy[t], prices.sell[t], dt);
            cands.load.push_back(std::move(load));
            cands.base_cost.push_back(cost);
        }
        int a = 0;
        for (; a < A; ++a) {
            if (++combo[a] < static_cast<int>(starts[a].size())) break;
            combo[a] = 0;
        }
        if (a == A) break;
    }
    return cands;
}

} // namespace

RunResult centralized_oracle(const ValidatedScenario& vs, const OracleOptions& opts) {
    const Scenario& s = vs.scenario;
    const int H = static_cast<int>(s.homes.size());
    const int T = s.grid.num_slots;
    const double dt = s.grid.slot_hours;
    const auto home_nodes = nodes_of(s);
    const auto plan = day_ahead_plan(vs);
    const auto prices = tariff::PriceSchedule::flat(plan.base_price, s.tariff.fit_rate);

    std::vector<HomeCandidates> cands;
    long long total = 1;
    for (int h = 0; h < H; ++h) {
        cands.push_back(enumerate_home(s.homes[h], s.grid, prices_for_home(prices, h, T),
                                       opts.soc_levels, opts.candidate_cap));
        total *= static_cast<long long>(cands.back().load.size());
        if (total > opts.candidate_cap) throw TooLarge();
    }

    double best_obj = std::numeric_limits<double>::infinity();
    std::vector<int> best_pick(H, 0), pick(H, 0);

    auto evaluate = [&]() {
        Matrix loads(H, T);
        double customer_cost = 0.0;
        for (int h = 0; h < H; ++h) {
            loads.row(h) = cands[h].load[pick[h]].matrix().transpose();
            customer_cost += cands[h].base_cost[pick[h]];
        }
        double obj = s.admm.alpha * customer_cost;
        for (int t = 0; t < T; ++t) {
            Eigen::VectorXd inj = Eigen::VectorXd::Zero(s.feeder.num_nodes);
            for (int h = 0; h < H; ++h) inj[home_nodes[h]] += loads(h, t);
            const auto sol = loadflow::solve_load_flow(s.feeder, inj);
            for (size_t f = 0; f < s.feeder.lines.size(); ++f)
                if (sol.line_current_pu[f] >
                    s.feeder.lines[f].current_limit_pu + 1e-9)
                    return; // infeasible candidate
            obj += dno::realtime_cost((loads.col(t).sum() + sol.total_loss_kw) * dt,
                                      plan.planned_kwh[t], s.tariff.rt_buy[t],
                                      s.tariff.rt_sell[t]);
        }
        if (obj < best_obj) {
            best_obj = obj;
            best_pick = pick;
        }
    };

    if (H == 0) {
        RunResult r;
        r.mode = Mode::CentralizedOracle;
        r.planned_kwh = plan.planned_kwh;
        r.prices = prices;
        r.loads = Matrix::Zero(0, T);
        finalize_result(r, vs);
        return r;
    }

    // Odometer over the joint candidate space.
    while (true) {
        evaluate();
        int h = 0;
        for (; h < H; ++h) {
            if (++pick[h] < static_cast<int>(cands[h].load.size())) break;
            pick[h] = 0;
        }
        if (h == H) break;
    }
    if (!std::isfinite(best_obj))
        throw InvariantError({"oracle found no feasible joint schedule"});

    RunResult r;
    r.mode = Mode::CentralizedOracle;
    r.planned_kwh = plan.planned_kwh;
    r.prices = prices;
    r.loads = Matrix(H, T);
    for (int h = 0; h < H; ++h) {
        r.loads.row(h) = cands[h].load[best_pick[h]].matrix().transpose();
        r.home_ids.push_back(s.homes[h].id);
    }
    r.cost.customer_bills_cents = 0.0; // filled by finalize_result
    finalize_result(r, vs);
    // Stash the oracle objective in the log for cross-checks.
    r.iteration_log.push_back(IterationRecord{0, 0.0, 0.0, 0.0, best_obj, r.bills.sum()});
    return r;
}

} // namespace gridsched::coord
