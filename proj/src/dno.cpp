#include "gridsched/dno.hpp"

#include <cmath>

namespace gridsched::dno {

double realtime_cost(double total_kwh, double planned_kwh, double rt_buy,
                     double rt_sell) {
    const double gap = total_kwh - planned_kwh;
    return rt_buy * std::max(0.0, gap) + rt_sell * std::max(0.0, -gap);
}

double dno_profit(double customer_bills, double dayahead_cost, double realtime_cost) {
    return customer_bills - dayahead_cost - realtime_cost;
}

RebateVector rebates(const Eigen::VectorXd& bills_uncoordinated,
                     const Eigen::VectorXd& bills_suggested) {
    RebateVector r;
    r.per_home.resize(bills_uncoordinated.size());
    for (Eigen::Index h = 0; h < bills_uncoordinated.size(); ++h) {
        if (bills_uncoordinated[h] == 0.0) throw ZeroBill();
        r.per_home[h] =
            (bills_uncoordinated[h] - bills_suggested[h]) / bills_uncoordinated[h];
    }
    r.average = r.per_home.size() ? r.per_home.mean() : 0.0;
    return r;
}

NetworkLinearization linearize_network(const FeederTopology& feeder,
                                       const std::vector<int>& home_nodes,
                                       const Matrix& x0_kw) {
    const int H = static_cast<int>(x0_kw.rows());
    const int T = static_cast<int>(x0_kw.cols());
    const int nf = static_cast<int>(feeder.lines.size());

    NetworkLinearization lin;
    lin.x0 = x0_kw;
    lin.loss0_kw = Series::Zero(T);
    lin.dloss = Matrix::Zero(H, T);
    lin.current0 = Matrix::Zero(nf, T);
    lin.dcurrent.assign(T, Eigen::MatrixXd::Zero(nf, H));
    lin.line_limits.resize(nf);
    for (int f = 0; f < nf; ++f) lin.line_limits[f] = feeder.lines[f].current_limit_pu;

    for (int t = 0; t < T; ++t) {
        Eigen::VectorXd inj = Eigen::VectorXd::Zero(feeder.num_nodes);
        for (int h = 0; h < H; ++h) inj[home_nodes[h]] += x0_kw(h, t);
        const auto sol = loadflow::solve_load_flow(feeder, inj);
        const auto sens = loadflow::current_sensitivities(feeder, inj, sol);
        lin.loss0_kw[t] = sol.total_loss_kw;
        for (int f = 0; f < nf; ++f) lin.current0(f, t) = sol.line_current_pu[f];
        for (int h = 0; h < H; ++h) {
            lin.dloss(h, t) = sens.loss_per_kw[home_nodes[h]];
            lin.dcurrent[t].col(h) = sens.current_per_kw.col(home_nodes[h]);
        }
    }
    return lin;
}

namespace {

double eps_at(const Matrix& eps, int h, int t) {
    return eps(eps.rows() == 1 ? 0 : h, t);
}

double billed_slot(double load, double buy, double sell, double dt) {
    if (load > 0) return buy * load * dt;
    if (load < 0) return sell * load * dt;
    return 0.0;
}

// Per-home bills of the X loads under the adjusted prices (needed by the
// fairness term).
Eigen::VectorXd bills_of(const Matrix& x, const tariff::PriceSchedule& prices,
                         double dt) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(x.rows());
    for (Eigen::Index h = 0; h < x.rows(); ++h)
        for (Eigen::Index t = 0; t < x.cols(); ++t)
            b[h] += billed_slot(x(h, t), prices.buy(static_cast<int>(h), static_cast<int>(t)),
                                prices.sell(static_cast<int>(h), static_cast<int>(t)), dt);
    return b;
}

} // namespace

double dno_objective(const DnoProblem& p, const Matrix& x) {
    const int H = static_cast<int>(x.rows());
    const int T = static_cast<int>(x.cols());
    const double dt = p.slot_hours;
    double obj = 0.0;

    for (int t = 0; t < T; ++t) {
        double loss = p.network.loss0_kw[t];
        double tot = 0.0;
        for (int h = 0; h < H; ++h) {
            tot += x(h, t);
            loss += p.network.dloss(h, t) * (x(h, t) - p.network.x0(h, t));
        }
        obj += realtime_cost((tot + loss) * dt, p.planned_kwh[t], p.rt_buy[t],
                             p.rt_sell[t]);
        for (int h = 0; h < H; ++h)
            obj += p.alpha * eps_at(p.eps_adjust, h, t) * x(h, t) * dt;
    }
    obj += 0.5 * p.rho * (p.loads - x + p.duals).squaredNorm();

    if (p.fairness_weight > 0 && p.bills_uncoordinated.size() == H) {
        const auto reb = rebates(p.bills_uncoordinated, bills_of(x, p.prices, dt));
        const double excess = std::max(0.0, reb.spread() - p.fairness_eps);
        obj += p.fairness_weight * excess * excess;
    }
    return obj;
}

namespace {

// Gradient of the smooth part of the objective (everything except the
// piecewise-linear real-time cost, which is handled by its exact prox).
Matrix smooth_gradient(const DnoProblem& p, const Matrix& x) {
    const int H = static_cast<int>(x.rows());
    const int T = static_cast<int>(x.cols());
    const double dt = p.slot_hours;
    Matrix g = p.rho * (x - p.loads - p.duals);

    for (int t = 0; t < T; ++t)
        for (int h = 0; h < H; ++h)
            g(h, t) += p.alpha * eps_at(p.eps_adjust, h, t) * dt;

    if (p.fairness_weight > 0 && p.bills_uncoordinated.size() == H) {
        const auto reb = rebates(p.bills_uncoordinated, bills_of(x, p.prices, dt));
        const double excess = std::max(0.0, reb.spread() - p.fairness_eps);
        if (excess > 0) {
            // d spread / dR_h, then chain through R_h = (Junc - J(x_h))/Junc.
            Eigen::VectorXd dspread = Eigen::VectorXd::Zero(H);
            for (int h = 0; h < H; ++h) {
                const double sgn = reb.per_home[h] > reb.average   ? 1.0
                                   : reb.per_home[h] < reb.average ? -1.0
                                                                   : 0.0;
                dspread[h] += sgn;
                for (int k = 0; k < H; ++k) dspread[k] -= sgn / H;
            }
            const double coeff = 2.0 * p.fairness_weight * excess;
            for (int h = 0; h < H; ++h) {
                const double dR_dJ = -1.0 / p.bills_uncoordinated[h];
                for (int t = 0; t < T; ++t) {
                    const double price = x(h, t) >= 0 ? p.prices.buy(h, t)
                                                      : p.prices.sell(h, t);
                    g(h, t) += coeff * dspread[h] * dR_dJ * price * dt;
                }
            }
        }
    }
    return g;
}

// One proximal-gradient trial step of size s: gradient step on the smooth
// part, then the exact prox of the real-time cost. Per slot the cost is a
// piecewise-linear function of the affine total y_t = c_t + a_t . x_t, so its
// prox reduces to a scalar soft threshold along a_t.
Matrix prox_grad_step(const DnoProblem& p, const Matrix& x, const Matrix& grad,
                      double s) {
    const int H = static_cast<int>(x.rows());
    const int T = static_cast<int>(x.cols());
    const double dt = p.slot_hours;
    Matrix v = x - s * grad;
    for (int t = 0; t < T; ++t) {
        double c = p.network.loss0_kw[t] * dt;
        double u = 0.0, norm2 = 0.0;
        for (int h = 0; h < H; ++h) {
            const double a = (1.0 + p.network.dloss(h, t)) * dt;
            c -= p.network.dloss(h, t) * p.network.x0(h, t) * dt;
            u += a * v(h, t);
            norm2 += a * a;
        }
        u += c;
        if (norm2 < 1e-18) continue;
        const double q = s * norm2;
        const double g_kwh = p.planned_kwh[t];
        double ystar;
        if (u - q * p.rt_buy[t] > g_kwh)
            ystar = u - q * p.rt_buy[t];
        else if (u + q * p.rt_sell[t] < g_kwh)
            ystar = u + q * p.rt_sell[t];
        else
            ystar = g_kwh;
        const double shift = (ystar - u) / norm2;
        for (int h = 0; h < H; ++h)
            v(h, t) += (1.0 + p.network.dloss(h, t)) * dt * shift;
    }
    return v;
}

// Trust-region box plus cyclic projection onto the per-slot linearized
// current limits a_f . x_t <= b_f. Slots are independent; a handful of
// passes settles the small halfspace systems here.
void project_line_limits(const DnoProblem& p, Matrix& x) {
    if (std::isfinite(p.trust_radius_kw)) {
        const Matrix lo = (p.loads.array() - p.trust_radius_kw).matrix();
        const Matrix hi = (p.loads.array() + p.trust_radius_kw).matrix();
        x = x.cwiseMax(lo).cwiseMin(hi);
    }
    if (!p.enforce_line_limits) return;
    const int T = static_cast<int>(x.cols());
    const int nf = static_cast<int>(p.network.line_limits.size());
    for (int t = 0; t < T; ++t) {
        const Eigen::MatrixXd& a = p.network.dcurrent[t]; // lines x H
        for (int pass = 0; pass < 50; ++pass) {
            double worst = 0.0;
            for (int f = 0; f < nf; ++f) {
                const double norm2 = a.row(f).squaredNorm();
                if (norm2 < 1e-18) continue;
                const double val = p.network.current0(f, t) +
                                   a.row(f).dot(x.col(t) - p.network.x0.col(t));
                const double viol = val - p.network.line_limits[f];
                if (viol > 1e-12) {
                    x.col(t) -= (viol / norm2) * a.row(f).transpose();
                    worst = std::max(worst, viol);
                }
            }
            if (worst <= 1e-12) break;
        }
    }
}

} // namespace

DnoIterate dno_update(const DnoProblem& p, const DnoSolveOptions& opts) {
    Matrix x = p.loads;
    project_line_limits(p, x);
    double fx = dno_objective(p, x);

    double step = 1.0 / std::max(p.rho, 1e-3);
    bool converged = false;
    int it = 0;
    for (; it < opts.max_inner_iters && !converged; ++it) {
        const Matrix grad = smooth_gradient(p, x);
        bool improved = false;
        double s = step;
        while (s > 1e-13) {
            Matrix cand = prox_grad_step(p, x, grad, s);
            project_line_limits(p, cand);
            const double fc = dno_objective(p, cand);
            if (fc < fx - 1e-14) {
                const double rel = (fx - fc) / std::max(std::abs(fx), 1e-12);
                x = std::move(cand);
                fx = fc;
                improved = true;
                step = s * 2.0;
                if (rel < opts.rel_obj_tol) converged = true;
                break;
            }
            s *= 0.5;
        }
        if (!improved) {
            // No descent at any step size: a prox-gradient fixed point, i.e.
            // the (projected) subproblem optimum up to line-search precision.
            converged = true;
        }
    }

    DnoIterate out;
    out.suggested_loads = x;
    out.objective_value = fx;
    out.stalled = !converged;
    out.inner_iterations = it;
    const int T = static_cast<int>(x.cols());
    out.suggested_losses = Series::Zero(T);
    double overload = 0.0;
    for (int t = 0; t < T; ++t) {
        out.suggested_losses[t] =
            p.network.loss0_kw[t] +
            (p.network.dloss.col(t).array() *
             (x.col(t) - p.network.x0.col(t)).array())
                .sum();
        if (p.network.line_limits.size() > 0) {
            const Eigen::VectorXd cur =
                p.network.current0.col(t) +
                p.network.dcurrent[t] * (x.col(t) - p.network.x0.col(t));
            overload = std::max(overload,
                                (cur - p.network.line_limits).maxCoeff());
        }
    }
    out.max_overload_pu = std::max(0.0, overload);
    if (p.fairness_weight > 0 && p.bills_uncoordinated.size() == x.rows())
        out.fairness_spread =
            rebates(p.bills_uncoordinated, bills_of(x, p.prices, p.slot_hours))
                .spread();
    return out;
}

} // namespace gridsched::dno
