#include "gridsched/hems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gridsched::hems {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double battery_power(const Battery& battery, double step, double slot_hours) {
    if (step < battery.step_min - 1e-12 || step > battery.step_max + 1e-12)
        throw StepOutOfRange();
    if (step > 0) return battery.capacity_kwh * step / (battery.eff_charge * slot_hours);
    if (step < 0) return battery.capacity_kwh * battery.eff_discharge * step / slot_hours;
    return 0.0;
}

double stage_cost(double load_kw, double price, double fit, double slot_hours) {
    if (load_kw > 0) return price * load_kw * slot_hours;
    if (load_kw < 0) return fit * load_kw * slot_hours;
    return 0.0;
}

namespace {

struct BatteryGrid {
    int levels = 1;
    double lo = 0.0, step = 0.0;
    int init_index = 0;
    std::vector<int> deltas;       // feasible level changes, ordered |d| then d
    std::vector<double> power_kw;  // AC power per delta
    std::vector<double> fraction;  // SOC step per delta
};

BatteryGrid make_grid(const std::optional<Battery>& battery, double slot_hours,
                      int levels) {
    BatteryGrid g;
    if (!battery || battery->capacity_kwh <= 0) {
        g.deltas = {0};
        g.power_kw = {0.0};
        g.fraction = {0.0};
        return g;
    }
    const Battery& b = *battery;
    const double span = b.soc_max - b.soc_min;
    g.levels = span > 0 ? std::max(2, levels) : 1;
    g.lo = b.soc_min;
    g.step = g.levels > 1 ? span / (g.levels - 1) : 0.0;

    const double init_pos = g.step > 0 ? (b.soc_initial - g.lo) / g.step : 0.0;
    g.init_index = static_cast<int>(std::llround(init_pos));
    if (g.init_index < 0 || g.init_index >= g.levels ||
        std::abs(init_pos - g.init_index) > 1e-9)
        throw GridTooCoarse();

    for (int d = -(g.levels - 1); d <= g.levels - 1; ++d) {
        const double frac = d * g.step;
        if (frac < b.step_min - 1e-12 || frac > b.step_max + 1e-12) continue;
        g.deltas.push_back(d);
    }
    std::sort(g.deltas.begin(), g.deltas.end(), [](int a, int c) {
        if (std::abs(a) != std::abs(c)) return std::abs(a) < std::abs(c);
        return a < c;
    });
    for (int d : g.deltas) {
        const double frac = d * g.step;
        g.fraction.push_back(frac);
        g.power_kw.push_back(battery_power(b, frac, slot_hours));
    }
    return g;
}

// One joint appliance decision at a stage: which appliances run, the summed
// power, and the resulting progress code.
struct ApplianceMove {
    double power_kw;
    int next_code;
};

} // namespace

HouseholdSchedule solve_household(const Home& home, const TimeGrid& grid,
                                  const HomePrices& prices,
                                  const ProximalTerms* prox,
                                  const SolveOptions& opts) {
    const int T = grid.num_slots;
    const double dt = grid.slot_hours;
    const int A = static_cast<int>(home.appliances.size());

    // Mixed-radix encoding of per-appliance progress (0..I_a each).
    std::vector<int> radix(A), place(A);
    int num_codes = 1;
    for (int a = 0; a < A; ++a) {
        radix[a] = home.appliances[a].job_length_slots + 1;
        place[a] = num_codes;
        num_codes *= radix[a];
    }

    const BatteryGrid bat = make_grid(home.battery, dt, opts.soc_levels);
    const int N = bat.levels;
    const int S = num_codes * N;
    const int D = static_cast<int>(bat.deltas.size());

    // Enumerate joint appliance moves for a given stage and progress code.
    // "Run" is tried before "idle" for startable appliances, so among
    // equal-cost schedules the earliest start wins.
    std::vector<ApplianceMove> moves;
    std::vector<int> progress(A);
    auto enumerate_moves = [&](int t, int code) {
        moves.clear();
        int c = code;
        for (int a = 0; a < A; ++a) {
            progress[a] = c % radix[a];
            c /= radix[a];
        }
        std::vector<std::pair<double, int>> partial = {{0.0, code}};
        for (int a = 0; a < A; ++a) {
            const auto& ap = home.appliances[a];
            const int l = progress[a];
            bool can_run = false, can_idle = false;
            if (l == ap.job_length_slots) {
                can_idle = true;
            } else if (l > 0) {
                can_run = true; // no interruption once started
            } else {
                const int last = ap.last_start_slot();
                if (t < ap.window_start) can_idle = true;
                else if (t < last) { can_run = true; can_idle = true; }
                else if (t == last) can_run = true; // forced start
                // t > last with l == 0: dead end, no options
            }
            std::vector<std::pair<double, int>> next;
            next.reserve(partial.size() * 2);
            for (const auto& [pw, nc] : partial) {
                if (can_run) next.push_back({pw + ap.power_kw, nc + place[a]});
                if (can_idle) next.push_back({pw, nc});
            }
            partial = std::move(next);
            if (partial.empty()) break;
        }
        for (const auto& [pw, nc] : partial) moves.push_back({pw, nc});
    };

    std::vector<double> value(S, 0.0), value_next(S);
    // Terminal condition: every appliance finished.
    for (int code = 0; code < num_codes; ++code) {
        int c = code;
        bool done = true;
        for (int a = 0; a < A; ++a) {
            if (c % radix[a] != home.appliances[a].job_length_slots) done = false;
            c /= radix[a];
        }
        for (int j = 0; j < N; ++j) value[code * N + j] = done ? 0.0 : kInf;
    }

    // Policy: chosen (move index, delta index) per stage and state.
    std::vector<std::vector<std::pair<int16_t, int16_t>>> policy(
        T, std::vector<std::pair<int16_t, int16_t>>(S, {-1, -1}));

    for (int t = T - 1; t >= 0; --t) {
        std::swap(value, value_next);
        const double fixed = home.base_load_kw[t] - home.pv_kw[t];
        const double buy = prices.buy[t], sell = prices.sell[t];
        const double prox_center =
            prox ? prox->suggested_load[t] - prox->scaled_dual[t] : 0.0;
        for (int code = 0; code < num_codes; ++code) {
            enumerate_moves(t, code);
            for (int j = 0; j < N; ++j) {
                double best = kInf;
                std::pair<int16_t, int16_t> best_dec{-1, -1};
                for (size_t m = 0; m < moves.size(); ++m) {
                    const int next_base = moves[m].next_code * N;
                    const double app_load = fixed + moves[m].power_kw;
                    for (int di = 0; di < D; ++di) {
                        const int jn = j + bat.deltas[di];
                        if (jn < 0 || jn >= N) continue;
                        const double vn = value_next[next_base + jn];
                        if (!(vn < kInf)) continue;
                        const double load = app_load + bat.power_kw[di];
                        double c = stage_cost(load, buy, sell, dt);
                        if (prox) {
                            const double gap = load - prox_center;
                            c = prox->alpha * c + 0.5 * prox->rho * gap * gap;
                        }
                        const double total = c + vn;
                        if (total < best) {
                            best = total;
                            best_dec = {static_cast<int16_t>(m),
                                        static_cast<int16_t>(di)};
                        }
                    }
                }
                value[code * N + j] = best;
                policy[t][code * N + j] = best_dec;
            }
        }
    }

    const int init_state = 0 * N + bat.init_index;
    if (!(value[init_state] < kInf))
        throw InvariantError({"household schedule infeasible (window/job mismatch)"});

    HouseholdSchedule out;
    out.cost = value[init_state];
    out.net_load_kw = Series::Zero(T);
    out.appliance_start.assign(A, -1);
    if (home.battery) {
        out.battery_action = Series::Zero(T);
        out.soc = Series::Zero(T + 1);
        out.soc[0] = bat.lo + bat.init_index * bat.step;
    }

    // Forward rollout along the stored policy.
    int code = 0, j = bat.init_index;
    std::vector<int> prog(A, 0);
    for (int t = 0; t < T; ++t) {
        enumerate_moves(t, code);
        const auto [mi, di] = policy[t][code * N + j];
        const auto& mv = moves[mi];
        const double load = home.base_load_kw[t] - home.pv_kw[t] + mv.power_kw +
                            bat.power_kw[di];
        out.net_load_kw[t] = load;
        // Decode which appliances ran to record start slots.
        int cprev = code, cnext = mv.next_code;
        for (int a = 0; a < A; ++a) {
            const int lp = cprev % radix[a], ln = cnext % radix[a];
            cprev /= radix[a];
            cnext /= radix[a];
            if (ln == lp + 1 && lp == 0) out.appliance_start[a] = t;
        }
        code = mv.next_code;
        if (home.battery) {
            out.battery_action[t] = bat.fraction[di];
            j += bat.deltas[di];
            out.soc[t + 1] = bat.lo + j * bat.step;
        }
    }
    return out;
}

} // namespace gridsched::hems
