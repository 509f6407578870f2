#include "gridsched/metrics.hpp"

#include "gridsched/coordinator.hpp"

namespace gridsched::metrics {

double par(const Series& profile) {
    const double total = profile.sum();
    if (total <= 0) throw ZeroProfile();
    return profile.size() * profile.maxCoeff() / total;
}

std::vector<SavingsRow> savings_table(const coord::RunResult& uncoordinated,
                                      const coord::RunResult& coordinated) {
    if (uncoordinated.home_ids != coordinated.home_ids) throw ScenarioMismatch();
    std::vector<SavingsRow> rows;
    for (size_t h = 0; h < uncoordinated.home_ids.size(); ++h) {
        SavingsRow row;
        row.home_id = uncoordinated.home_ids[h];
        row.bill_before = uncoordinated.bills[static_cast<Eigen::Index>(h)];
        row.bill_after = coordinated.bills[static_cast<Eigen::Index>(h)];
        row.saving_fraction = (row.bill_before - row.bill_after) / row.bill_before;
        rows.push_back(row);
    }
    return rows;
}

std::vector<WSweepRow> w_sweep(const ValidatedScenario& scenario,
                               const std::vector<double>& w_values) {
    std::vector<WSweepRow> rows;
    for (double w : w_values) {
        ValidatedScenario vs = scenario;
        vs.scenario.tariff.incentive_w = w;
        const auto run = coord::run_coordinated(vs, coord::Mode::Global);
        rows.push_back(WSweepRow{w, run.bills.sum(), run.cost.profit_cents,
                                 run.converged});
    }
    return rows;
}

} // namespace gridsched::metrics
