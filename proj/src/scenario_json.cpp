#include "gridsched/scenario_json.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace gridsched {

using nlohmann::json;

namespace {

json series_to_json(const Series& s) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < s.size(); ++i) arr.push_back(s[i]);
    return arr;
}

Series series_from_json(const json& arr, const char* name) {
    if (!arr.is_array()) throw SchemaError(std::string(name) + ": expected an array");
    Series s(arr.size());
    for (size_t i = 0; i < arr.size(); ++i) s[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
    return s;
}

template <typename T>
T get_field(const json& j, const char* name) {
    if (!j.contains(name)) throw SchemaError(std::string("missing field: ") + name);
    try {
        return j.at(name).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("field '") + name + "': " + e.what());
    }
}

json required(const json& j, const char* name) {
    if (!j.contains(name)) throw SchemaError(std::string("missing field: ") + name);
    return j.at(name);
}

} // namespace

std::string scenario_to_json(const Scenario& s) {
    json j;
    j["grid"] = {{"num_slots", s.grid.num_slots}, {"slot_hours", s.grid.slot_hours}};

    json feeder;
    feeder["num_nodes"] = s.feeder.num_nodes;
    feeder["base_mva"] = s.feeder.base_mva;
    feeder["base_kv"] = s.feeder.base_kv;
    feeder["lines"] = json::array();
    for (const auto& l : s.feeder.lines)
        feeder["lines"].push_back({{"from_node", l.from_node},
                                   {"to_node", l.to_node},
                                   {"resistance_pu", l.resistance_pu},
                                   {"reactance_pu", l.reactance_pu},
                                   {"current_limit_pu", l.current_limit_pu}});
    j["feeder"] = feeder;

    j["homes"] = json::array();
    for (const auto& h : s.homes) {
        json home;
        home["id"] = h.id;
        home["node"] = h.node;
        home["appliances"] = json::array();
        for (const auto& a : h.appliances)
            home["appliances"].push_back({{"power_kw", a.power_kw},
                                          {"job_length_slots", a.job_length_slots},
                                          {"window_start", a.window_start},
                                          {"window_end", a.window_end}});
        if (h.battery) {
            const auto& b = *h.battery;
            home["battery"] = {{"capacity_kwh", b.capacity_kwh},
                               {"soc_min", b.soc_min},
                               {"soc_max", b.soc_max},
                               {"soc_initial", b.soc_initial},
                               {"step_min", b.step_min},
                               {"step_max", b.step_max},
                               {"eff_charge", b.eff_charge},
                               {"eff_discharge", b.eff_discharge}};
        }
        home["pv_kw"] = series_to_json(h.pv_kw);
        home["base_load_kw"] = series_to_json(h.base_load_kw);
        j["homes"].push_back(home);
    }

    j["tariff"] = {{"quad_a", s.tariff.quad_a},
                   {"lin_b", s.tariff.lin_b},
                   {"const_c", s.tariff.const_c},
                   {"profit_coeff", s.tariff.profit_coeff},
                   {"fit_rate", series_to_json(s.tariff.fit_rate)},
                   {"rt_buy", series_to_json(s.tariff.rt_buy)},
                   {"rt_sell", series_to_json(s.tariff.rt_sell)},
                   {"dg_power", series_to_json(s.tariff.dg_power)},
                   {"incentive_w", s.tariff.incentive_w}};

    j["admm"] = {{"rho_init", s.admm.rho_init},
                 {"gamma", s.admm.gamma},
                 {"tau_incr", s.admm.tau_incr},
                 {"tau_decr", s.admm.tau_decr},
                 {"eps_primal", s.admm.eps_primal},
                 {"eps_dual", s.admm.eps_dual},
                 {"alpha", s.admm.alpha},
                 {"fairness_eps", s.admm.fairness_eps},
                 {"fairness_weight", s.admm.fairness_weight},
                 {"max_iters", s.admm.max_iters}};

    if (s.forecast_demand) j["forecast_demand"] = series_to_json(*s.forecast_demand);
    return j.dump(2);
}

Scenario scenario_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid JSON: ") + e.what());
    }

    Scenario s;
    const json grid = required(j, "grid");
    s.grid.num_slots = get_field<int>(grid, "num_slots");
    s.grid.slot_hours = get_field<double>(grid, "slot_hours");

    const json feeder = required(j, "feeder");
    s.feeder.num_nodes = get_field<int>(feeder, "num_nodes");
    s.feeder.base_mva = get_field<double>(feeder, "base_mva");
    s.feeder.base_kv = get_field<double>(feeder, "base_kv");
    for (const auto& jl : required(feeder, "lines")) {
        Line l;
        l.from_node = get_field<int>(jl, "from_node");
        l.to_node = get_field<int>(jl, "to_node");
        l.resistance_pu = get_field<double>(jl, "resistance_pu");
        l.reactance_pu = get_field<double>(jl, "reactance_pu");
        l.current_limit_pu = get_field<double>(jl, "current_limit_pu");
        s.feeder.lines.push_back(l);
    }

    for (const auto& jh : required(j, "homes")) {
        Home h;
        h.id = get_field<std::string>(jh, "id");
        h.node = get_field<int>(jh, "node");
        for (const auto& ja : required(jh, "appliances")) {
            Appliance a;
            a.power_kw = get_field<double>(ja, "power_kw");
            a.job_length_slots = get_field<int>(ja, "job_length_slots");
            a.window_start = get_field<int>(ja, "window_start");
            a.window_end = get_field<int>(ja, "window_end");
            h.appliances.push_back(a);
        }
        if (jh.contains("battery") && !jh.at("battery").is_null()) {
            const json jb = jh.at("battery");
            Battery b;
            b.capacity_kwh = get_field<double>(jb, "capacity_kwh");
            b.soc_min = get_field<double>(jb, "soc_min");
            b.soc_max = get_field<double>(jb, "soc_max");
            b.soc_initial = get_field<double>(jb, "soc_initial");
            b.step_min = get_field<double>(jb, "step_min");
            b.step_max = get_field<double>(jb, "step_max");
            b.eff_charge = get_field<double>(jb, "eff_charge");
            b.eff_discharge = get_field<double>(jb, "eff_discharge");
            h.battery = b;
        }
        h.pv_kw = series_from_json(required(jh, "pv_kw"), "pv_kw");
        h.base_load_kw = series_from_json(required(jh, "base_load_kw"), "base_load_kw");
        s.homes.push_back(std::move(h));
    }

    const json tf = required(j, "tariff");
    s.tariff.quad_a = get_field<double>(tf, "quad_a");
    s.tariff.lin_b = get_field<double>(tf, "lin_b");
    s.tariff.const_c = get_field<double>(tf, "const_c");
    s.tariff.profit_coeff = get_field<double>(tf, "profit_coeff");
    s.tariff.fit_rate = series_from_json(required(tf, "fit_rate"), "fit_rate");
    s.tariff.rt_buy = series_from_json(required(tf, "rt_buy"), "rt_buy");
    s.tariff.rt_sell = series_from_json(required(tf, "rt_sell"), "rt_sell");
    s.tariff.dg_power = series_from_json(required(tf, "dg_power"), "dg_power");
    s.tariff.incentive_w = get_field<double>(tf, "incentive_w");

    const json ad = required(j, "admm");
    s.admm.rho_init = get_field<double>(ad, "rho_init");
    s.admm.gamma = get_field<double>(ad, "gamma");
    s.admm.tau_incr = get_field<double>(ad, "tau_incr");
    s.admm.tau_decr = get_field<double>(ad, "tau_decr");
    s.admm.eps_primal = get_field<double>(ad, "eps_primal");
    s.admm.eps_dual = get_field<double>(ad, "eps_dual");
    s.admm.alpha = get_field<double>(ad, "alpha");
    s.admm.fairness_eps = get_field<double>(ad, "fairness_eps");
    s.admm.fairness_weight = get_field<double>(ad, "fairness_weight");
    s.admm.max_iters = get_field<int>(ad, "max_iters");

    if (j.contains("forecast_demand") && !j.at("forecast_demand").is_null())
        s.forecast_demand = series_from_json(j.at("forecast_demand"), "forecast_demand");
    return s;
}

void save_scenario(const Scenario& s, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << scenario_to_json(s) << "\n";
}

Scenario load_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return scenario_from_json(ss.str());
}

std::string apply_override(const std::string& json_text, const std::string& key,
                           const std::string& value) {
    json j = json::parse(json_text);
    json* node = &j;
    size_t pos = 0;
    std::vector<std::string> parts;
    while (pos != std::string::npos) {
        size_t dot = key.find('.', pos);
        parts.push_back(key.substr(pos, dot == std::string::npos ? dot : dot - pos));
        pos = (dot == std::string::npos) ? dot : dot + 1;
    }
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
        const std::string& p = parts[i];
        if (node->is_array()) {
            size_t idx = std::stoul(p);
            if (idx >= node->size()) throw SchemaError("override index out of range: " + key);
            node = &(*node)[idx];
        } else if (node->contains(p)) {
            node = &(*node)[p];
        } else {
            throw SchemaError("unknown override path: " + key);
        }
    }
    const std::string& leaf = parts.back();
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::exception&) {
        parsed = value; // bare string
    }
    if (node->is_array()) {
        size_t idx = std::stoul(leaf);
        if (idx >= node->size()) throw SchemaError("override index out of range: " + key);
        (*node)[idx] = parsed;
    } else {
        if (!node->contains(leaf)) throw SchemaError("unknown override path: " + key);
        (*node)[leaf] = parsed;
    }
    return j.dump(2);
}

} // namespace gridsched
