#include "hevems/serialize.hpp"

#include "hevems/error.hpp"
#include "hevems/io.hpp"

#include <cmath>
#include <sstream>

namespace hevems::serialize {

namespace {

template <typename T> T field(const json &j, const char *key, const std::string &ctx) {
    if (!j.is_object() || !j.contains(key)) {
        throw ValidationError(ctx + ": missing field '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception &) {
        throw ValidationError(ctx + ": invalid field '" + key + "'");
    }
}

template <typename T> void optional_field(const json &j, const char *key, T &out, const std::string &ctx) {
    if (j.is_object() && j.contains(key)) {
        out = field<T>(j, key, ctx);
    }
}

std::string csv_num(double v) { return io::format_double(v); }

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    for (auto &cell : out) {
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r')) {
            cell.pop_back();
        }
        while (!cell.empty() && cell.front() == ' ') {
            cell.erase(cell.begin());
        }
    }
    return out;
}

double parse_number(const std::string &cell, const std::string &ctx) {
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) {
            throw std::invalid_argument(cell);
        }
        return v;
    } catch (const std::logic_error &) {
        throw ValidationError(ctx + ": not a number '" + cell + "'");
    }
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

} // namespace

std::string dump(const json &j) { return j.dump(2) + "\n"; }

json parse(std::string_view text, const std::string &what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error &e) {
        throw ValidationError(what + ": malformed JSON (" + e.what() + ")");
    }
}

json read_json(const std::filesystem::path &path) {
    return parse(io::read_file(path), path.string());
}

void write_json(const std::filesystem::path &path, const json &j) {
    io::write_file_atomic(path, dump(j));
}

// ---- markov ----

json to_json(const markov::SpeedGrid &grid) {
    return {{"v_min", grid.v_min}, {"v_max", grid.v_max}, {"dv", grid.dv}};
}

markov::SpeedGrid speed_grid_from_json(const json &j) {
    markov::SpeedGrid g;
    g.v_min = field<double>(j, "v_min", "grid");
    g.v_max = field<double>(j, "v_max", "grid");
    g.dv = field<double>(j, "dv", "grid");
    g.validate();
    return g;
}

json to_json(const markov::Tpm &tpm) {
    return {{"grid", to_json(tpm.grid)}, {"counts", tpm.counts}, {"probs", tpm.probs.data()}};
}

markov::Tpm tpm_from_json(const json &j) {
    const auto grid = speed_grid_from_json(field<json>(j, "grid", "tpm"));
    auto counts = field<std::vector<std::int64_t>>(j, "counts", "tpm");
    const std::size_t n = grid.size();
    if (counts.size() != n * n) {
        throw ValidationError("tpm: counts has " + std::to_string(counts.size()) +
                              " entries, grid needs " + std::to_string(n * n));
    }
    for (auto c : counts) {
        if (c < 0) {
            throw ValidationError("tpm: negative count");
        }
    }
    auto tpm = markov::tpm_from_counts(grid, std::move(counts));
    if (j.contains("probs")) {
        const auto probs = field<std::vector<double>>(j, "probs", "tpm");
        if (probs.size() != n * n) {
            throw ValidationError("tpm: probs size does not match grid");
        }
        for (std::size_t k = 0; k < probs.size(); ++k) {
            if (std::abs(probs[k] - tpm.probs.data()[k]) > 1e-9) {
                throw ValidationError("tpm: probs disagree with counts at entry " + std::to_string(k));
            }
        }
    }
    return tpm;
}

// ---- powertrain ----

json to_json(const powertrain::Powertrain &pt, const std::string &fuel_map_file) {
    const auto &v = pt.vehicle;
    const auto &e = pt.engine;
    const auto &b = pt.battery;
    const auto &m = pt.motor;
    const auto &t = pt.transmission;
    json engine = {{"max_torque", e.max_torque}, {"rated_power", e.rated_power}};
    if (!fuel_map_file.empty()) {
        engine["fuel_map"] = fuel_map_file;
    }
    json battery = {{"capacity", b.capacity},
                    {"v_oc", b.v_oc},
                    {"r_in", b.r_in},
                    {"max_discharge_power", b.max_discharge_power},
                    {"max_charge_power", b.max_charge_power}};
    if (!b.table_soc.empty()) {
        battery["table_soc"] = b.table_soc;
        battery["table_v_oc"] = b.table_v_oc;
        battery["table_r_in"] = b.table_r_in;
    }
    return {{"vehicle",
             {{"mass", v.mass},
              {"frontal_area", v.frontal_area},
              {"drag_coeff", v.drag_coeff},
              {"eta_transmission", v.eta_transmission},
              {"eta_motor", v.eta_motor},
              {"rolling_coeff", v.rolling_coeff},
              {"tire_radius", v.tire_radius},
              {"air_density", v.air_density},
              {"gravity", v.gravity},
              {"rotating_mass_factor", v.rotating_mass_factor}}},
            {"engine", engine},
            {"battery", battery},
            {"motor", {{"max_speed_rpm", m.max_speed_rpm}, {"max_power", m.max_power}, {"max_torque", m.max_torque}}},
            {"transmission",
             {{"gear_ratios", t.gear_ratios},
              {"final_drive", t.final_drive},
              {"shift_speeds", t.shift_speeds},
              {"idle_rpm", t.idle_rpm}}}};
}

powertrain::Powertrain powertrain_from_json(const json &j, const std::filesystem::path &base_dir) {
    if (!j.is_object()) {
        throw ValidationError("powertrain: expected a JSON object");
    }
    powertrain::Powertrain pt;
    if (j.contains("vehicle")) {
        const json &s = j["vehicle"];
        auto &v = pt.vehicle;
        const std::string ctx = "powertrain.vehicle";
        optional_field(s, "mass", v.mass, ctx);
        optional_field(s, "frontal_area", v.frontal_area, ctx);
        optional_field(s, "drag_coeff", v.drag_coeff, ctx);
        optional_field(s, "eta_transmission", v.eta_transmission, ctx);
        optional_field(s, "eta_motor", v.eta_motor, ctx);
        optional_field(s, "rolling_coeff", v.rolling_coeff, ctx);
        optional_field(s, "tire_radius", v.tire_radius, ctx);
        optional_field(s, "air_density", v.air_density, ctx);
        optional_field(s, "gravity", v.gravity, ctx);
        optional_field(s, "rotating_mass_factor", v.rotating_mass_factor, ctx);
    }
    if (j.contains("engine")) {
        const json &s = j["engine"];
        const std::string ctx = "powertrain.engine";
        optional_field(s, "max_torque", pt.engine.max_torque, ctx);
        optional_field(s, "rated_power", pt.engine.rated_power, ctx);
        if (s.contains("fuel_map")) {
            const auto file = base_dir / field<std::string>(s, "fuel_map", ctx);
            pt.engine.fuel_map = parse_fuel_map_csv(io::read_file(file));
        }
    }
    if (j.contains("battery")) {
        const json &s = j["battery"];
        auto &b = pt.battery;
        const std::string ctx = "powertrain.battery";
        optional_field(s, "capacity", b.capacity, ctx);
        optional_field(s, "v_oc", b.v_oc, ctx);
        optional_field(s, "r_in", b.r_in, ctx);
        optional_field(s, "max_discharge_power", b.max_discharge_power, ctx);
        optional_field(s, "max_charge_power", b.max_charge_power, ctx);
        optional_field(s, "table_soc", b.table_soc, ctx);
        optional_field(s, "table_v_oc", b.table_v_oc, ctx);
        optional_field(s, "table_r_in", b.table_r_in, ctx);
    }
    if (j.contains("motor")) {
        const json &s = j["motor"];
        const std::string ctx = "powertrain.motor";
        optional_field(s, "max_speed_rpm", pt.motor.max_speed_rpm, ctx);
        optional_field(s, "max_power", pt.motor.max_power, ctx);
        optional_field(s, "max_torque", pt.motor.max_torque, ctx);
    }
    if (j.contains("transmission")) {
        const json &s = j["transmission"];
        auto &t = pt.transmission;
        const std::string ctx = "powertrain.transmission";
        optional_field(s, "gear_ratios", t.gear_ratios, ctx);
        optional_field(s, "final_drive", t.final_drive, ctx);
        optional_field(s, "shift_speeds", t.shift_speeds, ctx);
        optional_field(s, "idle_rpm", t.idle_rpm, ctx);
    }
    pt.validate();
    return pt;
}

powertrain::Powertrain load_powertrain(const std::filesystem::path &path) {
    return powertrain_from_json(read_json(path), path.parent_path());
}

std::string format_fuel_map_csv(const powertrain::FuelMap &map) {
    std::ostringstream out;
    out << "torque_nm\\rpm";
    for (double n : map.speed_breakpoints()) {
        out << ',' << csv_num(n);
    }
    out << '\n';
    const auto &torque = map.torque_breakpoints();
    const std::size_t ns = map.speed_breakpoints().size();
    for (std::size_t i = 0; i < torque.size(); ++i) {
        out << csv_num(torque[i]);
        for (std::size_t k = 0; k < ns; ++k) {
            out << ',' << csv_num(map.rates()[i * ns + k]);
        }
        out << '\n';
    }
    return out.str();
}

powertrain::FuelMap parse_fuel_map_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (!line.empty()) {
            rows.push_back(split(line, ','));
        }
        start = end + 1;
    }
    if (rows.size() < 3 || rows.front().size() < 3) {
        throw ValidationError("fuel map: need at least 2 torque rows and 2 speed columns");
    }
    std::vector<double> speed;
    for (std::size_t k = 1; k < rows[0].size(); ++k) {
        speed.push_back(parse_number(rows[0][k], "fuel map header"));
    }
    std::vector<double> torque;
    std::vector<double> rates;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const std::string ctx = "fuel map row " + std::to_string(i + 1);
        if (rows[i].size() != speed.size() + 1) {
            throw ValidationError(ctx + ": expected " + std::to_string(speed.size() + 1) + " cells");
        }
        torque.push_back(parse_number(rows[i][0], ctx));
        for (std::size_t k = 1; k < rows[i].size(); ++k) {
            rates.push_back(parse_number(rows[i][k], ctx));
        }
    }
    powertrain::FuelMap map(std::move(torque), std::move(speed), std::move(rates));
    map.validate();
    return map;
}

// ---- ems ----

json to_json(const ems::StateActionGrid &g) {
    return {{"soc_min", g.soc_min},       {"soc_max", g.soc_max},         {"soc_step", g.soc_step},
            {"demand_min", g.demand_min}, {"demand_max", g.demand_max},   {"demand_step", g.demand_step},
            {"torque_min", g.torque_min}, {"torque_max", g.torque_max},   {"torque_step", g.torque_step}};
}

ems::StateActionGrid state_action_grid_from_json(const json &j) {
    ems::StateActionGrid g;
    const std::string ctx = "state-action grid";
    optional_field(j, "soc_min", g.soc_min, ctx);
    optional_field(j, "soc_max", g.soc_max, ctx);
    optional_field(j, "soc_step", g.soc_step, ctx);
    optional_field(j, "demand_min", g.demand_min, ctx);
    optional_field(j, "demand_max", g.demand_max, ctx);
    optional_field(j, "demand_step", g.demand_step, ctx);
    optional_field(j, "torque_min", g.torque_min, ctx);
    optional_field(j, "torque_max", g.torque_max, ctx);
    optional_field(j, "torque_step", g.torque_step, ctx);
    g.validate();
    return g;
}

json to_json(const ems::RlConfig &c) {
    return {{"learning_rate", c.learning_rate},
            {"discount", c.discount},
            {"epsilon0", c.epsilon0},
            {"epsilon_decay", c.epsilon_decay},
            {"episodes", c.episodes},
            {"seed", c.seed},
            {"alpha", c.alpha},
            {"soc_ref", c.soc_ref},
            {"soc_initial", c.soc_initial},
            {"infeasible_penalty", c.infeasible_penalty}};
}

ems::RlConfig rl_config_from_json(const json &j, ems::RlConfig c) {
    const std::string ctx = "rl config";
    optional_field(j, "learning_rate", c.learning_rate, ctx);
    optional_field(j, "discount", c.discount, ctx);
    optional_field(j, "epsilon0", c.epsilon0, ctx);
    optional_field(j, "epsilon_decay", c.epsilon_decay, ctx);
    optional_field(j, "episodes", c.episodes, ctx);
    optional_field(j, "seed", c.seed, ctx);
    optional_field(j, "alpha", c.alpha, ctx);
    optional_field(j, "soc_ref", c.soc_ref, ctx);
    optional_field(j, "soc_initial", c.soc_initial, ctx);
    optional_field(j, "infeasible_penalty", c.infeasible_penalty, ctx);
    c.validate();
    return c;
}

json to_json(const ems::QTable &q, const json &config) {
    json meta = {{"source_cycle", q.meta.source_cycle},
                 {"episodes", q.meta.episodes},
                 {"seed", q.meta.seed},
                 {"transfer_scale", q.meta.transfer_scale ? json(*q.meta.transfer_scale) : json(nullptr)},
                 {"transfer_fallback", q.meta.transfer_fallback}};
    if (!config.is_null()) {
        meta["config"] = config;
    }
    return {{"grid", to_json(q.grid())},
            {"states", q.states()},
            {"actions", q.actions()},
            {"values", q.values()},
            {"visits", q.visit_counts()},
            {"meta", meta}};
}

ems::QTable qtable_from_json(const json &j) {
    ems::QTable q(state_action_grid_from_json(field<json>(j, "grid", "qtable")));
    auto values = field<std::vector<double>>(j, "values", "qtable");
    if (values.size() != q.values().size()) {
        throw ValidationError("qtable: values has " + std::to_string(values.size()) +
                              " entries, grid needs " + std::to_string(q.values().size()));
    }
    q.values() = std::move(values);
    if (j.contains("visits")) {
        auto visits = field<std::vector<std::uint64_t>>(j, "visits", "qtable");
        if (visits.size() != q.visit_counts().size()) {
            throw ValidationError("qtable: visits size does not match grid");
        }
        q.visit_counts() = std::move(visits);
    }
    if (j.contains("meta")) {
        const json &m = j["meta"];
        const std::string ctx = "qtable.meta";
        optional_field(m, "source_cycle", q.meta.source_cycle, ctx);
        optional_field(m, "episodes", q.meta.episodes, ctx);
        optional_field(m, "seed", q.meta.seed, ctx);
        if (m.contains("transfer_scale") && !m["transfer_scale"].is_null()) {
            q.meta.transfer_scale = field<double>(m, "transfer_scale", ctx);
        }
        optional_field(m, "transfer_fallback", q.meta.transfer_fallback, ctx);
    }
    q.validate();
    return q;
}

std::string format_training_log_csv(const ems::TrainingLog &log) {
    std::ostringstream out;
    out << "episode,cost,fuel,soc_end,infeasible_steps,clamp_events,wall_time\n";
    for (const auto &e : log.episodes) {
        out << e.episode << ',' << csv_num(e.cost) << ',' << csv_num(e.fuel) << ','
            << csv_num(e.soc_end) << ',' << e.infeasible_steps << ',' << e.clamp_events << ','
            << csv_num(e.wall_time) << '\n';
    }
    return out.str();
}

// ---- dp ----

json to_json(const dp::DpSolution &s) {
    json ctg = json::array();
    for (double v : s.cost_to_go) {
        ctg.push_back(nullable(v));
    }
    return {{"grid", to_json(s.grid)},
            {"dt", s.dt},
            {"steps", s.steps},
            {"soc_initial", s.soc_initial},
            {"total_cost", s.total_cost},
            {"total_fuel", s.total_fuel},
            {"cost_to_go", ctg},
            {"policy", s.policy},
            {"soc_trajectory", s.soc_trajectory},
            {"actions", s.actions},
            {"fuel_rates", s.fuel_rates}};
}

dp::DpSolution dp_solution_from_json(const json &j) {
    const std::string ctx = "dp solution";
    dp::DpSolution s;
    s.grid = state_action_grid_from_json(field<json>(j, "grid", ctx));
    s.dt = field<double>(j, "dt", ctx);
    s.steps = field<std::size_t>(j, "steps", ctx);
    s.soc_initial = field<double>(j, "soc_initial", ctx);
    s.total_cost = field<double>(j, "total_cost", ctx);
    s.total_fuel = field<double>(j, "total_fuel", ctx);
    const json ctg = field<json>(j, "cost_to_go", ctx);
    const std::size_t n = s.grid.soc_count();
    if (!ctg.is_array() || ctg.size() != (s.steps + 1) * n) {
        throw ValidationError(ctx + ": cost_to_go size does not match steps and grid");
    }
    for (const auto &v : ctg) {
        if (v.is_null()) {
            s.cost_to_go.push_back(dp::kInfeasible);
        } else if (v.is_number()) {
            s.cost_to_go.push_back(v.get<double>());
        } else {
            throw ValidationError(ctx + ": invalid field 'cost_to_go'");
        }
    }
    s.policy = field<std::vector<int>>(j, "policy", ctx);
    if (s.policy.size() != s.steps * n) {
        throw ValidationError(ctx + ": policy size does not match steps and grid");
    }
    s.soc_trajectory = field<std::vector<double>>(j, "soc_trajectory", ctx);
    s.actions = field<std::vector<std::size_t>>(j, "actions", ctx);
    s.fuel_rates = field<std::vector<double>>(j, "fuel_rates", ctx);
    return s;
}

std::string format_dp_trajectory_csv(const dp::DpSolution &s) {
    std::ostringstream out;
    out << "t,soc,torque,fuel_rate\n";
    for (std::size_t k = 0; k < s.soc_trajectory.size(); ++k) {
        out << csv_num(static_cast<double>(k) * s.dt) << ',' << csv_num(s.soc_trajectory[k]);
        if (k < s.actions.size()) {
            out << ',' << csv_num(s.grid.torque(s.actions[k])) << ',' << csv_num(s.fuel_rates[k]);
        } else {
            out << ",,";
        }
        out << '\n';
    }
    return out.str();
}

// ---- sim ----

std::string format_sim_log_csv(const sim::SimResult &r) {
    std::ostringstream out;
    out << "t,v,torque,engine_rpm,fuel_rate,p_battery,soc,feasible\n";
    for (const auto &s : r.log) {
        out << csv_num(s.t) << ',' << csv_num(s.v) << ',' << csv_num(s.torque) << ','
            << csv_num(s.engine_rpm) << ',' << csv_num(s.fuel_rate) << ',' << csv_num(s.p_battery)
            << ',' << csv_num(s.soc) << ',' << (s.feasible ? 1 : 0) << '\n';
    }
    return out.str();
}

json summary_to_json(const sim::Summary &s, bool include_wall_time) {
    json j = {{"name", s.name}, {"fuel_total", s.fuel_total}, {"cost_total", s.cost_total}, {"soc_end", s.soc_end}};
    if (include_wall_time) {
        j["wall_time"] = s.wall_time;
    }
    return j;
}

sim::Summary summary_from_json(const json &j) {
    const std::string ctx = "summary";
    sim::Summary s;
    s.name = field<std::string>(j, "name", ctx);
    s.fuel_total = field<double>(j, "fuel_total", ctx);
    s.cost_total = field<double>(j, "cost_total", ctx);
    s.soc_end = field<double>(j, "soc_end", ctx);
    optional_field(j, "wall_time", s.wall_time, ctx);
    return s;
}

json to_json(const sim::ComparisonReport &report) {
    json rows = json::array();
    for (const auto &r : report.rows) {
        json row = summary_to_json(r.summary, true);
        row["fuel_gap_pct"] = r.fuel_gap_pct;
        row["cost_gap_pct"] = r.cost_gap_pct;
        rows.push_back(row);
    }
    return {{"baseline", report.baseline}, {"rows", rows}};
}

std::string format_recognition_csv(std::span<const markov::RecognitionRow> rows) {
    std::ostringstream out;
    out << "t,start,reference,imn\n";
    for (const auto &r : rows) {
        out << csv_num(r.t) << ',' << r.start << ',' << r.name << ',' << csv_num(r.distance) << '\n';
    }
    return out.str();
}

} // namespace hevems::serialize
