#include "hevems/cli.hpp"

#include "hevems/cycle.hpp"
#include "hevems/dp.hpp"
#include "hevems/error.hpp"
#include "hevems/io.hpp"
#include "hevems/serialize.hpp"
#include "hevems/sim.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

namespace hevems::cli {

namespace fs = std::filesystem;
using serialize::json;

void ExperimentConfig::validate() const {
    speed_grid.validate();
    grid.validate();
    rl.validate();
    if (!(dt > 0.0)) {
        throw ValidationError("config: dt must be > 0");
    }
    if (powertrain && !fs::exists(*powertrain)) {
        throw ValidationError("config: powertrain file not found: " + powertrain->string());
    }
    for (const auto &[name, path] : cycles) {
        if (!fs::exists(path)) {
            throw ValidationError("config: cycle '" + name + "' not found: " + path.string());
        }
    }
}

ExperimentConfig load_experiment_config(const fs::path &path) {
    const json j = serialize::read_json(path);
    if (!j.is_object()) {
        throw ValidationError("config: expected a JSON object");
    }
    const fs::path base = path.parent_path();
    auto resolve = [&](const std::string &p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    ExperimentConfig c;
    try {
        if (j.contains("powertrain")) {
            c.powertrain = resolve(j["powertrain"].get<std::string>());
        }
        if (j.contains("speed_grid")) {
            c.speed_grid = serialize::speed_grid_from_json(j["speed_grid"]);
        }
        if (j.contains("grid")) {
            c.grid = serialize::state_action_grid_from_json(j["grid"]);
        }
        if (j.contains("rl")) {
            c.rl = serialize::rl_config_from_json(j["rl"]);
        }
        if (j.contains("seeds")) {
            c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        }
        if (j.contains("output_dir")) {
            c.output_dir = resolve(j["output_dir"].get<std::string>());
        }
        if (j.contains("cycles")) {
            for (const auto &[name, p] : j["cycles"].items()) {
                c.cycles[name] = resolve(p.get<std::string>());
            }
        }
        if (j.contains("dt")) {
            c.dt = j["dt"].get<double>();
        }
        if (j.contains("kmh")) {
            c.kmh = j["kmh"].get<bool>();
        }
    } catch (const json::exception &e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

/// Values gathered from flags; applied on top of the config file.
struct Overrides {
    std::string config;
    std::string powertrain;
    std::string speed_grid;
    std::string soc_grid;
    std::string demand_grid;
    std::string torque_grid;
    std::optional<double> dt;
    bool kmh = false;
    std::optional<double> learning_rate, discount, epsilon0, epsilon_decay, alpha, soc_ref, soc_initial,
        penalty;
    std::optional<std::size_t> episodes;
    std::optional<std::uint64_t> seed;
};

std::vector<double> parse_triple(const std::string &text, const std::string &flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(cell, &used));
            if (used != cell.size()) {
                throw std::invalid_argument(cell);
            }
        } catch (const std::logic_error &) {
            throw ValidationError(flag + ": not a number '" + cell + "'");
        }
    }
    if (out.size() != 3) {
        throw ValidationError(flag + ": expected min,max,step");
    }
    return out;
}

class Context {
public:
    Context(const Overrides &o) {
        if (!o.config.empty()) {
            cfg_ = load_experiment_config(o.config);
        }
        if (!o.powertrain.empty()) {
            cfg_.powertrain = o.powertrain;
        }
        if (!o.speed_grid.empty()) {
            const auto v = parse_triple(o.speed_grid, "--speed-grid");
            cfg_.speed_grid = {v[0], v[1], v[2]};
        }
        if (!o.soc_grid.empty()) {
            const auto v = parse_triple(o.soc_grid, "--soc-grid");
            cfg_.grid.soc_min = v[0];
            cfg_.grid.soc_max = v[1];
            cfg_.grid.soc_step = v[2];
        }
        if (!o.demand_grid.empty()) {
            const auto v = parse_triple(o.demand_grid, "--demand-grid");
            cfg_.grid.demand_min = v[0];
            cfg_.grid.demand_max = v[1];
            cfg_.grid.demand_step = v[2];
        }
        if (!o.torque_grid.empty()) {
            const auto v = parse_triple(o.torque_grid, "--torque-grid");
            cfg_.grid.torque_min = v[0];
            cfg_.grid.torque_max = v[1];
            cfg_.grid.torque_step = v[2];
        }
        if (o.dt) {
            cfg_.dt = *o.dt;
        }
        cfg_.kmh = cfg_.kmh || o.kmh;
        auto &rl = cfg_.rl;
        if (o.learning_rate) rl.learning_rate = *o.learning_rate;
        if (o.discount) rl.discount = *o.discount;
        if (o.epsilon0) rl.epsilon0 = *o.epsilon0;
        if (o.epsilon_decay) rl.epsilon_decay = *o.epsilon_decay;
        if (o.alpha) rl.alpha = *o.alpha;
        if (o.soc_ref) rl.soc_ref = *o.soc_ref;
        if (o.soc_initial) rl.soc_initial = *o.soc_initial;
        if (o.penalty) rl.infeasible_penalty = *o.penalty;
        if (o.episodes) rl.episodes = *o.episodes;
        if (o.seed) rl.seed = *o.seed;
        cfg_.validate();
        pt_ = cfg_.powertrain ? serialize::load_powertrain(*cfg_.powertrain) : powertrain::Powertrain{};
    }

    const ExperimentConfig &config() const { return cfg_; }
    const powertrain::Powertrain &powertrain() const { return pt_; }

    /// Config alias, then file path, then bundled cycle name.
    DriveCycle cycle(const std::string &ref) const {
        if (auto it = cfg_.cycles.find(ref); it != cfg_.cycles.end()) {
            return named(load_cycle(it->second, cfg_.dt, cfg_.kmh), ref);
        }
        if (fs::exists(ref)) {
            return named(load_cycle(ref, cfg_.dt, cfg_.kmh), fs::path(ref).stem().string());
        }
        const auto names = standard_cycle_names();
        if (std::find(names.begin(), names.end(), ref) != names.end()) {
            return standard_cycle(ref);
        }
        throw ValidationError("cycle not found: " + ref);
    }

    fs::path output(const std::string &path) const {
        const fs::path p(path);
        if (p.is_absolute() || cfg_.output_dir.empty()) {
            return p;
        }
        fs::create_directories(cfg_.output_dir);
        return cfg_.output_dir / p;
    }

    json echo() const {
        return {{"rl", serialize::to_json(cfg_.rl)},
                {"grid", serialize::to_json(cfg_.grid)},
                {"speed_grid", serialize::to_json(cfg_.speed_grid)},
                {"powertrain", serialize::to_json(pt_)}};
    }

private:
    static DriveCycle named(DriveCycle c, const std::string &name) {
        c.name = name;
        return c;
    }

    ExperimentConfig cfg_;
    powertrain::Powertrain pt_;
};

void add_common(CLI::App *cmd, Overrides &o) {
    cmd->add_option("--config", o.config, "Experiment config JSON supplying defaults")->check(CLI::ExistingFile);
    cmd->add_option("--powertrain", o.powertrain, "Powertrain JSON (default: built-in bus)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--dt", o.dt, "Cycle sample period, s (default 1)");
    cmd->add_flag("--kmh", o.kmh, "Cycle CSV speeds are in km/h");
    cmd->add_option("--speed-grid", o.speed_grid, "TPM speed grid vmin,vmax,dv in m/s (default 0,25,1)");
}

void add_learning(CLI::App *cmd, Overrides &o) {
    cmd->add_option("--soc-grid", o.soc_grid, "SOC grid min,max,step (default 0.3,0.9,0.01)");
    cmd->add_option("--demand-grid", o.demand_grid, "Shaft-torque demand grid min,max,step in Nm (default -600,1500,100)");
    cmd->add_option("--torque-grid", o.torque_grid, "Engine torque actions min,max,step in Nm (default 0,900,50)");
    cmd->add_option("--lr", o.learning_rate, "Sarsa learning rate (default 0.95)");
    cmd->add_option("--discount", o.discount, "Sarsa discount factor (default 0.1)");
    cmd->add_option("--epsilon0", o.epsilon0, "Initial exploration probability (default 0.1)");
    cmd->add_option("--epsilon-decay", o.epsilon_decay, "Per-step exploration decay (default 0.99)");
    cmd->add_option("--alpha", o.alpha, "SOC deviation weight (default 10000)");
    cmd->add_option("--soc-ref", o.soc_ref, "Reference SOC (default 0.7)");
    cmd->add_option("--soc0", o.soc_initial, "Initial SOC (default 0.7)");
    cmd->add_option("--penalty", o.penalty, "Cost added per infeasible step (default 1e6)");
}

std::string host_descriptor() {
    std::ifstream in("/proc/cpuinfo");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) {
                auto name = line.substr(colon + 1);
                name.erase(0, name.find_first_not_of(' '));
                return name + ", " + std::to_string(std::thread::hardware_concurrency()) + " threads";
            }
        }
    }
    return "unknown host, " + std::to_string(std::thread::hardware_concurrency()) + " threads";
}

void write_timing(const fs::path &path, double seconds) {
    serialize::write_json(path, {{"wall_time", seconds}, {"host", host_descriptor()}});
}

/// Output file for one seed of a multi-seed run: q.json -> q_seed7.json.
fs::path seed_path(const fs::path &base, std::uint64_t seed) {
    auto out = base;
    out.replace_filename(base.stem().string() + "_seed" + std::to_string(seed) + base.extension().string());
    return out;
}

/// Run `task(i)` for i in [0, n) on up to `jobs` threads; the first exception is rethrown.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)> &task) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                task(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t k = 1; k < jobs; ++k) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto &t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

markov::Tpm tpm_for(const Context &ctx, const std::string &ref) {
    if (fs::path(ref).extension() == ".json" && fs::exists(ref)) {
        return serialize::tpm_from_json(serialize::read_json(ref));
    }
    return markov::build_tpm(ctx.cycle(ref), ctx.config().speed_grid);
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Energy management for a parallel hybrid bus: drive-cycle Markov models, "
                 "Sarsa with Q-table transfer, and a dynamic-programming benchmark."};
    app.name("hevems");
    app.require_subcommand(1);
    Overrides o;
    std::function<void()> action;

    // tpm
    auto *tpm = app.add_subcommand("tpm", "Transition probability matrices");
    tpm->require_subcommand(1);
    auto *tpm_build = tpm->add_subcommand("build", "Build a TPM from a cycle");
    std::string cycle_ref, output;
    std::string grid_text;
    add_common(tpm_build, o);
    tpm_build->add_option("--cycle", cycle_ref, "Cycle CSV or bundled cycle name")->required();
    tpm_build->add_option("--grid", grid_text, "Speed grid vmin,vmax,dv in m/s (default 0,25,1)");
    tpm_build->add_option("-o,--output", output, "Output TPM JSON")->required();
    tpm_build->callback([&] {
        action = [&] {
            if (!grid_text.empty()) {
                o.speed_grid = grid_text;
            }
            Context ctx(o);
            const auto t = markov::build_tpm(ctx.cycle(cycle_ref), ctx.config().speed_grid);
            serialize::write_json(ctx.output(output), serialize::to_json(t));
        };
    });
    auto *tpm_imn = tpm->add_subcommand("imn", "Print the induced matrix norm between two TPM files");
    std::string tpm_a, tpm_b;
    tpm_imn->add_option("a", tpm_a, "First TPM JSON")->required()->check(CLI::ExistingFile);
    tpm_imn->add_option("b", tpm_b, "Second TPM JSON")->required()->check(CLI::ExistingFile);
    tpm_imn->callback([&] {
        action = [&] {
            const auto a = serialize::tpm_from_json(serialize::read_json(tpm_a));
            const auto b = serialize::tpm_from_json(serialize::read_json(tpm_b));
            if (!(a.grid == b.grid)) {
                throw ValidationError("grid: TPM speed grids differ");
            }
            out << io::format_double(markov::imn(a, b)) << '\n';
        };
    });

    // train
    auto *train = app.add_subcommand("train", "Train a Q-table with Sarsa on one cycle");
    add_common(train, o);
    add_learning(train, o);
    std::string init_path, log_path, timing_path;
    std::vector<std::uint64_t> seeds;
    std::size_t jobs = 1;
    train->add_option("--cycle", cycle_ref, "Cycle CSV or bundled cycle name")->required();
    train->add_option("-o,--output", output, "Output Q-table JSON")->required();
    train->add_option("--init", init_path, "Warm-start Q-table JSON")->check(CLI::ExistingFile);
    train->add_option("--episodes", o.episodes, "Training episodes (default 100)");
    train->add_option("--seed", o.seed, "RNG seed (default 0)");
    train->add_option("--seeds", seeds, "Train one table per seed; outputs get a _seed<N> suffix")->delimiter(',');
    train->add_option("--jobs", jobs, "Threads across seeds (default 1)")->check(CLI::PositiveNumber);
    train->add_option("--log", log_path, "Per-episode training log CSV (includes wall time)");
    train->add_option("--timing", timing_path, "Write training wall time and host to this JSON");
    train->callback([&] {
        action = [&] {
            Context ctx(o);
            const auto cycle = ctx.cycle(cycle_ref);
            std::optional<ems::QTable> init;
            if (!init_path.empty()) {
                init = serialize::qtable_from_json(serialize::read_json(init_path));
            }
            auto run_seeds = seeds.empty() ? ctx.config().seeds : seeds;
            const bool multi = !run_seeds.empty();
            if (!multi) {
                run_seeds.push_back(ctx.config().rl.seed);
            }
            const ems::StateActionGrid grid = init ? init->grid() : ctx.config().grid;
            parallel_for(run_seeds.size(), jobs, [&](std::size_t i) {
                ems::RlConfig rl = ctx.config().rl;
                rl.seed = run_seeds[i];
                const auto result = ems::train(cycle, ctx.powertrain(), rl, grid, init);
                json echo = ctx.echo();
                echo["rl"] = serialize::to_json(rl);
                echo["cycle"] = cycle.name;
                const auto suffix = [&](const std::string &p) {
                    return multi ? seed_path(ctx.output(p), rl.seed) : ctx.output(p);
                };
                serialize::write_json(suffix(output), serialize::to_json(result.q, echo));
                if (!log_path.empty()) {
                    io::write_file_atomic(suffix(log_path), serialize::format_training_log_csv(result.log));
                }
                if (!timing_path.empty()) {
                    write_timing(suffix(timing_path), result.log.wall_time);
                }
            });
        };
    });

    // transfer
    auto *xfer = app.add_subcommand("transfer", "Scale a source Q-table by the IMN of two cycles, then optionally fine-tune");
    add_common(xfer, o);
    add_learning(xfer, o);
    std::string q1_path, cycle1, cycle2;
    std::size_t fine_tune = 0;
    xfer->add_option("--q1", q1_path, "Source Q-table JSON")->required()->check(CLI::ExistingFile);
    xfer->add_option("--cycle1", cycle1, "Source cycle (CSV, bundled name, or TPM JSON)")->required();
    xfer->add_option("--cycle2", cycle2, "Target cycle (CSV or bundled name)")->required();
    xfer->add_option("--fine-tune-episodes", fine_tune, "Sarsa episodes on the target cycle after transfer (default 0)");
    xfer->add_option("--seed", o.seed, "RNG seed for fine-tuning (default 0)");
    xfer->add_option("-o,--output", output, "Output Q-table JSON")->required();
    xfer->add_option("--log", log_path, "Per-episode fine-tuning log CSV");
    xfer->add_option("--timing", timing_path, "Write transfer plus fine-tuning wall time to this JSON");
    xfer->callback([&] {
        action = [&] {
            Context ctx(o);
            const auto q1 = serialize::qtable_from_json(serialize::read_json(q1_path));
            const auto start = std::chrono::steady_clock::now();
            const auto t1 = tpm_for(ctx, cycle1);
            const auto target = ctx.cycle(cycle2);
            const auto t2 = markov::build_tpm(target, ctx.config().speed_grid);
            auto result = ems::transfer(q1, t1, t2);
            if (result.fallback) {
                err << "warning: IMN " << io::format_double(result.imn)
                    << " is below threshold; source table kept unscaled\n";
            }
            ems::QTable q = result.q;
            ems::TrainingLog log;
            if (fine_tune > 0) {
                ems::RlConfig rl = ctx.config().rl;
                rl.episodes = fine_tune;
                auto tuned = ems::train(target, ctx.powertrain(), rl, q.grid(), q);
                tuned.q.meta.transfer_scale = result.imn;
                tuned.q.meta.transfer_fallback = result.fallback;
                q = std::move(tuned.q);
                log = std::move(tuned.log);
            }
            const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            json echo = ctx.echo();
            echo["source_cycle"] = cycle1;
            echo["cycle"] = target.name;
            echo["imn"] = result.imn;
            echo["fine_tune_episodes"] = fine_tune;
            serialize::write_json(ctx.output(output), serialize::to_json(q, echo));
            if (!log_path.empty()) {
                io::write_file_atomic(ctx.output(log_path), serialize::format_training_log_csv(log));
            }
            if (!timing_path.empty()) {
                write_timing(ctx.output(timing_path), wall);
            }
            out << "imn " << io::format_double(result.imn) << '\n';
        };
    });

    // dp
    auto *dpc = app.add_subcommand("dp", "Solve the dynamic-programming benchmark on a cycle");
    add_common(dpc, o);
    add_learning(dpc, o);
    std::string trajectory_path;
    dpc->add_option("--cycle", cycle_ref, "Cycle CSV or bundled cycle name")->required();
    dpc->add_option("-o,--output", output, "Output DP solution JSON")->required();
    dpc->add_option("--trajectory", trajectory_path, "Optimal trajectory CSV");
    dpc->add_option("--timing", timing_path, "Write solve wall time and host to this JSON");
    dpc->callback([&] {
        action = [&] {
            Context ctx(o);
            const auto cycle = ctx.cycle(cycle_ref);
            const auto start = std::chrono::steady_clock::now();
            const auto sol = dp::dp_solve(cycle, ctx.powertrain(), ctx.config().rl, ctx.config().grid);
            const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            json j = serialize::to_json(sol);
            json echo = ctx.echo();
            echo["cycle"] = cycle.name;
            j["config"] = echo;
            serialize::write_json(ctx.output(output), j);
            if (!trajectory_path.empty()) {
                io::write_file_atomic(ctx.output(trajectory_path), serialize::format_dp_trajectory_csv(sol));
            }
            if (!timing_path.empty()) {
                write_timing(ctx.output(timing_path), wall);
            }
            out << "cost " << io::format_double(sol.total_cost) << " fuel " << io::format_double(sol.total_fuel)
                << '\n';
        };
    });

    // simulate
    auto *simc = app.add_subcommand("simulate", "Roll a greedy Q-table policy or a DP solution over a cycle");
    add_common(simc, o);
    add_learning(simc, o);
    std::string policy_path, dp_path, summary_path, name, timing_from;
    simc->add_option("--cycle", cycle_ref, "Cycle CSV or bundled cycle name")->required();
    auto *policy_opt = simc->add_option("--policy", policy_path, "Q-table JSON")->check(CLI::ExistingFile);
    auto *dp_opt = simc->add_option("--dp", dp_path, "DP solution JSON")->check(CLI::ExistingFile);
    policy_opt->excludes(dp_opt);
    simc->add_option("-o,--output", output, "Per-step log CSV")->required();
    simc->add_option("--summary", summary_path, "Summary JSON for compare");
    simc->add_option("--name", name, "Method name in the summary (default: input file stem)");
    simc->add_option("--timing-from", timing_from, "Timing JSON from train/transfer/dp; its wall time goes into the summary")
        ->check(CLI::ExistingFile);
    simc->callback([&] {
        action = [&] {
            if (policy_path.empty() == dp_path.empty()) {
                throw ValidationError("simulate: give exactly one of --policy or --dp");
            }
            Context ctx(o);
            const auto cycle = ctx.cycle(cycle_ref);
            sim::SimResult r;
            if (!policy_path.empty()) {
                const auto q = serialize::qtable_from_json(serialize::read_json(policy_path));
                r = sim::simulate(ems::greedy_policy(q), cycle, ctx.powertrain(), ctx.config().rl,
                                  ctx.config().rl.soc_initial);
            } else {
                const auto sol = serialize::dp_solution_from_json(serialize::read_json(dp_path));
                if (sol.steps + 1 != cycle.size()) {
                    throw ValidationError("simulate: DP solution has " + std::to_string(sol.steps) +
                                          " steps, cycle needs " + std::to_string(cycle.size() - 1));
                }
                r = sim::simulate(sol, cycle, ctx.powertrain(), ctx.config().rl);
            }
            io::write_file_atomic(ctx.output(output), serialize::format_sim_log_csv(r));
            const std::string label =
                !name.empty() ? name : fs::path(policy_path.empty() ? dp_path : policy_path).stem().string();
            auto summary = sim::summarize(label, r);
            if (!timing_from.empty()) {
                summary.wall_time = serialize::read_json(timing_from).value("wall_time", 0.0);
            }
            if (!summary_path.empty()) {
                serialize::write_json(ctx.output(summary_path),
                                      serialize::summary_to_json(summary, !timing_from.empty()));
            }
            out << label << ": fuel " << io::format_double(r.fuel_total) << " g, cost "
                << io::format_double(r.cost_total) << ", soc_end " << io::format_double(r.soc_end)
                << ", infeasible steps " << r.infeasible_steps << '\n';
        };
    });

    // compare
    auto *cmp = app.add_subcommand("compare", "Tabulate simulation summaries with gaps to a baseline");
    std::vector<std::string> summaries;
    std::string baseline;
    cmp->add_option("summaries", summaries, "Summary JSON files")->required()->check(CLI::ExistingFile);
    cmp->add_option("--baseline", baseline, "Name of the baseline method")->required();
    cmp->add_option("-o,--output", output, "Report JSON");
    cmp->callback([&] {
        action = [&] {
            std::vector<sim::Summary> rows;
            for (const auto &p : summaries) {
                rows.push_back(serialize::summary_from_json(serialize::read_json(p)));
            }
            const auto report = sim::compare(rows, baseline);
            if (!output.empty()) {
                serialize::write_json(output, serialize::to_json(report));
            }
            out << sim::format_report(report);
        };
    });

    // recognize
    auto *rec = app.add_subcommand("recognize", "Classify sliding windows of a cycle against reference TPMs");
    add_common(rec, o);
    std::vector<std::string> refs;
    std::size_t window_len = 150, hop = 10;
    rec->add_option("--cycle", cycle_ref, "Cycle CSV or bundled cycle name")->required();
    rec->add_option("--ref", refs, "Reference as name=FILE (TPM JSON or cycle CSV) or a bundled cycle name")
        ->required();
    rec->add_option("--window", window_len, "Window length in samples (default 150)")->check(CLI::Range(2, 1 << 30));
    rec->add_option("--hop", hop, "Samples between windows (default 10)")->check(CLI::PositiveNumber);
    rec->add_option("-o,--output", output, "Also write the rows to this CSV");
    rec->callback([&] {
        action = [&] {
            Context ctx(o);
            std::vector<markov::NamedTpm> references;
            for (const auto &r : refs) {
                const auto eq = r.find('=');
                const std::string ref_name = eq == std::string::npos ? r : r.substr(0, eq);
                const std::string ref_src = eq == std::string::npos ? r : r.substr(eq + 1);
                auto t = tpm_for(ctx, ref_src);
                if (!(t.grid == ctx.config().speed_grid)) {
                    throw ValidationError("grid: reference '" + ref_name + "' uses a different speed grid");
                }
                references.push_back({ref_name, std::move(t)});
            }
            const auto rows = markov::recognize_stream(ctx.cycle(cycle_ref), ctx.config().speed_grid, references,
                                                       window_len, hop);
            const auto text = serialize::format_recognition_csv(rows);
            out << text;
            if (!output.empty()) {
                io::write_file_atomic(ctx.output(output), text);
            }
        };
    });

    // powertrain
    auto *ptc = app.add_subcommand("powertrain", "Export the default powertrain configuration");
    std::string fuel_map_path;
    ptc->add_option("-o,--output", output, "Powertrain JSON")->required();
    ptc->add_option("--fuel-map", fuel_map_path, "Also write the fuel map CSV and reference it from the JSON");
    ptc->callback([&] {
        action = [&] {
            const powertrain::Powertrain pt;
            std::string ref;
            if (!fuel_map_path.empty()) {
                io::write_file_atomic(fuel_map_path, serialize::format_fuel_map_csv(pt.engine.fuel_map));
                ref = fs::relative(fs::absolute(fuel_map_path), fs::absolute(output).parent_path()).string();
            }
            serialize::write_json(output, serialize::to_json(pt, ref));
        };
    });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }

    try {
        if (action) {
            action();
        }
        return kExitOk;
    } catch (const ValidationError &e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ModelError &e) {
        err << "error: " << e.what() << '\n';
        return kExitModel;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return kExitModel;
    }
}

} // namespace hevems::cli
