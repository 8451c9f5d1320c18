#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aoisched/config.hpp"
#include "aoisched/csv.hpp"
#include "aoisched/harness.hpp"
#include "aoisched/oracle.hpp"
#include "aoisched/parallel.hpp"

namespace {

using namespace aoisched;

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    std::string out_dir = ".";
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("--config", args.config_path, "experiment config file")->required();
    sub->add_option("--seed", args.seed, "override [run] master_seed");
    sub->add_option("--jobs", args.jobs, "worker thread cap")->check(CLI::PositiveNumber);
    sub->add_option("--out", args.out_dir, "output directory");
}

ExperimentConfig load(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args.config_path);
    if (args.seed) cfg.run.master_seed = *args.seed;
    return cfg;
}

/// Every artifact starts with the fully resolved configuration, so the file
/// alone suffices to reproduce itself.
std::string artifact_header(const ExperimentConfig& cfg, const std::string& command) {
    std::ostringstream os;
    os << "aoisched " << command << "\n";
    char fp[17];
    std::snprintf(fp, sizeof(fp), "%016llx",
                  static_cast<unsigned long long>(cfg.fingerprint()));
    os << "fingerprint = " << fp << "\n";
    os << cfg.echo();
    return comment_block(os.str());
}

std::string out_path(const CommonArgs& args, const ExperimentConfig& cfg,
                     const std::string& suffix) {
    return args.out_dir + "/" + cfg.run.stem + suffix;
}

std::string policy_csv(const Kernel& k, const Policy& policy, const std::vector<double>& h,
                       const std::string& header) {
    std::string out = header;
    out += "e,b,aoi_rx,aoi_tx,retx,action,h\n";
    for (std::size_t s = 0; s < k.n_states(); ++s) {
        const SystemState st = k.space.decode(s);
        out += std::to_string(st.e) + "," + std::to_string(st.b) + "," +
               std::to_string(st.aoi_rx) + "," + std::to_string(st.aoi_tx) + "," +
               std::to_string(st.retx) + "," + to_string(policy[s]) + "," +
               format_double(h[s]) + "\n";
    }
    return out;
}

std::string policy_map_csv(const Kernel& k, const Policy& policy, int e,
                           const std::string& header) {
    std::string out = header;
    out += "retx,aoi_tx,b,aoi_rx,action\n";
    for (const PolicyMapCell& c : policy_map(k, policy, e))
        out += std::to_string(c.retx) + "," + std::to_string(c.aoi_tx) + "," +
               std::to_string(c.b) + "," + std::to_string(c.aoi_rx) + "," +
               to_string(c.action) + "\n";
    return out;
}

void emit_structure_notes(const Kernel& k, const Policy& policy) {
    for (int e = 0; e <= k.cfg.energy.max_level(); ++e)
        for (int b = 0; b <= k.cfg.b_max; ++b)
            for (int r = 0; r <= k.cfg.harq.r_max; ++r)
                if (!transmit_set_upward_closed(k, policy, e, b, r))
                    std::cerr << "note: transmit set not upward-closed at (e=" << e
                              << ", b=" << b << ", retx=" << r << ")\n";
    if (k.cfg.energy.num_levels() == 2 && !transmit_region_nested(k, policy))
        std::cerr << "note: low-harvest transmit region is not nested in the high-harvest one\n";
}

int cmd_solve(const CommonArgs& args) {
    const ExperimentConfig cfg = load(args);
    if (cfg.method != Method::Rvi && cfg.method != Method::Oracle)
        throw ConfigError("solve requires [method] name = rvi or oracle");
    const std::string header = artifact_header(cfg, "solve");

    const Kernel k = build_kernel(cfg.system, cfg.kernel);
    const RviSolution sol = rvi_solve(k, cfg.rvi);
    const double residual = bellman_residual(k, sol.gain, sol.h);

    std::string summary = header;
    summary += "key,value\n";
    summary += "command,solve\n";
    summary += std::string("method,") + to_string(cfg.method) + "\n";
    summary += "states," + std::to_string(k.n_states()) + "\n";
    summary += "gain," + format_double(sol.gain) + "\n";
    summary += "iterations," + std::to_string(sol.iterations) + "\n";
    summary += "span," + format_double(sol.span) + "\n";
    summary += "residual," + format_double(residual) + "\n";

    std::cout << "J* = " << format_double(sol.gain) << " after " << sol.iterations
              << " iterations (residual " << format_double(residual) << ", "
              << k.n_states() << " states)\n";

    if (cfg.method == Method::Oracle) {
        const OracleSolution ora = brute_force_oracle(k, cfg.oracle);
        const double diff = std::abs(sol.gain - ora.gain);
        summary += "oracle_gain," + format_double(ora.gain) + "\n";
        summary += "gain_diff," + format_double(diff) + "\n";
        summary += std::string("oracle_method,") +
                   (ora.method == OracleMethod::Enumeration ? "enumeration"
                                                            : "policy_iteration") +
                   "\n";
        summary += "policies_evaluated," + std::to_string(ora.policies_evaluated) + "\n";
        std::cout << "|J*(rvi) - J*(oracle)| = " << format_double(diff) << "\n";
    }

    write_text_file(out_path(args, cfg, "_summary.csv"), summary);
    write_text_file(out_path(args, cfg, "_policy.csv"), policy_csv(k, sol.policy, sol.h, header));
    for (int e = 0; e <= cfg.system.energy.max_level(); ++e)
        write_text_file(out_path(args, cfg, "_policy_map_e" + std::to_string(e) + ".csv"),
                        policy_map_csv(k, sol.policy, e, header));
    emit_structure_notes(k, sol.policy);
    return 0;
}

std::string qtable_csv(const SystemConfig& sys, const QTable& table,
                       const std::string& header) {
    const StateSpace space(sys);
    std::string out = header;
    out += "e,b,aoi_rx,aoi_tx,retx,action,q,visits\n";
    for (std::size_t s = 0; s < space.size(); ++s) {
        const SystemState st = space.decode(s);
        std::string prefix = std::to_string(st.e) + "," + std::to_string(st.b) + "," +
                             std::to_string(st.aoi_rx) + "," + std::to_string(st.aoi_tx) +
                             "," + std::to_string(st.retx) + ",";
        feasible_actions(st, sys).for_each([&](Action a) {
            const std::size_t i = table.index(s, a);
            out += prefix + to_string(a) + "," + format_double(table.q[i]) + "," +
                   std::to_string(table.visits[i]) + "\n";
        });
    }
    return out;
}

std::string theta_csv(const ThresholdParams& p, const std::string& header) {
    std::string out = header;
    out += "e,b,aoi_tx,retx,theta,masked\n";
    for (int e = 0; e < p.n_e; ++e)
        for (int b = 0; b < p.n_b; ++b)
            for (int tx = 1; tx <= p.n_age; ++tx)
                for (int r = 0; r < p.n_r; ++r) {
                    const std::size_t i = p.index(e, b, tx, r);
                    out += std::to_string(e) + "," + std::to_string(b) + "," +
                           std::to_string(tx) + "," + std::to_string(r) + "," +
                           format_double(p.theta[i]) + "," +
                           (p.masked[i] ? "1" : "0") + "\n";
                }
    return out;
}

int cmd_train(const CommonArgs& args) {
    const ExperimentConfig cfg = load(args);
    if (cfg.method != Method::Gr && cfg.method != Method::Pg)
        throw ConfigError("train requires [method] name = gr or pg");
    const std::string header = artifact_header(cfg, "train");
    const std::size_t runs = cfg.run.runs;

    std::vector<RunRecord> records(runs);
    std::optional<QTable> table0;
    std::optional<ThresholdParams> params0;
    std::uint64_t env_steps = 0;

    if (cfg.method == Method::Gr) {
        env_steps = cfg.run.steps;
        std::vector<std::optional<GrTrainResult>> results(runs);
        parallel_for_index(runs, args.jobs, [&](std::size_t r) {
            results[r] =
                gr_train(cfg.system, cfg.run.steps, cfg.gr, derive_seed(cfg.run.master_seed, r));
        });
        for (std::size_t r = 0; r < runs; ++r) records[r] = results[r]->record;
        table0 = std::move(results[0]->table);
    } else {
        const std::uint64_t per_iter =
            2 * cfg.pg.pert.rollouts_per_eval * cfg.pg.pert.rollout_len;
        env_steps = cfg.pg_iterations * per_iter;
        if (env_steps != cfg.run.steps)
            std::cerr << "note: [pg] budget iterations*2*rollouts*len = " << env_steps
                      << " differs from [run] steps = " << cfg.run.steps << "\n";
        std::vector<std::optional<PgTrainResult>> results(runs);
        parallel_for_index(runs, args.jobs, [&](std::size_t r) {
            results[r] = pg_train(cfg.system, cfg.pg_iterations, cfg.pg,
                                  derive_seed(cfg.run.master_seed, r));
        });
        for (std::size_t r = 0; r < runs; ++r) records[r] = results[r]->record;
        params0 = std::move(results[0]->params);
    }

    std::string curve = header;
    curve += "run,step,running_avg_aoi\n";
    for (std::size_t r = 0; r < runs; ++r)
        for (const CurvePoint& pt : records[r].curve)
            curve += std::to_string(r) + "," + std::to_string(pt.step) + "," +
                     format_double(pt.running_avg_cost) + "\n";
    write_text_file(out_path(args, cfg, "_curve.csv"), curve);

    double mean = 0.0;
    for (const RunRecord& rec : records) mean += rec.final_avg_cost;
    mean /= static_cast<double>(runs);
    double se = 0.0;
    if (runs > 1) {
        double ss = 0.0;
        for (const RunRecord& rec : records)
            ss += (rec.final_avg_cost - mean) * (rec.final_avg_cost - mean);
        se = std::sqrt(ss / static_cast<double>(runs - 1)) /
             std::sqrt(static_cast<double>(runs));
    }

    std::string summary = header;
    summary += "key,value\n";
    summary += "command,train\n";
    summary += std::string("method,") + to_string(cfg.method) + "\n";
    summary += "runs," + std::to_string(runs) + "\n";
    summary += "env_steps_per_run," + std::to_string(env_steps) + "\n";
    summary += "mean_final_aoi," + format_double(mean) + "\n";
    summary += "stderr_final_aoi," + format_double(se) + "\n";
    write_text_file(out_path(args, cfg, "_summary.csv"), summary);

    if (table0)
        write_text_file(out_path(args, cfg, "_qtable.csv"),
                        qtable_csv(cfg.system, *table0, header));
    if (params0)
        write_text_file(out_path(args, cfg, "_theta.csv"), theta_csv(*params0, header));

    std::cout << "mean final AoI = " << format_double(mean) << " (stderr "
              << format_double(se) << ") over " << runs << " runs\n";
    return 0;
}

int cmd_sweep(const CommonArgs& args) {
    const ExperimentConfig cfg = load(args);
    if (!cfg.sweep.present) throw ConfigError("sweep requires a [sweep] section");
    const std::string header = artifact_header(cfg, "sweep");

    const SweepResult res =
        run_sweep(cfg.system, cfg.sweep.parameter, cfg.sweep.grid, cfg.sweep.methods,
                  cfg.method_settings(), cfg.run.master_seed, args.jobs);

    std::string out = header;
    out += "grid_value,method,avg_aoi,stderr\n";
    for (const SweepRow& row : res.rows)
        out += format_double(row.grid_value) + "," + to_string(row.method) + "," +
               format_double(row.avg_aoi) + "," +
               (row.has_stderr ? format_double(row.stderr_) : std::string{}) + "\n";
    write_text_file(out_path(args, cfg, "_sweep.csv"), out);

    for (const std::string& w : res.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "wrote " << res.rows.size() << " sweep rows ("
              << cfg.sweep.grid.size() << " grid points)\n";
    return 0;
}

int cmd_simulate(const CommonArgs& args) {
    const ExperimentConfig cfg = load(args);
    if (cfg.method != Method::Rvi && cfg.method != Method::Greedy)
        throw ConfigError("simulate requires [method] name = rvi or greedy");
    const std::string header = artifact_header(cfg, "simulate");

    const Kernel k = build_kernel(cfg.system, cfg.kernel);
    const Policy policy =
        cfg.method == Method::Rvi ? rvi_solve(k, cfg.rvi).policy : greedy_policy(k);
    const McEstimate est =
        evaluate_policy_mc(k, policy, cfg.run.steps, cfg.run.runs, cfg.run.master_seed);

    std::string sim = header;
    sim += "run,avg_aoi\n";
    for (std::size_t r = 0; r < est.per_run.size(); ++r)
        sim += std::to_string(r) + "," + format_double(est.per_run[r]) + "\n";
    write_text_file(out_path(args, cfg, "_sim.csv"), sim);

    std::string summary = header;
    summary += "key,value\n";
    summary += "command,simulate\n";
    summary += std::string("method,") + to_string(cfg.method) + "\n";
    summary += "horizon," + std::to_string(cfg.run.steps) + "\n";
    summary += "runs," + std::to_string(cfg.run.runs) + "\n";
    summary += "mean_aoi," + format_double(est.mean) + "\n";
    summary += "stderr_aoi," + format_double(est.stderr_) + "\n";
    write_text_file(out_path(args, cfg, "_summary.csv"), summary);

    std::cout << "mean AoI = " << format_double(est.mean) << " (stderr "
              << format_double(est.stderr_) << ") over " << cfg.run.runs << " runs of "
              << cfg.run.steps << " slots\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Energy-harvesting status-update scheduling toolkit"};
    app.require_subcommand(1);

    CommonArgs solve_args, train_args, sweep_args, sim_args;
    CLI::App* solve = app.add_subcommand("solve", "exact average-AoI solution (rvi or oracle)");
    add_common(solve, solve_args);
    CLI::App* train = app.add_subcommand("train", "run a learning method (gr or pg)");
    add_common(train, train_args);
    CLI::App* sweep = app.add_subcommand("sweep", "evaluate methods over a parameter grid");
    add_common(sweep, sweep_args);
    CLI::App* sim = app.add_subcommand("simulate", "Monte-Carlo evaluation of a fixed policy");
    add_common(sim, sim_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // prints help or the parse diagnostic
        return code == 0 ? 0 : 2;
    }

    try {
        if (solve->parsed()) return cmd_solve(solve_args);
        if (train->parsed()) return cmd_train(train_args);
        if (sweep->parsed()) return cmd_sweep(sweep_args);
        if (sim->parsed()) return cmd_simulate(sim_args);
        return 2;  // unreachable: require_subcommand(1)
    } catch (const aoisched::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const aoisched::ConvergenceError& e) {
        std::cerr << "convergence error: " << e.what() << "\n";
        return 3;
    } catch (const aoisched::ResourceError& e) {
        std::cerr << "resource error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
