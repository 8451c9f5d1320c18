#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "aoisched/error.hpp"
#include "aoisched/gr_learning.hpp"
#include "aoisched/kernel.hpp"
#include "aoisched/model.hpp"
#include "aoisched/parallel.hpp"
#include "aoisched/policy_eval.hpp"
#include "aoisched/policy_gradient.hpp"
#include "aoisched/rng.hpp"
#include "aoisched/rvi.hpp"

namespace aoisched {

// ---------------------------------------------------------------------------
// Greedy baseline
// ---------------------------------------------------------------------------

/// Baseline that transmits as soon as energy allows: a fresh update whenever
/// both sensing and transmission are affordable, a retransmission when only
/// transmission is and a packet is pending, idle otherwise. Always feasible.
inline Action greedy_policy(const SystemState& s, const SystemConfig& cfg) {
    if (s.b >= cfg.e_tx + cfg.e_s) return Action::NewUpdate;
    if (s.b >= cfg.e_tx && s.retx > 0) return Action::Retransmit;
    return Action::Idle;
}

/// The greedy baseline tabulated over the encoded state space.
inline Policy greedy_policy(const Kernel& k) {
    Policy p(k.n_states());
    for (std::size_t s = 0; s < k.n_states(); ++s)
        p[s] = greedy_policy(k.space.decode(s), k.cfg);
    return p;
}

// ---------------------------------------------------------------------------
// Monte-Carlo evaluation
// ---------------------------------------------------------------------------

struct McEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;  ///< sample standard error; 0 when runs == 1
    std::vector<double> per_run;
};

/// Seeded independent simulations of a (possibly stochastic) policy given as
/// act(state, rng) -> Action. Run r uses derive_seed(seed, r), so estimates
/// are reproducible and independent of evaluation order.
template <typename PolicyFn>
McEstimate evaluate_policy_mc(PolicyFn&& act, const SystemConfig& cfg, std::uint64_t horizon,
                              std::size_t runs, std::uint64_t seed) {
    if (horizon < 1) throw ContractError("evaluate_policy_mc: horizon must be >= 1");
    if (runs < 1) throw ContractError("evaluate_policy_mc: runs must be >= 1");
    McEstimate est;
    est.per_run.resize(runs);
    for (std::size_t r = 0; r < runs; ++r) {
        Rng rng(derive_seed(seed, r));
        SystemState s = initial_state(cfg, rng);
        double cum = 0.0;
        for (std::uint64_t t = 0; t < horizon; ++t) {
            const Action a = act(s, rng);
            const StepOutcome out = step(s, a, cfg, rng);
            cum += static_cast<double>(out.cost);
            s = out.next;
        }
        est.per_run[r] = cum / static_cast<double>(horizon);
        est.mean += est.per_run[r];
    }
    est.mean /= static_cast<double>(runs);
    if (runs > 1) {
        double ss = 0.0;
        for (double v : est.per_run) ss += (v - est.mean) * (v - est.mean);
        est.stderr_ = std::sqrt(ss / static_cast<double>(runs - 1)) /
                      std::sqrt(static_cast<double>(runs));
    }
    return est;
}

/// Tabular-policy overload.
inline McEstimate evaluate_policy_mc(const Kernel& k, const Policy& policy,
                                     std::uint64_t horizon, std::size_t runs,
                                     std::uint64_t seed) {
    validate_policy(k, policy);
    return evaluate_policy_mc(
        [&](const SystemState& s, Rng&) { return policy[k.space.encode(s)]; }, k.cfg, horizon,
        runs, seed);
}

// ---------------------------------------------------------------------------
// Policy maps and structure probes
// ---------------------------------------------------------------------------

struct PolicyMapCell {
    int retx;
    int aoi_tx;
    int b;
    int aoi_rx;
    Action action;
};

/// The policy restricted to one energy level on the slice aoi_tx =
/// min(retx+1, delta_max): one (battery, receiver age) grid per
/// retransmission count. This is the slice where transmitter age equals its
/// smallest reachable value for the given retransmission count.
inline std::vector<PolicyMapCell> policy_map(const Kernel& k, const Policy& policy, int e) {
    validate_policy(k, policy);
    if (e < 0 || e > k.cfg.energy.max_level())
        throw ContractError("policy_map: energy level out of range");
    std::vector<PolicyMapCell> cells;
    for (int r = 0; r <= k.cfg.harq.r_max; ++r) {
        const int tx = std::min(r + 1, k.cfg.delta_max);
        for (int b = 0; b <= k.cfg.b_max; ++b)
            for (int rx = 1; rx <= k.cfg.delta_max; ++rx)
                cells.push_back(
                    {r, tx, b, rx, policy[k.space.encode({e, b, rx, tx, r})]});
    }
    return cells;
}

/// True when, for fixed (e, b, retx) on the aoi_tx = min(retx+1, delta_max)
/// slice, the receiver ages with a non-Idle action form an upward-closed set.
inline bool transmit_set_upward_closed(const Kernel& k, const Policy& policy, int e, int b,
                                       int r) {
    const int tx = std::min(r + 1, k.cfg.delta_max);
    bool seen_transmit = false;
    for (int rx = 1; rx <= k.cfg.delta_max; ++rx) {
        const bool non_idle = policy[k.space.encode({e, b, rx, tx, r})] != Action::Idle;
        if (seen_transmit && !non_idle) return false;
        seen_transmit = seen_transmit || non_idle;
    }
    return true;
}

/// True when the e=0 transmit region is contained in the e=1 region on every
/// policy-map slice (the low-harvest state is the more conservative one).
/// Binary energy processes only.
inline bool transmit_region_nested(const Kernel& k, const Policy& policy) {
    if (k.cfg.energy.num_levels() != 2)
        throw ContractError("transmit_region_nested: binary energy process required");
    for (int r = 0; r <= k.cfg.harq.r_max; ++r) {
        const int tx = std::min(r + 1, k.cfg.delta_max);
        for (int b = 0; b <= k.cfg.b_max; ++b)
            for (int rx = 1; rx <= k.cfg.delta_max; ++rx) {
                const bool low = policy[k.space.encode({0, b, rx, tx, r})] != Action::Idle;
                const bool high = policy[k.space.encode({1, b, rx, tx, r})] != Action::Idle;
                if (low && !high) return false;
            }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

enum class Method { Rvi, Greedy, Gr, Pg, Oracle };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::Rvi: return "rvi";
        case Method::Greedy: return "greedy";
        case Method::Gr: return "gr";
        case Method::Pg: return "pg";
        case Method::Oracle: return "oracle";
    }
    return "?";
}

inline Method parse_method(const std::string& name) {
    if (name == "rvi") return Method::Rvi;
    if (name == "greedy") return Method::Greedy;
    if (name == "gr") return Method::Gr;
    if (name == "pg") return Method::Pg;
    if (name == "oracle") return Method::Oracle;
    throw ConfigError("unknown method '" + name + "' (expected rvi|greedy|gr|pg|oracle)");
}

enum class SweepParameter { PE, BMax, ES, Rho, P11 };

inline const char* to_string(SweepParameter p) {
    switch (p) {
        case SweepParameter::PE: return "p_e";
        case SweepParameter::BMax: return "b_max";
        case SweepParameter::ES: return "e_s";
        case SweepParameter::Rho: return "rho";
        case SweepParameter::P11: return "p11";
    }
    return "?";
}

inline SweepParameter parse_sweep_parameter(const std::string& name) {
    if (name == "p_e") return SweepParameter::PE;
    if (name == "b_max") return SweepParameter::BMax;
    if (name == "e_s") return SweepParameter::ES;
    if (name == "rho") return SweepParameter::Rho;
    if (name == "p11") return SweepParameter::P11;
    throw ConfigError("unknown sweep parameter '" + name +
                      "' (expected p_e|b_max|e_s|rho|p11)");
}

namespace detail {

inline int sweep_int_value(double v, const char* what) {
    const double r = std::round(v);
    if (std::abs(v - r) > 1e-9)
        throw ConfigError(std::string("sweep value for ") + what + " must be an integer");
    return static_cast<int>(r);
}

}  // namespace detail

/// Base config with the swept parameter replaced by one grid value. An
/// infinite b_max is approximated by b_inf_approx.
inline SystemConfig apply_sweep_value(const SystemConfig& base, SweepParameter param,
                                      double value, int b_inf_approx = 100) {
    SystemConfig cfg = base;
    switch (param) {
        case SweepParameter::PE:
            if (!(value >= 0.0) || !(value <= 1.0))
                throw ConfigError("sweep p_e value must be in [0,1]");
            cfg.energy = EnergyProcess::iid(value);
            break;
        case SweepParameter::BMax:
            cfg.b_max = std::isinf(value) ? b_inf_approx
                                          : detail::sweep_int_value(value, "b_max");
            break;
        case SweepParameter::ES:
            cfg.e_s = detail::sweep_int_value(value, "e_s");
            break;
        case SweepParameter::Rho:
            if (!(value >= -1.0 && value <= 1.0))
                throw ConfigError("sweep rho value must be in [-1,1]");
            cfg.energy = EnergyProcess::symmetric_two_state((1.0 + value) / 2.0);
            break;
        case SweepParameter::P11:
            if (!(value >= 0.0) || !(value <= 1.0))
                throw ConfigError("sweep p11 value must be in [0,1]");
            cfg.energy = EnergyProcess::symmetric_two_state(value);
            break;
    }
    try {
        cfg.validate();
    } catch (const ContractError& e) {
        throw ConfigError(std::string("sweep value produces an invalid system: ") + e.what());
    }
    return cfg;
}

struct MethodSettings {
    RviOptions rvi{};
    KernelOptions kernel{};
    StationaryOptions stationary{};
    GrOptions gr{};
    std::uint64_t gr_steps = 20000;
    PgOptions pg{};
    std::uint64_t pg_iterations = 5;
    std::size_t runs = 100;   ///< seeded runs per grid point for learning methods
    int b_inf_approx = 100;   ///< stand-in battery size for an infinite grid value
    bool check_inf_saturation = true;
};

struct SweepRow {
    double grid_value = 0.0;
    Method method = Method::Rvi;
    double avg_aoi = 0.0;
    double stderr_ = 0.0;
    bool has_stderr = false;  ///< false for exact methods
};

struct SweepResult {
    std::vector<SweepRow> rows;        ///< grid-major, then method in input order
    std::vector<std::string> warnings;
};

/// Evaluates every (grid value, method) pair. Exact methods (rvi, greedy)
/// solve the instance; learning methods train `runs` independently seeded
/// times and report mean and standard error of the final metric. Tasks are
/// seeded by their position in the deterministic task list, so results are
/// byte-identical for any job count.
inline SweepResult run_sweep(const SystemConfig& base, SweepParameter param,
                             const std::vector<double>& grid,
                             const std::vector<Method>& methods, const MethodSettings& ms,
                             std::uint64_t master_seed, unsigned jobs = 1) {
    if (grid.empty()) throw ConfigError("sweep grid is empty");
    if (methods.empty()) throw ConfigError("sweep method list is empty");
    for (Method m : methods)
        if (m == Method::Oracle)
            throw ConfigError("sweeps support methods rvi|greedy|gr|pg");

    struct Task {
        std::size_t point;
        std::size_t method;
        std::size_t run;  // 0 for exact methods
    };
    std::vector<Task> tasks;
    for (std::size_t p = 0; p < grid.size(); ++p)
        for (std::size_t m = 0; m < methods.size(); ++m) {
            const bool learning = methods[m] == Method::Gr || methods[m] == Method::Pg;
            const std::size_t n_runs = learning ? ms.runs : 1;
            for (std::size_t r = 0; r < n_runs; ++r) tasks.push_back({p, m, r});
        }

    std::vector<double> values(tasks.size(), 0.0);
    std::vector<std::string> task_warnings(tasks.size());
    parallel_for_index(tasks.size(), jobs, [&](std::size_t i) {
        const Task& task = tasks[i];
        const double gv = grid[task.point];
        const SystemConfig cfg = apply_sweep_value(base, param, gv, ms.b_inf_approx);
        const std::uint64_t seed = derive_seed(master_seed, i);
        switch (methods[task.method]) {
            case Method::Rvi: {
                const Kernel k = build_kernel(cfg, ms.kernel);
                values[i] = rvi_solve(k, ms.rvi).gain;
                if (param == SweepParameter::BMax && std::isinf(gv) &&
                    ms.check_inf_saturation) {
                    SystemConfig doubled = cfg;
                    doubled.b_max = 2 * ms.b_inf_approx;
                    const Kernel k2 = build_kernel(doubled, ms.kernel);
                    const double j2 = rvi_solve(k2, ms.rvi).gain;
                    if (std::abs(j2 - values[i]) >= 1e-3)
                        task_warnings[i] =
                            "b_max=inf approximation unsaturated: J*(" +
                            std::to_string(cfg.b_max) + ")=" + std::to_string(values[i]) +
                            " vs J*(" + std::to_string(doubled.b_max) +
                            ")=" + std::to_string(j2);
                }
                break;
            }
            case Method::Greedy: {
                const Kernel k = build_kernel(cfg, ms.kernel);
                values[i] = evaluate_policy_exact(k, greedy_policy(k), ms.stationary).gain;
                break;
            }
            case Method::Gr:
                values[i] = gr_train(cfg, ms.gr_steps, ms.gr, seed).record.final_avg_cost;
                break;
            case Method::Pg:
                values[i] = pg_train(cfg, ms.pg_iterations, ms.pg, seed).record.final_avg_cost;
                break;
            case Method::Oracle:
                break;  // rejected above
        }
    });

    SweepResult out;
    std::size_t cursor = 0;
    for (std::size_t p = 0; p < grid.size(); ++p)
        for (std::size_t m = 0; m < methods.size(); ++m) {
            const bool learning = methods[m] == Method::Gr || methods[m] == Method::Pg;
            const std::size_t n_runs = learning ? ms.runs : 1;
            double mean = 0.0;
            for (std::size_t r = 0; r < n_runs; ++r) mean += values[cursor + r];
            mean /= static_cast<double>(n_runs);
            SweepRow row{grid[p], methods[m], mean, 0.0, learning && n_runs > 1};
            if (row.has_stderr) {
                double ss = 0.0;
                for (std::size_t r = 0; r < n_runs; ++r)
                    ss += (values[cursor + r] - mean) * (values[cursor + r] - mean);
                row.stderr_ = std::sqrt(ss / static_cast<double>(n_runs - 1)) /
                              std::sqrt(static_cast<double>(n_runs));
            }
            out.rows.push_back(row);
            cursor += n_runs;
        }
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (!task_warnings[i].empty()) out.warnings.push_back(task_warnings[i]);
    return out;
}

}  // namespace aoisched
