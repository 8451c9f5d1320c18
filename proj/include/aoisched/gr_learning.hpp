#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aoisched/error.hpp"
#include "aoisched/model.hpp"
#include "aoisched/rng.hpp"
#include "aoisched/run_record.hpp"
#include "aoisched/rvi.hpp"
#include "aoisched/state_space.hpp"

namespace aoisched {

/// Polynomially decaying step size a(m) = y / (m+1)^z. The exponent range
/// (0.5, 1] gives sum a = inf and sum a^2 < inf, the usual stochastic
/// approximation conditions.
struct StepSchedule {
    double y = 1.0;
    double z = 0.6;

    double operator()(std::uint64_t m) const {
        return y / std::pow(static_cast<double>(m) + 1.0, z);
    }

    void validate() const {
        if (!(y > 0.0)) throw ContractError("StepSchedule: y must be positive");
        if (!(z > 0.5) || !(z <= 1.0))
            throw ContractError("StepSchedule: z must be in (0.5, 1], got " + std::to_string(z));
    }
};

/// Exponentially decaying exploration temperature with a floor:
/// tau_n = max(tau0 * decay^n, floor).
struct TemperatureSchedule {
    double tau0 = 10.0;
    double decay = 0.9999;
    double floor = 0.01;

    double operator()(std::uint64_t n) const {
        return std::max(tau0 * std::pow(decay, static_cast<double>(n)), floor);
    }

    void validate() const {
        if (!(tau0 > 0.0)) throw ContractError("TemperatureSchedule: tau0 must be positive");
        if (!(decay > 0.0) || !(decay < 1.0))
            throw ContractError("TemperatureSchedule: decay must be in (0,1)");
        if (!(floor > 0.0)) throw ContractError("TemperatureSchedule: floor must be positive");
    }
};

struct GrOptions {
    StepSchedule alpha{1.0, 0.6};   ///< q-value step, keyed by per-pair visit count
    StepSchedule beta{1.0, 0.85};   ///< gain step, keyed by the global step counter
    TemperatureSchedule tau{};
    std::uint64_t record_every = 1;

    void validate() const {
        alpha.validate();
        beta.validate();
        tau.validate();
        if (record_every < 1) throw ContractError("GrOptions: record_every must be >= 1");
    }
};

/// Dense (state, action) table of q-values and visit counts. Entries for
/// infeasible pairs stay at their initial zero and are never read.
struct QTable {
    std::vector<double> q;
    std::vector<std::uint64_t> visits;

    explicit QTable(std::size_t n_states)
        : q(n_states * 3, 0.0), visits(n_states * 3, 0) {}

    std::size_t index(std::size_t s, Action a) const {
        return s * 3 + static_cast<std::size_t>(a);
    }
};

/// Boltzmann action distribution pi(a) proportional to exp(-q(a)/tau),
/// computed with a min-q shift so the largest weight is exactly 1.
inline std::vector<double> softmax_probs(std::span<const double> q_row, double tau) {
    if (q_row.empty()) throw ContractError("softmax_probs: empty action set");
    if (!(tau > 0.0)) throw ContractError("softmax_probs: tau must be positive");
    double mn = q_row[0];
    for (double v : q_row) mn = std::min(mn, v);
    std::vector<double> p(q_row.size());
    double total = 0.0;
    for (std::size_t i = 0; i < q_row.size(); ++i) {
        p[i] = std::exp(-(q_row[i] - mn) / tau);
        total += p[i];
    }
    for (double& v : p) v /= total;
    return p;
}

/// Tabular average-cost SARSA with Boltzmann exploration: q-values learn on
/// the fast schedule alpha keyed by per-pair visit counts, the gain estimate
/// tracks the empirical average cost on the slow schedule beta keyed by the
/// global step.
class GrLearner {
public:
    GrLearner(const SystemConfig& cfg, const GrOptions& opt = {})
        : cfg_(cfg), space_(cfg), table_(space_.size()), opt_(opt) {
        cfg_.validate();
        opt_.validate();
    }

    const QTable& table() const { return table_; }
    const StateSpace& space() const { return space_; }
    double gain() const { return gain_; }
    std::uint64_t step_count() const { return n_; }
    double temperature() const { return opt_.tau(n_); }

    /// Softmax draw over the feasible actions of s, at the current
    /// temperature. One weighted draw per call.
    Action sample_action(const SystemState& s, Rng& rng) {
        const std::size_t si = space_.encode(s);
        const std::vector<Action> acts = feasible_actions(s, cfg_).to_vector();
        std::vector<double> q_row(acts.size());
        for (std::size_t i = 0; i < acts.size(); ++i)
            q_row[i] = table_.q[table_.index(si, acts[i])];
        const std::vector<double> probs = softmax_probs(q_row, temperature());
        return acts[rng.sample_weighted(probs)];
    }

    /// One SARSA update. alpha uses the pre-increment visit count of (s, a),
    /// the gain update uses the pre-increment global step; both counters are
    /// incremented afterwards. The next action enters the target as chosen,
    /// whether or not it is greedy.
    void update(std::size_t s, Action a, double cost, std::size_t s_next, Action a_next) {
        require_feasible(s, a);
        require_feasible(s_next, a_next);
        const std::size_t row = table_.index(s, a);
        const std::uint64_t m = table_.visits[row];
        const double alpha = opt_.alpha(m);
        const double target = cost - gain_ + table_.q[table_.index(s_next, a_next)];
        table_.q[row] += alpha * (target - table_.q[row]);

        const double n = static_cast<double>(n_);
        const double beta = opt_.beta(n_);
        gain_ += beta * ((n * gain_ + cost) / (n + 1.0) - gain_);

        table_.visits[row] = m + 1;
        ++n_;
    }

    /// Greedy policy extracted from the current table: argmin of q over
    /// feasible actions, ties to the earliest action in canonical order.
    Policy greedy_policy() const {
        Policy p(space_.size(), Action::Idle);
        for (std::size_t s = 0; s < space_.size(); ++s) {
            const SystemState st = space_.decode(s);
            double best = std::numeric_limits<double>::infinity();
            Action best_a = Action::Idle;
            feasible_actions(st, cfg_).for_each([&](Action a) {
                const double q = table_.q[table_.index(s, a)];
                if (q < best) {
                    best = q;
                    best_a = a;
                }
            });
            p[s] = best_a;
        }
        return p;
    }

private:
    void require_feasible(std::size_t s, Action a) const {
        if (!feasible_actions(space_.decode(s), cfg_).contains(a))
            throw ContractError("GrLearner: infeasible action at state " + std::to_string(s));
    }

    SystemConfig cfg_;
    StateSpace space_;
    QTable table_;
    double gain_ = 0.0;
    std::uint64_t n_ = 0;
    GrOptions opt_;
};

struct GrTrainResult {
    RunRecord record;
    Policy policy;       ///< greedy extraction from the final table
    double gain = 0.0;   ///< final gain estimate J_n
    QTable table;
};

/// One continuous learning trajectory of `steps` slots from the standard
/// initial state. The recorded curve is the running average of incurred
/// costs; the final metric is that running average at the last slot.
inline GrTrainResult gr_train(const SystemConfig& cfg, std::uint64_t steps,
                              const GrOptions& opt, std::uint64_t seed) {
    if (steps < 1) throw ContractError("gr_train: steps must be >= 1");
    GrLearner learner(cfg, opt);
    Rng rng(seed);

    SystemState s = initial_state(cfg, rng);
    std::size_t si = learner.space().encode(s);
    Action a = learner.sample_action(s, rng);

    RunRecord rec;
    rec.seed = seed;
    rec.total_steps = steps;
    double cum = 0.0;
    for (std::uint64_t t = 0; t < steps; ++t) {
        const StepOutcome out = step(s, a, cfg, rng);
        cum += static_cast<double>(out.cost);
        const std::size_t si_next = learner.space().encode(out.next);
        const Action a_next = learner.sample_action(out.next, rng);
        learner.update(si, a, static_cast<double>(out.cost), si_next, a_next);
        s = out.next;
        si = si_next;
        a = a_next;
        if ((t + 1) % opt.record_every == 0 || t + 1 == steps) {
            const double avg = cum / static_cast<double>(t + 1);
            if (rec.curve.empty() || rec.curve.back().step != t + 1)
                rec.curve.push_back({0, t + 1, avg});
        }
    }
    rec.final_avg_cost = cum / static_cast<double>(steps);

    GrTrainResult res{std::move(rec), learner.greedy_policy(), learner.gain(),
                      learner.table()};
    return res;
}

}  // namespace aoisched
