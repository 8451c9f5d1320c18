#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "aoisched/error.hpp"
#include "aoisched/gr_learning.hpp"
#include "aoisched/model.hpp"
#include "aoisched/rng.hpp"
#include "aoisched/run_record.hpp"

namespace aoisched {

/// Threshold table T(e, b, aoi_tx, retx): transmit when the receiver age
/// reaches the entry. Entries whose battery level cannot afford the transmit
/// action are frozen at delta_max + 1 (never transmit), which keeps every
/// induced policy energy-causal by construction; the rest are learnable and
/// clamped to [1, delta_max + 1].
struct ThresholdParams {
    int n_e = 0, n_b = 0, n_age = 0, n_r = 0;
    int delta_max = 0;
    std::vector<double> theta;
    std::vector<std::uint8_t> masked;

    static ThresholdParams for_config(const SystemConfig& cfg, double theta0 = 1.0) {
        cfg.validate();
        ThresholdParams p;
        p.n_e = cfg.energy.num_levels();
        p.n_b = cfg.b_max + 1;
        p.n_age = cfg.delta_max;
        p.n_r = cfg.harq.r_max + 1;
        p.delta_max = cfg.delta_max;
        const std::size_t d =
            static_cast<std::size_t>(p.n_e) * p.n_b * p.n_age * p.n_r;
        p.theta.assign(d, 0.0);
        p.masked.assign(d, 0);
        const double frozen = static_cast<double>(cfg.delta_max + 1);
        const double init =
            std::min(std::max(theta0, 1.0), static_cast<double>(cfg.delta_max + 1));
        for (int e = 0; e < p.n_e; ++e)
            for (int b = 0; b < p.n_b; ++b)
                for (int tx = 1; tx <= p.n_age; ++tx)
                    for (int r = 0; r < p.n_r; ++r) {
                        const std::size_t i = p.index(e, b, tx, r);
                        const int need = (r == 0) ? cfg.e_s + cfg.e_tx : cfg.e_tx;
                        if (b < need) {
                            p.theta[i] = frozen;
                            p.masked[i] = 1;
                        } else {
                            p.theta[i] = init;
                        }
                    }
        return p;
    }

    std::size_t size() const { return theta.size(); }

    std::size_t index(int e, int b, int aoi_tx, int retx) const {
        return ((static_cast<std::size_t>(e) * n_b + b) * n_age + (aoi_tx - 1)) * n_r + retx;
    }

    double at(const SystemState& s) const { return theta[index(s.e, s.b, s.aoi_tx, s.retx)]; }

    std::size_t learnable_count() const {
        std::size_t c = 0;
        for (std::uint8_t m : masked) c += (m == 0);
        return c;
    }

    /// Clamp learnable entries into [1, delta_max+1]; masked entries are
    /// untouched (they are already exactly delta_max+1).
    void clamp() {
        const double hi = static_cast<double>(delta_max + 1);
        for (std::size_t i = 0; i < theta.size(); ++i)
            if (!masked[i]) theta[i] = std::min(std::max(theta[i], 1.0), hi);
    }
};

/// Probability of transmitting at receiver age delta_rx under threshold
/// theta and smoothing temperature tau: the standard sigmoid of
/// (delta_rx - theta)/tau, computed without overflow for any argument.
inline double sigmoid_prob(double delta_rx, double theta_entry, double tau) {
    if (!(tau > 0.0)) throw ContractError("sigmoid_prob: tau must be positive");
    const double x = (delta_rx - theta_entry) / tau;
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Smoothed threshold policy: transmit (NewUpdate when nothing is pending,
/// Retransmit otherwise) with the sigmoid probability, else stay idle. One
/// uniform draw is consumed every slot regardless of the outcome, so paired
/// rollouts with common random numbers stay aligned. An infeasible transmit
/// falls back to Idle, consistent with the frozen mask.
inline Action threshold_act(const SystemState& s, const ThresholdParams& params, double tau,
                            const SystemConfig& cfg, Rng& rng) {
    const double p = sigmoid_prob(static_cast<double>(s.aoi_rx), params.at(s), tau);
    const bool transmit = rng.uniform() < p;
    if (!transmit) return Action::Idle;
    const Action tx = (s.retx == 0) ? Action::NewUpdate : Action::Retransmit;
    return feasible_actions(s, cfg).contains(tx) ? tx : Action::Idle;
}

/// Monte-Carlo estimate of the average cost of the smoothed threshold
/// policy: one trajectory of len slots from the standard initial state.
inline double rollout(const ThresholdParams& params, double tau, const SystemConfig& cfg,
                      std::uint64_t len, std::uint64_t seed) {
    if (len < 1) throw ContractError("rollout: len must be >= 1");
    Rng rng(seed);
    SystemState s = initial_state(cfg, rng);
    double cum = 0.0;
    for (std::uint64_t t = 0; t < len; ++t) {
        const Action a = threshold_act(s, params, tau, cfg, rng);
        const StepOutcome out = step(s, a, cfg, rng);
        cum += static_cast<double>(out.cost);
        s = out.next;
    }
    return cum / static_cast<double>(len);
}

struct PerturbationConfig {
    double sigma = 1.0;              ///< perturbation magnitude
    double q = 0.5;                  ///< probability of +1 per component
    std::uint64_t rollout_len = 2000;
    std::uint64_t rollouts_per_eval = 2;

    void validate() const {
        if (!(sigma > 0.0)) throw ContractError("PerturbationConfig: sigma must be positive");
        if (!(q > 0.0) || !(q < 1.0))
            throw ContractError("PerturbationConfig: q must be in (0,1)");
        if (rollout_len < 1) throw ContractError("PerturbationConfig: rollout_len must be >= 1");
        if (rollouts_per_eval < 1)
            throw ContractError("PerturbationConfig: rollouts_per_eval must be >= 1");
    }
};

struct FdGradient {
    std::vector<double> grad;  ///< same length as theta; exactly 0 at masked entries
    double j_plus = 0.0;
    double j_minus = 0.0;
};

/// Least-squares finite-difference estimate from one +- evaluation pair:
/// dir * (j_plus - j_minus) / (2 sigma dir'dir), where dir'dir equals the
/// number of perturbed (+-1) entries. Zero entries of dir stay zero.
inline std::vector<double> fd_estimate(const std::vector<double>& dir, double j_plus,
                                       double j_minus, double sigma, std::size_t perturbed) {
    if (perturbed == 0) throw ContractError("fd_estimate: empty perturbation");
    if (!(sigma > 0.0)) throw ContractError("fd_estimate: sigma must be positive");
    const double scale = (j_plus - j_minus) / (2.0 * sigma * static_cast<double>(perturbed));
    std::vector<double> grad(dir.size());
    for (std::size_t i = 0; i < dir.size(); ++i) grad[i] = dir[i] * scale;
    return grad;
}

/// Two-sided finite-difference gradient estimate (least-squares form):
/// grad = D (J+ - J-) / (2 sigma D'D), with D a +-1 perturbation over the
/// learnable entries (masked entries get 0, so D'D = learnable count). The
/// +- evaluations average rollouts_per_eval rollouts each; with crn the
/// paired rollouts share seeds, which cancels most of the common noise.
inline FdGradient fd_gradient(const ThresholdParams& params, const PerturbationConfig& pert,
                              double tau, const SystemConfig& cfg, Rng& rng, bool crn = true) {
    pert.validate();
    const std::size_t d = params.learnable_count();
    if (d == 0) throw ContractError("fd_gradient: no learnable threshold entries");

    std::vector<double> dir(params.size(), 0.0);
    for (std::size_t i = 0; i < params.size(); ++i)
        if (!params.masked[i]) dir[i] = rng.bernoulli(pert.q) ? 1.0 : -1.0;

    // The evaluation points are the literal theta +- sigma*D; only the
    // post-update parameters are clamped, so the difference quotient's 2*sigma
    // denominator matches the actual displacement.
    ThresholdParams plus = params;
    ThresholdParams minus = params;
    for (std::size_t i = 0; i < params.size(); ++i) {
        plus.theta[i] += pert.sigma * dir[i];
        minus.theta[i] -= pert.sigma * dir[i];
    }

    FdGradient out;
    for (std::uint64_t j = 0; j < pert.rollouts_per_eval; ++j) {
        const std::uint64_t seed_plus = rng.bits();
        const std::uint64_t seed_minus = crn ? seed_plus : rng.bits();
        out.j_plus += rollout(plus, tau, cfg, pert.rollout_len, seed_plus);
        out.j_minus += rollout(minus, tau, cfg, pert.rollout_len, seed_minus);
    }
    out.j_plus /= static_cast<double>(pert.rollouts_per_eval);
    out.j_minus /= static_cast<double>(pert.rollouts_per_eval);

    out.grad = fd_estimate(dir, out.j_plus, out.j_minus, pert.sigma, d);
    return out;
}

struct PgOptions {
    PerturbationConfig pert{};
    StepSchedule gamma{5.0, 0.7};  ///< theta step size gamma(n) = y/(n+1)^z
    double tau = 0.5;              ///< smoothing temperature during training
    double tau_eval = 0.01;        ///< temperature of the final evaluation
    double theta0 = 1.0;           ///< initial learnable threshold
    bool crn = true;               ///< common random numbers across the +- pair

    void validate() const {
        pert.validate();
        gamma.validate();
        if (!(tau > 0.0)) throw ContractError("PgOptions: tau must be positive");
        if (!(tau_eval > 0.0)) throw ContractError("PgOptions: tau_eval must be positive");
    }
};

struct PgTrainResult {
    RunRecord record;
    ThresholdParams params;
};

/// Finite-difference policy gradient over the threshold table:
/// theta_{n+1} = clamp(theta_n - gamma(n) * fd_gradient). Each iteration
/// consumes 2 * rollouts_per_eval * rollout_len environment slots, which is
/// the curve's step axis; the curve value is a one-rollout estimate at the
/// unperturbed post-update theta, and the final metric re-evaluates the
/// final theta at tau_eval.
inline PgTrainResult pg_train(const SystemConfig& cfg, std::uint64_t iterations,
                              const PgOptions& opt, std::uint64_t seed) {
    if (iterations < 1) throw ContractError("pg_train: iterations must be >= 1");
    opt.validate();
    cfg.validate();

    ThresholdParams params = ThresholdParams::for_config(cfg, opt.theta0);
    if (params.learnable_count() == 0)
        throw ContractError("pg_train: every threshold entry is masked; nothing to learn");

    RunRecord rec;
    rec.seed = seed;
    const std::uint64_t steps_per_iter = 2 * opt.pert.rollouts_per_eval * opt.pert.rollout_len;
    for (std::uint64_t n = 0; n < iterations; ++n) {
        const std::uint64_t iter_seed = derive_seed(seed, n);
        Rng rng(iter_seed);
        const FdGradient g = fd_gradient(params, opt.pert, opt.tau, cfg, rng, opt.crn);
        const double gamma = opt.gamma(n);
        for (std::size_t i = 0; i < params.size(); ++i)
            if (!params.masked[i]) params.theta[i] -= gamma * g.grad[i];
        params.clamp();

        const std::uint64_t eval_seed = derive_seed(iter_seed, 0x9e3779b9);
        rec.curve.push_back({0, (n + 1) * steps_per_iter,
                             rollout(params, opt.tau, cfg, opt.pert.rollout_len, eval_seed)});
    }
    rec.total_steps = iterations * steps_per_iter;
    rec.final_avg_cost = rollout(params, opt.tau_eval, cfg, opt.pert.rollout_len,
                                 derive_seed(seed, 0xfeedbeef));
    return PgTrainResult{std::move(rec), std::move(params)};
}

}  // namespace aoisched
