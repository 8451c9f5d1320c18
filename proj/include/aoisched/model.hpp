#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aoisched/error.hpp"
#include "aoisched/rng.hpp"

namespace aoisched {

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

/// Transmitter decision per slot: stay idle, sense-and-send a fresh status
/// update, or retransmit the pending undecoded one.
enum class Action : std::uint8_t { Idle = 0, NewUpdate = 1, Retransmit = 2 };

inline constexpr std::array<Action, 3> kAllActions = {Action::Idle, Action::NewUpdate,
                                                      Action::Retransmit};

inline const char* to_string(Action a) {
    switch (a) {
        case Action::Idle: return "idle";
        case Action::NewUpdate: return "new";
        case Action::Retransmit: return "retx";
    }
    return "?";
}

/// Small fixed set of feasible actions, iterated in the canonical order
/// Idle < NewUpdate < Retransmit (also the deterministic tie-break order).
class ActionSet {
public:
    void add(Action a) { bits_ |= static_cast<std::uint8_t>(1u << static_cast<int>(a)); }
    bool contains(Action a) const {
        return (bits_ & (1u << static_cast<int>(a))) != 0;
    }
    int size() const {
        int n = 0;
        for (Action a : kAllActions) n += contains(a) ? 1 : 0;
        return n;
    }
    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (Action a : kAllActions)
            if (contains(a)) fn(a);
    }
    std::vector<Action> to_vector() const {
        std::vector<Action> v;
        for_each([&](Action a) { v.push_back(a); });
        return v;
    }

private:
    std::uint8_t bits_ = 0;
};

// ---------------------------------------------------------------------------
// HARQ profile
// ---------------------------------------------------------------------------

/// Exponentially decaying HARQ decoding-error profile. The error probability
/// of an attempt with r prior combined (re)transmissions is p0 * lambda^r,
/// truncated at r_max combined attempts.
struct HarqProfile {
    double p0 = 0.5;
    double lambda = 0.5;
    int r_max = 3;

    /// Decoding error probability for retransmission count r (clamped at r_max).
    double error_prob(int r) const {
        if (r < 0) throw ContractError("HarqProfile::error_prob: negative retransmission count");
        return p0 * std::pow(lambda, std::min(r, r_max));
    }

    void validate() const {
        // g(r) must lie in (0,1) for every r, which pins p0 to (0,1).
        if (!(p0 > 0.0) || !(p0 < 1.0))
            throw ContractError("HarqProfile: p0 must be in (0,1), got " + std::to_string(p0));
        if (!(lambda > 0.0) || !(lambda < 1.0))
            throw ContractError("HarqProfile: lambda must be in (0,1), got " +
                                std::to_string(lambda));
        if (r_max < 0) throw ContractError("HarqProfile: r_max must be nonnegative");
    }
};

// ---------------------------------------------------------------------------
// Energy-harvesting process
// ---------------------------------------------------------------------------

/// First-order Markov model of the per-slot harvested energy E_t over the
/// integer levels {0, ..., E_max}.
class EnergyProcess {
public:
    /// i.i.d. binary harvest: one unit with probability p_e each slot.
    static EnergyProcess iid(double p_e) {
        if (!(p_e >= 0.0) || !(p_e <= 1.0))
            throw ContractError("EnergyProcess::iid: p_e must be in [0,1]");
        return EnergyProcess({{1.0 - p_e, p_e}, {1.0 - p_e, p_e}});
    }

    /// Symmetric two-state chain with persistence p11 = p_E(1|1) = p_E(0|0).
    static EnergyProcess symmetric_two_state(double p11) {
        if (!(p11 >= 0.0) || !(p11 <= 1.0))
            throw ContractError("EnergyProcess::symmetric_two_state: p11 must be in [0,1]");
        return EnergyProcess({{p11, 1.0 - p11}, {1.0 - p11, p11}});
    }

    static EnergyProcess from_matrix(std::vector<std::vector<double>> rows) {
        return EnergyProcess(std::move(rows));
    }

    int num_levels() const { return n_levels_; }
    int max_level() const { return n_levels_ - 1; }

    double transition_prob(int from, int to) const {
        return p_[static_cast<std::size_t>(from) * n_levels_ + to];
    }

    std::span<const double> row(int from) const {
        return {p_.data() + static_cast<std::size_t>(from) * n_levels_,
                static_cast<std::size_t>(n_levels_)};
    }

    /// min_e p_E(0|e). The unichain argument needs this positive; instances
    /// with 0 (e.g. iid p_e=1) are still accepted and solvable.
    double min_zero_harvest_prob() const {
        double m = 1.0;
        for (int e = 0; e < n_levels_; ++e) m = std::min(m, transition_prob(e, 0));
        return m;
    }

    /// Stationary distribution of the level chain (damped power iteration;
    /// exact for the constructors above).
    std::vector<double> stationary() const {
        std::vector<double> pi(n_levels_, 1.0 / n_levels_);
        std::vector<double> next(n_levels_, 0.0);
        for (int iter = 0; iter < 100000; ++iter) {
            std::fill(next.begin(), next.end(), 0.0);
            for (int e = 0; e < n_levels_; ++e) {
                next[e] += 0.1 * pi[e];
                for (int e2 = 0; e2 < n_levels_; ++e2)
                    next[e2] += 0.9 * pi[e] * transition_prob(e, e2);
            }
            double diff = 0.0;
            for (int e = 0; e < n_levels_; ++e) diff += std::abs(next[e] - pi[e]);
            pi.swap(next);
            if (diff < 1e-15) break;
        }
        return pi;
    }

    int sample_next(int from, Rng& rng) const { return static_cast<int>(rng.sample_weighted(row(from))); }

    int sample_stationary(Rng& rng) const {
        auto pi = stationary();
        return static_cast<int>(rng.sample_weighted(pi));
    }

private:
    explicit EnergyProcess(std::vector<std::vector<double>> rows) {
        n_levels_ = static_cast<int>(rows.size());
        if (n_levels_ < 1) throw ContractError("EnergyProcess: empty transition matrix");
        p_.reserve(static_cast<std::size_t>(n_levels_) * n_levels_);
        for (const auto& r : rows) {
            if (static_cast<int>(r.size()) != n_levels_)
                throw ContractError("EnergyProcess: transition matrix must be square");
            double sum = 0.0;
            for (double v : r) {
                if (!(v >= 0.0) || !(v <= 1.0))
                    throw ContractError("EnergyProcess: probabilities must be in [0,1]");
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw ContractError("EnergyProcess: row sums to " + std::to_string(sum) +
                                    ", expected 1 within 1e-12");
            p_.insert(p_.end(), r.begin(), r.end());
        }
    }

    int n_levels_ = 0;
    std::vector<double> p_;  // row-major
};

/// Burstiness of a symmetric two-state harvest chain: rho = 2 p_E(1|1) - 1.
inline double correlation_coefficient(const EnergyProcess& p) {
    if (p.num_levels() != 2)
        throw ContractError("correlation_coefficient: unsupported process (not binary)");
    if (std::abs(p.transition_prob(1, 1) - p.transition_prob(0, 0)) > 1e-12)
        throw ContractError("correlation_coefficient: unsupported process (not symmetric)");
    return 2.0 * p.transition_prob(1, 1) - 1.0;
}

// ---------------------------------------------------------------------------
// Problem instance
// ---------------------------------------------------------------------------

/// Full problem instance: battery/age/retransmission caps, energy costs,
/// harvest process and HARQ profile.
struct SystemConfig {
    int b_max = 5;        ///< battery capacity, energy units
    int delta_max = 40;   ///< AoI cap, slots
    int e_s = 1;          ///< sensing cost, energy units
    int e_tx = 1;         ///< transmission cost, energy units
    HarqProfile harq{};
    EnergyProcess energy = EnergyProcess::iid(0.5);

    /// Energy spent by an action in one slot.
    int spend(Action a) const {
        switch (a) {
            case Action::Idle: return 0;
            case Action::NewUpdate: return e_s + e_tx;
            case Action::Retransmit: return e_tx;
        }
        return 0;
    }

    void validate() const {
        harq.validate();
        if (delta_max < 2) throw ContractError("SystemConfig: delta_max must be >= 2");
        if (e_s < 0) throw ContractError("SystemConfig: e_s must be >= 0");
        if (e_tx < 1) throw ContractError("SystemConfig: e_tx must be >= 1");
        if (b_max < e_tx)
            throw ContractError("SystemConfig: b_max must be >= e_tx or no action is ever feasible");
    }
};

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

/// The five-component slot state (E_t, B_t, AoI at receiver, age of the
/// freshest sensed update at the transmitter, retransmission count).
struct SystemState {
    int e = 0;
    int b = 0;
    int aoi_rx = 1;
    int aoi_tx = 1;
    int retx = 0;

    friend bool operator==(const SystemState&, const SystemState&) = default;
    friend auto operator<=>(const SystemState&, const SystemState&) = default;

    bool valid(const SystemConfig& cfg) const {
        return e >= 0 && e <= cfg.energy.max_level() && b >= 0 && b <= cfg.b_max &&
               aoi_rx >= 1 && aoi_rx <= cfg.delta_max && aoi_tx >= 1 &&
               aoi_tx <= cfg.delta_max && retx >= 0 && retx <= cfg.harq.r_max;
    }
};

/// One simulated slot: sampled successor, incurred cost (the receiver AoI of
/// the state the action was taken in), and the ACK bit for transmit actions.
struct StepOutcome {
    SystemState next{};
    int cost = 0;
    std::optional<bool> ack{};
};

// ---------------------------------------------------------------------------
// Dynamics
// ---------------------------------------------------------------------------

/// Actions permitted by the energy-causality constraints in state s. Idle is
/// always allowed; Retransmit additionally needs a pending undecoded packet
/// (retx > 0; after an ACK, or at t=0, there is nothing to retransmit).
inline ActionSet feasible_actions(const SystemState& s, const SystemConfig& cfg) {
    ActionSet set;
    set.add(Action::Idle);
    if (s.b >= cfg.e_s + cfg.e_tx) set.add(Action::NewUpdate);
    if (s.b >= cfg.e_tx && s.retx > 0) set.add(Action::Retransmit);
    return set;
}

namespace detail {

/// Deterministic part of the slot update. Event order within slot t: act
/// using B_t, decode (ack), add the harvested E_t to the battery with
/// overflow at b_max, then the caller draws E_{t+1}.
inline SystemState apply_transition(const SystemState& s, Action a, bool ack, int e_next,
                                    const SystemConfig& cfg) {
    SystemState n;
    n.e = e_next;
    n.b = std::min(s.b + s.e - cfg.spend(a), cfg.b_max);

    const int aged_rx = std::min(s.aoi_rx + 1, cfg.delta_max);
    const int aged_tx = std::min(s.aoi_tx + 1, cfg.delta_max);
    switch (a) {
        case Action::Idle:
            n.aoi_rx = aged_rx;
            n.aoi_tx = aged_tx;
            n.retx = s.retx;
            break;
        case Action::NewUpdate:
            n.aoi_rx = ack ? 1 : aged_rx;
            n.aoi_tx = 1;
            // Saturation matters only for r_max = 0, which disables HARQ
            // combining entirely (the failed packet is simply dropped).
            n.retx = ack ? 0 : std::min(1, cfg.harq.r_max);
            break;
        case Action::Retransmit:
            n.aoi_rx = ack ? aged_tx : aged_rx;
            n.aoi_tx = aged_tx;
            n.retx = ack ? 0 : std::min(s.retx + 1, cfg.harq.r_max);
            break;
    }
    return n;
}

inline void require_feasible(const SystemState& s, Action a, const SystemConfig& cfg) {
    if (!feasible_actions(s, cfg).contains(a))
        throw ContractError(std::string("infeasible action '") + to_string(a) +
                            "' in state (e=" + std::to_string(s.e) + ", b=" + std::to_string(s.b) +
                            ", aoi_rx=" + std::to_string(s.aoi_rx) +
                            ", aoi_tx=" + std::to_string(s.aoi_tx) +
                            ", retx=" + std::to_string(s.retx) + ")");
}

}  // namespace detail

/// Exact successor distribution of (s, a): the product of the decoding
/// outcome (none for Idle, success probability 1-g(retransmission count)
/// otherwise) and the next harvest level E' ~ p_E(.|e). Outcomes that land
/// on the same successor (age or retx saturation) are merged. Probabilities
/// sum to 1 within 1e-12.
inline std::vector<std::pair<SystemState, double>> transition_distribution(
    const SystemState& s, Action a, const SystemConfig& cfg) {
    detail::require_feasible(s, a, cfg);

    // (ack value, probability); Idle has a single no-decode branch.
    std::array<std::pair<bool, double>, 2> branches;
    int n_branches;
    if (a == Action::Idle) {
        branches[0] = {false, 1.0};
        n_branches = 1;
    } else {
        const int r = (a == Action::NewUpdate) ? 0 : s.retx;
        const double err = cfg.harq.error_prob(r);
        branches[0] = {true, 1.0 - err};
        branches[1] = {false, err};
        n_branches = 2;
    }

    std::vector<std::pair<SystemState, double>> out;
    out.reserve(static_cast<std::size_t>(n_branches) * cfg.energy.num_levels());
    for (int i = 0; i < n_branches; ++i) {
        const auto [ack, p_branch] = branches[i];
        if (p_branch == 0.0) continue;
        for (int e2 = 0; e2 <= cfg.energy.max_level(); ++e2) {
            const double p = p_branch * cfg.energy.transition_prob(s.e, e2);
            if (p == 0.0) continue;
            const SystemState nxt = detail::apply_transition(s, a, ack, e2, cfg);
            auto it = std::find_if(out.begin(), out.end(),
                                   [&](const auto& kv) { return kv.first == nxt; });
            if (it != out.end())
                it->second += p;
            else
                out.emplace_back(nxt, p);
        }
    }
    std::sort(out.begin(), out.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    return out;
}

/// Standard start state of every simulation and training run: full battery,
/// both ages fresh, nothing pending, harvest level drawn from the process's
/// stationary distribution.
inline SystemState initial_state(const SystemConfig& cfg, Rng& rng) {
    return SystemState{cfg.energy.sample_stationary(rng), cfg.b_max, 1, 1, 0};
}

/// Sample one slot. Deterministic given (s, a, cfg, rng state): the decode
/// outcome is drawn first (transmit actions only), then the next harvest
/// level.
inline StepOutcome step(const SystemState& s, Action a, const SystemConfig& cfg, Rng& rng) {
    detail::require_feasible(s, a, cfg);
    std::optional<bool> ack;
    if (a != Action::Idle) {
        const int r = (a == Action::NewUpdate) ? 0 : s.retx;
        ack = rng.bernoulli(1.0 - cfg.harq.error_prob(r));
    }
    const int e_next = cfg.energy.sample_next(s.e, rng);
    StepOutcome o;
    o.next = detail::apply_transition(s, a, ack.value_or(false), e_next, cfg);
    o.cost = s.aoi_rx;
    o.ack = ack;
    return o;
}

}  // namespace aoisched
