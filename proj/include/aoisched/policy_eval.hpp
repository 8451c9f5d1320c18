#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "aoisched/error.hpp"
#include "aoisched/kernel.hpp"
#include "aoisched/rvi.hpp"

namespace aoisched {

struct StationaryOptions {
    double tol = 1e-10;     ///< L1 residual of pi P = pi, in original-chain terms
    std::size_t max_iter = 1000000;
    double damping = 0.1;   ///< kappa of the aperiodicity transform
};

inline void validate_policy(const Kernel& k, const Policy& policy) {
    if (policy.size() != k.n_states()) throw ContractError("policy has wrong size");
    for (std::size_t s = 0; s < k.n_states(); ++s)
        if (!k.feasible(s, policy[s]))
            throw ContractError("policy takes infeasible action at state " + std::to_string(s));
}

/// Stationary distribution of the chain induced by a policy, by power
/// iteration on the damped chain kappa*I + (1-kappa)*P_pi (same stationary
/// distribution, aperiodic). The reported residual ||pi P_pi - pi||_1 equals
/// the damped chain's residual divided by (1-kappa). Throws ConvergenceError
/// if the residual stays above tol.
inline std::vector<double> stationary_distribution(const Kernel& k, const Policy& policy,
                                                   const StationaryOptions& opt = {}) {
    validate_policy(k, policy);
    if (!(opt.tol > 0.0)) throw ContractError("stationary_distribution: tol must be positive");
    if (!(opt.damping >= 0.0 && opt.damping < 1.0))
        throw ContractError("stationary_distribution: damping must be in [0,1)");
    const std::size_t n = k.n_states();
    const double kappa = opt.damping;

    std::vector<double> pi(n, 1.0 / static_cast<double>(n));
    std::vector<double> next(n);
    double residual = std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < opt.max_iter; ++iter) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t s = 0; s < n; ++s) {
            const double mass = pi[s];
            if (mass == 0.0) continue;
            next[s] += kappa * mass;
            const std::size_t row = k.row_index(s, policy[s]);
            for (std::uint32_t j = k.row_ptr[row]; j < k.row_ptr[row + 1]; ++j)
                next[k.col[j]] += (1.0 - kappa) * mass * k.prob[j];
        }
        double l1 = 0.0;
        for (std::size_t s = 0; s < n; ++s) l1 += std::abs(next[s] - pi[s]);
        residual = l1 / (1.0 - kappa);
        pi.swap(next);
        if (residual <= opt.tol) {
            // Renormalize away accumulated rounding.
            double total = 0.0;
            for (double v : pi) total += v;
            for (double& v : pi) v /= total;
            return pi;
        }
    }
    throw ConvergenceError("stationary_distribution: residual " + std::to_string(residual) +
                               " above tol after " + std::to_string(opt.max_iter) + " iterations",
                           residual);
}

struct PolicyEvaluation {
    double gain = 0.0;
    std::vector<double> stationary;
};

/// Long-run average cost of a fixed policy: J_pi = sum_s pi(s) c(s).
inline PolicyEvaluation evaluate_policy_exact(const Kernel& k, const Policy& policy,
                                              const StationaryOptions& opt = {}) {
    PolicyEvaluation ev;
    ev.stationary = stationary_distribution(k, policy, opt);
    for (std::size_t s = 0; s < k.n_states(); ++s)
        ev.gain += ev.stationary[s] * k.state_cost[s];
    return ev;
}

}  // namespace aoisched
