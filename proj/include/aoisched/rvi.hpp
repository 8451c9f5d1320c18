#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "aoisched/error.hpp"
#include "aoisched/kernel.hpp"

namespace aoisched {

/// Deterministic stationary policy over the encoded state space.
using Policy = std::vector<Action>;

struct RviOptions {
    std::size_t ref_state = 0;
    double tol = 1e-7;            ///< span-of-differences stopping threshold
    std::size_t max_iter = 100000;
    double damping = 0.1;         ///< kappa of the aperiodicity transform
    std::span<const double> h0{}; ///< optional warm start, size n_states
};

struct RviSolution {
    double gain = 0.0;       ///< optimal average cost J*
    std::vector<double> h;   ///< differential values, h[ref_state] = 0
    std::vector<double> q;   ///< q(s,a) = c(s) - J + sum_s' P(s'|s,a) h(s'); +inf if infeasible
    Policy policy;           ///< greedy argmin of q, ties broken Idle < NewUpdate < Retransmit
    std::size_t iterations = 0;
    double span = 0.0;       ///< final span of value differences
};

namespace detail {

/// min over feasible actions of sum_s' P(s'|s,a) h(s'). Every state admits
/// Idle, so the minimum exists.
inline double min_expected_h(const Kernel& k, std::size_t s, const std::vector<double>& h) {
    double best = std::numeric_limits<double>::infinity();
    const std::uint32_t* col = k.col.data();
    const double* prob = k.prob.data();
    const double* hv = h.data();
    const std::size_t base = s * Kernel::n_actions;
    for (int a = 0; a < Kernel::n_actions; ++a) {
        const std::uint32_t lo = k.row_ptr[base + a];
        const std::uint32_t hi = k.row_ptr[base + a + 1];
        if (lo == hi) continue;
        double acc = 0.0;
        for (std::uint32_t j = lo; j < hi; ++j) acc += prob[j] * hv[col[j]];
        if (acc < best) best = acc;
    }
    return best;
}

}  // namespace detail

/// Relative value iteration for the long-run average cost. Iterates the
/// Bellman operator of the transformed chain kappa*I + (1-kappa)*P, which
/// has the same gain and greedy policies as the original but is aperiodic
/// under every policy, so the span of successive differences converges even
/// when an optimal policy cycles deterministically. At the stopping iterate,
/// c(s) - gain + min_a sum P h - h(s) equals diff(s) - gain exactly for
/// h = (1-kappa) * (last input iterate), so the returned pair satisfies the
/// ORIGINAL optimality equation with max residual at most span/2 <= tol/2,
/// and min diff <= J* <= max diff brackets the true gain. Throws
/// ConvergenceError when max_iter sweeps leave the span above tol.
inline RviSolution rvi_solve(const Kernel& k, const RviOptions& opt = {}) {
    const std::size_t n = k.n_states();
    if (n == 0) throw ContractError("rvi_solve: empty kernel");
    if (opt.ref_state >= n) throw ContractError("rvi_solve: ref_state out of range");
    if (!(opt.tol > 0.0)) throw ContractError("rvi_solve: tol must be positive");
    if (!(opt.damping >= 0.0 && opt.damping < 1.0))
        throw ContractError("rvi_solve: damping must be in [0,1)");
    if (!opt.h0.empty() && opt.h0.size() != n)
        throw ContractError("rvi_solve: warm start has wrong size");

    const double kappa = opt.damping;
    const double one_m_kappa = 1.0 - kappa;
    std::vector<double> h(n, 0.0);
    if (!opt.h0.empty()) {
        // h0 is in original-equation scale (as returned in RviSolution::h);
        // the internal iterate lives in the transformed scale.
        h.assign(opt.h0.begin(), opt.h0.end());
        const double ref = h[opt.ref_state];
        for (double& v : h) v = (v - ref) / one_m_kappa;
    }
    std::vector<double> t(n);

    double span = std::numeric_limits<double>::infinity();
    double gain = 0.0;
    std::size_t iter = 0;
    bool converged = false;
    while (iter < opt.max_iter) {
        ++iter;
        for (std::size_t s = 0; s < n; ++s)
            t[s] = k.state_cost[s] + kappa * h[s] +
                   one_m_kappa * detail::min_expected_h(k, s, h);
        double mx = -std::numeric_limits<double>::infinity();
        double mn = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < n; ++s) {
            const double d = t[s] - h[s];
            if (d > mx) mx = d;
            if (d < mn) mn = d;
        }
        span = mx - mn;
        gain = 0.5 * (mx + mn);
        if (span <= opt.tol) {
            // Keep the input iterate: the residual bound above is exact for it.
            converged = true;
            break;
        }
        const double ref = t[opt.ref_state];
        for (std::size_t s = 0; s < n; ++s) h[s] = t[s] - ref;
    }
    if (!converged)
        throw ConvergenceError("rvi_solve: span " + std::to_string(span) + " above tol " +
                                   std::to_string(opt.tol) + " after " +
                                   std::to_string(iter) + " sweeps",
                               span);

    RviSolution sol;
    sol.gain = gain;
    sol.iterations = iter;
    sol.span = span;

    // Undo the transform's scaling so h solves the original Bellman equation.
    sol.h.resize(n);
    for (std::size_t s = 0; s < n; ++s) sol.h[s] = one_m_kappa * h[s];

    sol.q.assign(n * Kernel::n_actions, std::numeric_limits<double>::infinity());
    sol.policy.assign(n, Action::Idle);
    for (std::size_t s = 0; s < n; ++s) {
        double best = std::numeric_limits<double>::infinity();
        Action best_a = Action::Idle;
        for (Action a : kAllActions) {
            const std::size_t row = k.row_index(s, a);
            const std::uint32_t lo = k.row_ptr[row];
            const std::uint32_t hi = k.row_ptr[row + 1];
            if (lo == hi) continue;
            double acc = 0.0;
            for (std::uint32_t j = lo; j < hi; ++j) acc += k.prob[j] * sol.h[k.col[j]];
            const double qv = k.state_cost[s] - gain + acc;
            sol.q[row] = qv;
            if (qv < best) {
                best = qv;
                best_a = a;
            }
        }
        sol.policy[s] = best_a;
    }
    return sol;
}

/// Max-norm residual of the original optimality equation at (gain, h):
/// max_s |c(s) - gain + min_a sum P h - h(s)|.
inline double bellman_residual(const Kernel& k, double gain, const std::vector<double>& h) {
    if (h.size() != k.n_states()) throw ContractError("bellman_residual: size mismatch");
    double worst = 0.0;
    for (std::size_t s = 0; s < k.n_states(); ++s) {
        const double r =
            std::abs(k.state_cost[s] - gain + detail::min_expected_h(k, s, h) - h[s]);
        if (r > worst) worst = r;
    }
    return worst;
}

}  // namespace aoisched
