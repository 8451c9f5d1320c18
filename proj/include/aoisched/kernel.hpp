#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "aoisched/error.hpp"
#include "aoisched/model.hpp"
#include "aoisched/state_space.hpp"

namespace aoisched {

struct KernelOptions {
    /// Refuse to materialize kernels beyond this many states.
    std::size_t max_states = 4'000'000;
};

/// Explicit transition kernel of a problem instance in CSR form. Rows are
/// (state, action) pairs at row = state * 3 + action; an empty row means the
/// action is infeasible in that state. Column indices within a row are
/// strictly increasing and each nonempty row sums to 1 within 1e-12.
struct Kernel {
    SystemConfig cfg;
    StateSpace space;
    std::vector<std::uint32_t> row_ptr;  ///< size 3*n_states+1
    std::vector<std::uint32_t> col;
    std::vector<double> prob;
    std::vector<double> state_cost;  ///< c(s) = receiver AoI of s, size n_states

    static constexpr int n_actions = 3;

    std::size_t n_states() const { return state_cost.size(); }
    std::size_t row_index(std::size_t state, Action a) const {
        return state * n_actions + static_cast<std::size_t>(a);
    }
    bool feasible(std::size_t state, Action a) const {
        const std::size_t r = row_index(state, a);
        return row_ptr[r] != row_ptr[r + 1];
    }
    /// Feasible actions of an encoded state, in canonical order.
    ActionSet actions(std::size_t state) const {
        ActionSet set;
        for (Action a : kAllActions)
            if (feasible(state, a)) set.add(a);
        return set;
    }
};

/// Enumerates the full product state space and tabulates the successor
/// distribution of every feasible (state, action) pair.
inline Kernel build_kernel(const SystemConfig& cfg, const KernelOptions& opt = {}) {
    cfg.validate();
    StateSpace space(cfg);
    const std::size_t n = space.size();
    if (n > opt.max_states)
        throw ResourceError("kernel would have " + std::to_string(n) +
                            " states, exceeding the cap of " + std::to_string(opt.max_states));

    Kernel k{cfg, space, {}, {}, {}, {}};
    k.row_ptr.reserve(n * Kernel::n_actions + 1);
    k.row_ptr.push_back(0);
    k.state_cost.resize(n);

    for (std::size_t si = 0; si < n; ++si) {
        const SystemState s = space.decode(si);
        k.state_cost[si] = static_cast<double>(s.aoi_rx);
        const ActionSet feas = feasible_actions(s, cfg);
        for (Action a : kAllActions) {
            if (feas.contains(a)) {
                for (const auto& [nxt, p] : transition_distribution(s, a, cfg)) {
                    k.col.push_back(static_cast<std::uint32_t>(space.encode(nxt)));
                    k.prob.push_back(p);
                }
            }
            k.row_ptr.push_back(static_cast<std::uint32_t>(k.col.size()));
        }
    }
    return k;
}

}  // namespace aoisched
