#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>

#include "aoisched/kernel.hpp"
#include "aoisched/model.hpp"
#include "aoisched/state_space.hpp"

using namespace aoisched;

namespace {

SystemConfig small_config() {
    SystemConfig cfg;
    cfg.b_max = 3;
    cfg.delta_max = 5;
    cfg.e_s = 1;
    cfg.e_tx = 1;
    cfg.harq = HarqProfile{0.5, 0.5, 2};
    cfg.energy = EnergyProcess::symmetric_two_state(0.7);
    return cfg;
}

}  // namespace

TEST_CASE("state space: size follows the component counts") {
    SystemConfig cfg;
    cfg.b_max = 5;
    cfg.delta_max = 40;
    cfg.harq.r_max = 3;
    cfg.energy = EnergyProcess::iid(0.5);
    REQUIRE(StateSpace(cfg).size() == 2u * 6u * 40u * 40u * 4u);
    REQUIRE(StateSpace(cfg).size() == 76800u);

    REQUIRE(StateSpace(small_config()).size() == 2u * 4u * 5u * 5u * 3u);
}

TEST_CASE("state space: encode/decode roundtrip covers every index") {
    const SystemConfig cfg = small_config();
    const StateSpace space(cfg);
    for (std::size_t i = 0; i < space.size(); ++i) {
        const SystemState s = space.decode(i);
        REQUIRE(s.valid(cfg));
        REQUIRE(space.encode(s) == i);
    }
}

TEST_CASE("state space: retx is the fastest-varying digit") {
    const StateSpace space(small_config());
    const SystemState s{1, 2, 3, 4, 0};
    SystemState s1 = s;
    s1.retx = 1;
    REQUIRE(space.encode(s1) == space.encode(s) + 1);
    SystemState t = s;
    t.aoi_tx = 5;
    REQUIRE(space.encode(t) == space.encode(s) + 3);  // n_r = 3
}

TEST_CASE("state space: out-of-range states and indices are rejected") {
    const SystemConfig cfg = small_config();
    const StateSpace space(cfg);
    REQUIRE_THROWS_AS(space.encode({0, cfg.b_max + 1, 1, 1, 0}), ContractError);
    REQUIRE_THROWS_AS(space.encode({0, 0, 0, 1, 0}), ContractError);
    REQUIRE_THROWS_AS(space.encode({0, 0, cfg.delta_max + 1, 1, 0}), ContractError);
    REQUIRE_THROWS_AS(space.encode({2, 0, 1, 1, 0}), ContractError);
    REQUIRE_THROWS_AS(space.encode({0, 0, 1, 1, 3}), ContractError);
    REQUIRE_THROWS_AS(space.decode(space.size()), ContractError);
}

TEST_CASE("kernel: encoding order matches state tuple order") {
    // transition_distribution sorts successors by tuple; the kernel relies on
    // that implying ascending column indices.
    const SystemConfig cfg = small_config();
    const StateSpace space(cfg);
    for (std::size_t i = 1; i < space.size(); ++i)
        REQUIRE(space.decode(i - 1) < space.decode(i));
}

TEST_CASE("kernel: rows are stochastic exactly when the action is feasible") {
    const SystemConfig cfg = small_config();
    const Kernel k = build_kernel(cfg);
    REQUIRE(k.n_states() == StateSpace(cfg).size());
    REQUIRE(k.row_ptr.size() == 3 * k.n_states() + 1);
    REQUIRE(k.col.size() == k.prob.size());

    for (std::size_t si = 0; si < k.n_states(); ++si) {
        const SystemState s = k.space.decode(si);
        REQUIRE(k.state_cost[si] == static_cast<double>(s.aoi_rx));
        const ActionSet feas = feasible_actions(s, cfg);
        for (Action a : kAllActions) {
            const std::size_t row = k.row_index(si, a);
            const auto begin = k.row_ptr[row];
            const auto end = k.row_ptr[row + 1];
            REQUIRE(k.feasible(si, a) == feas.contains(a));
            if (!feas.contains(a)) {
                REQUIRE(begin == end);
                continue;
            }
            REQUIRE(begin < end);
            double sum = 0.0;
            for (auto j = begin; j < end; ++j) {
                sum += k.prob[j];
                REQUIRE(k.prob[j] > 0.0);
                REQUIRE(k.col[j] < k.n_states());
                if (j > begin) REQUIRE(k.col[j - 1] < k.col[j]);
            }
            REQUIRE(std::abs(sum - 1.0) <= 1e-12);
        }
        REQUIRE(k.actions(si).to_vector() == feas.to_vector());
    }
}

TEST_CASE("kernel: entries match the per-state distribution") {
    const SystemConfig cfg = small_config();
    const Kernel k = build_kernel(cfg);
    const SystemState s{1, 2, 3, 2, 1};
    const std::size_t si = k.space.encode(s);
    const auto dist = transition_distribution(s, Action::Retransmit, cfg);
    const std::size_t row = k.row_index(si, Action::Retransmit);
    REQUIRE(k.row_ptr[row + 1] - k.row_ptr[row] == dist.size());
    for (std::size_t j = 0; j < dist.size(); ++j) {
        REQUIRE(k.col[k.row_ptr[row] + j] == k.space.encode(dist[j].first));
        REQUIRE(k.prob[k.row_ptr[row] + j] == dist[j].second);
    }
}

TEST_CASE("kernel: state cap raises a resource error") {
    KernelOptions opt;
    opt.max_states = 10;
    REQUIRE_THROWS_AS(build_kernel(small_config(), opt), ResourceError);
    REQUIRE_NOTHROW(build_kernel(small_config()));
}

TEST_CASE("kernel: invalid configs are rejected before enumeration") {
    SystemConfig cfg = small_config();
    cfg.harq.p0 = 1.5;
    REQUIRE_THROWS_AS(build_kernel(cfg), ContractError);
}
