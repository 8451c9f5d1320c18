#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "aoisched/model.hpp"
#include "aoisched/rng.hpp"

using namespace aoisched;

namespace {

SystemConfig reference_config() {
    SystemConfig cfg;
    cfg.b_max = 5;
    cfg.delta_max = 40;
    cfg.e_s = 1;
    cfg.e_tx = 1;
    cfg.harq = HarqProfile{0.5, 0.5, 3};
    cfg.energy = EnergyProcess::iid(0.5);
    return cfg;
}

double total_prob(const std::vector<std::pair<SystemState, double>>& dist) {
    double t = 0.0;
    for (const auto& [s, p] : dist) t += p;
    return t;
}

double prob_of(const std::vector<std::pair<SystemState, double>>& dist, const SystemState& s) {
    for (const auto& [st, p] : dist)
        if (st == s) return p;
    return 0.0;
}

}  // namespace

TEST_CASE("rng: uniform matches the pinned bit-to-double mapping") {
    Rng rng(42);
    std::mt19937_64 ref(42);
    for (int i = 0; i < 100; ++i) {
        const double expect = static_cast<double>(ref() >> 11) * 0x1.0p-53;
        REQUIRE(rng.uniform() == expect);
    }
}

TEST_CASE("rng: uniform stays in [0,1) and is seed-deterministic") {
    Rng a(7), b(7), c(8);
    bool any_diff = false;
    for (int i = 0; i < 1000; ++i) {
        const double ua = a.uniform();
        REQUIRE(ua >= 0.0);
        REQUIRE(ua < 1.0);
        REQUIRE(ua == b.uniform());
        if (ua != c.uniform()) any_diff = true;
    }
    REQUIRE(any_diff);
}

TEST_CASE("rng: derived task seeds are distinct") {
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t i = 0; i < 1000; ++i) seeds.push_back(derive_seed(123, i));
    std::sort(seeds.begin(), seeds.end());
    REQUIRE(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
    REQUIRE(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("rng: weighted sampling respects zero weights and rejects empty input") {
    Rng rng(0);
    const std::vector<double> w = {0.0, 2.0, 0.0};
    for (int i = 0; i < 100; ++i) REQUIRE(rng.sample_weighted(w) == 1);
    REQUIRE_THROWS_AS(rng.sample_weighted(std::span<const double>{}), ContractError);
    REQUIRE_FALSE(rng.bernoulli(0.0));
    REQUIRE(rng.bernoulli(1.0));
}

TEST_CASE("harq: error probability decays geometrically and clamps at r_max") {
    const HarqProfile h{0.5, 0.5, 3};
    h.validate();
    REQUIRE(h.error_prob(0) == Catch::Approx(0.5).epsilon(1e-15));
    REQUIRE(h.error_prob(1) == Catch::Approx(0.25).epsilon(1e-15));
    REQUIRE(h.error_prob(2) == Catch::Approx(0.125).epsilon(1e-15));
    REQUIRE(h.error_prob(3) == Catch::Approx(0.0625).epsilon(1e-15));
    REQUIRE(h.error_prob(5) == Catch::Approx(0.0625).epsilon(1e-15));
    REQUIRE_THROWS_AS(h.error_prob(-1), ContractError);
}

TEST_CASE("harq: validation pins p0 and lambda to the open unit interval") {
    REQUIRE_THROWS_AS((HarqProfile{0.0, 0.5, 3}.validate()), ContractError);
    REQUIRE_THROWS_AS((HarqProfile{1.0, 0.5, 3}.validate()), ContractError);
    REQUIRE_THROWS_AS((HarqProfile{0.5, 0.0, 3}.validate()), ContractError);
    REQUIRE_THROWS_AS((HarqProfile{0.5, 1.0, 3}.validate()), ContractError);
    REQUIRE_THROWS_AS((HarqProfile{0.5, 0.5, -1}.validate()), ContractError);
    REQUIRE_NOTHROW((HarqProfile{0.999, 0.001, 0}.validate()));
}

TEST_CASE("energy: iid constructor and stationary distribution") {
    const auto p = EnergyProcess::iid(0.5);
    REQUIRE(p.num_levels() == 2);
    REQUIRE(p.transition_prob(0, 1) == 0.5);
    REQUIRE(p.transition_prob(1, 1) == 0.5);
    const auto pi = p.stationary();
    REQUIRE(pi[0] == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(pi[1] == Catch::Approx(0.5).margin(1e-12));

    const auto p8 = EnergyProcess::iid(0.8);
    const auto pi8 = p8.stationary();
    REQUIRE(pi8[0] == Catch::Approx(0.2).margin(1e-12));
    REQUIRE(pi8[1] == Catch::Approx(0.8).margin(1e-12));
}

TEST_CASE("energy: deterministic harvest is accepted, flagged by the advisory probe") {
    const auto p = EnergyProcess::iid(1.0);
    REQUIRE(p.min_zero_harvest_prob() == 0.0);
    REQUIRE(EnergyProcess::iid(0.5).min_zero_harvest_prob() == 0.5);
    Rng rng(3);
    for (int i = 0; i < 50; ++i) REQUIRE(p.sample_next(0, rng) == 1);
}

TEST_CASE("energy: symmetric two-state chain and its correlation coefficient") {
    const auto p = EnergyProcess::symmetric_two_state(0.7);
    REQUIRE(p.transition_prob(1, 1) == Catch::Approx(0.7));
    REQUIRE(p.transition_prob(1, 0) == Catch::Approx(0.3));
    REQUIRE(p.transition_prob(0, 0) == Catch::Approx(0.7));
    const auto pi = p.stationary();
    REQUIRE(pi[0] == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(pi[1] == Catch::Approx(0.5).margin(1e-12));

    REQUIRE(correlation_coefficient(p) == Catch::Approx(0.4).margin(1e-12));
    REQUIRE(correlation_coefficient(EnergyProcess::iid(0.5)) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(correlation_coefficient(EnergyProcess::symmetric_two_state(1.0)) ==
            Catch::Approx(1.0).margin(1e-12));
    // iid(0.8) has p(0|0)=0.2 != p(1|1)=0.8, so no single burstiness parameter.
    REQUIRE_THROWS_AS(correlation_coefficient(EnergyProcess::iid(0.8)), ContractError);
}

TEST_CASE("energy: matrix constructor validates shape and row sums") {
    REQUIRE_THROWS_AS(EnergyProcess::from_matrix({{0.5, 0.5}, {0.5}}), ContractError);
    REQUIRE_THROWS_AS(EnergyProcess::from_matrix({{0.6, 0.5}, {0.5, 0.5}}), ContractError);
    REQUIRE_THROWS_AS(EnergyProcess::from_matrix({{1.2, -0.2}, {0.5, 0.5}}), ContractError);
    REQUIRE_THROWS_AS(EnergyProcess::from_matrix({}), ContractError);

    const auto p3 = EnergyProcess::from_matrix(
        {{0.2, 0.5, 0.3}, {0.1, 0.8, 0.1}, {0.3, 0.3, 0.4}});
    REQUIRE(p3.num_levels() == 3);
    const auto pi = p3.stationary();
    REQUIRE(pi[0] + pi[1] + pi[2] == Catch::Approx(1.0).margin(1e-12));
    double mass = 0.0;
    for (int e = 0; e < 3; ++e) mass += pi[e] * p3.transition_prob(e, 1);
    REQUIRE(mass == Catch::Approx(pi[1]).margin(1e-10));
    REQUIRE_THROWS_AS(correlation_coefficient(p3), ContractError);
}

TEST_CASE("config: per-action energy spend and validation") {
    SystemConfig cfg = reference_config();
    REQUIRE(cfg.spend(Action::Idle) == 0);
    REQUIRE(cfg.spend(Action::NewUpdate) == 2);
    REQUIRE(cfg.spend(Action::Retransmit) == 1);
    REQUIRE_NOTHROW(cfg.validate());

    SystemConfig bad = cfg;
    bad.delta_max = 1;
    REQUIRE_THROWS_AS(bad.validate(), ContractError);
    bad = cfg;
    bad.e_tx = 0;
    REQUIRE_THROWS_AS(bad.validate(), ContractError);
    bad = cfg;
    bad.e_s = -1;
    REQUIRE_THROWS_AS(bad.validate(), ContractError);
    bad = cfg;
    bad.b_max = 0;
    REQUIRE_THROWS_AS(bad.validate(), ContractError);
    bad = cfg;
    bad.e_s = 0;
    REQUIRE_NOTHROW(bad.validate());
}

TEST_CASE("model: feasibility truth table") {
    const SystemConfig cfg = reference_config();  // e_s=1, e_tx=1
    const auto feas = [&](int b, int retx) {
        return feasible_actions(SystemState{0, b, 10, 5, retx}, cfg);
    };
    // Idle is always available.
    for (int b : {0, 1, 2, 5})
        for (int r : {0, 1, 3}) REQUIRE(feas(b, r).contains(Action::Idle));
    // A fresh update needs e_s + e_tx = 2 units.
    REQUIRE_FALSE(feas(1, 0).contains(Action::NewUpdate));
    REQUIRE(feas(2, 0).contains(Action::NewUpdate));
    // A retransmission needs e_tx = 1 unit and a pending undecoded packet.
    REQUIRE_FALSE(feas(0, 1).contains(Action::Retransmit));
    REQUIRE_FALSE(feas(1, 0).contains(Action::Retransmit));
    REQUIRE(feas(1, 1).contains(Action::Retransmit));
    REQUIRE(feas(2, 3).size() == 3);
    REQUIRE(feas(0, 0).size() == 1);

    SystemConfig free_sense = cfg;
    free_sense.e_s = 0;
    REQUIRE(feasible_actions(SystemState{0, 1, 10, 5, 0}, free_sense).contains(Action::NewUpdate));
}

TEST_CASE("model: action set iterates in canonical tie-break order") {
    ActionSet set;
    set.add(Action::Retransmit);
    set.add(Action::Idle);
    set.add(Action::NewUpdate);
    const auto v = set.to_vector();
    REQUIRE(v == std::vector<Action>{Action::Idle, Action::NewUpdate, Action::Retransmit});
}

TEST_CASE("model: retransmission successor distribution (frozen hand computation)") {
    const SystemConfig cfg = reference_config();
    const SystemState s{1, 2, 3, 2, 1};
    const auto dist = transition_distribution(s, Action::Retransmit, cfg);

    // g(1)=0.25; battery 2+1-1=2; ACK lifts AoI to aoi_tx+1=3, NACK ages to 4
    // and bumps retx to 2; harvest splits each branch 50/50.
    REQUIRE(dist.size() == 4);
    REQUIRE(prob_of(dist, {0, 2, 3, 3, 0}) == Catch::Approx(0.375).margin(1e-15));
    REQUIRE(prob_of(dist, {1, 2, 3, 3, 0}) == Catch::Approx(0.375).margin(1e-15));
    REQUIRE(prob_of(dist, {0, 2, 4, 3, 2}) == Catch::Approx(0.125).margin(1e-15));
    REQUIRE(prob_of(dist, {1, 2, 4, 3, 2}) == Catch::Approx(0.125).margin(1e-15));
    REQUIRE(total_prob(dist) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(std::is_sorted(dist.begin(), dist.end(),
                           [](const auto& x, const auto& y) { return x.first < y.first; }));
}

TEST_CASE("model: fresh update successor distribution (frozen hand computation)") {
    const SystemConfig cfg = reference_config();
    const SystemState s{0, 3, 5, 4, 2};
    const auto dist = transition_distribution(s, Action::NewUpdate, cfg);

    // g(0)=0.5; battery 3+0-2=1; success resets both ages, failure leaves a
    // fresh pending packet (aoi_tx=1, retx=1) while the receiver ages to 6.
    REQUIRE(dist.size() == 4);
    REQUIRE(prob_of(dist, {0, 1, 1, 1, 0}) == Catch::Approx(0.25).margin(1e-15));
    REQUIRE(prob_of(dist, {1, 1, 1, 1, 0}) == Catch::Approx(0.25).margin(1e-15));
    REQUIRE(prob_of(dist, {0, 1, 6, 1, 1}) == Catch::Approx(0.25).margin(1e-15));
    REQUIRE(prob_of(dist, {1, 1, 6, 1, 1}) == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("model: idle ages both clocks and saturates at delta_max") {
    const SystemConfig cfg = reference_config();
    const SystemState s{1, 5, 40, 40, 3};
    const auto dist = transition_distribution(s, Action::Idle, cfg);
    REQUIRE(dist.size() == 2);
    // Battery is already full, so the harvested unit overflows.
    REQUIRE(prob_of(dist, {0, 5, 40, 40, 3}) == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(prob_of(dist, {1, 5, 40, 40, 3}) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("model: retransmission count saturates at r_max") {
    const SystemConfig cfg = reference_config();
    const SystemState s{0, 3, 10, 2, 3};
    const auto dist = transition_distribution(s, Action::Retransmit, cfg);
    // g(3)=0.0625. The NACK branch keeps retx at r_max=3.
    double nack_mass = 0.0;
    for (const auto& [nxt, p] : dist) {
        REQUIRE((nxt.retx == 0 || nxt.retx == 3));
        if (nxt.retx == 3) nack_mass += p;
    }
    REQUIRE(nack_mass == Catch::Approx(0.0625).margin(1e-15));
}

TEST_CASE("model: infeasible actions are rejected") {
    const SystemConfig cfg = reference_config();
    Rng rng(1);
    REQUIRE_THROWS_AS(transition_distribution({0, 1, 3, 2, 0}, Action::NewUpdate, cfg),
                      ContractError);
    REQUIRE_THROWS_AS(transition_distribution({0, 5, 3, 2, 0}, Action::Retransmit, cfg),
                      ContractError);
    REQUIRE_THROWS_AS(step({0, 0, 3, 2, 1}, Action::Retransmit, cfg, rng), ContractError);
}

TEST_CASE("model: successor distributions are stochastic, merged, and in-range") {
    SystemConfig cfg = reference_config();
    cfg.b_max = 3;
    cfg.delta_max = 6;
    cfg.energy = EnergyProcess::symmetric_two_state(0.7);
    cfg.validate();

    for (int e = 0; e <= 1; ++e)
        for (int b = 0; b <= cfg.b_max; ++b)
            for (int rx = 1; rx <= cfg.delta_max; ++rx)
                for (int tx = 1; tx <= cfg.delta_max; ++tx)
                    for (int r = 0; r <= cfg.harq.r_max; ++r) {
                        const SystemState s{e, b, rx, tx, r};
                        feasible_actions(s, cfg).for_each([&](Action a) {
                            const auto dist = transition_distribution(s, a, cfg);
                            REQUIRE(total_prob(dist) == Catch::Approx(1.0).margin(1e-12));
                            for (std::size_t i = 0; i < dist.size(); ++i) {
                                REQUIRE(dist[i].first.valid(cfg));
                                REQUIRE(dist[i].second > 0.0);
                                if (i > 0) REQUIRE(dist[i - 1].first < dist[i].first);
                            }
                        });
                    }
}

TEST_CASE("model: sampled steps stay inside the exact successor support") {
    const SystemConfig cfg = reference_config();
    Rng rng(99);
    SystemState s{1, 5, 1, 1, 0};
    for (int t = 0; t < 2000; ++t) {
        const auto feas = feasible_actions(s, cfg).to_vector();
        const Action a = feas[rng.bits() % feas.size()];
        const auto dist = transition_distribution(s, a, cfg);
        const auto out = step(s, a, cfg, rng);
        REQUIRE(out.cost == s.aoi_rx);
        REQUIRE(out.ack.has_value() == (a != Action::Idle));
        REQUIRE(prob_of(dist, out.next) > 0.0);
        s = out.next;
    }
}

TEST_CASE("model: trajectories are reproducible from the seed") {
    const SystemConfig cfg = reference_config();
    const auto roll = [&](std::uint64_t seed) {
        Rng rng(seed);
        SystemState s{1, 5, 1, 1, 0};
        std::vector<SystemState> traj;
        for (int t = 0; t < 500; ++t) {
            const auto feas = feasible_actions(s, cfg).to_vector();
            const Action a = feas[rng.bits() % feas.size()];
            s = step(s, a, cfg, rng).next;
            traj.push_back(s);
        }
        return traj;
    };
    REQUIRE(roll(1234) == roll(1234));
    REQUIRE(roll(1234) != roll(1235));
}
