#include "support.hpp"

#include <gtest/gtest.h>

using namespace predq;
using namespace predq::testing;

TEST(Solve, ReachUnderPolicyNetwork) {
    auto m = network();
    auto lost = ids(m, {"lost1", "lost2", "lost3"});
    auto ab = load_policy(m, PREDQ_MODEL_DIR "/policy_alpha_beta.json");
    EXPECT_EQ(reach_under_policy(m, ab, lost)[m.init()], Rational(1, 2));

    auto gb = load_policy(m, PREDQ_MODEL_DIR "/policy_gamma_beta.json");
    auto r = reach_under_policy(m, gb, lost);
    EXPECT_EQ(r[m.init()], Rational(1, 3));
    EXPECT_EQ(r[id(m, "B")], Rational(1, 2));
    EXPECT_EQ(r[id(m, "A")], Rational(1, 4));
    EXPECT_EQ(r[id(m, "recv")], 0);
    EXPECT_EQ(r[id(m, "lost2")], 1);
}

TEST(Solve, OptimalReachNetwork) {
    auto m = network();
    auto lost = ids(m, {"lost1", "lost2", "lost3"});
    auto lo = optimal_reach(m, lost, Sense::min);
    auto hi = optimal_reach(m, lost, Sense::max);
    EXPECT_EQ(lo.values[m.init()], Rational(1, 3));
    EXPECT_EQ(hi.values[m.init()], Rational(2, 3));
    EXPECT_EQ(hi.values[id(m, "B")], 1);
    EXPECT_EQ(hi.values[id(m, "A")], Rational(1, 2));
    EXPECT_EQ(lo.values[id(m, "A")], Rational(1, 4));
    EXPECT_EQ(lo.values[id(m, "B")], Rational(1, 2));
    // the returned choices attain the values
    EXPECT_EQ(reach_under_policy(m, deterministic_policy<Rational>(m, lo.choice), lost)[m.init()], Rational(1, 3));
    EXPECT_EQ(reach_under_policy(m, deterministic_policy<Rational>(m, hi.choice), lost)[m.init()], Rational(2, 3));
}

TEST(Solve, FrequenciesUnderUniformPolicy) {
    auto m = network();
    auto f = frequencies_of(m, uniform_policy<Rational>(m));
    auto at = [&](char const* s, std::size_t k) { return f.freq[m.state_action_index(id(m, s), k)]; };
    EXPECT_EQ(at("send", 0), 1);
    EXPECT_EQ(at("A", 0), Rational(1, 3));
    EXPECT_EQ(at("A", 1), Rational(1, 3));
    EXPECT_EQ(at("B", 0), Rational(1, 6));
    EXPECT_EQ(at("B", 1), Rational(1, 6));
    EXPECT_EQ(f.inflow[id(m, "A")], Rational(2, 3));
    Rational terminal_mass = 0;
    for (auto t : m.terminals()) terminal_mass += f.inflow[t];
    EXPECT_EQ(terminal_mass, 1);
}

TEST(Solve, FrequenciesRejectEndComponents) {
    auto m = parse_model(R"({"states":["s","t"],"init":"s","transitions":[
        {"from":"s","action":"loop","to":{"s":1}},{"from":"s","action":"out","to":{"t":1}}]})");
    EXPECT_THROW(frequencies_of(m, uniform_policy<Rational>(m)), ModelError);
}

TEST(Solve, PolicyFromFrequencies) {
    auto m = network();
    auto x = network_policy(m, Rational(1, 3), Rational(3, 4));
    auto back = policy_from_frequencies(m, frequencies_of(m, x));
    EXPECT_EQ(back.table(), x.table());

    // B never entered: B falls back to uniform
    FrequencySolution<Rational> f{std::vector<Rational>(m.num_state_actions(), Rational(0)), {}};
    m = parse_model(R"({"states":["i","B","t"],"init":"i","transitions":[
        {"from":"i","action":"go","to":{"t":1}},
        {"from":"B","action":"a","to":{"t":1}},{"from":"B","action":"b","to":{"t":1}}]})");
    f.freq.assign(m.num_state_actions(), Rational(0));
    f.freq[m.state_action_index(0, 0)] = 1;
    auto y = policy_from_frequencies(m, f);
    EXPECT_EQ(y.row(1), (std::vector<Rational>{Rational(1, 2), Rational(1, 2)}));

    f.freq[m.state_action_index(0, 0)] = Rational(1, 2);
    EXPECT_THROW(policy_from_frequencies(m, f), ModelError);
    f.freq[m.state_action_index(0, 0)] = 1;
    f.freq[m.state_action_index(1, 0)] = -1;
    EXPECT_THROW(policy_from_frequencies(m, f), ModelError);
}

// Oracle (a): summing over all maximal paths.
TEST(Solve, ReachMatchesPathEnumeration) {
    std::mt19937_64 rng(21);
    for (int round = 0; round < 50; ++round) {
        std::size_t n = 5 + round % 8;
        auto m = random_acyclic(rng, n, 3);
        ExactPolicy::Table t(m.num_states());
        for (StateId s = 0; s < m.num_states(); ++s)
            if (!m.is_terminal(s)) t[s] = random_distribution(rng, m.choices(s).size());
        ExactPolicy x(m, std::move(t));
        auto target = pick_distinct(rng, m.terminals(), 2);
        target = normalize_set(target);
        EXPECT_EQ(reach_under_policy(m, x, target)[m.init()], path_enumeration(m, x, target)) << "round " << round;
    }
}

// Oracle (b): optimal values equal the best memoryless deterministic policy.
TEST(Solve, OptimalReachMatchesMdEnumeration) {
    std::mt19937_64 rng(22);
    for (int round = 0; round < 50; ++round) {
        auto m = random_cyclic(rng, 2 + round % 4, 2);
        auto target = StateSet{static_cast<StateId>(m.num_states() - 1)};
        std::optional<Rational> lo, hi;
        for_each_md(m, [&](std::vector<std::size_t> const& pick) {
            auto v = reach_under_policy(m, deterministic_policy<Rational>(m, pick), target)[m.init()];
            if (!lo || v < *lo) lo = v;
            if (!hi || v > *hi) hi = v;
        });
        EXPECT_EQ(optimal_reach(m, target, Sense::min).values[m.init()], *lo) << "round " << round;
        EXPECT_EQ(optimal_reach(m, target, Sense::max).values[m.init()], *hi) << "round " << round;
    }
}

TEST(Solve, ReachIsMonotoneInTarget) {
    std::mt19937_64 rng(23);
    for (int round = 0; round < 30; ++round) {
        auto m = random_cyclic(rng, 4, 3);
        auto x = uniform_policy<Rational>(m);
        auto small = StateSet{static_cast<StateId>(m.num_states() - 1)};
        auto large = m.terminals();
        auto a = reach_under_policy(m, x, small);
        auto b = reach_under_policy(m, x, large);
        for (StateId s = 0; s < m.num_states(); ++s) {
            EXPECT_LE(a[s], b[s]);
            EXPECT_GE(a[s], 0);
            EXPECT_LE(b[s], 1);
        }
    }
}

TEST(Solve, FloatBackendAgreesWithExact) {
    std::mt19937_64 rng(24);
    for (int round = 0; round < 30; ++round) {
        auto m = random_cyclic(rng, 5, 2);
        auto x = uniform_policy<Rational>(m);
        auto target = StateSet{static_cast<StateId>(m.num_states() - 1)};
        auto exact = reach_under_policy(m, x, target);
        auto direct = reach_under_policy(m, to_float(m, x), target);
        SolverOptions iterative;
        iterative.direct_limit = 0;
        auto iter = reach_under_policy(m, to_float(m, x), target, iterative);
        for (StateId s = 0; s < m.num_states(); ++s) {
            EXPECT_NEAR(direct[s], to_double(exact[s]), 1e-12);
            EXPECT_NEAR(iter[s], to_double(exact[s]), 1e-9);
        }
    }
}

TEST(Solve, FrequencyRoundTripOnRandomModels) {
    std::mt19937_64 rng(25);
    for (int round = 0; round < 30; ++round) {
        auto m = random_acyclic(rng, 8, 2);
        ExactPolicy::Table t(m.num_states());
        for (StateId s = 0; s < m.num_states(); ++s)
            if (!m.is_terminal(s)) t[s] = random_distribution(rng, m.choices(s).size());
        ExactPolicy x(m, std::move(t));
        auto f = frequencies_of(m, x);
        EXPECT_EQ(balance_inflow(m, f.freq), f.inflow);
        auto y = policy_from_frequencies(m, f);
        for (StateId s = 0; s < m.num_states(); ++s)
            if (f.inflow[s] > 0 && !m.is_terminal(s)) { EXPECT_EQ(y.row(s), x.row(s)); }
    }
}
