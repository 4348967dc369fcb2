#include "support.hpp"

#include <gtest/gtest.h>

using namespace predq;
using namespace predq::testing;

TEST(Graph, ReachableFrom) {
    auto m = network();
    EXPECT_EQ(reachable_from(m, {m.init()}).size(), 7u);
    EXPECT_EQ(reachable_from(m, ids(m, {"B"})), ids(m, {"B", "recv", "lost1", "lost3"}));
    EXPECT_TRUE(reachable_from(m, {}).empty());
}

TEST(Graph, NoMecsInPaperModels) {
    EXPECT_TRUE(mec_decomposition(network()).empty());
    EXPECT_TRUE(mec_decomposition(suzy_billy()).empty());
}

TEST(Graph, ClosedPairIsOneMec) {
    auto m = parse_model(R"({"states":["s","t"],"init":"s","transitions":[
        {"from":"s","action":"a","to":{"t":1}},{"from":"t","action":"b","to":{"s":1}}]})");
    auto d = mec_decomposition(m);
    ASSERT_EQ(d.mecs.size(), 1u);
    EXPECT_EQ(d.mecs[0].states, (StateSet{0, 1}));
    EXPECT_EQ(d.mecs[0].choices.size(), 2u);
}

TEST(Graph, MecExcludesLeakingActions) {
    // s: stay (self loop) or leave; t reachable only by leaving
    auto m = parse_model(R"({"states":["s","u","t"],"init":"s","transitions":[
        {"from":"s","action":"stay","to":{"s":1}},
        {"from":"s","action":"go","to":{"u":"1/2","t":"1/2"}},
        {"from":"u","action":"back","to":{"s":1}}]})");
    auto d = mec_decomposition(m);
    ASSERT_EQ(d.mecs.size(), 1u);
    EXPECT_EQ(d.mecs[0].states, (StateSet{0}));
    ASSERT_EQ(d.mecs[0].choices.size(), 1u);
    EXPECT_EQ(d.mecs[0].choices[0], (std::pair<StateId, std::size_t>{0, 0}));
    EXPECT_FALSE(d.membership[1].has_value());
}

// Brute-force check of the MEC properties: closed, strongly connected,
// and every EC found by enumerating choice subsets is contained in a MEC.
TEST(Graph, MecPropertiesOnRandomModels) {
    std::mt19937_64 rng(3);
    for (int round = 0; round < 60; ++round) {
        auto m = random_cyclic(rng, 4, 2, 2);
        auto d = mec_decomposition(m);
        for (auto const& mec : d.mecs) {
            for (auto [s, k] : mec.choices) {
                EXPECT_TRUE(contains(mec.states, s));
                for (auto const& succ : m.choices(s)[k].successors) EXPECT_TRUE(contains(mec.states, succ.state));
            }
            for (auto s : mec.states) {
                auto reach = reachable_from(m, {s});
                for (auto t : mec.states) EXPECT_TRUE(contains(reach, t));
            }
        }
        // a bottom SCC of any MD-induced chain is an end component
        for_each_md(m, [&](std::vector<std::size_t> const& pick) {
            auto rows = induced_chain(m, deterministic_policy<Rational>(m, pick));
            for (StateId s = 0; s < m.num_states(); ++s) {
                if (m.is_terminal(s)) continue;
                auto fwd = detail::chain_forward(rows, s);
                bool bottom = true;
                for (StateId t = 0; t < m.num_states() && bottom; ++t)
                    if (fwd[t]) bottom = detail::chain_forward(rows, t)[s];
                if (bottom) { EXPECT_TRUE(d.membership[s].has_value()); }
            }
        });
    }
}

TEST(Graph, AcyclicModelsHaveNoMecs) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 30; ++i) EXPECT_TRUE(mec_decomposition(random_acyclic(rng, 8, 3)).empty());
}

TEST(Graph, ZeroStates) {
    auto m = network();
    auto u = uniform_policy<Rational>(m);
    EXPECT_EQ(zero_states(m, u, ids(m, {"recv"})), ids(m, {"lost1", "lost2", "lost3"}));
    StateSet all;
    for (StateId s = 0; s < m.num_states(); ++s) all.push_back(s);
    EXPECT_TRUE(zero_states(m, u, all).empty());

    auto no_delta = network_policy(m, Rational(1, 2), Rational(1));
    StateSet all_but_lost3;
    for (StateId s = 0; s < m.num_states(); ++s)
        if (s != id(m, "lost3")) all_but_lost3.push_back(s);
    EXPECT_EQ(zero_states(m, no_delta, ids(m, {"lost3"})), all_but_lost3);
}

TEST(Graph, ZeroStatesUnderFullSupportMatchGraph) {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 30; ++i) {
        auto m = random_cyclic(rng, 5, 2);
        auto target = m.terminals();
        if (target.empty()) continue;
        auto z = zero_states(m, uniform_policy<Rational>(m), target);
        auto reach = can_reach(m, target);
        StateSet complement;
        for (StateId s = 0; s < m.num_states(); ++s)
            if (!contains(reach, s)) complement.push_back(s);
        EXPECT_EQ(z, complement);
    }
}

TEST(Graph, DiagnosticsFlagUnreachableAndEcs) {
    auto m = parse_model(R"({"states":["s","t","x"],"init":"s","transitions":[
        {"from":"s","action":"a","to":{"s":1}}]})");
    auto d = model_diagnostics(m);
    EXPECT_EQ(d.size(), 3u);  // t, x unreachable; {s} is an end component
}
