#include "support.hpp"

#include <gtest/gtest.h>

using namespace predq;
using namespace predq::testing;

TEST(Rational, ParsesFractionsAndDecimals) {
    EXPECT_EQ(parse_rational("1/4"), Rational(1, 4));
    EXPECT_EQ(parse_rational("2/8"), Rational(1, 4));
    EXPECT_EQ(parse_rational("0.25"), Rational(1, 4));
    EXPECT_EQ(parse_rational("1e-3"), Rational(1, 1000));
    EXPECT_EQ(parse_rational("-3"), Rational(-3));
    EXPECT_EQ(parse_rational("2.5E1"), Rational(25));
    EXPECT_THROW(parse_rational("1/0"), std::invalid_argument);
    EXPECT_THROW(parse_rational("abc"), std::invalid_argument);
    EXPECT_THROW(parse_rational("1/-2"), std::invalid_argument);
    EXPECT_THROW(parse_rational(""), std::invalid_argument);
}

TEST(Rational, JsonLiteralsUseShortestDecimal) {
    EXPECT_EQ(rational_from_literal(0.1), Rational(1, 10));
    EXPECT_EQ(rational_from_literal(0.25), Rational(1, 4));
    EXPECT_EQ(to_string(Rational(3)), "3");
    EXPECT_EQ(to_string(parse_rational("6/8")), "3/4");
}

TEST(Model, NetworkHasSevenStatesFiveActions) {
    auto m = network();
    EXPECT_EQ(m.num_states(), 7u);
    EXPECT_EQ(m.num_state_actions(), 5u);
    EXPECT_EQ(m.state_name(m.init()), "send");
    EXPECT_EQ(m.terminals(), ids(m, {"recv", "lost1", "lost2", "lost3"}));
}

TEST(Model, SingleStateIsTerminal) {
    auto m = parse_model(R"({"states":["s"],"init":"s","transitions":[]})");
    EXPECT_EQ(m.num_states(), 1u);
    EXPECT_TRUE(m.is_terminal(0));
}

TEST(Model, RejectsBadDistributions) {
    EXPECT_THROW(parse_model(R"({"states":["A","x","y"],"init":"A",
        "transitions":[{"from":"A","action":"alpha","to":{"x":"1/2","y":"1/4"}}]})"),
                 ModelError);
    try {
        parse_model(R"({"states":["A","x"],"init":"A",
            "transitions":[{"from":"A","action":"alpha","to":{"x":"3/4"}}]})");
        FAIL();
    } catch (ModelError const& e) {
        EXPECT_NE(std::string(e.what()).find("sums to 3/4"), std::string::npos);
    }
}

TEST(Model, RejectsDuplicatesAndUnknownStates) {
    EXPECT_THROW(parse_model(R"({"states":["A","x"],"init":"A","transitions":[
        {"from":"A","action":"a","to":{"x":1}},{"from":"A","action":"a","to":{"x":1}}]})"),
                 ModelError);
    EXPECT_THROW(parse_model(R"({"states":["A"],"init":"A","transitions":[{"from":"A","action":"a","to":{"q":1}}]})"),
                 ModelError);
    EXPECT_THROW(parse_model(R"({"states":["A","A"],"init":"A"})"), ModelError);
    EXPECT_THROW(parse_model(R"({"states":["A"],"init":"B"})"), ModelError);
}

TEST(Model, DecimalProbabilitiesAreExact) {
    auto m = parse_model(R"({"states":["A","x","y"],"init":"A",
        "transitions":[{"from":"A","action":"a","to":{"x":0.1,"y":"0.9"}}]})");
    EXPECT_EQ(m.choices(0)[0].successors[0].probability, Rational(1, 10));
    EXPECT_EQ(m.choices(0)[0].successors[1].probability, Rational(9, 10));
}

TEST(Model, ValidateQuery) {
    auto m = network();
    EXPECT_TRUE(validate_query(m, network_query(m, "B")).empty());

    auto d = validate_query(m, {ids(m, {"B"}), ids(m, {"B"})});
    ASSERT_FALSE(d.empty());
    bool intersect = false;
    for (auto const& msg : d) intersect = intersect || msg.find("C and E intersect") != std::string::npos;
    EXPECT_TRUE(intersect);

    d = validate_query(m, {ids(m, {"B"}), ids(m, {"A"})});
    ASSERT_EQ(d.size(), 1u);
    EXPECT_NE(d[0].find("effect state not terminal"), std::string::npos);

    d = validate_query(m, {{}, {}});
    EXPECT_EQ(d.size(), 2u);
}

TEST(Model, UniformPolicy) {
    auto m = network();
    auto u = uniform_policy<Rational>(m);
    EXPECT_EQ(u.row(id(m, "send")), std::vector<Rational>{Rational(1)});
    EXPECT_EQ(u.row(id(m, "A")), (std::vector<Rational>{Rational(1, 2), Rational(1, 2)}));
    EXPECT_EQ(u.row(id(m, "B")), (std::vector<Rational>{Rational(1, 2), Rational(1, 2)}));
    EXPECT_TRUE(u.row(id(m, "recv")).empty());

    auto sb = suzy_billy();
    auto v = uniform_policy<Rational>(sb);
    EXPECT_EQ(v.row(id(sb, "Suzy")), (std::vector<Rational>{Rational(1, 2), Rational(1, 2)}));
    EXPECT_EQ(v.row(id(sb, "Billy")), (std::vector<Rational>{Rational(1, 2), Rational(1, 2)}));
}

TEST(Model, MarkovChainHasUniquePolicy) {
    auto m = parse_model(R"({"states":["i","t"],"init":"i","transitions":[{"from":"i","action":"a","to":{"t":1}}]})");
    EXPECT_EQ(uniform_policy<Rational>(m).row(0), std::vector<Rational>{Rational(1)});
}

TEST(Model, PolicyValidation) {
    auto m = network();
    ExactPolicy::Table t(m.num_states());
    t[id(m, "send")] = {Rational(1)};
    t[id(m, "A")] = {Rational(1, 2), Rational(1, 3)};
    t[id(m, "B")] = {Rational(1), Rational(0)};
    EXPECT_THROW(ExactPolicy(m, t), ModelError);

    FloatPolicy::Table f(m.num_states());
    f[id(m, "send")] = {1.0};
    f[id(m, "A")] = {0.5, 0.5 + 5e-13};
    f[id(m, "B")] = {1.0, 0.0};
    FloatPolicy x(m, f);
    EXPECT_NEAR(x(id(m, "A"), 0) + x(id(m, "A"), 1), 1.0, 1e-15);
    f[id(m, "A")] = {0.5, 0.6};
    EXPECT_THROW(FloatPolicy(m, f), ModelError);
}

TEST(Model, RoundTripThroughJson) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
        auto m = random_cyclic(rng, 4, 2);
        auto again = parse_model(serialize_model(m).dump());
        EXPECT_EQ(serialize_model(again).dump(), serialize_model(m).dump());
        for (StateId s = 0; s < m.num_states(); ++s) {
            ASSERT_EQ(m.choices(s).size(), again.choices(s).size());
            EXPECT_EQ(m.is_terminal(s), again.is_terminal(s));
            for (std::size_t k = 0; k < m.choices(s).size(); ++k) {
                Rational sum = 0;
                for (auto const& succ : again.choices(s)[k].successors) sum += succ.probability;
                EXPECT_EQ(sum, 1);
            }
        }
    }
}
