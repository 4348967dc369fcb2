#pragma once

#include <predq/predq.hpp>

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace predq::testing {

inline Mdp network() { return load_model(PREDQ_MODEL_DIR "/network.json"); }
inline Mdp suzy_billy() { return load_model(PREDQ_MODEL_DIR "/suzy_billy.json"); }

inline StateId id(Mdp const& m, std::string const& name) {
    auto s = m.find_state(name);
    if (!s) throw std::invalid_argument("no state " + name);
    return *s;
}

inline StateSet ids(Mdp const& m, std::initializer_list<char const*> names) {
    StateSet out;
    for (auto n : names) out.push_back(id(m, n));
    return normalize_set(out);
}

inline Query network_query(Mdp const& m, char const* cause) {
    return {ids(m, {cause}), ids(m, {"lost1", "lost2", "lost3"})};
}

/// p = probability of alpha in A, q = probability of beta in B.
inline ExactPolicy network_policy(Mdp const& m, Rational const& p, Rational const& q) {
    ExactPolicy::Table t(m.num_states());
    t[id(m, "send")] = {Rational(1)};
    t[id(m, "A")] = {p, 1 - p};
    t[id(m, "B")] = {q, 1 - q};
    return ExactPolicy(m, std::move(t));
}

inline FloatPolicy network_policy_d(Mdp const& m, double p, double q) {
    FloatPolicy::Table t(m.num_states());
    t[id(m, "send")] = {1.0};
    t[id(m, "A")] = {p, 1 - p};
    t[id(m, "B")] = {q, 1 - q};
    return FloatPolicy(m, std::move(t));
}

// ---------------------------------------------------------------------------
// random models
// ---------------------------------------------------------------------------

inline std::vector<Rational> random_distribution(std::mt19937_64& rng, std::size_t k) {
    std::uniform_int_distribution<int> w(1, 6);
    std::vector<long> raw(k);
    long total = 0;
    for (auto& r : raw) total += (r = w(rng));
    std::vector<Rational> out;
    for (auto r : raw) {
        Rational v(r, total);
        v.canonicalize();
        out.push_back(v);
    }
    return out;
}

inline std::vector<StateId> pick_distinct(std::mt19937_64& rng, std::vector<StateId> pool, std::size_t k) {
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(k, pool.size()));
    return pool;
}

/// Acyclic model: state i only moves to states j > i; the last `terminals`
/// states are terminal.
inline Mdp random_acyclic(std::mt19937_64& rng, std::size_t states, std::size_t terminals) {
    MdpBuilder b;
    for (std::size_t i = 0; i < states; ++i) b.add_state("s" + std::to_string(i));
    std::uniform_int_distribution<int> actions(1, 3), fanout(1, 3);
    for (std::size_t i = 0; i + terminals < states; ++i) {
        std::vector<StateId> later;
        for (auto j = i + 1; j < states; ++j) later.push_back(j);
        int na = actions(rng);
        for (int a = 0; a < na; ++a) {
            auto succ = pick_distinct(rng, later, static_cast<std::size_t>(fanout(rng)));
            auto probs = random_distribution(rng, succ.size());
            std::vector<std::pair<StateId, Rational>> d;
            for (std::size_t k = 0; k < succ.size(); ++k) d.emplace_back(succ[k], probs[k]);
            b.add_choice(i, "a" + std::to_string(a), std::move(d));
        }
    }
    b.set_init(0);
    return std::move(b).build();
}

/// General model with `inner` non-terminal states (cycles and end
/// components allowed) followed by `terminals` terminal states.
inline Mdp random_cyclic(std::mt19937_64& rng, std::size_t inner, std::size_t terminals, int max_actions = 3) {
    MdpBuilder b;
    std::size_t n = inner + terminals;
    for (std::size_t i = 0; i < n; ++i) b.add_state("s" + std::to_string(i));
    std::vector<StateId> all;
    for (std::size_t j = 0; j < n; ++j) all.push_back(j);
    std::uniform_int_distribution<int> actions(1, max_actions), fanout(1, 3);
    for (std::size_t i = 0; i < inner; ++i) {
        int na = actions(rng);
        for (int a = 0; a < na; ++a) {
            auto succ = pick_distinct(rng, all, static_cast<std::size_t>(fanout(rng)));
            auto probs = random_distribution(rng, succ.size());
            std::vector<std::pair<StateId, Rational>> d;
            for (std::size_t k = 0; k < succ.size(); ++k) d.emplace_back(succ[k], probs[k]);
            b.add_choice(i, "a" + std::to_string(a), std::move(d));
        }
    }
    b.set_init(0);
    return std::move(b).build();
}

// ---------------------------------------------------------------------------
// oracles
// ---------------------------------------------------------------------------

/// Probability of reaching `target` by summing over all maximal paths of an
/// acyclic model.
inline Rational path_enumeration(Mdp const& m, ExactPolicy const& x, StateSet const& target) {
    std::function<Rational(StateId)> walk = [&](StateId s) -> Rational {
        if (contains(target, s)) return 1;
        Rational acc = 0;
        auto const& cs = m.choices(s);
        for (std::size_t k = 0; k < cs.size(); ++k) {
            if (x(s, k) == 0) continue;
            for (auto const& succ : cs[k].successors) acc += x(s, k) * succ.probability * walk(succ.state);
        }
        return acc;
    };
    return walk(m.init());
}

/// Calls f with every memoryless deterministic policy (as choice indices).
inline void for_each_md(Mdp const& m, std::function<void(std::vector<std::size_t> const&)> const& f) {
    std::vector<std::size_t> pick(m.num_states(), 0);
    for (;;) {
        f(pick);
        bool carried = true;
        for (StateId s = 0; s < m.num_states() && carried; ++s) {
            auto k = m.choices(s).size();
            if (k <= 1) continue;
            if (++pick[s] < k) {
                carried = false;
            } else {
                pick[s] = 0;
            }
        }
        if (carried) return;
    }
}

/// All points of the polytope whose coordinates are multiples of 1/steps.
inline void for_each_grid_policy(Mdp const& m, int steps, std::function<void(ExactPolicy const&)> const& f) {
    std::vector<StateId> states;
    for (StateId s = 0; s < m.num_states(); ++s)
        if (!m.is_terminal(s)) states.push_back(s);
    // compositions of `steps` into k parts
    auto compositions = [&](std::size_t k) {
        std::vector<std::vector<int>> out;
        std::vector<int> cur(k, 0);
        std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
            if (i + 1 == k) {
                cur[i] = left;
                out.push_back(cur);
                return;
            }
            for (int v = 0; v <= left; ++v) {
                cur[i] = v;
                rec(i + 1, left - v);
            }
        };
        rec(0, steps);
        return out;
    };
    std::vector<std::vector<std::vector<int>>> options;
    for (auto s : states) options.push_back(compositions(m.choices(s).size()));
    std::vector<std::size_t> idx(states.size(), 0);
    for (;;) {
        ExactPolicy::Table t(m.num_states());
        for (std::size_t i = 0; i < states.size(); ++i)
            for (int v : options[i][idx[i]]) {
                Rational r(v, steps);
                r.canonicalize();
                t[states[i]].push_back(r);
            }
        f(ExactPolicy(m, std::move(t)));
        std::size_t i = 0;
        for (; i < states.size(); ++i) {
            if (++idx[i] < options[i].size()) break;
            idx[i] = 0;
        }
        if (i == states.size()) return;
    }
}

}  // namespace predq::testing
