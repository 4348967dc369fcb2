#pragma once

#include <predq/graph.hpp>
#include <predq/linalg.hpp>
#include <predq/model.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <utility>
#include <vector>

namespace predq {

template <class S>
S const& probability_as(Successor const& succ) {
    if constexpr (is_exact_v<S>) {
        return succ.probability;
    } else {
        return succ.approx;
    }
}

/// Transition rows of the Markov chain induced by `x`; only strictly
/// positive entries are kept and repeated successors merged.
template <class S>
SparseRows<S> induced_chain(Mdp const& m, BasicPolicy<S> const& x) {
    SparseRows<S> rows(m.num_states());
    for (StateId s = 0; s < m.num_states(); ++s) {
        auto const& cs = m.choices(s);
        auto& row = rows[s];
        for (std::size_t k = 0; k < cs.size(); ++k) {
            S const& w = x(s, k);
            if (!(w > 0)) continue;
            for (auto const& succ : cs[k].successors) {
                S v = w * probability_as<S>(succ);
                auto it = std::find_if(row.begin(), row.end(), [&](auto const& e) { return e.first == succ.state; });
                if (it == row.end()) {
                    row.emplace_back(succ.state, std::move(v));
                } else {
                    it->second += v;
                }
            }
        }
    }
    return rows;
}

namespace detail {

template <class S>
std::vector<bool> chain_backward(SparseRows<S> const& rows, std::vector<bool> seed) {
    std::vector<std::vector<StateId>> pred(rows.size());
    for (StateId s = 0; s < rows.size(); ++s)
        for (auto const& [t, v] : rows[s]) pred[t].push_back(s);
    std::deque<StateId> work;
    for (StateId s = 0; s < seed.size(); ++s)
        if (seed[s]) work.push_back(s);
    while (!work.empty()) {
        auto s = work.front();
        work.pop_front();
        for (auto p : pred[s])
            if (!seed[p]) {
                seed[p] = true;
                work.push_back(p);
            }
    }
    return seed;
}

template <class S>
std::vector<bool> chain_forward(SparseRows<S> const& rows, StateId from) {
    std::vector<bool> seen(rows.size(), false);
    std::deque<StateId> work{from};
    seen[from] = true;
    while (!work.empty()) {
        auto s = work.front();
        work.pop_front();
        for (auto const& [t, v] : rows[s])
            if (!seen[t]) {
                seen[t] = true;
                work.push_back(t);
            }
    }
    return seen;
}

}  // namespace detail

/// Probability a^x_{s,T} of eventually reaching `target` from every state.
template <class S>
struct ReachabilityTable {
    StateSet target;
    std::vector<S> values;

    S const& operator[](StateId s) const { return values[s]; }
};

/// Reachability probabilities in an already induced chain.
template <class S>
ReachabilityTable<S> reach_in_chain(SparseRows<S> const& rows, StateSet const& target, SolverOptions const& opt = {}) {
    auto n = rows.size();
    auto in_target = to_mask(n, target);
    auto reaches = detail::chain_backward(rows, in_target);

    // unknowns: states that reach the target but are not in it; the rest is
    // either 1 (target) or 0 (zero states)
    std::vector<std::size_t> idx(n, npos);
    std::vector<StateId> unknowns;
    for (StateId s = 0; s < n; ++s)
        if (reaches[s] && !in_target[s]) {
            idx[s] = unknowns.size();
            unknowns.push_back(s);
        }
    SparseRows<S> q(unknowns.size());
    std::vector<S> b(unknowns.size(), S(0));
    for (std::size_t i = 0; i < unknowns.size(); ++i) {
        for (auto const& [t, v] : rows[unknowns[i]]) {
            if (in_target[t]) {
                b[i] += v;
            } else if (idx[t] != npos) {
                q[i].emplace_back(idx[t], v);
            }
        }
    }
    auto sol = solve_fixed_point(q, b, opt);

    ReachabilityTable<S> out{target, std::vector<S>(n, S(0))};
    for (StateId s = 0; s < n; ++s) {
        if (in_target[s]) {
            out.values[s] = S(1);
        } else if (idx[s] != npos) {
            out.values[s] = sol[idx[s]];
        }
    }
    return out;
}

/// Zero states are fixed to 0 first, which makes the remaining linear
/// system uniquely solvable.
template <class S>
ReachabilityTable<S> reach_under_policy(Mdp const& m, BasicPolicy<S> const& x, StateSet const& target,
                                        SolverOptions const& opt = {}) {
    for (auto t : target)
        if (t >= m.num_states()) throw ModelError("target state index out of range");
    return reach_in_chain(induced_chain(m, x), normalize_set(target), opt);
}

/// Expected number of visits to each state starting in `init`. For terminal
/// states this is the absorption probability. States that cannot reach a
/// terminal are excluded (their mass is trapped) and report 0.
template <class S>
std::vector<S> expected_visits(SparseRows<S> const& rows, StateId init, SolverOptions const& opt = {}) {
    auto n = rows.size();
    std::vector<bool> terminal(n);
    for (StateId s = 0; s < n; ++s) terminal[s] = rows[s].empty();
    auto reachable = detail::chain_forward(rows, init);
    auto escapes = detail::chain_backward(rows, terminal);

    std::vector<std::size_t> idx(n, npos);
    std::vector<StateId> live;
    for (StateId s = 0; s < n; ++s)
        if (reachable[s] && escapes[s] && !terminal[s]) {
            idx[s] = live.size();
            live.push_back(s);
        }
    // n_s = [s = init] + sum_t n_t P(t, s): the transposed system
    SparseRows<S> q(live.size());
    std::vector<S> b(live.size(), S(0));
    for (std::size_t i = 0; i < live.size(); ++i) {
        for (auto const& [t, v] : rows[live[i]])
            if (idx[t] != npos) q[idx[t]].emplace_back(i, v);
    }
    if (idx[init] != npos) b[idx[init]] = S(1);
    auto sol = solve_fixed_point(q, b, opt);

    std::vector<S> visits(n, S(0));
    for (std::size_t i = 0; i < live.size(); ++i) visits[live[i]] = sol[i];
    for (std::size_t i = 0; i < live.size(); ++i)
        for (auto const& [t, v] : rows[live[i]])
            if (terminal[t]) visits[t] += sol[i] * v;
    if (terminal[init]) visits[init] = S(1);
    return visits;
}

enum class Sense { min, max };

/// Optimal reachability values with one optimal memoryless deterministic
/// policy (`choice[s]` indexes Mdp::choices(s); npos at terminals).
struct OptimalReach {
    std::vector<Rational> values;
    std::vector<std::size_t> choice;
};

namespace detail {

inline Rational q_value(Choice const& c, std::vector<Rational> const& v) {
    Rational acc = 0;
    for (auto const& succ : c.successors) acc += succ.probability * v[succ.state];
    return acc;
}

inline std::vector<std::size_t> float_vi_choices(Mdp const& m, std::vector<bool> const& in_target,
                                                 std::vector<bool> const& frozen, Sense sense) {
    auto n = m.num_states();
    std::vector<double> v(n, 0.0);
    for (StateId s = 0; s < n; ++s)
        if (in_target[s]) v[s] = 1.0;
    for (int it = 0; it < 10000; ++it) {
        double delta = 0.0;
        for (StateId s = 0; s < n; ++s) {
            if (in_target[s] || frozen[s] || m.is_terminal(s)) continue;
            double best = sense == Sense::max ? -1.0 : 2.0;
            for (auto const& c : m.choices(s)) {
                double q = 0.0;
                for (auto const& succ : c.successors) q += succ.approx * v[succ.state];
                best = sense == Sense::max ? std::max(best, q) : std::min(best, q);
            }
            delta = std::max(delta, std::abs(best - v[s]));
            v[s] = best;
        }
        if (delta < 1e-14) break;
    }
    std::vector<std::size_t> pick(n, npos);
    for (StateId s = 0; s < n; ++s) {
        auto const& cs = m.choices(s);
        if (cs.empty()) continue;
        double best = 0.0;
        for (std::size_t k = 0; k < cs.size(); ++k) {
            double q = 0.0;
            for (auto const& succ : cs[k].successors) q += succ.approx * v[succ.state];
            if (pick[s] == npos || (sense == Sense::max ? q > best + 1e-12 : q < best - 1e-12)) {
                best = q;
                pick[s] = k;
            }
        }
    }
    return pick;
}

}  // namespace detail

/// Exact Pr^min / Pr^max of reaching `target`. Float value iteration
/// proposes a policy; exact policy iteration with strict improvement then
/// confirms it. Ties go to the smallest choice index, except that maximizing
/// states with positive value must pick a choice that makes progress towards
/// the target (otherwise an optimal-looking self loop would trap the play).
inline OptimalReach optimal_reach(Mdp const& m, StateSet const& target_in, Sense sense) {
    auto n = m.num_states();
    auto target = normalize_set(target_in);
    auto in_target = to_mask(n, target);

    // frozen states have value 0 and a fixed choice
    std::vector<bool> frozen(n, false);
    std::vector<std::size_t> fixed(n, npos);
    if (sense == Sense::max) {
        auto r = to_mask(n, can_reach(m, target));
        for (StateId s = 0; s < n; ++s) frozen[s] = !r[s];
    } else {
        // states with Pr^min > 0: every choice may hit the set
        std::vector<bool> pos = in_target;
        for (bool changed = true; changed;) {
            changed = false;
            for (StateId s = 0; s < n; ++s) {
                if (pos[s] || m.is_terminal(s)) continue;
                bool all = true;
                for (auto const& c : m.choices(s)) {
                    bool hit = false;
                    for (auto const& succ : c.successors) hit = hit || pos[succ.state];
                    all = all && hit;
                }
                if (all) {
                    pos[s] = true;
                    changed = true;
                }
            }
        }
        for (StateId s = 0; s < n; ++s) frozen[s] = !pos[s];
        for (StateId s = 0; s < n; ++s) {
            if (!frozen[s] || m.is_terminal(s)) continue;
            auto const& cs = m.choices(s);
            for (std::size_t k = 0; k < cs.size() && fixed[s] == npos; ++k) {
                bool stays = std::all_of(cs[k].successors.begin(), cs[k].successors.end(),
                                         [&](Successor const& succ) { return frozen[succ.state]; });
                if (stays) fixed[s] = k;
            }
        }
    }

    auto pick = detail::float_vi_choices(m, in_target, frozen, sense);
    for (StateId s = 0; s < n; ++s)
        if (fixed[s] != npos) pick[s] = fixed[s];

    std::vector<Rational> v;
    for (;;) {
        std::vector<std::size_t> full(pick);
        for (StateId s = 0; s < n; ++s)
            if (!m.is_terminal(s) && full[s] == npos) full[s] = 0;
        v = reach_under_policy(m, deterministic_policy<Rational>(m, full), target).values;
        bool changed = false;
        for (StateId s = 0; s < n; ++s) {
            if (in_target[s] || m.is_terminal(s) || fixed[s] != npos) continue;
            if (sense == Sense::max && frozen[s]) continue;
            auto const& cs = m.choices(s);
            std::size_t best = npos;
            Rational best_q;
            for (std::size_t k = 0; k < cs.size(); ++k) {
                Rational q = detail::q_value(cs[k], v);
                if (best == npos || (sense == Sense::max ? q > best_q : q < best_q)) {
                    best = k;
                    best_q = q;
                }
            }
            if (sense == Sense::max ? best_q > v[s] : best_q < v[s]) {
                pick[s] = best;
                changed = true;
            }
        }
        if (!changed) break;
    }

    OptimalReach out{v, std::vector<std::size_t>(n, npos)};
    for (StateId s = 0; s < n; ++s) {
        if (m.is_terminal(s)) continue;
        if (fixed[s] != npos) {
            out.choice[s] = fixed[s];
            continue;
        }
        if (sense == Sense::max && v[s] > 0 && !in_target[s]) continue;  // assigned below
        auto const& cs = m.choices(s);
        for (std::size_t k = 0; k < cs.size(); ++k)
            if (detail::q_value(cs[k], v) == v[s]) {
                out.choice[s] = k;
                break;
            }
        if (out.choice[s] == npos) out.choice[s] = 0;
    }
    if (sense == Sense::max) {
        std::vector<bool> done = in_target;
        for (bool changed = true; changed;) {
            changed = false;
            for (StateId s = 0; s < n; ++s) {
                if (done[s] || m.is_terminal(s) || !(v[s] > 0)) continue;
                auto const& cs = m.choices(s);
                for (std::size_t k = 0; k < cs.size(); ++k) {
                    if (detail::q_value(cs[k], v) != v[s]) continue;
                    bool progress = std::any_of(cs[k].successors.begin(), cs[k].successors.end(),
                                                [&](Successor const& succ) { return bool(done[succ.state]); });
                    if (progress) {
                        out.choice[s] = k;
                        done[s] = true;
                        changed = true;
                        break;
                    }
                }
            }
        }
        for (StateId s = 0; s < n; ++s)
            if (!m.is_terminal(s) && out.choice[s] == npos)
                throw std::logic_error("optimal_reach: no progressing optimal choice at '" + m.state_name(s) + "'");
    }
    return out;
}

/// Expected state-action visit counts x_{s,a} and the inflow x_s of every
/// state (for terminals: the probability of ending there).
template <class S>
struct FrequencySolution {
    std::vector<S> freq;    // indexed by Mdp::state_action_index
    std::vector<S> inflow;  // indexed by state
};

/// Requires an end-component free model; the frequencies are obtained from
/// the transposed visit system rather than by simulation.
template <class S>
FrequencySolution<S> frequencies_of(Mdp const& m, BasicPolicy<S> const& x, SolverOptions const& opt = {}) {
    if (!mec_decomposition(m).empty())
        throw ModelError("model has an end component; state-action frequencies may diverge");
    auto visits = expected_visits(induced_chain(m, x), m.init(), opt);
    FrequencySolution<S> out{std::vector<S>(m.num_state_actions(), S(0)), visits};
    for (StateId s = 0; s < m.num_states(); ++s)
        for (std::size_t k = 0; k < m.choices(s).size(); ++k)
            out.freq[m.state_action_index(s, k)] = visits[s] * x(s, k);
    return out;
}

/// Inflow implied by a frequency vector through the balance equations:
/// [s = init] + sum_{(t,a)} x_{t,a} P(t,a,s).
template <class S>
std::vector<S> balance_inflow(Mdp const& m, std::vector<S> const& freq) {
    std::vector<S> in(m.num_states(), S(0));
    in[m.init()] = S(1);
    for (StateId t = 0; t < m.num_states(); ++t) {
        auto const& cs = m.choices(t);
        for (std::size_t k = 0; k < cs.size(); ++k) {
            S const& f = freq[m.state_action_index(t, k)];
            if (f == 0) continue;
            for (auto const& succ : cs[k].successors) in[succ.state] += f * probability_as<S>(succ);
        }
    }
    return in;
}

/// Recovers the MR policy x_{s,a} / x_s. States with zero inflow get the
/// uniform distribution. Frequencies violating nonnegativity or balance by
/// more than `tolerance` are rejected (exact scalars: any violation).
template <class S>
BasicPolicy<S> policy_from_frequencies(Mdp const& m, FrequencySolution<S> const& f, double tolerance = 1e-9) {
    if (f.freq.size() != m.num_state_actions()) throw ModelError("frequency vector has wrong length");
    auto tol = [&]() -> S {
        if constexpr (is_exact_v<S>) {
            return S(0);
        } else {
            return tolerance;
        }
    }();
    for (auto const& v : f.freq)
        if (v < -tol) throw ModelError("frequency vector violates nonnegativity");
    auto in = balance_inflow(m, f.freq);
    typename BasicPolicy<S>::Table t(m.num_states());
    for (StateId s = 0; s < m.num_states(); ++s) {
        auto const& cs = m.choices(s);
        if (cs.empty()) continue;
        S total = 0;
        for (std::size_t k = 0; k < cs.size(); ++k) {
            S v = f.freq[m.state_action_index(s, k)];
            if (v < 0) v = 0;
            t[s].push_back(v);
            total += v;
        }
        S gap = total - in[s];
        if (gap > tol || gap < -tol)
            throw ModelError("frequency vector violates the balance equation at '" + m.state_name(s) + "'");
        if (total > 0) {
            for (auto& v : t[s]) v /= total;
        } else {
            for (auto& v : t[s]) v = S(1) / S(static_cast<long>(cs.size()));
        }
    }
    return BasicPolicy<S>(m, std::move(t));
}

}  // namespace predq
