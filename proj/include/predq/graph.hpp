#pragma once

#include <predq/model.hpp>

#include <algorithm>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace predq {

inline std::vector<bool> to_mask(std::size_t n, StateSet const& s) {
    std::vector<bool> m(n, false);
    for (auto x : s) m.at(x) = true;
    return m;
}

inline StateSet from_mask(std::vector<bool> const& m) {
    StateSet s;
    for (StateId i = 0; i < m.size(); ++i)
        if (m[i]) s.push_back(i);
    return s;
}

/// States reachable from `sources` through positive-probability transitions
/// of any action (sources included).
inline StateSet reachable_from(Mdp const& m, StateSet const& sources) {
    std::vector<bool> seen(m.num_states(), false);
    std::deque<StateId> work;
    for (auto s : sources) {
        if (!seen.at(s)) {
            seen[s] = true;
            work.push_back(s);
        }
    }
    while (!work.empty()) {
        auto s = work.front();
        work.pop_front();
        for (auto const& c : m.choices(s))
            for (auto const& succ : c.successors)
                if (!seen[succ.state]) {
                    seen[succ.state] = true;
                    work.push_back(succ.state);
                }
    }
    return from_mask(seen);
}

/// States from which some state of `targets` is reachable in the graph.
inline StateSet can_reach(Mdp const& m, StateSet const& targets) {
    std::vector<std::vector<StateId>> pred(m.num_states());
    for (StateId s = 0; s < m.num_states(); ++s)
        for (auto const& c : m.choices(s))
            for (auto const& succ : c.successors) pred[succ.state].push_back(s);
    std::vector<bool> seen = to_mask(m.num_states(), targets);
    std::deque<StateId> work(targets.begin(), targets.end());
    while (!work.empty()) {
        auto s = work.front();
        work.pop_front();
        for (auto p : pred[s])
            if (!seen[p]) {
                seen[p] = true;
                work.push_back(p);
            }
    }
    return from_mask(seen);
}

/// A maximal end component: states plus the (state, choice index) pairs
/// that keep the play inside.
struct EndComponent {
    StateSet states;
    std::vector<std::pair<StateId, std::size_t>> choices;
};

struct MecDecomposition {
    std::vector<EndComponent> mecs;
    std::vector<std::optional<std::size_t>> membership;  // per state

    bool empty() const { return mecs.empty(); }
};

namespace detail {

// Iterative Tarjan over the subgraph given by `allowed` choices of live states.
// Returns the SCC index of every live state (npos for dead ones).
inline std::vector<std::size_t> scc_indices(Mdp const& m, std::vector<bool> const& live,
                                            std::vector<std::vector<bool>> const& allowed) {
    auto n = m.num_states();
    std::vector<std::size_t> index(n, npos), low(n, 0), comp(n, npos);
    std::vector<bool> on_stack(n, false);
    std::vector<StateId> stack;
    std::size_t counter = 0, ncomp = 0;

    struct Frame {
        StateId s;
        std::size_t choice;
        std::size_t succ;
    };
    for (StateId root = 0; root < n; ++root) {
        if (!live[root] || index[root] != npos) continue;
        std::vector<Frame> call{{root, 0, 0}};
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!call.empty()) {
            auto& f = call.back();
            auto const& cs = m.choices(f.s);
            bool descended = false;
            while (f.choice < cs.size()) {
                if (!allowed[f.s][f.choice] || f.succ >= cs[f.choice].successors.size()) {
                    ++f.choice;
                    f.succ = 0;
                    continue;
                }
                StateId t = cs[f.choice].successors[f.succ++].state;
                if (!live[t]) continue;
                if (index[t] == npos) {
                    index[t] = low[t] = counter++;
                    stack.push_back(t);
                    on_stack[t] = true;
                    call.push_back({t, 0, 0});
                    descended = true;
                    break;
                }
                if (on_stack[t]) low[f.s] = std::min(low[f.s], index[t]);
            }
            if (descended) continue;
            StateId s = f.s;
            if (low[s] == index[s]) {
                StateId t;
                do {
                    t = stack.back();
                    stack.pop_back();
                    on_stack[t] = false;
                    comp[t] = ncomp;
                } while (t != s);
                ++ncomp;
            }
            call.pop_back();
            if (!call.empty()) low[call.back().s] = std::min(low[call.back().s], low[s]);
        }
    }
    return comp;
}

}  // namespace detail

/// Maximal end components by iterated SCC pruning. MECs are ordered by
/// their smallest state index.
inline MecDecomposition mec_decomposition(Mdp const& m) {
    auto n = m.num_states();
    std::vector<bool> live(n);
    std::vector<std::vector<bool>> allowed(n);
    for (StateId s = 0; s < n; ++s) {
        allowed[s].assign(m.choices(s).size(), true);
        live[s] = !m.is_terminal(s);
    }

    std::vector<std::size_t> comp;
    for (bool changed = true; changed;) {
        changed = false;
        comp = detail::scc_indices(m, live, allowed);
        for (StateId s = 0; s < n; ++s) {
            if (!live[s]) continue;
            auto const& cs = m.choices(s);
            bool any = false;
            for (std::size_t k = 0; k < cs.size(); ++k) {
                if (!allowed[s][k]) continue;
                for (auto const& succ : cs[k].successors) {
                    if (!live[succ.state] || comp[succ.state] != comp[s]) {
                        allowed[s][k] = false;
                        changed = true;
                        break;
                    }
                }
                any = any || allowed[s][k];
            }
            if (!any) {
                live[s] = false;
                changed = true;
            }
        }
    }

    MecDecomposition out;
    out.membership.assign(n, std::nullopt);
    std::vector<std::size_t> comp_to_mec(n, npos);
    for (StateId s = 0; s < n; ++s) {
        if (!live[s]) continue;
        auto c = comp[s];
        if (comp_to_mec[c] == npos) {
            comp_to_mec[c] = out.mecs.size();
            out.mecs.emplace_back();
        }
        auto& mec = out.mecs[comp_to_mec[c]];
        mec.states.push_back(s);
        out.membership[s] = comp_to_mec[c];
        for (std::size_t k = 0; k < m.choices(s).size(); ++k)
            if (allowed[s][k]) mec.choices.emplace_back(s, k);
    }
    return out;
}

/// States from which `target` cannot be reached in the Markov chain induced
/// by the support of `policy` (choices with strictly positive probability).
template <class S>
StateSet zero_states(Mdp const& m, BasicPolicy<S> const& policy, StateSet const& target) {
    auto n = m.num_states();
    std::vector<std::vector<StateId>> pred(n);
    for (StateId s = 0; s < n; ++s) {
        auto const& cs = m.choices(s);
        for (std::size_t k = 0; k < cs.size(); ++k) {
            if (!(policy(s, k) > 0)) continue;
            for (auto const& succ : cs[k].successors) pred[succ.state].push_back(s);
        }
    }
    std::vector<bool> reach = to_mask(n, target);
    std::deque<StateId> work(target.begin(), target.end());
    while (!work.empty()) {
        auto s = work.front();
        work.pop_front();
        for (auto p : pred[s])
            if (!reach[p]) {
                reach[p] = true;
                work.push_back(p);
            }
    }
    StateSet out;
    for (StateId s = 0; s < n; ++s)
        if (!reach[s]) out.push_back(s);
    return out;
}

struct Diagnostic {
    enum class Severity { warning, error };
    Severity severity;
    std::string message;
};

/// Warnings about the model itself: states unreachable from init and
/// end components (which trap probability mass under some policies).
inline std::vector<Diagnostic> model_diagnostics(Mdp const& m) {
    std::vector<Diagnostic> out;
    auto reach = to_mask(m.num_states(), reachable_from(m, {m.init()}));
    for (StateId s = 0; s < m.num_states(); ++s)
        if (!reach[s])
            out.push_back({Diagnostic::Severity::warning, "state '" + m.state_name(s) + "' unreachable from init"});
    auto mecs = mec_decomposition(m);
    for (auto const& mec : mecs.mecs) {
        std::string names;
        for (auto s : mec.states) names += (names.empty() ? "" : ",") + m.state_name(s);
        out.push_back({Diagnostic::Severity::warning, "end component {" + names + "}"});
    }
    return out;
}

}  // namespace predq
