#pragma once

#include <predq/graph.hpp>
#include <predq/model.hpp>
#include <predq/solve.hpp>

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace predq {

namespace names {
inline constexpr char const* tp = "__TP";
inline constexpr char const* fp = "__FP";
inline constexpr char const* fn = "__FN";
inline constexpr char const* tn = "__TN";
inline constexpr char const* alpha_min = "__alpha_min";
inline constexpr char const* alpha_max = "__alpha_max";
inline constexpr char const* tau = "__tau";
inline constexpr char const* delta = "__delta";
inline constexpr char const* switch_copy = "__switch";

inline constexpr std::array<char const*, 9> reserved{tp, fp, fn, tn, alpha_min, alpha_max, tau, delta, switch_copy};
}  // namespace names

/// Throws ModelError if `m` already uses one of the reserved fresh names.
inline void check_reserved_names(Mdp const& m) {
    for (auto const* r : names::reserved) {
        if (m.find_state(r)) throw ModelError(std::string("state name '") + r + "' is reserved");
        if (m.find_action(r)) throw ModelError(std::string("action name '") + r + "' is reserved");
    }
}

// ---------------------------------------------------------------------------
// two-copy MDP
// ---------------------------------------------------------------------------

/// Product of the model with one bit recording whether C was visited. Copy-0
/// cause states have the single switch action into copy 1; copy-1 states not
/// reachable from C are pruned.
struct TwoCopyMdp {
    Mdp model;
    std::vector<StateId> original;  // per product state
    std::vector<int> copy;          // per product state: 0 or 1
    std::vector<StateId> in_copy0;  // original -> product state
    std::vector<StateId> in_copy1;  // original -> product state, npos if pruned
    StateSet c0, c1, e0, e1;
};

inline TwoCopyMdp two_copy(Mdp const& m, Query const& q) {
    if (m.find_action(names::switch_copy))
        throw ModelError(std::string("action name '") + names::switch_copy + "' is reserved");
    auto n = m.num_states();
    auto is_cause = to_mask(n, q.predictor);
    auto keep1 = to_mask(n, reachable_from(m, q.predictor));

    TwoCopyMdp out;
    MdpBuilder b;
    out.in_copy0.assign(n, npos);
    out.in_copy1.assign(n, npos);
    for (StateId s = 0; s < n; ++s) {
        out.in_copy0[s] = b.add_state(m.state_name(s) + "#0");
        out.original.push_back(s);
        out.copy.push_back(0);
    }
    for (StateId s = 0; s < n; ++s) {
        if (!keep1[s]) continue;
        out.in_copy1[s] = b.add_state(m.state_name(s) + "#1");
        out.original.push_back(s);
        out.copy.push_back(1);
    }
    for (StateId s = 0; s < n; ++s) {
        if (is_cause[s]) {
            b.add_choice(out.in_copy0[s], names::switch_copy, {{out.in_copy1[s], Rational(1)}});
        } else {
            for (auto const& c : m.choices(s)) {
                std::vector<std::pair<StateId, Rational>> d;
                for (auto const& succ : c.successors) d.emplace_back(out.in_copy0[succ.state], succ.probability);
                b.add_choice(out.in_copy0[s], m.action_name(c.action), std::move(d));
            }
        }
    }
    for (StateId s = 0; s < n; ++s) {
        if (!keep1[s]) continue;
        for (auto const& c : m.choices(s)) {
            std::vector<std::pair<StateId, Rational>> d;
            for (auto const& succ : c.successors) d.emplace_back(out.in_copy1[succ.state], succ.probability);
            b.add_choice(out.in_copy1[s], m.action_name(c.action), std::move(d));
        }
    }
    b.set_init(out.in_copy0[m.init()]);
    out.model = std::move(b).build();

    for (auto c : q.predictor) {
        out.c0.push_back(out.in_copy0[c]);
        out.c1.push_back(out.in_copy1[c]);
    }
    for (auto e : q.effect) {
        out.e0.push_back(out.in_copy0[e]);
        if (out.in_copy1[e] != npos) out.e1.push_back(out.in_copy1[e]);
    }
    out.c0 = normalize_set(out.c0);
    out.c1 = normalize_set(out.c1);
    out.e0 = normalize_set(out.e0);
    out.e1 = normalize_set(out.e1);
    return out;
}

/// A policy of the original model read as a policy of the two-copy MDP:
/// both copies mimic it, cause states of copy 0 take the switch.
template <class S>
BasicPolicy<S> lift_policy(TwoCopyMdp const& tc, BasicPolicy<S> const& x) {
    typename BasicPolicy<S>::Table t(tc.model.num_states());
    for (StateId p = 0; p < tc.model.num_states(); ++p) {
        if (tc.model.is_terminal(p)) continue;
        if (tc.copy[p] == 0 && contains(tc.c0, p)) {
            t[p] = {S(1)};
        } else {
            t[p] = x.row(tc.original[p]);
        }
    }
    return BasicPolicy<S>(tc.model, std::move(t));
}

// ---------------------------------------------------------------------------
// canonical MDP
// ---------------------------------------------------------------------------

/// Where a choice of a transformed model comes from.
struct ChoiceOrigin {
    enum class Kind { original, alpha_min, alpha_max, tau, delta };
    Kind kind;
    StateId state;       // original state (for `original`, `alpha_*`)
    std::size_t choice;  // choice index in the original state, npos otherwise
};

struct CauseSummary {
    StateId original;  // state index in the input model
    StateId state;     // state index in the canonical model
    Rational p_min;
    Rational p_max;
};

/// Canonical form of (model, query): cause states reduced to the summary
/// actions alpha_min / alpha_max, MECs collapsed with an extra tau action,
/// and all outcomes reduced to the terminals TP, FP, FN, TN. The effect of
/// the canonical query is {TP, FN}.
struct CanonicalMdp {
    Mdp model;
    StateId tp = 0, fp = 0, fn = 0, tn = 0;
    std::vector<CauseSummary> causes;  // causes reachable from init, input order
    Rational p_star = 0;               // max p_max over `causes`, 0 if none
    std::vector<std::optional<StateId>> state_map;       // input state -> canonical state
    std::vector<EndComponent> collapsed;                 // MECs after pruning, input indices
    std::vector<StateId> representative;                 // canonical state of each collapsed MEC
    StateSet pruned;                                     // input states not reachable before C
    std::vector<std::vector<ChoiceOrigin>> choice_origin;  // per canonical state/choice
    std::vector<std::string> warnings;
    // optimal MD choices for <>E in the input model, used to map policies back
    std::vector<std::size_t> min_choice, max_choice;

    StateSet cause_states() const {
        StateSet out;
        for (auto const& c : causes) out.push_back(c.state);
        return normalize_set(out);
    }
    Query query() const { return {cause_states(), normalize_set({tp, fn})}; }
};

inline CanonicalMdp canonical(Mdp const& m, Query const& q) {
    check_reserved_names(m);
    auto n = m.num_states();
    auto is_cause = to_mask(n, q.predictor);
    auto is_effect = to_mask(n, q.effect);

    CanonicalMdp out;
    auto min_reach = optimal_reach(m, q.effect, Sense::min);
    auto max_reach = optimal_reach(m, q.effect, Sense::max);
    out.min_choice = min_reach.choice;
    out.max_choice = max_reach.choice;

    // causes become alpha choices in an intermediate model over the input
    // states plus TP / FP; unreachable fragments are pruned
    std::vector<bool> reach(n, false);
    {
        std::vector<StateId> work{m.init()};
        reach[m.init()] = true;
        while (!work.empty()) {
            auto s = work.back();
            work.pop_back();
            if (is_cause[s]) continue;
            for (auto const& c : m.choices(s))
                for (auto const& succ : c.successors)
                    if (!reach[succ.state]) {
                        reach[succ.state] = true;
                        work.push_back(succ.state);
                    }
        }
    }
    MdpBuilder mid_b;
    std::vector<StateId> to_mid(n, npos);
    std::vector<StateId> from_mid;
    for (StateId s = 0; s < n; ++s) {
        if (!reach[s]) {
            out.pruned.push_back(s);
            continue;
        }
        to_mid[s] = mid_b.add_state(m.state_name(s));
        from_mid.push_back(s);
    }
    StateId mid_tp = mid_b.add_state(names::tp);
    StateId mid_fp = mid_b.add_state(names::fp);
    std::vector<std::vector<ChoiceOrigin>> mid_origin(from_mid.size());
    for (StateId s = 0; s < n; ++s) {
        if (!reach[s]) continue;
        auto ms = to_mid[s];
        if (is_cause[s]) {
            Rational lo = min_reach.values[s], hi = max_reach.values[s];
            out.causes.push_back({s, npos, lo, hi});
            auto add = [&](char const* name, Rational const& p, ChoiceOrigin::Kind kind) {
                mid_b.add_choice(ms, name, {{mid_tp, p}, {mid_fp, Rational(1 - p)}});
                mid_origin[ms].push_back({kind, s, npos});
            };
            add(names::alpha_min, lo, ChoiceOrigin::Kind::alpha_min);
            if (hi != lo) add(names::alpha_max, hi, ChoiceOrigin::Kind::alpha_max);
            continue;
        }
        auto const& cs = m.choices(s);
        for (std::size_t k = 0; k < cs.size(); ++k) {
            std::vector<std::pair<StateId, Rational>> d;
            for (auto const& succ : cs[k].successors) d.emplace_back(to_mid[succ.state], succ.probability);
            mid_b.add_choice(ms, m.action_name(cs[k].action), std::move(d));
            mid_origin[ms].push_back({ChoiceOrigin::Kind::original, s, k});
        }
    }
    mid_b.set_init(to_mid[m.init()]);
    Mdp mid = std::move(mid_b).build();

    // MEC quotient
    auto mecs = mec_decomposition(mid);
    for (auto const& mec : mecs.mecs) {
        EndComponent ec;
        for (auto s : mec.states) ec.states.push_back(from_mid[s]);
        for (auto [s, k] : mec.choices) ec.choices.emplace_back(from_mid[s], k);
        out.collapsed.push_back(std::move(ec));
    }
    auto in_mec_choice = [&](StateId ms, std::size_t k) {
        auto idx = mecs.membership[ms];
        if (!idx) return false;
        auto const& ch = mecs.mecs[*idx].choices;
        return std::find(ch.begin(), ch.end(), std::pair<StateId, std::size_t>{ms, k}) != ch.end();
    };

    // terminals collapse to FN (effect) / TN (others)
    MdpBuilder b;
    std::vector<StateId> mid_to_can(mid.num_states(), npos);
    for (StateId ms = 0; ms < from_mid.size(); ++ms) {
        auto idx = mecs.membership[ms];
        if (idx && mecs.mecs[*idx].states.front() != ms) continue;
        if (mid.is_terminal(ms)) continue;
        mid_to_can[ms] = b.add_state(m.state_name(from_mid[ms]));
    }
    out.tp = b.add_state(names::tp);
    out.fp = b.add_state(names::fp);
    out.fn = b.add_state(names::fn);
    out.tn = b.add_state(names::tn);
    mid_to_can[mid_tp] = out.tp;
    mid_to_can[mid_fp] = out.fp;
    for (StateId ms = 0; ms < from_mid.size(); ++ms) {
        if (mid.is_terminal(ms)) {
            mid_to_can[ms] = is_effect[from_mid[ms]] ? out.fn : out.tn;
        } else if (auto idx = mecs.membership[ms]) {
            mid_to_can[ms] = mid_to_can[mecs.mecs[*idx].states.front()];
        }
    }
    for (auto const& mec : mecs.mecs) out.representative.push_back(mid_to_can[mec.states.front()]);

    out.choice_origin.assign(b.num_states(), {});
    auto emit = [&](StateId can_state, std::string const& action, Choice const& c, ChoiceOrigin origin) {
        std::vector<std::pair<StateId, Rational>> d;
        for (auto const& succ : c.successors) d.emplace_back(mid_to_can[succ.state], succ.probability);
        b.add_choice(can_state, action, std::move(d));
        out.choice_origin[can_state].push_back(origin);
    };
    for (StateId ms = 0; ms < from_mid.size(); ++ms) {
        if (mid.is_terminal(ms)) continue;
        auto idx = mecs.membership[ms];
        if (idx) continue;
        auto const& cs = mid.choices(ms);
        for (std::size_t k = 0; k < cs.size(); ++k)
            emit(mid_to_can[ms], mid.action_name(cs[k].action), cs[k], mid_origin[ms][k]);
    }
    for (auto const& mec : mecs.mecs) {
        StateId rep = mid_to_can[mec.states.front()];
        for (auto ms : mec.states) {
            auto const& cs = mid.choices(ms);
            for (std::size_t k = 0; k < cs.size(); ++k) {
                if (in_mec_choice(ms, k)) continue;
                emit(rep, mid.state_name(ms) + "/" + mid.action_name(cs[k].action), cs[k], mid_origin[ms][k]);
            }
        }
        b.add_choice(rep, names::tau, {{out.tn, Rational(1)}});
        out.choice_origin[rep].push_back({ChoiceOrigin::Kind::tau, npos, npos});
    }
    b.set_init(mid_to_can[to_mid[m.init()]]);
    out.model = std::move(b).build();

    out.state_map.assign(n, std::nullopt);
    for (StateId s = 0; s < n; ++s)
        if (to_mid[s] != npos) out.state_map[s] = mid_to_can[to_mid[s]];
    for (auto& c : out.causes) {
        c.state = *out.state_map[c.original];
        if (c.p_max > out.p_star) out.p_star = c.p_max;
    }
    if (out.causes.empty()) out.warnings.emplace_back("no predictor state is reachable from init");
    if (!out.pruned.empty())
        out.warnings.emplace_back(std::to_string(out.pruned.size()) + " state(s) pruned as unreachable");
    return out;
}

// ---------------------------------------------------------------------------
// M_p / M*
// ---------------------------------------------------------------------------

/// The canonical model with every cause reduced to one action delta leading
/// to TP with probability max{p, p_min(c)}. State and choice indices of
/// non-cause states coincide with the canonical model.
struct StarMdp {
    Mdp model;
    Rational p;
    StateSet causes;
};

inline Mdp rebuild_with(Mdp const& m, std::vector<std::optional<std::vector<std::pair<std::string, std::vector<std::pair<StateId, Rational>>>>>> const& replace) {
    MdpBuilder b;
    for (StateId s = 0; s < m.num_states(); ++s) b.add_state(m.state_name(s));
    for (StateId s = 0; s < m.num_states(); ++s) {
        if (replace[s]) {
            for (auto const& [name, d] : *replace[s]) b.add_choice(s, name, d);
            continue;
        }
        for (auto const& c : m.choices(s)) {
            std::vector<std::pair<StateId, Rational>> d;
            for (auto const& succ : c.successors) d.emplace_back(succ.state, succ.probability);
            b.add_choice(s, m.action_name(c.action), std::move(d));
        }
    }
    b.set_init(m.init());
    return std::move(b).build();
}

inline StarMdp star(CanonicalMdp const& cm, Rational const& p) {
    if (!(p > 0) || p > cm.p_star)
        throw ModelError("star parameter " + to_string(p) + " outside (0, " + to_string(cm.p_star) + "]");
    std::vector<std::optional<std::vector<std::pair<std::string, std::vector<std::pair<StateId, Rational>>>>>> rep(
        cm.model.num_states());
    for (auto const& c : cm.causes) {
        Rational hit = p > c.p_min ? p : c.p_min;
        rep[c.state] = {{names::delta, {{cm.tp, hit}, {cm.fp, Rational(1 - hit)}}}};
    }
    return {rebuild_with(cm.model, rep), p, cm.cause_states()};
}

}  // namespace predq
