#pragma once

#include <predq/estimate.hpp>
#include <predq/graph.hpp>
#include <predq/quality.hpp>
#include <predq/solve.hpp>
#include <predq/transform.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace predq {

inline void require_valid(Mdp const& m, Query const& q) {
    auto diag = validate_query(m, q);
    if (diag.empty()) return;
    std::string msg = diag.front();
    for (std::size_t i = 1; i < diag.size(); ++i) msg += "; " + diag[i];
    throw ModelError(msg);
}

// ---------------------------------------------------------------------------
// exact witness verification
// ---------------------------------------------------------------------------

struct WitnessCheck {
    bool holds = false;
    std::string reason;
    PrEvaluation<Rational> evidence;
};

inline WitnessCheck judge(PrEvaluation<Rational> e, PrMode mode, Mdp const& m) {
    WitnessCheck out{false, {}, std::move(e)};
    auto const& ev = out.evidence;
    if (!ev.reach()) {
        out.reason = "(R) fails: Pr(<>C) = 0";
        return out;
    }
    if (mode == PrMode::gpr) {
        if (!(ev.gpr_gap > 0)) {
            out.reason = "(G) fails: tp*tn - fp*fn = " + to_string(ev.gpr_gap);
            return out;
        }
    } else {
        for (auto const& c : ev.causes) {
            if (c.first_visit > 0 && !(c.conditional > ev.reach_effect)) {
                out.reason = "(S) fails at '" + m.state_name(c.cause) + "': " + to_string(c.conditional) +
                             " <= " + to_string(ev.reach_effect);
                return out;
            }
        }
    }
    out.holds = true;
    out.reason = "ok";
    return out;
}

/// Evaluates (R) and (S) or (G) for an MR policy of `m` in exact arithmetic.
inline WitnessCheck verify_witness(Mdp const& m, Query const& q, ExactPolicy const& x, PrMode mode) {
    require_valid(m, q);
    return judge(ConfusionEvaluator(m, q).evaluate(x), mode, m);
}

// ---------------------------------------------------------------------------
// finite-memory policies of the input model
// ---------------------------------------------------------------------------

/// Randomized policy with finite memory. In state s with memory mem the
/// policy draws one of moves[mem][s]: it takes `choice` and continues with
/// memory `next`. Memory 0 ("pre") is initial and means C was not visited
/// yet. Combinations that cannot occur are left empty.
struct MemoryPolicy {
    struct Move {
        std::size_t choice;
        std::size_t next;
        Rational probability;
    };
    std::vector<std::string> memories;
    std::vector<std::vector<std::vector<Move>>> moves;  // [memory][state]
};

/// Evaluates a memory policy on the product of model and memory. The first
/// visit to a cause is the visit of (c, pre).
inline PrEvaluation<Rational> evaluate_memory_policy(Mdp const& m, Query const& q, MemoryPolicy const& p) {
    auto n = m.num_states();
    auto nm = p.memories.size();
    SparseRows<Rational> rows(n * nm);
    for (std::size_t mem = 0; mem < nm; ++mem) {
        for (StateId s = 0; s < n; ++s) {
            if (m.is_terminal(s)) continue;
            auto& row = rows[mem * n + s];
            Rational total = 0;
            for (auto const& mv : p.moves[mem][s]) {
                total += mv.probability;
                for (auto const& succ : m.choices(s).at(mv.choice).successors) {
                    auto t = mv.next * n + succ.state;
                    Rational v = mv.probability * succ.probability;
                    auto it = std::find_if(row.begin(), row.end(), [&](auto const& e) { return e.first == t; });
                    if (it == row.end()) {
                        row.emplace_back(t, v);
                    } else {
                        it->second += v;
                    }
                }
            }
            if (!p.moves[mem][s].empty() && total != 1)
                throw ModelError("memory policy row (" + p.memories[mem] + ", " + m.state_name(s) + ") sums to " +
                                 to_string(total));
        }
    }
    StateId start = m.init();
    auto reach = detail::chain_forward(rows, start);
    for (std::size_t mem = 0; mem < nm; ++mem)
        for (StateId s = 0; s < n; ++s)
            if (reach[mem * n + s] && !m.is_terminal(s) && rows[mem * n + s].empty())
                throw std::logic_error("memory policy undefined at reachable (" + p.memories[mem] + ", " +
                                       m.state_name(s) + ")");

    auto visits = expected_visits(rows, start);
    StateSet effect_all;
    for (std::size_t mem = 0; mem < nm; ++mem)
        for (auto e : q.effect) effect_all.push_back(mem * n + e);
    auto to_effect = reach_in_chain(rows, normalize_set(effect_all));

    PrEvaluation<Rational> out;
    auto& cm = out.confusion;
    for (auto e : q.effect) {
        cm.fn += visits[e];
        for (std::size_t mem = 1; mem < nm; ++mem) cm.tp += visits[mem * n + e];
    }
    Rational c0 = 0;
    for (auto c : q.predictor) {
        c0 += visits[c];
        out.causes.push_back({c, visits[c], to_effect[c]});
    }
    cm.fp = c0 - cm.tp;
    cm.tn = 1 - cm.tp - cm.fp - cm.fn;
    out.reach_predictor = c0;
    out.reach_effect = cm.tp + cm.fn;
    out.gpr_gap = cm.tp * cm.tn - cm.fp * cm.fn;
    return out;
}

/// Policy of the input model corresponding to a policy `w` of the canonical
/// MDP. Before C it mimics `w`; at the first cause it draws between the
/// maximizing and minimizing continuation with the weights of alpha_max and
/// alpha_min. A collapsed end component first draws one of the quotient's
/// choices, walks inside the component to the state owning it and takes it
/// there; tau becomes staying inside forever.
inline MemoryPolicy lift_to_original(Mdp const& m, Query const& q, CanonicalMdp const& cm, ExactPolicy const& w) {
    auto n = m.num_states();
    auto is_cause = to_mask(n, q.predictor);
    MemoryPolicy p;
    p.memories = {"pre", "max", "min"};
    std::size_t stay = npos;
    if (!cm.collapsed.empty()) {
        stay = p.memories.size();
        p.memories.emplace_back("stay");
    }

    std::vector<std::size_t> mec_of(n, npos);
    for (std::size_t i = 0; i < cm.collapsed.size(); ++i)
        for (auto s : cm.collapsed[i].states) mec_of[s] = i;

    // first internal choice per MEC state, and per (MEC, target) an
    // attractor choice leading towards the target inside the MEC
    std::vector<std::size_t> internal(n, npos);
    for (auto const& ec : cm.collapsed)
        for (auto [s, k] : ec.choices)
            if (internal[s] == npos) internal[s] = k;
    auto attractor = [&](EndComponent const& ec, StateId target) {
        std::map<StateId, std::size_t> pick;
        std::vector<bool> done(n, false);
        done[target] = true;
        for (bool changed = true; changed;) {
            changed = false;
            for (auto [s, k] : ec.choices) {
                if (done[s]) continue;
                auto const& succ = m.choices(s)[k].successors;
                if (std::any_of(succ.begin(), succ.end(), [&](Successor const& x) { return bool(done[x.state]); })) {
                    pick[s] = k;
                    done[s] = true;
                    changed = true;
                }
            }
        }
        return pick;
    };

    struct Route {
        std::size_t mec;
        StateId owner;
        std::size_t choice;
        std::map<StateId, std::size_t> towards;
    };
    std::vector<Route> routes;
    std::map<std::pair<StateId, std::size_t>, std::size_t> route_memory;

    p.moves.assign(p.memories.size(), std::vector<std::vector<MemoryPolicy::Move>>(n));
    for (StateId s = 0; s < n; ++s) {
        auto const& cs = m.choices(s);
        if (cs.empty()) continue;
        p.moves[1][s] = {{cm.max_choice[s], 1, Rational(1)}};
        p.moves[2][s] = {{cm.min_choice[s], 2, Rational(1)}};
        if (!cm.state_map[s]) {
            // pruned: not reachable before C
            for (std::size_t k = 0; k < cs.size(); ++k)
                p.moves[0][s].push_back({k, 0, Rational(1, static_cast<unsigned long>(cs.size()))});
            continue;
        }
        StateId c = *cm.state_map[s];
        auto const& row = w.row(c);
        if (is_cause[s]) {
            if (row.size() == 2) {
                if (row[1] > 0) p.moves[0][s].push_back({cm.max_choice[s], 1, row[1]});
                if (row[0] > 0) p.moves[0][s].push_back({cm.min_choice[s], 2, row[0]});
            } else {
                p.moves[0][s].push_back({cm.min_choice[s], 2, Rational(1)});
            }
            continue;
        }
        auto const& origin = cm.choice_origin[c];
        if (mec_of[s] == npos) {
            for (std::size_t j = 0; j < origin.size(); ++j)
                if (row[j] > 0) p.moves[0][s].push_back({origin[j].choice, 0, row[j]});
            continue;
        }
        auto i = mec_of[s];
        for (std::size_t j = 0; j < origin.size(); ++j) {
            if (!(row[j] > 0)) continue;
            if (origin[j].kind == ChoiceOrigin::Kind::tau) {
                p.moves[0][s].push_back({internal[s], stay, row[j]});
            } else if (origin[j].state == s) {
                p.moves[0][s].push_back({origin[j].choice, 0, row[j]});
            } else {
                auto key = std::make_pair(origin[j].state, origin[j].choice);
                auto it = route_memory.find(key);
                if (it == route_memory.end()) {
                    it = route_memory.emplace(key, p.memories.size()).first;
                    p.memories.push_back("route:" + m.state_name(key.first) + "/" +
                                         m.action_name(m.choices(key.first)[key.second].action));
                    routes.push_back({i, key.first, key.second, attractor(cm.collapsed[i], key.first)});
                    p.moves.emplace_back(n);
                }
                p.moves[0][s].push_back({routes[it->second - (p.memories.size() - routes.size())].towards.at(s), it->second,
                                  row[j]});
            }
        }
    }
    if (stay != npos)
        for (auto const& ec : cm.collapsed)
            for (auto s : ec.states) p.moves[stay][s] = {{internal[s], stay, Rational(1)}};
    std::size_t first_route = p.memories.size() - routes.size();
    for (std::size_t r = 0; r < routes.size(); ++r) {
        auto mem = first_route + r;
        for (auto s : cm.collapsed[routes[r].mec].states) {
            if (s == routes[r].owner) {
                p.moves[mem][s] = {{routes[r].choice, 0, Rational(1)}};
            } else {
                p.moves[mem][s] = {{routes[r].towards.at(s), mem, Rational(1)}};
            }
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// SPR
// ---------------------------------------------------------------------------

struct SprVerdict {
    bool exists = false;
    std::string reason;
    Rational p_star = 0;
    Rational min_value = 0;             // Pr^min of <>{TP,FN} in M*
    std::optional<Rational> threshold;  // threshold p that admitted a witness
    std::optional<Rational> threshold_min_value;
    CanonicalMdp canonical;
    std::optional<ExactPolicy> witness;  // on the canonical MDP
    std::optional<Rational> epsilon;
    std::optional<PrEvaluation<Rational>> certificate;  // witness on the canonical MDP
    std::optional<MemoryPolicy> original_witness;
    std::optional<PrEvaluation<Rational>> original_certificate;
    bool original_verified = false;
    std::vector<std::string> notes;
};

namespace detail {

// Sub-MDP that never visits `forbidden`: choices that may lead to an
// unsafe state are removed, states without remaining choices become unsafe.
// Unsafe states keep their choices (they are unreachable from safe ones).
struct Avoiding {
    Mdp model;
    std::vector<bool> safe;
    std::vector<std::vector<std::size_t>> parent_choice;  // per state: kept choice -> parent index
};

inline Avoiding avoid(Mdp const& m, std::vector<bool> const& forbidden) {
    auto n = m.num_states();
    std::vector<bool> unsafe = forbidden;
    auto choice_ok = [&](Choice const& c) {
        return std::none_of(c.successors.begin(), c.successors.end(),
                            [&](Successor const& s) { return bool(unsafe[s.state]); });
    };
    for (bool changed = true; changed;) {
        changed = false;
        for (StateId s = 0; s < n; ++s) {
            if (unsafe[s] || m.is_terminal(s)) continue;
            auto const& cs = m.choices(s);
            if (std::none_of(cs.begin(), cs.end(), choice_ok)) {
                unsafe[s] = true;
                changed = true;
            }
        }
    }
    Avoiding out;
    out.safe.resize(n);
    out.parent_choice.resize(n);
    MdpBuilder b;
    for (StateId s = 0; s < n; ++s) b.add_state(m.state_name(s));
    for (StateId s = 0; s < n; ++s) {
        out.safe[s] = !unsafe[s];
        auto const& cs = m.choices(s);
        for (std::size_t k = 0; k < cs.size(); ++k) {
            if (!unsafe[s] && !choice_ok(cs[k])) continue;
            std::vector<std::pair<StateId, Rational>> d;
            for (auto const& succ : cs[k].successors) d.emplace_back(succ.state, succ.probability);
            b.add_choice(s, m.action_name(cs[k].action), std::move(d));
            out.parent_choice[s].push_back(k);
        }
    }
    b.set_init(m.init());
    out.model = std::move(b).build();
    return out;
}

inline ExactPolicy mix(Mdp const& m, ExactPolicy const& a, ExactPolicy const& b, Rational const& eps) {
    ExactPolicy::Table t(m.num_states());
    for (StateId s = 0; s < m.num_states(); ++s)
        for (std::size_t k = 0; k < a.row(s).size(); ++k) t[s].push_back(eps * a(s, k) + (1 - eps) * b(s, k));
    return ExactPolicy(m, std::move(t));
}

inline void attach_original(SprVerdict& v, Mdp const& m, Query const& q, PrMode mode) {
    if (!v.witness) return;
    v.original_witness = lift_to_original(m, q, v.canonical, *v.witness);
    v.original_certificate = evaluate_memory_policy(m, q, *v.original_witness);
    v.original_verified = judge(*v.original_certificate, mode, m).holds;
    if (!v.canonical.collapsed.empty())
        v.notes.emplace_back("witness mapped back through collapsed end components");
}

}  // namespace detail

/// Existence of a strict probability-raising policy. For each candidate
/// threshold p (the distinct values p_max(c) > 0, largest first) the causes
/// with p_max(c) < p are made unreachable and the minimal probability of
/// {TP, FN} in M_p is compared with p; a cause that can still be reached is
/// required for (R). With p = p* and no forbidden cause this is the plain
/// M* test; the sweep is needed because a cause whose p_max lies below p*
/// cannot realize p* and must be avoided.
inline SprVerdict check_spr(Mdp const& m, Query const& q) {
    require_valid(m, q);
    SprVerdict v;
    v.canonical = canonical(m, q);
    auto const& cm = v.canonical;
    auto const& model = cm.model;
    v.p_star = cm.p_star;
    StateSet effect = normalize_set({cm.tp, cm.fn});

    if (cm.causes.empty()) {
        v.reason = "(R) unsatisfiable: no state of C is reachable";
        v.min_value = optimal_reach(model, effect, Sense::min).values[model.init()];
        return v;
    }
    if (cm.p_star == 0) {
        v.reason = "p* = 0: no cause can raise the effect probability";
        v.min_value = optimal_reach(model, effect, Sense::min).values[model.init()];
        return v;
    }
    v.min_value = optimal_reach(star(cm, cm.p_star).model, effect, Sense::min).values[model.init()];

    std::vector<Rational> thresholds;
    for (auto const& c : cm.causes)
        if (c.p_max > 0) thresholds.push_back(c.p_max);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    for (auto const& t : thresholds) {
        auto mp = star(cm, t);
        std::vector<bool> forbidden(model.num_states(), false);
        for (auto const& c : cm.causes)
            if (c.p_max < t) forbidden[c.state] = true;
        auto sub = detail::avoid(mp.model, forbidden);
        if (!sub.safe[model.init()]) continue;
        auto reach = to_mask(model.num_states(), reachable_from(sub.model, {model.init()}));
        bool cause_reachable = std::any_of(cm.causes.begin(), cm.causes.end(), [&](CauseSummary const& c) {
            return !forbidden[c.state] && reach[c.state];
        });
        if (!cause_reachable) continue;
        auto opt = optimal_reach(sub.model, effect, Sense::min);
        auto value = opt.values[model.init()];
        if (!(value < t)) continue;

        v.exists = true;
        v.threshold = t;
        v.threshold_min_value = value;
        v.reason = "Pr^min(<>E') = " + to_string(value) + " < " + to_string(t);

        // base policy from the minimizing MD policy; uniform fallback over safe choices
        ExactPolicy::Table base(model.num_states()), unif(model.num_states());
        Rational gap = 1;
        for (StateId s = 0; s < model.num_states(); ++s) {
            auto k = model.choices(s).size();
            if (k == 0) continue;
            base[s].assign(k, Rational(0));
            unif[s].assign(k, Rational(0));
            auto cause = std::find_if(cm.causes.begin(), cm.causes.end(),
                                      [&](CauseSummary const& c) { return c.state == s; });
            if (cause != cm.causes.end()) {
                if (forbidden[s]) {
                    base[s][0] = unif[s][0] = 1;
                    continue;
                }
                Rational target = t > cause->p_min ? t : cause->p_min;
                if (gap > target - value) gap = target - value;
                if (k == 1) {
                    base[s][0] = unif[s][0] = 1;
                } else {
                    Rational lambda = (target - cause->p_min) / (cause->p_max - cause->p_min);
                    base[s][1] = lambda;
                    base[s][0] = 1 - lambda;
                    unif[s][1] = 1;
                }
                continue;
            }
            auto const& kept = sub.parent_choice[s];
            base[s][kept[opt.choice[s]]] = 1;
            for (auto j : kept) unif[s][j] = Rational(1, static_cast<unsigned long>(kept.size()));
        }
        ExactPolicy base_policy(model, std::move(base)), uniform(model, std::move(unif));

        ConfusionEvaluator eval(model, cm.query());
        Rational eps = gap / (1 + gap) / 2;
        if (eps > Rational(1, 2)) eps = Rational(1, 2);
        for (int attempt = 0; attempt < 200; ++attempt, eps /= 2) {
            auto x = detail::mix(model, uniform, base_policy, eps);
            auto e = eval.evaluate(x);
            if (e.spr()) {
                if (attempt > 0) v.notes.push_back("mixing weight halved " + std::to_string(attempt) + " time(s)");
                v.witness = std::move(x);
                v.epsilon = eps;
                v.certificate = std::move(e);
                break;
            }
        }
        if (!v.witness) throw std::logic_error("check_spr: no mixing weight yields a witness");
        detail::attach_original(v, m, q, PrMode::spr);
        return v;
    }
    v.reason = "Pr^min(<>E') >= p for every threshold p";
    return v;
}

/// Single-cause test: only alpha_max is kept at the cause and the answer is
/// yes iff p_max(c) exceeds the minimal probability of {TP, FN}.
inline SprVerdict check_spr_singleton(Mdp const& m, Query const& q) {
    if (q.predictor.size() != 1) throw std::invalid_argument("check_spr_singleton needs |C| = 1");
    require_valid(m, q);
    SprVerdict v;
    v.canonical = canonical(m, q);
    auto const& cm = v.canonical;
    v.p_star = cm.p_star;
    StateSet effect = normalize_set({cm.tp, cm.fn});
    if (cm.causes.empty()) {
        v.reason = "(R) unsatisfiable: no state of C is reachable";
        return v;
    }
    auto const& c = cm.causes.front();
    std::vector<std::optional<std::vector<std::pair<std::string, std::vector<std::pair<StateId, Rational>>>>>> rep(
        cm.model.num_states());
    rep[c.state] = {{c.p_max == c.p_min ? names::alpha_min : names::alpha_max,
                     {{cm.tp, c.p_max}, {cm.fp, Rational(1 - c.p_max)}}}};
    auto n = rebuild_with(cm.model, rep);
    v.min_value = optimal_reach(n, effect, Sense::min).values[n.init()];
    v.exists = c.p_max > v.min_value;
    v.threshold = c.p_max;
    v.threshold_min_value = v.min_value;
    v.reason = to_string(c.p_max) + (v.exists ? " > " : " <= ") + to_string(v.min_value);
    return v;
}

// ---------------------------------------------------------------------------
// GPR
// ---------------------------------------------------------------------------

enum class Exactness { oracle_complete, heuristic };

inline char const* exactness_name(Exactness e) {
    return e == Exactness::oracle_complete ? "oracle-complete" : "heuristic";
}

struct GprOptions {
    std::size_t starts = 8;
    std::size_t enumeration_cap = 16;
    std::size_t max_iterations = 500;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct GprTrace {
    std::size_t starts = 0;
    std::size_t md_policies = 0;
    std::size_t candidates = 0;  // float-positive points sent to exact verification
    double best_f = -1.0;
    std::string found_by;
};

struct GprVerdict {
    bool found = false;
    Exactness exactness = Exactness::heuristic;
    std::string reason;
    CanonicalMdp canonical;
    std::optional<std::vector<Rational>> frequencies;  // of the witness, canonical state-action order
    std::optional<ExactPolicy> witness;                // on the canonical MDP
    std::optional<PrEvaluation<Rational>> certificate;
    std::optional<MemoryPolicy> original_witness;
    std::optional<PrEvaluation<Rational>> original_certificate;
    bool original_verified = false;
    GprTrace trace;
    std::vector<std::string> notes;
};

namespace detail {

// f(x) = x_TP x_TN - x_FP x_FN over the state-action frequencies of an
// EC-free canonical model, with projected gradient ascent on the balance,
// nonnegativity and normalization constraints.
class FrequencyAscent {
   public:
    explicit FrequencyAscent(CanonicalMdp const& cm) : m_(cm.model) {
        auto const& m = m_;
        dim_ = m.num_state_actions();
        for (StateId s = 0; s < m.num_states(); ++s)
            if (!m.is_terminal(s)) rows_.push_back(s);
        a_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows_.size()), static_cast<Eigen::Index>(dim_));
        std::vector<std::size_t> row_of(m.num_states(), npos);
        for (std::size_t r = 0; r < rows_.size(); ++r) row_of[rows_[r]] = r;
        for (auto& v : to_) v.assign(dim_, 0.0);
        StateId term[4] = {cm.tp, cm.fp, cm.fn, cm.tn};
        for (StateId s = 0; s < m.num_states(); ++s) {
            auto const& cs = m.choices(s);
            for (std::size_t k = 0; k < cs.size(); ++k) {
                auto j = static_cast<Eigen::Index>(m.state_action_index(s, k));
                a_(static_cast<Eigen::Index>(row_of[s]), j) += 1.0;
                for (auto const& succ : cs[k].successors) {
                    if (row_of[succ.state] != npos) a_(static_cast<Eigen::Index>(row_of[succ.state]), j) -= succ.approx;
                    for (int i = 0; i < 4; ++i)
                        if (succ.state == term[i]) to_[i][static_cast<std::size_t>(j)] += succ.approx;
                }
            }
        }
    }

    std::array<double, 4> terminals(std::vector<double> const& x) const {
        std::array<double, 4> t{};
        for (int i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < dim_; ++j) t[i] += to_[i][j] * x[j];
        return t;
    }

    double f(std::vector<double> const& x) const {
        auto t = terminals(x);
        return t[0] * t[3] - t[1] * t[2];
    }

    std::vector<double> gradient(std::vector<double> const& x) const {
        auto t = terminals(x);
        std::vector<double> g(dim_);
        for (std::size_t j = 0; j < dim_; ++j)
            g[j] = t[3] * to_[0][j] + t[0] * to_[3][j] - t[2] * to_[1][j] - t[1] * to_[2][j];
        return g;
    }

    // projection of g onto {d : A d = 0, d_i = 0 for fixed i}
    std::vector<double> project(std::vector<double> const& g, std::vector<bool> const& fixed) const {
        std::vector<Eigen::Index> freeidx;
        for (std::size_t j = 0; j < dim_; ++j)
            if (!fixed[j]) freeidx.push_back(static_cast<Eigen::Index>(j));
        std::vector<double> d(dim_, 0.0);
        if (freeidx.empty()) return d;
        Eigen::MatrixXd af(a_.rows(), static_cast<Eigen::Index>(freeidx.size()));
        Eigen::VectorXd gf(static_cast<Eigen::Index>(freeidx.size()));
        for (std::size_t i = 0; i < freeidx.size(); ++i) {
            af.col(static_cast<Eigen::Index>(i)) = a_.col(freeidx[i]);
            gf(static_cast<Eigen::Index>(i)) = g[static_cast<std::size_t>(freeidx[i])];
        }
        Eigen::MatrixXd at = af.transpose();
        Eigen::VectorXd y = at.completeOrthogonalDecomposition().solve(gf);
        Eigen::VectorXd df = gf - at * y;
        for (std::size_t i = 0; i < freeidx.size(); ++i)
            d[static_cast<std::size_t>(freeidx[i])] = df(static_cast<Eigen::Index>(i));
        return d;
    }

    /// Ascent from a feasible point; returns the final point.
    std::vector<double> ascend(std::vector<double> x, std::size_t max_iterations) const {
        double fx = f(x);
        for (std::size_t it = 0; it < max_iterations && fx <= 1e-9; ++it) {
            auto g = gradient(x);
            std::vector<bool> fixed(dim_, false);
            std::vector<double> d;
            for (;;) {
                d = project(g, fixed);
                bool grew = false;
                for (std::size_t j = 0; j < dim_; ++j)
                    if (!fixed[j] && x[j] <= 1e-14 && d[j] < 0) {
                        fixed[j] = true;
                        grew = true;
                    }
                if (!grew) break;
            }
            double norm = 0.0;
            for (auto v : d) norm = std::max(norm, std::abs(v));
            if (norm < 1e-15) break;
            double limit = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < dim_; ++j)
                if (d[j] < 0) limit = std::min(limit, x[j] / -d[j]);
            bool moved = false;
            for (double step = 1.0; step >= 1e-12; step /= 2) {
                double s = std::min(step, limit);
                std::vector<double> y(dim_);
                for (std::size_t j = 0; j < dim_; ++j) y[j] = std::max(0.0, x[j] + s * d[j]);
                double fy = f(y);
                if (fy > fx) {
                    x = std::move(y);
                    fx = fy;
                    moved = true;
                    break;
                }
            }
            if (!moved) break;
        }
        return x;
    }

    std::vector<double> frequencies(FloatPolicy const& x) const { return frequencies_of(m_, x).freq; }

    std::size_t dimension() const { return dim_; }

   private:
    Mdp const& m_;
    std::size_t dim_ = 0;
    std::vector<StateId> rows_;
    Eigen::MatrixXd a_;
    std::array<std::vector<double>, 4> to_;  // inflow of TP, FP, FN, TN per frequency
};

}  // namespace detail

/// Searches for a global probability-raising policy. One cause: decided
/// exactly through check_spr. Otherwise a sound search over the frequency
/// polytope of the canonical MDP; only exactly verified points count, and
/// a miss is reported as heuristic.
inline GprVerdict check_gpr(Mdp const& m, Query const& q, GprOptions const& opt = {}) {
    require_valid(m, q);
    GprVerdict v;
    if (q.predictor.size() == 1) {
        auto spr = check_spr(m, q);
        v.canonical = std::move(spr.canonical);
        v.exactness = Exactness::oracle_complete;
        v.trace.found_by = "singleton";
        if (!spr.exists) {
            v.reason = "no SPR policy for a single cause: " + spr.reason;
            return v;
        }
        auto check = judge(*spr.certificate, PrMode::gpr, v.canonical.model);
        if (!check.holds) throw std::logic_error("check_gpr: SPR witness of a single cause is not GPR");
        v.found = true;
        v.reason = "single cause with an SPR witness";
        v.witness = spr.witness;
        v.certificate = spr.certificate;
        v.frequencies = frequencies_of(v.canonical.model, *v.witness).freq;
        v.original_witness = spr.original_witness;
        v.original_certificate = spr.original_certificate;
        if (v.original_certificate) v.original_verified = judge(*v.original_certificate, PrMode::gpr, m).holds;
        v.notes = spr.notes;
        return v;
    }

    v.canonical = canonical(m, q);
    auto const& cm = v.canonical;
    if (cm.causes.empty()) {
        v.exactness = Exactness::oracle_complete;
        v.reason = "(R) unsatisfiable: no state of C is reachable";
        return v;
    }
    if (cm.p_star == 0) {
        v.exactness = Exactness::oracle_complete;
        v.reason = "p* = 0: tp is 0 under every policy";
        return v;
    }

    auto const& model = cm.model;
    detail::FrequencyAscent ascent(cm);
    ConfusionEvaluator eval(model, cm.query());

    auto try_point = [&](std::vector<double> const& freq, std::string const& label) {
        double fx = ascent.f(freq);
        v.trace.best_f = std::max(v.trace.best_f, fx);
        if (!(fx > 0)) return false;
        ++v.trace.candidates;
        FloatPolicy fp;
        try {
            fp = policy_from_frequencies(model, FrequencySolution<double>{freq, {}}, 1e-7);
        } catch (ModelError const&) {
            return false;
        }
        auto x = to_exact(model, fp);
        auto e = eval.evaluate(x);
        if (!e.gpr()) return false;
        v.found = true;
        v.trace.found_by = label;
        v.frequencies = frequencies_of(model, x).freq;
        v.witness = std::move(x);
        v.certificate = std::move(e);
        return true;
    };
    auto search_from = [&](FloatPolicy const& x, std::string const& label) {
        auto freq = ascent.frequencies(x);
        if (try_point(freq, label)) return true;
        return try_point(ascent.ascend(freq, opt.max_iterations), label + "+ascent");
    };

    bool done = search_from(uniform_policy<double>(model), "uniform");

    if (!done && opt.starts > 0) {
        // starts are ascended in parallel and verified in index order
        auto spec = polytope(model);
        std::vector<std::vector<double>> start_points(opt.starts), end_points(opt.starts);
        for (std::size_t i = 0; i < opt.starts; ++i) {
            std::seed_seq seq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32),
                              static_cast<std::uint32_t>(i), 0x67707275u};
            std::mt19937_64 rng(seq);
            start_points[i] = ascent.frequencies(sample_policy(model, spec, rng));
        }
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i; (i = next.fetch_add(1)) < opt.starts;)
                end_points[i] = ascent.ascend(start_points[i], opt.max_iterations);
        };
        std::vector<std::thread> pool;
        for (unsigned t = 1; t < std::max(1u, opt.threads); ++t) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();
        for (std::size_t i = 0; i < opt.starts && !done; ++i) {
            ++v.trace.starts;
            done = try_point(start_points[i], "start " + std::to_string(i)) ||
                   try_point(end_points[i], "start " + std::to_string(i) + "+ascent");
        }
    }

    if (!done && model.num_state_actions() <= opt.enumeration_cap) {
        // all MD policies; ascent from every vertex when there are few,
        // otherwise from the 64 best
        std::vector<std::size_t> pick(model.num_states(), 0);
        std::vector<std::pair<double, std::vector<double>>> vertices;
        for (bool more = true; more && !done;) {
            ++v.trace.md_policies;
            auto x = deterministic_policy<double>(model, pick);
            auto freq = ascent.frequencies(x);
            done = try_point(freq, "MD policy");
            vertices.emplace_back(ascent.f(freq), std::move(freq));
            more = false;
            for (StateId s = 0; s < model.num_states(); ++s) {
                auto k = model.choices(s).size();
                if (k <= 1) continue;
                if (++pick[s] < k) {
                    more = true;
                    break;
                }
                pick[s] = 0;
            }
        }
        if (!done) {
            std::stable_sort(vertices.begin(), vertices.end(),
                             [](auto const& a, auto const& b) { return a.first > b.first; });
            if (vertices.size() > 1024) vertices.resize(64);
            for (auto const& [fx, freq] : vertices) {
                if (try_point(ascent.ascend(freq, opt.max_iterations), "MD policy+ascent")) {
                    done = true;
                    break;
                }
            }
        }
    }

    if (v.found) {
        v.exactness = Exactness::oracle_complete;
        v.reason = "verified witness: tp*tn - fp*fn = " + to_string(v.certificate->gpr_gap) + " > 0";
        v.original_witness = lift_to_original(m, q, cm, *v.witness);
        v.original_certificate = evaluate_memory_policy(m, q, *v.original_witness);
        v.original_verified = judge(*v.original_certificate, PrMode::gpr, m).holds;
        if (!cm.collapsed.empty()) v.notes.emplace_back("witness mapped back through collapsed end components");
    } else {
        v.exactness = Exactness::heuristic;
        v.reason = "search budget exhausted without a verified witness";
    }
    return v;
}

}  // namespace predq
