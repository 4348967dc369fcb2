#pragma once

#include <predq/estimate.hpp>
#include <predq/io.hpp>
#include <predq/prcheck.hpp>
#include <predq/quality.hpp>
#include <predq/transform.hpp>

#include <string>

namespace predq {

inline constexpr int schema_version = 1;

// Exact values are written as "n/d" strings so they can be re-checked
// without floating point.

inline Json to_json(Rational const& r) { return to_string(r); }

inline Json to_json(ConfusionMatrix const& c) {
    return {{"tp", to_string(c.tp)}, {"fp", to_string(c.fp)}, {"fn", to_string(c.fn)}, {"tn", to_string(c.tn)}};
}

inline Json to_json(BasicConfusion<double> const& c) {
    return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

inline Json to_json(Mdp const& m, PrEvaluation<Rational> const& e) {
    Json causes = Json::array();
    for (auto const& c : e.causes)
        causes.push_back({{"state", m.state_name(c.cause)},
                          {"first_visit", to_string(c.first_visit)},
                          {"conditional", to_string(c.conditional)}});
    return {{"confusion", to_json(e.confusion)},
            {"reach_predictor", to_string(e.reach_predictor)},
            {"reach_effect", to_string(e.reach_effect)},
            {"gpr_gap", to_string(e.gpr_gap)},
            {"causes", std::move(causes)}};
}

inline Json to_json(EstimateReport const& r) {
    return {{"estimate", r.estimate}, {"stderr", r.std_error}, {"samples", r.samples}, {"skipped", r.skipped},
            {"seed", r.seed},         {"seconds", r.seconds},  {"warnings", r.warnings}};
}

inline Json to_json(MeasureValue const& v) {
    Json j{{"value", v.value}, {"symbolic", v.symbolic}};
    j["exact"] = v.exact ? Json(to_string(*v.exact)) : Json(nullptr);
    return j;
}

inline Json to_json(PolytopeSpec const& p, Mdp const& m) {
    Json simplices = Json::array();
    for (auto const& s : p.simplices) simplices.push_back({{"state", m.state_name(s.state)}, {"dimension", s.dimension}});
    return {{"dimension", p.dimension}, {"volume", to_string(p.volume)}, {"simplices", std::move(simplices)}};
}

inline Json to_json(Mdp const& m, MemoryPolicy const& p) {
    Json table = Json::object();
    for (std::size_t mem = 0; mem < p.memories.size(); ++mem) {
        Json rows = Json::object();
        for (StateId s = 0; s < m.num_states(); ++s) {
            if (p.moves[mem][s].empty()) continue;
            Json moves = Json::array();
            for (auto const& mv : p.moves[mem][s])
                moves.push_back({{"action", m.action_name(m.choices(s)[mv.choice].action)},
                                 {"next", p.memories[mv.next]},
                                 {"probability", to_string(mv.probability)}});
            rows[m.state_name(s)] = std::move(moves);
        }
        table[p.memories[mem]] = std::move(rows);
    }
    return {{"memories", p.memories}, {"initial", p.memories.front()}, {"moves", std::move(table)}};
}

inline Json sidecar(Mdp const& original, CanonicalMdp const& cm) {
    auto const& m = cm.model;
    Json causes = Json::array();
    for (auto const& c : cm.causes)
        causes.push_back({{"state", original.state_name(c.original)},
                          {"p_min", to_string(c.p_min)},
                          {"p_max", to_string(c.p_max)}});
    Json map = Json::object();
    for (StateId s = 0; s < original.num_states(); ++s)
        map[original.state_name(s)] = cm.state_map[s] ? Json(m.state_name(*cm.state_map[s])) : Json(nullptr);
    Json mecs = Json::array();
    for (std::size_t i = 0; i < cm.collapsed.size(); ++i) {
        Json states = Json::array();
        for (auto s : cm.collapsed[i].states) states.push_back(original.state_name(s));
        mecs.push_back({{"states", std::move(states)}, {"representative", m.state_name(cm.representative[i])}});
    }
    Json pruned = Json::array();
    for (auto s : cm.pruned) pruned.push_back(original.state_name(s));
    return {{"causes", std::move(causes)},
            {"p_star", to_string(cm.p_star)},
            {"terminals", {{"TP", m.state_name(cm.tp)}, {"FP", m.state_name(cm.fp)},
                           {"FN", m.state_name(cm.fn)}, {"TN", m.state_name(cm.tn)}}},
            {"effect", {m.state_name(cm.tp), m.state_name(cm.fn)}},
            {"state_map", std::move(map)},
            {"collapsed_mecs", std::move(mecs)},
            {"pruned", std::move(pruned)},
            {"warnings", cm.warnings}};
}

inline Json sidecar(Mdp const& original, TwoCopyMdp const& tc) {
    auto names = [&](StateSet const& s) {
        Json a = Json::array();
        for (auto x : s) a.push_back(tc.model.state_name(x));
        return a;
    };
    Json map = Json::object();
    for (StateId s = 0; s < original.num_states(); ++s) {
        map[original.state_name(s)] = {tc.model.state_name(tc.in_copy0[s]),
                                       tc.in_copy1[s] == npos ? Json(nullptr) : Json(tc.model.state_name(tc.in_copy1[s]))};
    }
    return {{"C0", names(tc.c0)}, {"C1", names(tc.c1)}, {"E0", names(tc.e0)}, {"E1", names(tc.e1)}, {"copies", map}};
}

inline Json to_json(Mdp const& original, SprVerdict const& v) {
    auto const& m = v.canonical.model;
    Json j{{"exists", v.exists},
           {"reason", v.reason},
           {"p_star", to_string(v.p_star)},
           {"min_value", to_string(v.min_value)}};
    j["threshold"] = v.threshold ? Json(to_string(*v.threshold)) : Json(nullptr);
    j["threshold_min_value"] = v.threshold_min_value ? Json(to_string(*v.threshold_min_value)) : Json(nullptr);
    j["epsilon"] = v.epsilon ? Json(to_string(*v.epsilon)) : Json(nullptr);
    j["witness"] = v.witness ? serialize_policy(m, *v.witness) : Json(nullptr);
    j["certificate"] = v.certificate ? to_json(m, *v.certificate) : Json(nullptr);
    j["original_witness"] = v.original_witness ? to_json(original, *v.original_witness) : Json(nullptr);
    j["original_certificate"] = v.original_certificate ? to_json(original, *v.original_certificate) : Json(nullptr);
    j["original_verified"] = v.original_verified;
    j["canonical"] = sidecar(original, v.canonical);
    j["notes"] = v.notes;
    return j;
}

inline Json to_json(Mdp const& original, GprVerdict const& v) {
    auto const& m = v.canonical.model;
    Json j{{"found", v.found}, {"exactness", exactness_name(v.exactness)}, {"reason", v.reason}};
    if (v.frequencies) {
        Json f = Json::object();
        for (StateId s = 0; s < m.num_states(); ++s)
            for (std::size_t k = 0; k < m.choices(s).size(); ++k)
                f[m.state_name(s) + "/" + m.action_name(m.choices(s)[k].action)] =
                    to_string((*v.frequencies)[m.state_action_index(s, k)]);
        j["frequencies"] = std::move(f);
    } else {
        j["frequencies"] = nullptr;
    }
    j["witness"] = v.witness ? serialize_policy(m, *v.witness) : Json(nullptr);
    j["certificate"] = v.certificate ? to_json(m, *v.certificate) : Json(nullptr);
    j["original_witness"] = v.original_witness ? to_json(original, *v.original_witness) : Json(nullptr);
    j["original_certificate"] = v.original_certificate ? to_json(original, *v.original_certificate) : Json(nullptr);
    j["original_verified"] = v.original_verified;
    j["trace"] = {{"starts", v.trace.starts},
                  {"md_policies", v.trace.md_policies},
                  {"candidates", v.trace.candidates},
                  {"best_f", v.trace.best_f},
                  {"found_by", v.trace.found_by}};
    j["canonical"] = sidecar(original, v.canonical);
    j["notes"] = v.notes;
    return j;
}

}  // namespace predq
