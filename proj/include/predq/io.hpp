#pragma once

#include <predq/model.hpp>

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace predq {

using Json = nlohmann::ordered_json;

/// File could not be read or its content is not a well-formed document.
class IoError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

inline std::string read_file(std::string const& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error reading '" + path + "'");
    return ss.str();
}

inline Json parse_json(std::string const& text, std::string const& what) {
    try {
        return Json::parse(text);
    } catch (Json::parse_error const& e) {
        throw IoError(what + ": syntax error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

/// Probability given as "n/d", a decimal string, or a JSON number.
inline Rational parse_probability(Json const& v, std::string const& where) {
    try {
        if (v.is_string()) return parse_rational(v.get<std::string>());
        if (v.is_number_integer()) return Rational(v.get<long>());
        if (v.is_number_unsigned()) return Rational(v.get<unsigned long>());
        if (v.is_number_float()) return rational_from_literal(v.get<double>());
    } catch (std::invalid_argument const& e) {
        throw ModelError(where + ": " + e.what());
    }
    throw ModelError(where + ": probability must be a string or number");
}

namespace detail {

inline Json const& member(Json const& obj, char const* key, std::string const& what) {
    auto it = obj.find(key);
    if (it == obj.end()) throw IoError(what + ": missing \"" + key + "\"");
    return *it;
}

inline std::string string_of(Json const& v, std::string const& what) {
    if (!v.is_string()) throw IoError(what + " must be a string");
    return v.get<std::string>();
}

}  // namespace detail

/// Model document:
///   {"states": [...], "init": "s", "transitions": [{"from", "action", "to": {state: prob}}],
///    "labels": {"name": [states]}}   (labels optional)
inline Mdp parse_model(Json const& doc) {
    if (!doc.is_object()) throw IoError("model: top level must be an object");
    auto const& states = detail::member(doc, "states", "model");
    if (!states.is_array()) throw IoError("model: \"states\" must be an array");
    MdpBuilder b;
    for (auto const& s : states) b.add_state(detail::string_of(s, "state name"));
    b.set_init(b.state(detail::string_of(detail::member(doc, "init", "model"), "\"init\"")));

    if (auto it = doc.find("transitions"); it != doc.end()) {
        if (!it->is_array()) throw IoError("model: \"transitions\" must be an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            auto const& t = (*it)[i];
            std::string what = "transition " + std::to_string(i);
            if (!t.is_object()) throw IoError(what + " must be an object");
            auto from = b.state(detail::string_of(detail::member(t, "from", what), what + " \"from\""));
            auto action = detail::string_of(detail::member(t, "action", what), what + " \"action\"");
            auto const& to = detail::member(t, "to", what);
            if (!to.is_object()) throw IoError(what + ": \"to\" must be an object");
            std::vector<std::pair<StateId, Rational>> dist;
            for (auto const& [name, p] : to.items())
                dist.emplace_back(b.state(name), parse_probability(p, what + " -> '" + name + "'"));
            b.add_choice(from, action, std::move(dist));
        }
    }
    if (auto it = doc.find("labels"); it != doc.end()) {
        if (!it->is_object()) throw IoError("model: \"labels\" must be an object");
        for (auto const& [name, list] : it->items()) {
            if (!list.is_array()) throw IoError("label '" + name + "' must be an array");
            StateSet set;
            for (auto const& s : list) set.push_back(b.state(detail::string_of(s, "label entry")));
            b.add_label(name, std::move(set));
        }
    }
    return std::move(b).build();
}

inline Mdp parse_model(std::string const& text) { return parse_model(parse_json(text, "model")); }
inline Mdp parse_model(char const* text) { return parse_model(std::string(text)); }

inline Mdp load_model(std::string const& path) { return parse_model(parse_json(read_file(path), path)); }

inline Json serialize_model(Mdp const& m) {
    Json doc;
    doc["states"] = m.state_names();
    doc["init"] = m.state_name(m.init());
    Json trans = Json::array();
    for (StateId s = 0; s < m.num_states(); ++s) {
        for (auto const& c : m.choices(s)) {
            Json to = Json::object();
            for (auto const& succ : c.successors) to[m.state_name(succ.state)] = to_string(succ.probability);
            trans.push_back({{"from", m.state_name(s)}, {"action", m.action_name(c.action)}, {"to", std::move(to)}});
        }
    }
    doc["transitions"] = std::move(trans);
    if (!m.labels().empty()) {
        Json labels = Json::object();
        for (auto const& [name, set] : m.labels()) {
            Json list = Json::array();
            for (auto s : set) list.push_back(m.state_name(s));
            labels[name] = std::move(list);
        }
        doc["labels"] = std::move(labels);
    }
    return doc;
}

/// Comma-separated state names and label names, e.g. "A,B" or "lost".
inline StateSet resolve_states(Mdp const& m, std::string const& spec) {
    StateSet out;
    std::stringstream ss(spec);
    std::string token;
    while (std::getline(ss, token, ',')) {
        auto b = token.find_first_not_of(" \t");
        auto e = token.find_last_not_of(" \t");
        if (b == std::string::npos) continue;
        token = token.substr(b, e - b + 1);
        if (auto s = m.find_state(token)) {
            out.push_back(*s);
        } else if (auto it = m.labels().find(token); it != m.labels().end()) {
            out.insert(out.end(), it->second.begin(), it->second.end());
        } else {
            throw ModelError("unknown state or label '" + token + "'");
        }
    }
    return normalize_set(out);
}

/// Policy document {"state": {"action": prob, ...}, ...}. A state that is
/// not listed must have a single enabled action; unlisted actions of a
/// listed state get probability 0.
inline ExactPolicy parse_policy(Mdp const& m, Json const& doc) {
    if (!doc.is_object()) throw IoError("policy: top level must be an object");
    ExactPolicy::Table t(m.num_states());
    std::vector<bool> listed(m.num_states(), false);
    for (auto const& [name, row] : doc.items()) {
        auto s = m.find_state(name);
        if (!s) throw ModelError("policy: unknown state '" + name + "'");
        if (m.is_terminal(*s)) throw ModelError("policy: state '" + name + "' is terminal");
        if (!row.is_object()) throw IoError("policy: entry for '" + name + "' must be an object");
        listed[*s] = true;
        t[*s].assign(m.choices(*s).size(), Rational(0));
        for (auto const& [action, p] : row.items()) {
            auto a = m.find_action(action);
            auto k = a ? m.choice_index(*s, *a) : npos;
            if (k == npos) throw ModelError("policy: action '" + action + "' not enabled in '" + name + "'");
            t[*s][k] = parse_probability(p, "policy '" + name + "'/'" + action + "'");
        }
    }
    for (StateId s = 0; s < m.num_states(); ++s) {
        if (listed[s] || m.is_terminal(s)) continue;
        if (m.choices(s).size() != 1)
            throw ModelError("policy: no distribution for '" + m.state_name(s) + "', which has several actions");
        t[s] = {Rational(1)};
    }
    return ExactPolicy(m, std::move(t));
}

inline ExactPolicy load_policy(Mdp const& m, std::string const& path) {
    return parse_policy(m, parse_json(read_file(path), path));
}

template <class S>
Json serialize_policy(Mdp const& m, BasicPolicy<S> const& x) {
    Json doc = Json::object();
    for (StateId s = 0; s < m.num_states(); ++s) {
        auto const& cs = m.choices(s);
        if (cs.empty()) continue;
        Json row = Json::object();
        for (std::size_t k = 0; k < cs.size(); ++k) {
            if constexpr (is_exact_v<S>) {
                row[m.action_name(cs[k].action)] = to_string(x(s, k));
            } else {
                row[m.action_name(cs[k].action)] = x(s, k);
            }
        }
        doc[m.state_name(s)] = std::move(row);
    }
    return doc;
}

}  // namespace predq
