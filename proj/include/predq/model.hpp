#pragma once

#include <predq/rational.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace predq {

using StateId = std::size_t;
using ActionId = std::size_t;

/// Sorted, duplicate-free list of state indices.
using StateSet = std::vector<StateId>;

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

class ModelError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// A well-formed request whose analysis has no meaningful answer.
class AnalysisError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

struct Successor {
    StateId state;
    Rational probability;
    double approx;  // probability.get_d(), cached for the float backend
};

/// One enabled action of a state together with its distribution.
struct Choice {
    ActionId action;
    std::vector<Successor> successors;
};

inline StateSet normalize_set(StateSet s) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

inline bool contains(StateSet const& s, StateId x) { return std::binary_search(s.begin(), s.end(), x); }

class MdpBuilder;

/// Finite MDP with exact rational transition probabilities. States and
/// actions are indexed densely in insertion order; a state is terminal iff it
/// has no enabled action. Immutable once built.
class Mdp {
   public:
    std::size_t num_states() const { return state_names_.size(); }
    std::size_t num_actions() const { return action_names_.size(); }
    StateId init() const { return init_; }

    std::string const& state_name(StateId s) const { return state_names_.at(s); }
    std::string const& action_name(ActionId a) const { return action_names_.at(a); }
    std::vector<std::string> const& state_names() const { return state_names_; }

    std::optional<StateId> find_state(std::string const& name) const {
        auto it = state_index_.find(name);
        if (it == state_index_.end()) return std::nullopt;
        return it->second;
    }
    std::optional<ActionId> find_action(std::string const& name) const {
        auto it = action_index_.find(name);
        if (it == action_index_.end()) return std::nullopt;
        return it->second;
    }

    std::vector<Choice> const& choices(StateId s) const { return choices_.at(s); }
    bool is_terminal(StateId s) const { return choices_.at(s).empty(); }

    /// Index of the choice of `s` labelled `a`, or npos.
    std::size_t choice_index(StateId s, ActionId a) const {
        auto const& cs = choices_.at(s);
        for (std::size_t k = 0; k < cs.size(); ++k)
            if (cs[k].action == a) return k;
        return npos;
    }

    /// Dense index of the state-action pair (s, k-th choice of s).
    std::size_t state_action_index(StateId s, std::size_t k) const { return offsets_[s] + k; }
    std::size_t num_state_actions() const { return offsets_.back(); }

    StateSet terminals() const {
        StateSet t;
        for (StateId s = 0; s < num_states(); ++s)
            if (is_terminal(s)) t.push_back(s);
        return t;
    }

    std::map<std::string, StateSet> const& labels() const { return labels_; }

   private:
    friend class MdpBuilder;

    std::vector<std::string> state_names_;
    std::vector<std::string> action_names_;
    std::unordered_map<std::string, StateId> state_index_;
    std::unordered_map<std::string, ActionId> action_index_;
    std::vector<std::vector<Choice>> choices_;
    std::vector<std::size_t> offsets_{0};
    std::map<std::string, StateSet> labels_;
    StateId init_ = 0;
};

/// Incremental construction of an Mdp; build() checks all invariants.
class MdpBuilder {
   public:
    StateId add_state(std::string const& name) {
        if (name.empty()) throw ModelError("empty state name");
        if (m_.state_index_.count(name)) throw ModelError("duplicate state '" + name + "'");
        StateId id = m_.state_names_.size();
        m_.state_names_.push_back(name);
        m_.state_index_.emplace(name, id);
        m_.choices_.emplace_back();
        return id;
    }

    ActionId intern_action(std::string const& name) {
        if (name.empty()) throw ModelError("empty action name");
        auto [it, inserted] = m_.action_index_.emplace(name, m_.action_names_.size());
        if (inserted) m_.action_names_.push_back(name);
        return it->second;
    }

    StateId state(std::string const& name) const {
        auto it = m_.state_index_.find(name);
        if (it == m_.state_index_.end()) throw ModelError("unknown state '" + name + "'");
        return it->second;
    }

    std::size_t num_states() const { return m_.state_names_.size(); }

    void set_init(StateId s) {
        check_state(s);
        init_set_ = true;
        m_.init_ = s;
    }

    /// Adds the enabled action `action` at `from`. Zero-probability entries
    /// are dropped and repeated successors merged; the distribution must sum
    /// to exactly one.
    void add_choice(StateId from, std::string const& action, std::vector<std::pair<StateId, Rational>> dist) {
        check_state(from);
        ActionId a = intern_action(action);
        for (auto const& c : m_.choices_[from])
            if (c.action == a)
                throw ModelError("duplicate action '" + action + "' at state '" + m_.state_names_[from] + "'");
        std::map<StateId, Rational> merged;
        Rational sum = 0;
        for (auto& [t, p] : dist) {
            check_state(t);
            if (p < 0 || p > 1)
                throw ModelError("probability " + to_string(p) + " out of range at ('" + m_.state_names_[from] +
                                 "', '" + action + "')");
            sum += p;
            if (p != 0) merged[t] += p;
        }
        if (sum != 1)
            throw ModelError("distribution of ('" + m_.state_names_[from] + "', '" + action + "') sums to " +
                             to_string(sum) + ", not 1");
        Choice c{a, {}};
        for (auto& [t, p] : merged) c.successors.push_back({t, p, p.get_d()});
        m_.choices_[from].push_back(std::move(c));
    }

    void add_label(std::string const& name, StateSet states) {
        for (auto s : states) check_state(s);
        m_.labels_[name] = normalize_set(std::move(states));
    }

    Mdp build() && {
        if (m_.state_names_.empty()) throw ModelError("model has no states");
        if (!init_set_) throw ModelError("initial state not set");
        m_.offsets_.assign(1, 0);
        for (auto const& cs : m_.choices_) m_.offsets_.push_back(m_.offsets_.back() + cs.size());
        return std::move(m_);
    }

   private:
    void check_state(StateId s) const {
        if (s >= m_.state_names_.size()) throw ModelError("state index out of range");
    }

    Mdp m_;
    bool init_set_ = false;
};

/// Predictor C and effect E of a query.
struct Query {
    StateSet predictor;
    StateSet effect;
};

/// Structural violations of a query; empty iff the query is well-formed.
inline std::vector<std::string> validate_query(Mdp const& m, Query const& q) {
    std::vector<std::string> out;
    if (q.predictor.empty()) out.emplace_back("predictor set is empty");
    if (q.effect.empty()) out.emplace_back("effect set is empty");
    for (auto s : q.predictor)
        if (s >= m.num_states()) out.emplace_back("predictor state index " + std::to_string(s) + " unknown");
    for (auto s : q.effect) {
        if (s >= m.num_states()) {
            out.emplace_back("effect state index " + std::to_string(s) + " unknown");
        } else if (!m.is_terminal(s)) {
            out.emplace_back("effect state not terminal: '" + m.state_name(s) + "'");
        }
    }
    for (auto s : q.predictor)
        if (contains(q.effect, s) && s < m.num_states())
            out.emplace_back("C and E intersect at '" + m.state_name(s) + "'");
    return out;
}

/// Memoryless randomized policy: one distribution over the choices of each
/// non-terminal state, indexed like Mdp::choices. Terminal rows are empty.
template <class S>
class BasicPolicy {
   public:
    using Scalar = S;
    using Table = std::vector<std::vector<S>>;

    BasicPolicy() = default;

    /// Validates `table` against `m`. Exact rows must sum to one; float rows
    /// may deviate by 1e-12 and are then renormalized.
    BasicPolicy(Mdp const& m, Table table) : table_(std::move(table)) {
        if (table_.size() != m.num_states()) throw ModelError("policy covers a different number of states");
        for (StateId s = 0; s < m.num_states(); ++s) {
            auto& row = table_[s];
            if (row.size() != m.choices(s).size())
                throw ModelError("policy row for '" + m.state_name(s) + "' has wrong length");
            if (row.empty()) continue;
            S sum = 0;
            for (auto const& v : row) {
                if (v < 0) throw ModelError("negative policy probability at '" + m.state_name(s) + "'");
                sum += v;
            }
            if constexpr (is_exact_v<S>) {
                if (sum != 1) throw ModelError("policy row for '" + m.state_name(s) + "' sums to " + to_string(sum));
            } else {
                if (!(std::abs(sum - 1.0) <= 1e-12))
                    throw ModelError("policy row for '" + m.state_name(s) + "' does not sum to 1");
                for (auto& v : row) v /= sum;
            }
        }
    }

    std::size_t num_states() const { return table_.size(); }
    std::vector<S> const& row(StateId s) const { return table_[s]; }
    S const& operator()(StateId s, std::size_t k) const { return table_[s][k]; }
    Table const& table() const { return table_; }

    bool operator==(BasicPolicy const&) const = default;

   private:
    Table table_;
};

using ExactPolicy = BasicPolicy<Rational>;
using FloatPolicy = BasicPolicy<double>;

template <class S = Rational>
BasicPolicy<S> uniform_policy(Mdp const& m) {
    typename BasicPolicy<S>::Table t(m.num_states());
    for (StateId s = 0; s < m.num_states(); ++s) {
        auto n = m.choices(s).size();
        if (n == 0) continue;
        if constexpr (is_exact_v<S>) {
            t[s].assign(n, Rational(1, static_cast<unsigned long>(n)));
        } else {
            t[s].assign(n, 1.0 / static_cast<double>(n));
        }
    }
    return BasicPolicy<S>(m, std::move(t));
}

/// Deterministic policy taking choice `pick[s]` at every non-terminal s.
template <class S = Rational>
BasicPolicy<S> deterministic_policy(Mdp const& m, std::vector<std::size_t> const& pick) {
    typename BasicPolicy<S>::Table t(m.num_states());
    for (StateId s = 0; s < m.num_states(); ++s) {
        auto n = m.choices(s).size();
        if (n == 0) continue;
        if (pick.at(s) >= n) throw ModelError("deterministic choice out of range at '" + m.state_name(s) + "'");
        t[s].assign(n, S(0));
        t[s][pick[s]] = S(1);
    }
    return BasicPolicy<S>(m, std::move(t));
}

inline FloatPolicy to_float(Mdp const& m, ExactPolicy const& p) {
    FloatPolicy::Table t(p.num_states());
    for (StateId s = 0; s < p.num_states(); ++s)
        for (auto const& v : p.row(s)) t[s].push_back(v.get_d());
    return FloatPolicy(m, std::move(t));
}

/// Exact policy holding the binary values of `p`, renormalized per state.
inline ExactPolicy to_exact(Mdp const& m, FloatPolicy const& p) {
    ExactPolicy::Table t(p.num_states());
    for (StateId s = 0; s < p.num_states(); ++s) {
        Rational sum = 0;
        for (auto v : p.row(s)) {
            t[s].push_back(exact_from_double(v < 0 ? 0.0 : v));
            sum += t[s].back();
        }
        if (!t[s].empty()) {
            if (sum == 0) throw ModelError("policy row for '" + m.state_name(s) + "' is zero");
            for (auto& v : t[s]) v /= sum;
        }
    }
    return ExactPolicy(m, std::move(t));
}

}  // namespace predq
