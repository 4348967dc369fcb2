#pragma once

#include <predq/model.hpp>
#include <predq/solve.hpp>
#include <predq/transform.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace predq {

template <class S>
struct BasicConfusion {
    S tp{0}, fp{0}, fn{0}, tn{0};

    S sum() const { return tp + fp + fn + tn; }
    S reach_predictor() const { return tp + fp; }
    S reach_effect() const { return tp + fn; }
    bool operator==(BasicConfusion const&) const = default;
};

using ConfusionMatrix = BasicConfusion<Rational>;

/// Per-cause evidence for the strict condition: probability that the cause
/// is the first state of C visited, and the effect probability from there.
template <class S>
struct CauseEvidence {
    StateId cause;
    S first_visit;
    S conditional;
};

/// Everything the SPR / GPR conditions compare, for one policy.
template <class S>
struct PrEvaluation {
    BasicConfusion<S> confusion;
    S reach_predictor{0};  // Pr(<>C)
    S reach_effect{0};     // Pr(<>E)
    S gpr_gap{0};          // tp*tn - fp*fn
    std::vector<CauseEvidence<S>> causes;

    bool reach() const { return reach_predictor > 0; }

    bool spr() const {
        if (!reach()) return false;
        for (auto const& c : causes)
            if (c.first_visit > 0 && !(c.conditional > reach_effect)) return false;
        return true;
    }

    bool gpr() const { return reach() && gpr_gap > 0; }
};

/// Confusion matrices of one (model, query) under many policies. The
/// two-copy MDP is built once; each evaluation is one visit solve on it.
class ConfusionEvaluator {
   public:
    ConfusionEvaluator(Mdp const& m, Query q) : m_(&m), q_(std::move(q)), tc_(two_copy(m, q_)) {
        q_.predictor = normalize_set(q_.predictor);
        q_.effect = normalize_set(q_.effect);
    }

    Mdp const& model() const { return *m_; }
    Query const& query() const { return q_; }
    TwoCopyMdp const& two_copy_mdp() const { return tc_; }

    /// tp = Pr(<>E1), fn = Pr(<>E0), fp = Pr(<>C0) - tp, tn the rest.
    template <class S>
    BasicConfusion<S> operator()(BasicPolicy<S> const& x, SolverOptions const& opt = {}) const {
        auto visits = visits_of(x, opt);
        return from_visits(visits);
    }

    template <class S>
    PrEvaluation<S> evaluate(BasicPolicy<S> const& x, SolverOptions const& opt = {}) const {
        auto visits = visits_of(x, opt);
        PrEvaluation<S> out;
        out.confusion = from_visits(visits);
        auto const& cm = out.confusion;
        out.reach_predictor = cm.tp + cm.fp;
        out.reach_effect = cm.tp + cm.fn;
        out.gpr_gap = cm.tp * cm.tn - cm.fp * cm.fn;
        auto reach = reach_under_policy(*m_, x, q_.effect, opt);
        for (auto c : q_.predictor) out.causes.push_back({c, visits[tc_.in_copy0[c]], reach[c]});
        return out;
    }

   private:
    template <class S>
    std::vector<S> visits_of(BasicPolicy<S> const& x, SolverOptions const& opt) const {
        if (x.num_states() != m_->num_states()) throw ModelError("policy does not match the model");
        return expected_visits(induced_chain(tc_.model, lift_policy(tc_, x)), tc_.model.init(), opt);
    }

    template <class S>
    BasicConfusion<S> from_visits(std::vector<S> const& visits) const {
        BasicConfusion<S> cm;
        S c0 = 0;
        for (auto s : tc_.e1) cm.tp += visits[s];
        for (auto s : tc_.e0) cm.fn += visits[s];
        for (auto s : tc_.c0) c0 += visits[s];
        cm.fp = c0 - cm.tp;
        cm.tn = S(1) - cm.tp - cm.fp - cm.fn;
        return cm;
    }

    Mdp const* m_;
    Query q_;
    TwoCopyMdp tc_;
};

template <class S>
BasicConfusion<S> confusion(Mdp const& m, Query const& q, BasicPolicy<S> const& x) {
    return ConfusionEvaluator(m, q)(x);
}

template <class S>
bool spr_predicate(Mdp const& m, Query const& q, BasicPolicy<S> const& x) {
    return ConfusionEvaluator(m, q).evaluate(x).spr();
}

template <class S>
bool gpr_predicate(Mdp const& m, Query const& q, BasicPolicy<S> const& x) {
    return ConfusionEvaluator(m, q).evaluate(x).gpr();
}

// ---------------------------------------------------------------------------
// measures
// ---------------------------------------------------------------------------

enum class Measure { precision, recall, fscore, mcc };

inline std::optional<Measure> parse_measure(std::string_view s) {
    if (s == "precision") return Measure::precision;
    if (s == "recall") return Measure::recall;
    if (s == "fscore" || s == "f-score" || s == "f1") return Measure::fscore;
    if (s == "mcc") return Measure::mcc;
    return std::nullopt;
}

inline char const* measure_name(Measure k) {
    switch (k) {
        case Measure::precision: return "precision";
        case Measure::recall: return "recall";
        case Measure::fscore: return "fscore";
        case Measure::mcc: return "mcc";
    }
    return "?";
}

namespace detail {

// numerator / denominator of the linear-rational measures, and the MCC
// numerator with the squared denominator
template <class S>
struct MeasureParts {
    S num{0};
    S den{0};
};

template <class S>
MeasureParts<S> measure_parts(BasicConfusion<S> const& c, Measure k) {
    switch (k) {
        case Measure::precision: return {c.tp, c.tp + c.fp};
        case Measure::recall: return {c.tp, c.tp + c.fn};
        case Measure::fscore: return {S(2) * c.tp, S(2) * c.tp + c.fp + c.fn};
        case Measure::mcc:
            return {c.tp * c.tn - c.fp * c.fn, (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)};
    }
    return {};
}

}  // namespace detail

/// Value of the measure, or nullopt where its denominator vanishes. MCC is
/// never undefined: a zero marginal makes it 0.
template <class S>
std::optional<double> measure(BasicConfusion<S> const& c, Measure k) {
    auto [num, den] = detail::measure_parts(c, k);
    if (k == Measure::mcc) {
        if (!(den > 0)) return 0.0;
        return to_double(num) / std::sqrt(to_double(den));
    }
    if (den == 0) return std::nullopt;
    return to_double(num) / to_double(den);
}

/// Exact measure value. MCC involves a square root; `exact` is set only if
/// the result is rational, `symbolic` always holds an exact expression.
struct MeasureValue {
    double value;
    std::optional<Rational> exact;
    std::string symbolic;
};

namespace detail {

inline std::optional<mpz_class> exact_sqrt(mpz_class const& z) {
    if (z < 0) return std::nullopt;
    mpz_class r = sqrt(z);
    if (r * r != z) return std::nullopt;
    return r;
}

}  // namespace detail

inline std::optional<MeasureValue> measure_exact(ConfusionMatrix const& c, Measure k) {
    auto [num, den] = detail::measure_parts(c, k);
    if (k != Measure::mcc) {
        if (den == 0) return std::nullopt;
        Rational v = num / den;
        return MeasureValue{v.get_d(), v, to_string(v)};
    }
    if (den == 0) return MeasureValue{0.0, Rational(0), "0"};
    MeasureValue out{num.get_d() / std::sqrt(den.get_d()), std::nullopt,
                     "(" + to_string(num) + ")/sqrt(" + to_string(den) + ")"};
    auto n = detail::exact_sqrt(den.get_num());
    auto d = detail::exact_sqrt(den.get_den());
    if (n && d) {
        Rational root(*n, *d);
        root.canonicalize();
        Rational v = num / root;
        out.exact = v;
        out.value = v.get_d();
        out.symbolic = to_string(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// policy polytope
// ---------------------------------------------------------------------------

struct PolytopeSpec {
    struct Simplex {
        StateId state;
        std::size_t dimension;  // number of enabled actions - 1
    };
    std::vector<Simplex> simplices;  // non-terminal states, in state order
    std::size_t dimension = 0;
    Rational volume = 1;
};

inline PolytopeSpec polytope(Mdp const& m) {
    PolytopeSpec out;
    for (StateId s = 0; s < m.num_states(); ++s) {
        if (m.is_terminal(s)) continue;
        std::size_t n = m.choices(s).size() - 1;
        out.simplices.push_back({s, n});
        out.dimension += n;
        mpz_class f;
        mpz_fac_ui(f.get_mpz_t(), n);
        out.volume /= f;
    }
    return out;
}

/// Uniform point of the polytope: per state, sorted uniform gaps on [0,1].
template <class Rng>
FloatPolicy sample_policy(Mdp const& m, PolytopeSpec const& spec, Rng& rng) {
    FloatPolicy::Table t(m.num_states());
    std::vector<double> cuts;
    for (auto const& [s, n] : spec.simplices) {
        cuts.clear();
        for (std::size_t i = 0; i < n; ++i) cuts.push_back(std::generate_canonical<double, 53>(rng));
        std::sort(cuts.begin(), cuts.end());
        auto& row = t[s];
        row.resize(n + 1);
        double prev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            row[i] = cuts[i] - prev;
            prev = cuts[i];
        }
        row[n] = 1.0 - prev;
    }
    return FloatPolicy(m, std::move(t));
}

}  // namespace predq
