// predq: command-line front end.
//
// Exit status: 0 success, 1 semantic error (invalid query, undefined
// measure, ...), 2 I/O, parse or usage error.

#include <predq/predq.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace predq;

struct Config {
    std::string model;
    std::string predictor;
    std::string effect = "effect";
    std::string measure = "fscore";
    std::string policy;
    std::size_t samples = 100000;
    std::uint64_t seed = 0;
    std::string mode = "spr";
    unsigned threads = 1;
    std::string output = "json";
    std::size_t enumeration_cap = 16;
    std::size_t starts = 8;
    std::string kind = "canonical";
    std::string p;
    std::string model_out;
    std::string sidecar_out;
};

void print_text(Json const& j, std::string const& prefix, std::ostream& os) {
    if (j.is_object()) {
        for (auto const& [k, v] : j.items()) print_text(v, prefix.empty() ? k : prefix + "." + k, os);
    } else if (j.is_array() && !j.empty() && (j.front().is_object() || j.front().is_array())) {
        for (std::size_t i = 0; i < j.size(); ++i) print_text(j[i], prefix + "[" + std::to_string(i) + "]", os);
    } else {
        os << prefix << ": " << (j.is_string() ? j.get<std::string>() : j.dump()) << "\n";
    }
}

void emit(Config const& cfg, Json const& j) {
    if (cfg.output == "text") {
        print_text(j, "", std::cout);
    } else {
        std::cout << j.dump() << "\n";
    }
}

// malformed model or policy files count as parse errors (status 2)
Mdp read_model(std::string const& path) {
    try {
        return load_model(path);
    } catch (ModelError const& e) {
        throw IoError(path + ": " + e.what());
    }
}

ExactPolicy read_policy(Mdp const& m, std::string const& path) {
    try {
        return load_policy(m, path);
    } catch (ModelError const& e) {
        throw IoError(path + ": " + e.what());
    }
}

Json header(char const* command, Config const& cfg) {
    return {{"schema_version", schema_version}, {"command", command}, {"model", cfg.model}};
}

Query query_of(Mdp const& m, Config const& cfg) {
    if (cfg.predictor.empty()) throw ModelError("--predictor is required");
    return {resolve_states(m, cfg.predictor), resolve_states(m, cfg.effect)};
}

void check_query(Mdp const& m, Query const& q) {
    auto diag = validate_query(m, q);
    if (diag.empty()) return;
    std::string msg = diag.front();
    for (std::size_t i = 1; i < diag.size(); ++i) msg += "; " + diag[i];
    throw ModelError(msg);
}

Json names_of(Mdp const& m, StateSet const& s) {
    Json a = Json::array();
    for (auto x : s) a.push_back(m.state_name(x));
    return a;
}

Json query_json(Mdp const& m, Query const& q) {
    return {{"predictor", names_of(m, q.predictor)}, {"effect", names_of(m, q.effect)}};
}

SamplingOptions sampling(Config const& cfg) {
    SamplingOptions o;
    o.samples = cfg.samples;
    o.seed = cfg.seed;
    o.threads = cfg.threads;
    return o;
}

int cmd_validate(Config const& cfg) {
    auto m = read_model(cfg.model);
    Json j = header("validate", cfg);
    Json diags = Json::array();
    for (auto const& d : model_diagnostics(m))
        diags.push_back({{"severity", d.severity == Diagnostic::Severity::warning ? "warning" : "error"},
                         {"message", d.message}});
    bool valid = true;
    if (!cfg.predictor.empty()) {
        Query q{resolve_states(m, cfg.predictor), resolve_states(m, cfg.effect)};
        for (auto const& msg : validate_query(m, q)) {
            diags.push_back({{"severity", "error"}, {"message", msg}});
            valid = false;
        }
        j["query"] = query_json(m, q);
    }
    j["states"] = m.num_states();
    j["state_actions"] = m.num_state_actions();
    j["terminals"] = names_of(m, m.terminals());
    j["valid"] = valid;
    j["diagnostics"] = std::move(diags);
    emit(cfg, j);
    return valid ? 0 : 1;
}

int cmd_measure(Config const& cfg) {
    auto m = read_model(cfg.model);
    auto q = query_of(m, cfg);
    check_query(m, q);
    auto kind = parse_measure(cfg.measure);
    if (!kind) throw ModelError("unknown measure '" + cfg.measure + "'");
    Json j = header("measure", cfg);
    j["query"] = query_json(m, q);
    j["measure"] = measure_name(*kind);
    if (!cfg.policy.empty()) {
        auto x = read_policy(m, cfg.policy);
        auto c = confusion(m, q, x);
        auto v = measure_exact(c, *kind);
        if (!v) throw AnalysisError(std::string(measure_name(*kind)) + " is undefined under this policy");
        j["policy"] = cfg.policy;
        j["confusion"] = to_json(c);
        j["result"] = to_json(*v);
    } else {
        j["samples"] = cfg.samples;
        j["seed"] = cfg.seed;
        j["report"] = to_json(average_measure(m, q, *kind, sampling(cfg)));
    }
    emit(cfg, j);
    return 0;
}

int cmd_confusion(Config const& cfg) {
    auto m = read_model(cfg.model);
    auto q = query_of(m, cfg);
    check_query(m, q);
    auto x = cfg.policy.empty() ? uniform_policy<Rational>(m) : read_policy(m, cfg.policy);
    auto e = ConfusionEvaluator(m, q).evaluate(x);
    Json j = header("confusion", cfg);
    j["query"] = query_json(m, q);
    j["policy"] = cfg.policy.empty() ? Json("uniform") : Json(cfg.policy);
    j["confusion"] = to_json(e.confusion);
    j["evaluation"] = to_json(m, e);
    j["spr"] = e.spr();
    j["gpr"] = e.gpr();
    Json measures = Json::object();
    for (auto k : {Measure::precision, Measure::recall, Measure::fscore, Measure::mcc}) {
        auto v = measure_exact(e.confusion, k);
        measures[measure_name(k)] = v ? to_json(*v) : Json(nullptr);
    }
    j["measures"] = std::move(measures);
    emit(cfg, j);
    return 0;
}

int cmd_causal_volume(Config const& cfg) {
    auto m = read_model(cfg.model);
    auto q = query_of(m, cfg);
    check_query(m, q);
    auto mode = parse_mode(cfg.mode);
    if (!mode) throw ModelError("unknown mode '" + cfg.mode + "'");
    Json j = header("causal-volume", cfg);
    j["query"] = query_json(m, q);
    j["mode"] = mode_name(*mode);
    j["samples"] = cfg.samples;
    j["seed"] = cfg.seed;
    j["report"] = to_json(causal_volume(m, q, *mode, sampling(cfg)));
    emit(cfg, j);
    return 0;
}

int cmd_check(Config const& cfg) {
    auto m = read_model(cfg.model);
    auto q = query_of(m, cfg);
    check_query(m, q);
    auto mode = parse_mode(cfg.mode);
    if (!mode) throw ModelError("unknown mode '" + cfg.mode + "'");
    Json j = header("check", cfg);
    j["query"] = query_json(m, q);
    j["mode"] = mode_name(*mode);
    if (*mode == PrMode::spr) {
        auto v = check_spr(m, q);
        j["exists"] = v.exists;
        j["verdict"] = to_json(m, v);
    } else {
        GprOptions o;
        o.starts = cfg.starts;
        o.enumeration_cap = cfg.enumeration_cap;
        o.seed = cfg.seed;
        o.threads = cfg.threads;
        auto v = check_gpr(m, q, o);
        j["exists"] = v.found;
        j["seed"] = cfg.seed;
        j["verdict"] = to_json(m, v);
    }
    emit(cfg, j);
    return 0;
}

void write_json_file(std::string const& path, Json const& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("error writing '" + path + "'");
}

int cmd_transform(Config const& cfg) {
    auto m = read_model(cfg.model);
    auto q = query_of(m, cfg);
    check_query(m, q);
    Json j = header("transform", cfg);
    j["query"] = query_json(m, q);
    j["kind"] = cfg.kind;
    Json model, side;
    if (cfg.kind == "two-copy") {
        auto tc = two_copy(m, q);
        model = serialize_model(tc.model);
        side = sidecar(m, tc);
    } else if (cfg.kind == "canonical" || cfg.kind == "star") {
        auto cm = canonical(m, q);
        side = sidecar(m, cm);
        if (cfg.kind == "canonical") {
            model = serialize_model(cm.model);
        } else {
            Rational p = cm.p_star;
            if (!cfg.p.empty()) {
                try {
                    p = parse_rational(cfg.p);
                } catch (std::invalid_argument const& e) {
                    throw ModelError(std::string("--p: ") + e.what());
                }
            }
            auto st = star(cm, p);
            side["p"] = to_string(st.p);
            model = serialize_model(st.model);
        }
    } else {
        throw ModelError("unknown transform kind '" + cfg.kind + "'");
    }
    if (!cfg.model_out.empty()) write_json_file(cfg.model_out, model);
    if (!cfg.sidecar_out.empty()) write_json_file(cfg.sidecar_out, side);
    j["result"] = std::move(model);
    j["sidecar"] = std::move(side);
    emit(cfg, j);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Predictor quality and probability-raising analysis for MDPs"};
    app.require_subcommand(1);
    Config cfg;

    auto common = [&](CLI::App* sub, bool needs_query) {
        sub->add_option("--model", cfg.model, "model file (JSON)")->required();
        auto* pred = sub->add_option("--predictor", cfg.predictor, "predictor states or label, comma separated");
        if (needs_query) pred->required();
        sub->add_option("--effect", cfg.effect, "effect states or label, comma separated")->capture_default_str();
        sub->add_option("--output", cfg.output, "json or text")
            ->check(CLI::IsMember({"json", "text"}))
            ->capture_default_str();
    };
    auto sampling_flags = [&](CLI::App* sub) {
        sub->add_option("--samples", cfg.samples, "number of sampled policies")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        sub->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
        sub->add_option("--threads", cfg.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    };

    auto* validate = app.add_subcommand("validate", "check a model and optionally a query");
    common(validate, false);

    auto* measure = app.add_subcommand("measure", "quality measure under a policy or averaged over policies");
    common(measure, true);
    sampling_flags(measure);
    measure->add_option("--measure", cfg.measure, "precision, recall, fscore or mcc")->capture_default_str();
    measure->add_option("--policy", cfg.policy, "policy file (exact single-policy value)");

    auto* conf = app.add_subcommand("confusion", "exact confusion matrix under a policy (default uniform)");
    common(conf, true);
    conf->add_option("--policy", cfg.policy, "policy file");

    auto* volume = app.add_subcommand("causal-volume", "fraction of SPR / GPR policies");
    common(volume, true);
    sampling_flags(volume);
    volume->add_option("--mode", cfg.mode, "spr or gpr")->capture_default_str();

    auto* check = app.add_subcommand("check", "existence of an SPR / GPR policy");
    common(check, true);
    check->add_option("--mode", cfg.mode, "spr or gpr")->capture_default_str();
    check->add_option("--enumeration-cap", cfg.enumeration_cap, "max state-action pairs for MD enumeration")
        ->capture_default_str();
    check->add_option("--starts", cfg.starts, "random starts of the GPR search")->capture_default_str();
    check->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    check->add_option("--threads", cfg.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();

    auto* transform = app.add_subcommand("transform", "dump the two-copy, canonical or star MDP");
    common(transform, true);
    transform->add_option("--kind", cfg.kind, "canonical, two-copy or star")
        ->check(CLI::IsMember({"canonical", "two-copy", "star"}))
        ->capture_default_str();
    transform->add_option("--p", cfg.p, "parameter of the star MDP (default p*)");
    transform->add_option("--model-out", cfg.model_out, "also write the model to this file");
    transform->add_option("--sidecar-out", cfg.sidecar_out, "also write the mapping tables to this file");

    try {
        app.parse(argc, argv);
    } catch (CLI::CallForHelp const& e) {
        return app.exit(e);
    } catch (CLI::CallForAllHelp const& e) {
        return app.exit(e);
    } catch (CLI::ParseError const& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*validate) return cmd_validate(cfg);
        if (*measure) return cmd_measure(cfg);
        if (*conf) return cmd_confusion(cfg);
        if (*volume) return cmd_causal_volume(cfg);
        if (*check) return cmd_check(cfg);
        if (*transform) return cmd_transform(cfg);
    } catch (IoError const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (ModelError const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (AnalysisError const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (std::invalid_argument const& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
