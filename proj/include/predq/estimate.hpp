#pragma once

#include <predq/graph.hpp>
#include <predq/quality.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace predq {

struct EstimateReport {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t samples = 0;  // total drawn
    std::size_t skipped = 0;  // integrand undefined
    std::uint64_t seed = 0;
    double seconds = 0.0;
    std::vector<std::string> warnings;

    std::size_t effective() const { return samples - skipped; }
};

struct SamplingOptions {
    std::size_t samples = 100000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    SolverOptions solver{};
};

namespace detail {

// count / mean / sum of squared deviations; merge is Chan's pairwise update
struct Moments {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }

    static Moments merge(Moments const& a, Moments const& b) {
        if (a.n == 0) return b;
        if (b.n == 0) return a;
        Moments r;
        r.n = a.n + b.n;
        double na = static_cast<double>(a.n), nb = static_cast<double>(b.n), nr = static_cast<double>(r.n);
        double d = b.mean - a.mean;
        r.mean = a.mean + d * nb / nr;
        r.m2 = a.m2 + b.m2 + d * d * na * nb / nr;
        return r;
    }
};

inline Moments merge_tree(std::vector<Moments> const& v, std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return v[lo];
    std::size_t mid = lo + (hi - lo) / 2;
    return Moments::merge(merge_tree(v, lo, mid), merge_tree(v, mid, hi));
}

inline constexpr std::size_t block_size = 4096;

// Draws `opt.samples` uniform policies in fixed-size blocks. Each block has
// its own generator seeded from (seed, block index) and the block results
// are merged in a fixed tree, so the outcome does not depend on `threads`.
inline std::pair<Moments, std::size_t> sample_blocks(Mdp const& m, SamplingOptions const& opt,
                                                     std::function<std::optional<double>(FloatPolicy const&)> const& f) {
    auto spec = polytope(m);
    std::size_t blocks = (opt.samples + block_size - 1) / block_size;
    std::vector<Moments> stats(blocks);
    std::vector<std::size_t> skipped(blocks, 0);
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(std::max(1u, opt.threads));

    auto worker = [&](unsigned id) {
        try {
            for (std::size_t b; (b = next.fetch_add(1)) < blocks;) {
                std::seed_seq seq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32),
                                  static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
                std::mt19937_64 rng(seq);
                std::size_t count = std::min(block_size, opt.samples - b * block_size);
                for (std::size_t i = 0; i < count; ++i) {
                    auto v = f(sample_policy(m, spec, rng));
                    if (v) {
                        stats[b].add(*v);
                    } else {
                        ++skipped[b];
                    }
                }
            }
        } catch (...) {
            errors[id] = std::current_exception();
            next = blocks;
        }
    };
    unsigned threads = std::max(1u, opt.threads);
    if (threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
        for (auto& t : pool) t.join();
    }
    for (auto const& e : errors)
        if (e) std::rethrow_exception(e);

    Moments total = blocks ? merge_tree(stats, 0, blocks) : Moments{};
    std::size_t skip = 0;
    for (auto s : skipped) skip += s;
    return {total, skip};
}

inline EstimateReport finish_report(Moments const& mo, std::size_t skipped, SamplingOptions const& opt,
                                    std::chrono::steady_clock::time_point start) {
    EstimateReport r;
    r.samples = opt.samples;
    r.skipped = skipped;
    r.seed = opt.seed;
    r.estimate = mo.mean;
    if (mo.n >= 2) r.std_error = std::sqrt(mo.m2 / static_cast<double>(mo.n - 1)) / std::sqrt(static_cast<double>(mo.n));
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

inline std::vector<std::string> end_component_warnings(Mdp const& m) {
    std::vector<std::string> out;
    if (!mec_decomposition(m).empty())
        out.emplace_back("model has end components; trapped mass is counted as true negative");
    return out;
}

}  // namespace detail

/// Monte-Carlo average of a quality measure over uniformly drawn MR policies.
/// Samples where the measure is undefined are skipped and counted.
inline EstimateReport average_measure(Mdp const& m, Query const& q, Measure kind, SamplingOptions const& opt) {
    if (opt.samples < 2) throw std::invalid_argument("average_measure needs at least 2 samples");
    auto start = std::chrono::steady_clock::now();
    ConfusionEvaluator eval(m, q);
    auto [mo, skipped] = detail::sample_blocks(
        m, opt, [&](FloatPolicy const& x) { return measure(eval(x, opt.solver), kind); });
    if (mo.n == 0) throw AnalysisError(std::string(measure_name(kind)) + " is undefined a.e.");
    auto r = detail::finish_report(mo, skipped, opt, start);
    r.warnings = detail::end_component_warnings(m);
    if (static_cast<double>(skipped) > 0.01 * static_cast<double>(opt.samples))
        r.warnings.push_back(std::to_string(skipped) + " of " + std::to_string(opt.samples) +
                             " samples skipped (measure undefined)");
    return r;
}

enum class PrMode { spr, gpr };

inline std::optional<PrMode> parse_mode(std::string_view s) {
    if (s == "spr") return PrMode::spr;
    if (s == "gpr") return PrMode::gpr;
    return std::nullopt;
}

inline char const* mode_name(PrMode m) { return m == PrMode::spr ? "spr" : "gpr"; }

/// Fraction of uniformly drawn MR policies that are SPR (resp. GPR).
inline EstimateReport causal_volume(Mdp const& m, Query const& q, PrMode mode, SamplingOptions const& opt) {
    if (opt.samples < 1) throw std::invalid_argument("causal_volume needs at least 1 sample");
    auto start = std::chrono::steady_clock::now();
    ConfusionEvaluator eval(m, q);
    auto [mo, skipped] = detail::sample_blocks(m, opt, [&](FloatPolicy const& x) -> std::optional<double> {
        auto e = eval.evaluate(x, opt.solver);
        return (mode == PrMode::spr ? e.spr() : e.gpr()) ? 1.0 : 0.0;
    });
    auto r = detail::finish_report(mo, skipped, opt, start);
    r.warnings = detail::end_component_warnings(m);
    return r;
}

}  // namespace predq
