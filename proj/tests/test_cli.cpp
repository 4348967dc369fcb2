#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <sys/wait.h>

using namespace predq;

namespace {

struct Run {
    int status;
    std::string out;
};

Run run(std::string const& args) {
    std::string cmd = std::string(PREDQ_CLI) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("popen failed");
    std::string out;
    char buf[4096];
    for (std::size_t n; (n = fread(buf, 1, sizeof buf, pipe)) > 0;) out.append(buf, n);
    int st = pclose(pipe);
    return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, out};
}

std::string const net = std::string(PREDQ_MODEL_DIR) + "/network.json";
std::string const models = PREDQ_MODEL_DIR;

void drop_timing(Json& j) {
    if (j.is_object()) {
        j.erase("seconds");
        for (auto& [k, v] : j.items()) drop_timing(v);
    } else if (j.is_array()) {
        for (auto& v : j) drop_timing(v);
    }
}

}  // namespace

TEST(Cli, Validate) {
    auto r = run("validate --model " + net);
    ASSERT_EQ(r.status, 0);
    auto j = Json::parse(r.out);
    EXPECT_EQ(j["schema_version"], 1);
    EXPECT_EQ(j["states"], 7);
    EXPECT_EQ(j["valid"], true);
    EXPECT_EQ(run("validate --model " + net + " --predictor B --effect A").status, 1);
}

TEST(Cli, MeasureUnderPolicy) {
    auto r = run("measure --model " + net + " --predictor B --measure precision --policy " + models +
                 "/policy_gamma_beta.json");
    ASSERT_EQ(r.status, 0);
    auto j = Json::parse(r.out);
    EXPECT_EQ(j["result"]["exact"], "1/2");
    EXPECT_EQ(j["confusion"]["tp"], "1/6");
}

TEST(Cli, AverageMeasure) {
    auto r = run("measure --model " + net + " --predictor A --samples 20000");
    ASSERT_EQ(r.status, 0);
    auto j = Json::parse(r.out);
    EXPECT_NEAR(j["report"]["estimate"].get<double>(), 0.4266, 0.01);
    EXPECT_EQ(j["report"]["samples"], 20000);
}

TEST(Cli, ConfusionAndCheck) {
    auto r = run("confusion --model " + net + " --predictor A");
    ASSERT_EQ(r.status, 0);
    auto j = Json::parse(r.out);
    EXPECT_EQ(j["confusion"]["fp"], "5/12");
    EXPECT_EQ(j["measures"]["fscore"]["exact"], "3/7");

    r = run("check --model " + net + " --predictor B --mode spr");
    ASSERT_EQ(r.status, 0);
    EXPECT_EQ(Json::parse(r.out)["exists"], true);
    r = run("check --model " + net + " --predictor A --mode gpr");
    ASSERT_EQ(r.status, 0);
    j = Json::parse(r.out);
    EXPECT_EQ(j["exists"], false);
    EXPECT_EQ(j["verdict"]["exactness"], "oracle-complete");
}

TEST(Cli, TransformKinds) {
    auto r = run("transform --model " + net + " --predictor B");
    ASSERT_EQ(r.status, 0);
    auto j = Json::parse(r.out);
    auto states = j["result"]["states"];
    for (auto t : {"__TP", "__FP", "__FN", "__TN"}) EXPECT_NE(std::find(states.begin(), states.end(), t), states.end());
    EXPECT_EQ(j["sidecar"]["p_star"], "1");

    r = run("transform --model " + net + " --predictor B --kind star --p 3/4");
    ASSERT_EQ(r.status, 0);
    EXPECT_EQ(Json::parse(r.out)["sidecar"]["p"], "3/4");
    EXPECT_EQ(run("transform --model " + net + " --predictor B --kind star --p 2").status, 1);

    r = run("transform --model " + net + " --predictor A --kind two-copy --output text");
    ASSERT_EQ(r.status, 0);
    EXPECT_NE(r.out.find("sidecar.C0: [\"A#0\"]"), std::string::npos);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run("--help").status, 0);
    EXPECT_EQ(run("").status, 2);
    EXPECT_EQ(run("measure --model " + net).status, 2);                  // missing --predictor
    EXPECT_EQ(run("measure --model /nonexistent.json --predictor A").status, 2);
    EXPECT_EQ(run("measure --model " + net + " --predictor A --measure accuracy").status, 1);
    EXPECT_EQ(run("measure --model " + net + " --predictor Q").status, 1);
    EXPECT_EQ(run("measure --model " + net + " --predictor A --samples 1").status, 1);
    EXPECT_EQ(run("measure --model " + net + " --predictor A --policy " + models + "/suzy_billy.json").status, 2);
    EXPECT_EQ(run("check --model " + net + " --predictor A --mode xpr").status, 1);
}

TEST(Cli, Deterministic) {
    std::vector<std::string> commands{
        "validate --model " + net,
        "measure --model " + net + " --predictor B --samples 5000 --seed 3",
        "measure --model " + net + " --predictor B --samples 5000 --seed 3 --threads 2",
        "confusion --model " + net + " --predictor A",
        "causal-volume --model " + net + " --predictor B --samples 2000 --mode gpr",
        "check --model " + net + " --predictor A,B --mode gpr --seed 5",
        "check --model " + net + " --predictor B",
        "transform --model " + net + " --predictor B --kind canonical",
    };
    for (auto const& c : commands) {
        auto a = run(c), b = run(c);
        ASSERT_EQ(a.status, 0) << c;
        auto ja = Json::parse(a.out), jb = Json::parse(b.out);
        drop_timing(ja);
        drop_timing(jb);
        EXPECT_EQ(ja, jb) << c;
    }
}
