#include "gsim/envs.hpp"
#include "gsim/errors.hpp"
#include "gsim/loop.hpp"
#include "gsim/text.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>

using namespace gsim;
using namespace gsim::loop;
namespace fs = std::filesystem;

namespace {

std::string sir_config(const std::string& name, double beta) {
    return "config " + name + " {\n  params {\n    beta = " + format_number(beta) +
           " in [0, 2];\n    gamma = 0.1 in [0, 1];\n  }\n  state {\n    S : int = 990;\n    I : int = 10;\n"
           "    R : int = 0;\n  }\n  rules {\n"
           "    CompartmentFlow(from = S, to = I, count = Binomial(n = S, p = clip(1 - exp(-beta * I / (S + I + R)), 0, 1)));\n"
           "    CompartmentFlow(from = I, to = R, count = Binomial(n = I, p = gamma));\n  }\n}\n";
}

std::string reply(const std::string& config) { return "Here is a candidate.\n```\n" + config + "```\n"; }

const Task& sir_task() {
    static const Task task = [] {
        Task t;
        t.spec = envs::preset("sir");
        const auto data = envs::generate_dataset(t.spec, 40, 30, envs::default_policy(t.spec), 11);
        const auto split = split_dataset(data, 20, 20, 0, 3);
        t.train = split.subset(Split::Train);
        t.val = split.subset(Split::Val);
        return t;
    }();
    return task;
}

metrics::DiagnosticConfig small_diag() {
    metrics::DiagnosticConfig d;
    d.mc = 5;
    d.seed = 4;
    d.rules = envs::env_rules(envs::preset("sir"));
    return d;
}

LoopSettings uncalibrated(std::size_t g) {
    LoopSettings s;
    s.max_iterations = g;
    s.calibrator = Calibrator::None;
    return s;
}

gfo::GaSettings tiny_ga() {
    gfo::GaSettings ga;
    ga.population = 8;
    ga.generations = 2;
    ga.mc_draws = 3;
    return ga;
}

std::map<std::string, std::string> dir_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path().string());
    }
    return out;
}

fs::path fresh_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("gsim_loop_" + name);
    fs::remove_all(p);
    return p;
}

// strictly improving: far, nearer, truth
const std::vector<std::string> kImproving = {reply(sir_config("far", 1.6)), reply(sir_config("mid", 0.9)),
                                             reply(sir_config("truth", 0.5))};

} // namespace

TEST(EarlyStop, FlatTailFiresAfterPatience) {
    const std::vector<double> s{5, 4, 4, 4, 4};
    EXPECT_FALSE(early_stop(std::span(s).first(4), 3));
    EXPECT_TRUE(early_stop(s, 3));
}

TEST(EarlyStop, StrictlyDecreasingNeverFires) {
    std::vector<double> s;
    for (int i = 0; i < 20; ++i) {
        s.push_back(100.0 - i);
        EXPECT_FALSE(early_stop(s, 3));
    }
}

TEST(EarlyStop, ShortHistoryIsFalse) {
    const std::vector<double> s{1, 2, 3};
    EXPECT_FALSE(early_stop(s, 3));
    EXPECT_TRUE(early_stop(std::vector<double>{1, 2, 3, 4}, 3));
}

TEST(EarlyStop, InfiniteScoresCountAsNoImprovement) {
    const double inf = std::numeric_limits<double>::infinity();
    EXPECT_TRUE(early_stop(std::vector<double>{inf, inf}, 1));
    EXPECT_FALSE(early_stop(std::vector<double>{inf, 3.0}, 1));
}

TEST(Feedback, ContainsLossNamedMseAndParams) {
    HistoryEntry e;
    e.report.wasserstein = 0.79312;
    e.report.mse = {{"S", 2.85}, {"I", 4.7}, {"R", 2.04}};
    e.param_names = {"beta", "gamma"};
    e.params = {0.4486, 0.0841};
    const auto text = synthesize_feedback(e);
    EXPECT_NE(text.find("Val Wasserstein Loss: 0.793"), std::string::npos);
    for (const auto* s : {"S 2.85", "I 4.7", "R 2.04", "beta = 0.4486", "gamma = 0.0841"}) {
        EXPECT_NE(text.find(s), std::string::npos) << s;
    }
    EXPECT_EQ(text.find("violation"), std::string::npos);
    EXPECT_EQ(text, synthesize_feedback(e));
    e.report.violations = 7;
    EXPECT_NE(synthesize_feedback(e).find("violations: 7"), std::string::npos);
}

TEST(WarmStart, MapsByNameAndClips) {
    const auto cfg = dsl::parse_config(sir_config("x", 0.3));
    const auto w = map_warm_start(cfg, {"gamma", "other"}, {5.0, 1.0});
    ASSERT_EQ(w.size(), 2u);
    EXPECT_DOUBLE_EQ(w[0], 0.3);
    EXPECT_DOUBLE_EQ(w[1], 1.0);
}

TEST(RunLoop, ImprovingQueueReturnsThird) {
    llm::ScriptedProvider p(kImproving);
    const auto r = run_loop(sir_task(), p, uncalibrated(3), small_diag(), 1);
    ASSERT_EQ(r.history.size(), 3u);
    EXPECT_GT(r.history[0].score(), r.history[1].score());
    EXPECT_GT(r.history[1].score(), r.history[2].score());
    ASSERT_TRUE(r.best);
    EXPECT_EQ(*r.best, 2u);
    EXPECT_EQ(r.stop, StopReason::Budget);
    EXPECT_EQ(r.provider_calls, 3u);
}

TEST(RunLoop, WorseningQueueStopsEarlyWithFirst) {
    llm::ScriptedProvider p({kImproving[2], kImproving[1], kImproving[0], kImproving[0]});
    auto s = uncalibrated(5);
    s.patience = 3;
    const auto r = run_loop(sir_task(), p, s, small_diag(), 1);
    EXPECT_EQ(r.stop, StopReason::EarlyStop);
    EXPECT_EQ(r.history.size(), 4u);
    EXPECT_EQ(*r.best, 0u);
    EXPECT_EQ(p.calls(), 4u);
}

TEST(RunLoop, BestMinimizesScoreOverHistory) {
    llm::ScriptedProvider p({kImproving[1], kImproving[2], kImproving[0]});
    const auto r = run_loop(sir_task(), p, uncalibrated(3), small_diag(), 1);
    for (const auto& e : r.history) EXPECT_LE(r.best_entry()->score(), e.score());
}

TEST(RunLoop, PromptsCarryHistoryAndFeedback) {
    llm::ScriptedProvider p(kImproving);
    (void)run_loop(sir_task(), p, uncalibrated(3), small_diag(), 1);
    ASSERT_EQ(p.prompts().size(), 3u);
    EXPECT_TRUE(p.prompts()[0].history.empty());
    EXPECT_EQ(p.prompts()[2].history.size(), 2u);
    EXPECT_NE(p.prompts()[1].feedback.find("Val Wasserstein Loss"), std::string::npos);
    EXPECT_NE(p.prompts()[2].user_text().find("iteration 2 out of 3"), std::string::npos);
}

TEST(RunLoop, ZeroShotUsesDefaultsWithoutCalibration) {
    llm::ScriptedProvider p({kImproving[1], kImproving[2]});
    LoopSettings s;
    s.mode = Mode::ZeroShot;
    const auto r = run_loop(sir_task(), p, s, small_diag(), 1);
    EXPECT_EQ(p.calls(), 1u);
    EXPECT_EQ(r.calibrator_calls, 0u);
    ASSERT_EQ(r.history.size(), 1u);
    EXPECT_EQ(r.history[0].params, (std::vector<double>{0.9, 0.1}));
}

TEST(RunLoop, SingleIterationFullEqualsZeroShotOptim) {
    LoopSettings full;
    full.max_iterations = 1;
    full.ga = tiny_ga();
    LoopSettings optim = full;
    optim.mode = Mode::ZeroShotOptim;
    llm::ScriptedProvider pa({kImproving[0]});
    llm::ScriptedProvider pb({kImproving[0]});
    const auto a = run_loop(sir_task(), pa, full, small_diag(), 9);
    const auto b = run_loop(sir_task(), pb, optim, small_diag(), 9);
    ASSERT_EQ(a.history.size(), 1u);
    EXPECT_EQ(a.calibrator_calls, 1u);
    EXPECT_EQ(a.history[0].params, b.history[0].params);
    EXPECT_EQ(a.history[0].feedback, b.history[0].feedback);
    EXPECT_EQ(summary_csv(a), summary_csv(b));
}

TEST(RunLoop, CorrectiveRoundRecoversFromBadReply) {
    llm::ScriptedProvider p({"I forgot the code block.", reply(sir_config("ok", 0.5))});
    const auto r = run_loop(sir_task(), p, uncalibrated(1), small_diag(), 1);
    ASSERT_EQ(r.history.size(), 1u);
    EXPECT_FALSE(r.history[0].failed);
    EXPECT_EQ(r.provider_calls, 2u);
    EXPECT_NE(p.prompts()[1].correction.find("no config block"), std::string::npos);
}

TEST(RunLoop, ExhaustedCorrectionsRecordFailure) {
    llm::ScriptedProvider p({"x", "y", reply("config broken {"), reply(sir_config("late", 0.5))});
    auto s = uncalibrated(2);
    s.corrective_rounds = 2;
    const auto r = run_loop(sir_task(), p, s, small_diag(), 1);
    ASSERT_EQ(r.history.size(), 2u);
    EXPECT_TRUE(r.history[0].failed);
    EXPECT_TRUE(std::isinf(r.history[0].score()));
    EXPECT_NE(r.history[0].feedback.find("could not be evaluated"), std::string::npos);
    EXPECT_EQ(*r.best, 1u);
}

TEST(RunLoop, ProviderFailureKeepsHistory) {
    llm::ScriptedProvider p({kImproving[0]});
    const auto r = run_loop(sir_task(), p, uncalibrated(3), small_diag(), 1);
    EXPECT_EQ(r.stop, StopReason::ProviderFailure);
    EXPECT_EQ(r.history.size(), 1u);
    EXPECT_FALSE(r.stop_detail.empty());
}

TEST(RunLoop, EmptySplitsRejected) {
    llm::ScriptedProvider p(kImproving);
    Task t = sir_task();
    t.val = Dataset{};
    EXPECT_THROW((void)run_loop(t, p, uncalibrated(1), small_diag(), 1), SizeError);
}

TEST(RunLoop, RunDirectoryIsByteStable) {
    const auto a = fresh_dir("stable_a");
    const auto b = fresh_dir("stable_b");
    for (const auto& dir : {a, b}) {
        llm::ScriptedProvider p(kImproving);
        auto s = uncalibrated(3);
        s.calibrator = Calibrator::Es;
        s.ga = tiny_ga();
        s.run_dir = dir.string();
        (void)run_loop(sir_task(), p, s, small_diag(), 5);
    }
    const auto ca = dir_contents(a);
    EXPECT_EQ(ca, dir_contents(b));
    EXPECT_TRUE(ca.count("summary.csv"));
    EXPECT_TRUE(ca.count("iter_002/diagnostics.csv"));
    EXPECT_TRUE(ca.count("iter_000/params.csv"));
}

TEST(RunLoop, ResumeMatchesUninterruptedRun) {
    const auto full_dir = fresh_dir("resume_full");
    const auto part_dir = fresh_dir("resume_part");
    auto s = uncalibrated(3);
    s.calibrator = Calibrator::Es;
    s.ga = tiny_ga();

    s.run_dir = full_dir.string();
    llm::ScriptedProvider pf(kImproving);
    const auto full = run_loop(sir_task(), pf, s, small_diag(), 5);

    s.run_dir = part_dir.string();
    s.max_iterations = 2;
    llm::ScriptedProvider p1({kImproving[0], kImproving[1]});
    (void)run_loop(sir_task(), p1, s, small_diag(), 5);
    s.max_iterations = 3;
    s.resume = true;
    llm::ScriptedProvider p2({kImproving[2]});
    const auto resumed = run_loop(sir_task(), p2, s, small_diag(), 5);

    EXPECT_EQ(p2.calls(), 1u);
    EXPECT_EQ(summary_csv(full), summary_csv(resumed));
    EXPECT_EQ(dir_contents(full_dir), dir_contents(part_dir));
    EXPECT_EQ(p2.prompts()[0].user_text(), pf.prompts()[2].user_text());
}

TEST(LoopSettings, Validation) {
    LoopSettings s;
    s.max_iterations = 0;
    EXPECT_THROW(s.check(), ConfigError);
    s = LoopSettings{};
    s.patience = 0;
    EXPECT_THROW(s.check(), ConfigError);
    s = LoopSettings{};
    s.resume = true;
    EXPECT_THROW(s.check(), ConfigError);
    EXPECT_EQ(parse_mode("zeroshot-optim"), Mode::ZeroShotOptim);
    EXPECT_THROW((void)parse_calibrator("bayes"), ConfigError);
}
