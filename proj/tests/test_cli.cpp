#include "gsim/dataset_io.hpp"
#include "gsim/envs.hpp"
#include "gsim/errors.hpp"
#include "gsim/settings.hpp"
#include "gsim/text.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

using namespace gsim;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
    static const fs::path dir = [] {
        auto p = fs::temp_directory_path() / "gsim_cli_test";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

int run(const std::string& args) {
    const std::string cmd = "cd '" + work_dir().string() + "' && '" GSIM_CLI "' " + args + " >out.txt 2>err.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string out_text() { return read_file((work_dir() / "out.txt").string()); }
std::string err_text() { return read_file((work_dir() / "err.txt").string()); }

} // namespace

TEST(Settings, ParsesFlatKeysWithComments) {
    const auto kv = settings::parse_kv("# comment\nga.population = 12\n\n  grid.taus=0, 5 ,10  # trailing\n");
    ASSERT_EQ(kv.size(), 2u);
    EXPECT_EQ(kv.at("ga.population"), "12");
    settings::RunSettings s;
    settings::apply(s, kv);
    EXPECT_EQ(s.ga.population, 12u);
    EXPECT_EQ(s.grid.taus, (std::vector<std::int64_t>{0, 5, 10}));
}

TEST(Settings, RejectsMalformedAndUnknown) {
    EXPECT_THROW((void)settings::parse_kv("novalue\n"), ParseError);
    EXPECT_THROW((void)settings::parse_kv("a = 1\na = 2\n"), ParseError);
    settings::RunSettings s;
    EXPECT_THROW(settings::apply(s, {{"ga.popsize", "3"}}), ConfigError);
    EXPECT_THROW(settings::apply(s, {{"ga.population", "many"}}), ConfigError);
    EXPECT_THROW(settings::apply(s, {{"loop.mode", "sometimes"}}), ConfigError);
}

TEST(Settings, GlobalMcAppliesBeforeSpecificKeys) {
    settings::RunSettings s;
    settings::apply(s, {{"mc", "7"}, {"diag.mc", "3"}});
    EXPECT_EQ(s.ga.mc_draws, 7u);
    EXPECT_EQ(s.grid.mc, 7u);
    EXPECT_EQ(s.diag.mc, 3u);
}

TEST(Settings, DefaultsMatchModules) {
    const settings::RunSettings s;
    EXPECT_EQ(s.grid.taus.size(), 20u);
    EXPECT_EQ(s.loop.max_iterations, 5u);
    EXPECT_EQ(s.loop.patience, 3u);
    EXPECT_EQ(s.ga.population, 200u);
    for (const auto& k : settings::known_keys()) EXPECT_NE(k.find_first_not_of("abcdefghijklmnopqrstuvwxyz_."), 0u);
}

TEST(Cli, HelpExitsZero) {
    EXPECT_EQ(run("--help"), 0);
    EXPECT_NE(out_text().find("gen-data"), std::string::npos);
    for (const auto* sub : {"gen-data", "calibrate", "loop", "eval", "experiment", "experiment lockdown",
                            "experiment hospital-grid", "experiment supply-heatmap", "experiment leadtime"}) {
        EXPECT_EQ(run(std::string(sub) + " --help"), 0) << sub;
    }
}

TEST(Cli, UnknownSubcommandOrFlagIsUserError) {
    EXPECT_EQ(run("frobnicate"), 1);
    EXPECT_EQ(run("gen-data --env sir --what 3 --out x.jsonl"), 1);
    EXPECT_EQ(run(""), 1);
}

TEST(Cli, BadInputsAreUserErrors) {
    EXPECT_EQ(run("gen-data --env mars --out x.jsonl"), 1);
    EXPECT_EQ(run("--config missing.kv experiment lockdown"), 1);
    write_file((work_dir() / "bad.kv").string(), "no.such.key = 1\n");
    EXPECT_EQ(run("--config bad.kv experiment lockdown"), 1);
    EXPECT_NE(err_text().find("no.such.key"), std::string::npos);
    EXPECT_EQ(run("eval --dsl none.gsim --data none.jsonl"), 1);
}

TEST(Cli, GenDataWritesRequestedTrajectories) {
    ASSERT_EQ(run("gen-data --env sir --n 300 --horizon 60 --seed 7 --out d.jsonl"), 0);
    const auto d = load_dataset(work_dir() / "d.jsonl");
    EXPECT_EQ(d.size(), 300u);
    EXPECT_EQ(d.horizon(), 60u);
    EXPECT_EQ(d, envs::generate_dataset(envs::preset("sir"), 300, 60, {}, 7));
}

TEST(Cli, CalibrateEvalAndLoopRoundTrip) {
    ASSERT_EQ(run("gen-data --env sir --n 30 --seed 3 --split 15 15 0 --out s.jsonl"), 0);
    write_file((work_dir() / "sir.gsim").string(), envs::gt_config_text(envs::preset("sir")));
    write_file((work_dir() / "small.kv").string(), "ga.population = 8\nga.generations = 1\nmc = 3\n");
    ASSERT_EQ(run("--config small.kv calibrate --dsl sir.gsim --data s.jsonl --out cal"), 0);
    EXPECT_TRUE(fs::exists(work_dir() / "cal/params.csv"));
    EXPECT_TRUE(fs::exists(work_dir() / "cal/history.csv"));
    ASSERT_EQ(run("--config small.kv eval --dsl sir.gsim --params cal/params.csv --data s.jsonl"), 0);
    EXPECT_EQ(out_text().rfind("wass=", 0), 0u);

    write_file((work_dir() / "script.txt").string(),
               "```\n" + envs::gt_config_text(envs::preset("sir")) + "```\n");
    ASSERT_EQ(run("--config small.kv loop --data s.jsonl --script script.txt --mode zeroshot --out run"), 0);
    EXPECT_NE(out_text().find("Val Wasserstein Loss"), std::string::npos);
    EXPECT_TRUE(fs::exists(work_dir() / "run/summary.csv"));
}

TEST(Cli, HttpLoopWithoutKeyIsUserError) {
    ::unsetenv("GSIM_API_KEY");
    ASSERT_EQ(run("gen-data --env sir --n 10 --seed 3 --split 5 5 0 --out k.jsonl"), 0);
    EXPECT_EQ(run("loop --data k.jsonl --provider http --model m"), 1);
}

TEST(Cli, ExperimentsWriteCsv) {
    ASSERT_EQ(run("--mc 4 experiment lockdown --out l.csv"), 0);
    EXPECT_EQ(read_file((work_dir() / "l.csv").string()).rfind("alpha,t,S,I,R\n", 0), 0u);
    write_file((work_dir() / "g.kv").string(), "grid.taus = 0,20\ngrid.deltas = 0,10\ngrid.horizon = 60\nmc = 2\n");
    ASSERT_EQ(run("--config g.kv experiment hospital-grid --env hospital --out g.csv"), 0);
    EXPECT_NE(err_text().find("argmin"), std::string::npos);
    ASSERT_EQ(run("--mc 3 experiment supply-heatmap --out h.csv"), 0);
    ASSERT_EQ(run("--mc 3 experiment leadtime --out lt.csv"), 0);
    const auto first = read_file((work_dir() / "lt.csv").string());
    ASSERT_EQ(run("--mc 3 experiment leadtime --out lt.csv"), 0);
    EXPECT_EQ(first, read_file((work_dir() / "lt.csv").string()));
}
