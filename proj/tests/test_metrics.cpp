#include "gsim/envs.hpp"
#include "gsim/errors.hpp"
#include "gsim/interpreter.hpp"
#include "gsim/metrics.hpp"
#include "gsim/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gsim;
using namespace gsim::metrics;

namespace {

Samples col(std::initializer_list<double> xs) {
    Samples s;
    for (double x : xs) s.push_back({x});
    return s;
}

Samples random_set(RngStream& rng, std::size_t n, std::size_t d, double shift = 0.0) {
    Samples s(n, std::vector<double>(d));
    for (auto& r : s) {
        for (auto& x : r) x = rng.normal(shift, 1.0);
    }
    return s;
}

dsl::DirectedGraph graph(std::vector<std::string> nodes, std::vector<std::pair<int, int>> edges) {
    dsl::DirectedGraph g;
    g.nodes = std::move(nodes);
    g.adj.assign(g.nodes.size(), std::vector<bool>(g.nodes.size(), false));
    for (auto [a, b] : edges) g.adj[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = true;
    return g;
}

SystemState supply_state(std::int64_t inv, std::int64_t backlog) {
    SystemState s;
    s.set("inventory", inv);
    s.set("pipeline", Pipeline{});
    s.set("backlog", backlog);
    s.set("t", std::int64_t{0});
    return s;
}

} // namespace

TEST(Wasserstein, Examples) {
    EXPECT_EQ(wasserstein1(col({3, 1, 2}), col({3, 1, 2})), 0.0);
    EXPECT_DOUBLE_EQ(wasserstein1(col({0, 1, 2}), col({1, 2, 3})), 1.0);
    const Samples a{{0, 0}, {1, 5}, {2, 2}};
    const Samples b{{1, 3}, {2, 8}, {3, 5}};
    EXPECT_DOUBLE_EQ(wasserstein1(a, b), 2.0);
}

TEST(Wasserstein, ShapeErrors) {
    EXPECT_THROW((void)wasserstein1(col({1, 2}), col({1})), ShapeError);
    EXPECT_THROW((void)wasserstein1(Samples{{1, 2}}, Samples{{1}}), ShapeError);
}

TEST(Wasserstein, MetricAxiomsOnRandomSets) {
    RngStream rng(42, {0});
    for (int rep = 0; rep < 50; ++rep) {
        const auto x = random_set(rng, 30, 1);
        const auto y = random_set(rng, 30, 1, 0.5);
        const auto z = random_set(rng, 30, 1, -0.3);
        EXPECT_GE(wasserstein1(x, y), 0.0);
        EXPECT_EQ(wasserstein1(x, y), wasserstein1(y, x));
        EXPECT_LE(wasserstein1(x, z), wasserstein1(x, y) + wasserstein1(y, z) + 1e-12);
        Samples perm(x.rbegin(), x.rend());
        EXPECT_EQ(wasserstein1(x, perm), 0.0);
    }
}

TEST(Wasserstein, ShiftLawIsExact) {
    RngStream rng(7, {0});
    for (double c : {0.25, -3.0, 17.5}) {
        const auto x = random_set(rng, 100, 1);
        Samples y = x;
        for (auto& r : y) r[0] += c;
        EXPECT_NEAR(wasserstein1(x, y), std::abs(c), 1e-12);
    }
}

TEST(Wasserstein, UnequalSizes) {
    EXPECT_DOUBLE_EQ(wasserstein1_1d({0, 1, 2}, {1, 2, 3}), 1.0);
    EXPECT_DOUBLE_EQ(wasserstein1_1d({0, 0, 1, 1}, {0, 1}), 0.0);
    EXPECT_DOUBLE_EQ(wasserstein1_1d({0}, {1, 3}), 2.0);
    EXPECT_DOUBLE_EQ(wasserstein1_1d({0, 1, 2, 3}, {5}), 3.5);
    EXPECT_THROW((void)wasserstein1_1d({}, {1}), SizeError);
}

TEST(Wasserstein, UnequalSizeAgreesWithReplication) {
    RngStream rng(3, {0});
    std::vector<double> a(7);
    std::vector<double> b(3);
    for (auto& x : a) x = rng.normal(0, 1);
    for (auto& x : b) x = rng.normal(1, 2);
    // replicating each sample to a common size leaves the distribution unchanged
    Samples ra;
    Samples rb;
    for (double x : a) {
        for (int k = 0; k < 3; ++k) ra.push_back({x});
    }
    for (double x : b) {
        for (int k = 0; k < 7; ++k) rb.push_back({x});
    }
    EXPECT_NEAR(wasserstein1_1d(a, b), wasserstein1(ra, rb), 1e-12);
}

TEST(Mmd, Examples) {
    RngStream rng(5, {0});
    const auto x = random_set(rng, 40, 3);
    EXPECT_NEAR(mmd_rbf(x, x), 0.0, 1e-12);
    EXPECT_NEAR(mmd_rbf(x, x, 0.7), 0.0, 1e-12);
    EXPECT_NEAR(mmd_rbf(Samples{{0}}, Samples{{10}}, 1.0), std::sqrt(2.0 - 2.0 * std::exp(-50.0)), 1e-9);
    const auto y = random_set(rng, 25, 3, 1.0);
    EXPECT_NEAR(mmd_rbf(x, y), mmd_rbf(y, x), 1e-12);
    EXPECT_GT(mmd_rbf(x, y), 0.0);
}

TEST(Mmd, Errors) {
    EXPECT_THROW((void)mmd_rbf(Samples{{0}}, Samples{{1}}, 0.0), DomainError);
    EXPECT_THROW((void)mmd_rbf(Samples{{0}}, Samples{{1}}, -1.0), DomainError);
    EXPECT_THROW((void)mmd_rbf(Samples{}, Samples{{1}}), SizeError);
}

TEST(Mmd, NonnegativeOnRandomSets) {
    RngStream rng(9, {0});
    for (int rep = 0; rep < 30; ++rep) {
        EXPECT_GE(mmd_rbf(random_set(rng, 10, 2), random_set(rng, 12, 2, 0.2)), 0.0);
    }
}

TEST(Mse, Examples) {
    const auto m = mse_per_dim(Samples{{1, 2}}, Samples{{1, 4}}, {"a", "b"});
    ASSERT_EQ(m.size(), 2u);
    EXPECT_EQ(m[0].value, 0.0);
    EXPECT_EQ(m[1].value, 4.0);
    EXPECT_EQ(m[1].name, "b");
    const Samples p{{1, 2}, {3, 5}};
    for (const auto& v : mse_per_dim(p, p, {"a", "b"})) EXPECT_EQ(v.value, 0.0);
    EXPECT_THROW((void)mse_per_dim(Samples{{1}}, Samples{{1}, {2}}, {"a"}), ShapeError);
}

TEST(Mse, DoublingErrorsQuadruples) {
    RngStream rng(1, {0});
    const auto obs = random_set(rng, 20, 3);
    auto pred = obs;
    auto pred2 = obs;
    for (std::size_t r = 0; r < obs.size(); ++r) {
        for (std::size_t k = 0; k < 3; ++k) {
            const double e = rng.normal(0, 1);
            pred[r][k] += e;
            pred2[r][k] += 2 * e;
        }
    }
    const auto a = mse_per_dim(pred, obs, {"x", "y", "z"});
    const auto b = mse_per_dim(pred2, obs, {"x", "y", "z"});
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(b[k].value, 4 * a[k].value, 1e-9 * b[k].value);
}

TEST(Violations, GroundTruthRolloutsAreClean) {
    for (const auto& name : envs::preset_names()) {
        const auto spec = envs::preset(name);
        const auto d = envs::generate_dataset(spec, 10, 40, envs::default_policy(spec), 2);
        for (const auto& t : d.trajectories) EXPECT_EQ(domain_violations(t, envs::env_rules(spec)), 0) << name;
    }
}

TEST(Violations, ForcedBreaches) {
    const auto rules = envs::env_rules(envs::preset("supply"));
    Trajectory t;
    t.init = supply_state(5, 0);
    t.steps.push_back({Action{1}, supply_state(-1, 0)});
    t.steps.push_back({Action{1}, supply_state(2, 0)});
    EXPECT_EQ(domain_violations(t, rules), 1);
    t.steps.push_back({Action{1}, supply_state(-1, -2)});
    EXPECT_EQ(domain_violations(t, rules), 3);
}

TEST(Violations, SirSumDrift) {
    const auto rules = envs::env_rules(envs::preset("sir"));
    auto sir = [](std::int64_t s, std::int64_t i, std::int64_t r) {
        SystemState x;
        x.set("S", s);
        x.set("I", i);
        x.set("R", r);
        return x;
    };
    Trajectory t;
    t.init = sir(90, 10, 0);
    t.steps.push_back({std::nullopt, sir(85, 14, 1)});
    t.steps.push_back({std::nullopt, sir(85, 15, 1)});
    EXPECT_EQ(domain_violations(t, rules), 1);
}

TEST(GraphScores, Examples) {
    const auto truth = graph({"A", "B", "C"}, {{0, 1}, {1, 2}});
    auto s = shd_f1(truth, truth);
    EXPECT_EQ(s.shd, 0);
    EXPECT_EQ(s.f1, 100.0);
    s = shd_f1(graph({"A", "B", "C"}, {{0, 1}, {1, 2}, {0, 2}}), truth);
    EXPECT_EQ(s.shd, 1);
    EXPECT_NEAR(s.f1, 80.0, 1e-12);
    s = shd_f1(graph({"A", "B", "C"}, {}), truth);
    EXPECT_EQ(s.shd, 2);
    EXPECT_EQ(s.f1, 0.0);
    s = shd_f1(graph({"A", "B", "C"}, {{1, 0}, {1, 2}}), truth);
    EXPECT_EQ(s.shd, 1);
    const auto empty = graph({"A", "B"}, {});
    EXPECT_EQ(shd_f1(empty, empty).f1, 100.0);
    EXPECT_THROW((void)shd_f1(graph({"A", "B"}, {}), truth), SchemaError);
}

TEST(GraphScores, RelabelingInvariance) {
    const auto truth = graph({"A", "B", "C", "D"}, {{0, 1}, {1, 2}, {2, 3}, {3, 3}});
    const auto pred = graph({"A", "B", "C", "D"}, {{0, 1}, {2, 1}, {0, 3}});
    const auto base = shd_f1(pred, truth);
    // same graphs with nodes listed in a different order
    const auto truth2 = graph({"D", "C", "B", "A"}, {{3, 2}, {2, 1}, {1, 0}, {0, 0}});
    const auto pred2 = graph({"C", "A", "D", "B"}, {{1, 3}, {0, 3}, {1, 2}});
    const auto moved = shd_f1(pred2, truth2);
    EXPECT_EQ(base.shd, moved.shd);
    EXPECT_DOUBLE_EQ(base.f1, moved.f1);
}

TEST(GraphScores, GroundTruthGraphsMatchThemselves) {
    for (const auto& name : {"sir", "supply", "hospital"}) {
        const auto g = dsl::dependency_graph(envs::gt_config(name));
        EXPECT_GT(g.edge_count(), 0u);
        const auto s = shd_f1(g, g);
        EXPECT_EQ(s.shd, 0);
        EXPECT_EQ(s.f1, 100.0);
    }
}

TEST(NextState, SharedStreamsGiveZero) {
    const auto spec = envs::preset("sir");
    const auto test = envs::generate_dataset(spec, 5, 10, {}, 1);
    const auto sim = envs::reference_simulator(spec);
    EXPECT_EQ(next_state_distance(sim, sim, test, 200, 3, StreamMode::Shared), 0.0);
}

TEST(NextState, ShiftLawOnOneDimension) {
    const auto spec = envs::preset("sir");
    const auto test = envs::generate_dataset(spec, 5, 10, {}, 1);
    const auto sim = envs::reference_simulator(spec);
    Simulator shifted = sim;
    shifted.step = [base = sim.step](const SystemState& s, const Action& a, const StepContext& c) {
        SystemState n = base(s, a, c);
        n.set("R", n.get_int("R") + 6);
        return n;
    };
    EXPECT_NEAR(next_state_distance(sim, shifted, test, 100, 3, StreamMode::Shared), 2.0, 1e-12);
}

TEST(NextState, ParallelMatchesSerial) {
    const auto spec = envs::preset("hospital");
    const auto test = envs::generate_dataset(spec, 6, 5, {}, 1);
    const auto sim = envs::reference_simulator(spec);
    EXPECT_EQ(next_state_distance(sim, sim, test, 50, 3, StreamMode::Independent, 1),
              next_state_distance(sim, sim, test, 50, 3, StreamMode::Independent, 4));
}

TEST(NextState, DslTwinMatchesReferenceUnderSharedStreams) {
    for (const auto& name : {"sir", "supply", "hospital"}) {
        const auto spec = envs::preset(name);
        const auto test = envs::generate_dataset(spec, 4, 5, envs::default_policy(spec), 1);
        const auto twin = dsl::make_simulator(envs::gt_config(spec), spec.params);
        EXPECT_EQ(next_state_distance(envs::reference_simulator(spec), twin, test, 50, 3, StreamMode::Shared), 0.0)
            << name;
    }
}

TEST(Diagnose, ReportFieldsAndWeights) {
    const auto spec = envs::preset("sir");
    const auto val = envs::generate_dataset(spec, 10, 30, {}, 4);
    const auto cfg = envs::gt_config(spec);
    DiagnosticConfig dc;
    dc.mc = 5;
    dc.rules = envs::env_rules(spec);
    const auto r = diagnose(cfg, dsl::ParameterVector(cfg), val, dc);
    EXPECT_GT(r.wasserstein, 0.0);
    EXPECT_GE(r.mmd, 0.0);
    EXPECT_EQ(r.violations, 0);
    ASSERT_EQ(r.mse.size(), 3u);
    EXPECT_EQ(r.mse[0].name, "S");
    EXPECT_EQ(r.aggregate(dc), r.wasserstein);
    const auto kv = r.to_kv();
    EXPECT_NE(kv.find("wass="), std::string::npos);
    EXPECT_NE(kv.find("mse.I="), std::string::npos);
    EXPECT_NE(kv.find("param.beta=0.5"), std::string::npos);
    EXPECT_EQ(r.csv_header().size(), r.csv_values().size());
}

TEST(Diagnose, ConfigChecks) {
    DiagnosticConfig dc;
    dc.w_wasserstein = 0.0;
    EXPECT_THROW(dc.check(), ConfigError);
    dc.w_mse = -1.0;
    EXPECT_THROW(dc.check(), ConfigError);
}

TEST(Diagnose, FarParamsScoreWorseThanTruth) {
    const auto spec = envs::preset("sir");
    const auto cfg = envs::gt_config(spec);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto val = envs::generate_dataset(spec, 20, 60, {}, 100 + seed);
        DiagnosticConfig dc;
        dc.mc = 5;
        dc.seed = seed;
        const double gt = diagnose(cfg, dsl::ParameterVector(cfg), val, dc).wasserstein;
        const std::vector<double> far{2.0, 1.0};
        const double bad = diagnose(cfg, dsl::ParameterVector(cfg, far), val, dc).wasserstein;
        EXPECT_LT(gt, bad);
    }
}

TEST(Diagnose, GroundTruthBelowSelfNoiseFloor) {
    // floor: spread of GT scores over independently resampled validation sets
    const auto spec = envs::preset("sir");
    const auto cfg = envs::gt_config(spec);
    DiagnosticConfig dc;
    dc.mc = 10;
    std::vector<double> scores;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto val = envs::generate_dataset(spec, 20, 60, {}, 200 + s);
        scores.push_back(diagnose(cfg, dsl::ParameterVector(cfg), val, dc).wasserstein);
    }
    double mean = 0.0;
    for (double x : scores) mean += x;
    mean /= 10.0;
    double var = 0.0;
    for (double x : scores) var += (x - mean) * (x - mean);
    const double floor = mean + 3.0 * std::sqrt(var / 9.0);
    const auto val = envs::generate_dataset(spec, 20, 60, {}, 11);
    EXPECT_LT(diagnose(cfg, dsl::ParameterVector(cfg), val, dc).wasserstein, floor);
}
