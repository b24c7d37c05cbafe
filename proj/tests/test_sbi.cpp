#include "gsim/dsl.hpp"
#include "gsim/envs.hpp"
#include "gsim/errors.hpp"
#include "gsim/interpreter.hpp"
#include "gsim/sbi.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace gsim;
using namespace gsim::sbi;

namespace {

const char* kToy = R"(
config toy {
  params {
    mu = 1 in [0, 2];
  }
  state {
    y : float = 0;
  }
  rules {
    Assign(field = y, expr = mu);
  }
}
)";

Dataset flat_observations(double value, std::size_t n, std::size_t horizon) {
    Dataset d;
    d.projection.dims.push_back({"y", ScalarField{"y"}});
    for (std::size_t i = 0; i < n; ++i) {
        Trajectory t;
        t.init.set("y", 0.0);
        for (std::size_t s = 0; s < horizon; ++s) {
            SystemState x;
            x.set("y", value);
            t.steps.push_back({std::nullopt, x});
        }
        d.push_back(std::move(t));
    }
    return d;
}

double mean_of(const PosteriorSamples& p) {
    double s = 0.0;
    for (const auto& a : p.accepted) s += a[0];
    return s / static_cast<double>(p.accepted.size());
}

} // namespace

TEST(Flatten, ShapeAndOrder) {
    const auto spec = envs::preset("sir");
    const auto d = envs::generate_dataset(spec, 1, 2, {}, 1);
    const auto v = flatten_rollout(d.trajectories[0], d.projection);
    ASSERT_EQ(v.size(), 6u);
    for (std::size_t t = 0; t < 2; ++t) {
        const auto o = observe(d.trajectories[0].steps[t].next, d.projection);
        for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(v[t * 3 + k], o[k]);
    }
    Trajectory empty;
    empty.init = d.trajectories[0].init;
    EXPECT_TRUE(flatten_rollout(empty, d.projection).empty());
}

TEST(Abc, ToyPosteriorConcentrates) {
    const auto cfg = dsl::parse_config(kToy);
    const auto data = flat_observations(1.0, 3, 5);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto r = run_sbi(cfg, data, {}, seed);
        EXPECT_EQ(r.posterior.accepted.size(), 50u);
        EXPECT_GE(r.point_estimate[0], 0.97);
        EXPECT_LE(r.point_estimate[0], 1.03);
        const std::vector<double> tau{1.0 / 3.0};
        EXPECT_FALSE(variance_flags(r.posterior, tau).flags[0]);
        for (double dd : r.posterior.distances) EXPECT_LE(dd, r.posterior.threshold);
    }
}

TEST(Abc, AcceptAllRecoversPriorMean) {
    const auto cfg = dsl::parse_config(kToy);
    const auto data = flat_observations(1.0, 3, 5);
    SbiSettings s;
    s.accept_fraction = 1.0;
    const auto r = run_sbi(cfg, data, s, 4);
    EXPECT_EQ(r.posterior.accepted.size(), 1000u);
    const double tol = 3.0 * std::sqrt(1.0 / 3.0) / std::sqrt(1000.0);
    EXPECT_NEAR(r.point_estimate[0], 1.0, tol);
}

TEST(Abc, AcceptedSetMatchesBruteForce) {
    // deterministic toy: distance is a known function of the draw, so recompute by sorting
    const auto cfg = dsl::parse_config(kToy);
    const auto data = flat_observations(1.3, 2, 4);
    SbiSettings s;
    s.budget = 200;
    s.accept_fraction = 0.1;
    const auto r = run_sbi(cfg, data, s, 8);
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t k = 0; k < s.budget; ++k) {
        RngStream rng(8, {8, static_cast<std::uint32_t>(k)});
        const double mu = 2.0 * rng.uniform01();
        // stdev over the training set is 0 here, floored at 1e-9
        all.emplace_back(std::sqrt(4.0) * std::abs(mu - 1.3) / 1e-9, k);
    }
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    ASSERT_EQ(r.posterior.draw_index.size(), 20u);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(r.posterior.draw_index[i], all[i].second);
}

TEST(Abc, TighterAcceptanceNeverRaisesThreshold) {
    const auto spec = envs::preset("sir");
    const auto cfg = envs::gt_config(spec);
    const auto data = envs::generate_dataset(spec, 10, 30, {}, 2);
    SbiSettings loose;
    loose.budget = 200;
    loose.accept_fraction = 0.2;
    SbiSettings tight = loose;
    tight.accept_fraction = 0.05;
    const auto a = run_sbi(cfg, data, loose, 1);
    const auto b = run_sbi(cfg, data, tight, 1);
    EXPECT_LE(b.posterior.threshold, a.posterior.threshold);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_GE(b.point_estimate[i], cfg.params[i].min);
        EXPECT_LE(b.point_estimate[i], cfg.params[i].max);
    }
    const auto again = run_sbi(cfg, data, tight, 1);
    EXPECT_EQ(again.point_estimate, b.point_estimate);
    tight.workers = 3;
    EXPECT_EQ(run_sbi(cfg, data, tight, 1).posterior.draw_index, b.posterior.draw_index);
}

TEST(Abc, TiesResolvedByDrawIndex) {
    // every draw produces the same trajectory, so all distances tie
    const char* flat = R"(
config flat {
  params {
    mu = 1 in [0, 2];
  }
  state {
    y : float = 0;
  }
  rules {
    Assign(field = y, expr = 1 + 0 * mu);
  }
}
)";
    const auto cfg = dsl::parse_config(flat);
    const auto data = flat_observations(1.0, 2, 3);
    SbiSettings s;
    s.budget = 100;
    s.accept_fraction = 0.1;
    const auto r = run_sbi(cfg, data, s, 2);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(r.posterior.draw_index[i], i);
}

TEST(VarianceFlags, Examples) {
    PosteriorSamples p;
    p.accepted = {{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}};
    const std::vector<double> tau{0.0, 0.0};
    auto f = variance_flags(p, tau);
    EXPECT_FALSE(f.flags[0]);
    EXPECT_FALSE(f.flags[1]);
    p.accepted = {{1.0, 2.0}, {1.5, 2.0}, {1.0, 2.1}};
    f = variance_flags(p, tau);
    EXPECT_TRUE(f.flags[0]);
    EXPECT_TRUE(f.flags[1]);
    p.accepted = {{1.0}};
    const std::vector<double> one{0.1};
    EXPECT_THROW((void)variance_flags(p, one), SizeError);
    const std::vector<double> lo{0.0};
    const std::vector<double> hi{2.0};
    EXPECT_DOUBLE_EQ(default_thresholds(lo, hi)[0], 0.5 / 3.0);
}

TEST(Settings, Checks) {
    SbiSettings s;
    s.accept_fraction = 0.0;
    EXPECT_THROW(s.check(), ConfigError);
    s.accept_fraction = 0.005;
    EXPECT_THROW(s.check(), ConfigError);
    s.accept_fraction = 0.01;
    EXPECT_NO_THROW(s.check());
}

TEST(PosteriorCsv, HeaderAndRows) {
    PosteriorSamples p;
    p.names = {"beta", "gamma"};
    p.accepted = {{0.5, 0.1}};
    p.distances = {1.25};
    EXPECT_EQ(posterior_csv(p), "beta,gamma,distance\n0.5,0.1,1.25\n");
}
