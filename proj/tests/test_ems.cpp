#include "hevems/ems.hpp"
#include "hevems/error.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace hevems;
using namespace hevems::ems;

namespace {

StateActionGrid small_grid() {
    StateActionGrid g;
    g.soc_min = 0.5;
    g.soc_max = 0.9;
    g.soc_step = 0.1;
    g.demand_min = 0.0;
    g.demand_max = 200.0;
    g.demand_step = 100.0;
    g.torque_min = 0.0;
    g.torque_max = 100.0;
    g.torque_step = 50.0;
    return g;
}

QTable random_table(const StateActionGrid &g, std::mt19937_64 &rng) {
    QTable q(g);
    std::uniform_real_distribution<double> u(0.0, 1000.0);
    for (double &v : q.values()) {
        v = u(rng);
    }
    return q;
}

} // namespace

TEST(Grid, DefaultsAndIndexing) {
    const StateActionGrid g;
    EXPECT_EQ(g.soc_count(), 61u);
    EXPECT_EQ(g.action_count(), 19u);
    EXPECT_EQ(g.demand_count(), 22u);
    EXPECT_EQ(g.soc_index(0.7), 40u);
    EXPECT_EQ(g.soc_index(0.0), 0u);
    EXPECT_EQ(g.soc_index(1.0), 60u);
    EXPECT_EQ(g.demand_index(-1e9), 0u);
    EXPECT_EQ(g.demand_index(49.0), 6u);
    EXPECT_EQ(g.state_index(0.7, 0.0), 40u * 22u + 6u);
    EXPECT_EQ(g.torque(18), 900.0);
    StateActionGrid bad;
    bad.soc_step = 0.0;
    EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Reward, Examples) {
    RlConfig cfg;
    EXPECT_EQ(reward(cfg, 0.7, 2.0, 1.0), 2.0);
    EXPECT_NEAR(reward(cfg, 0.6, 0.0, 1.0), 100.0, 1e-9);
    EXPECT_EQ(reward(cfg, 0.7, 0.0, 1.0), 0.0);
    EXPECT_NEAR(reward(cfg, 0.6, 1.0, 0.5), 50.5, 1e-9);
}

TEST(Config, EpsilonScheduleAndValidation) {
    RlConfig cfg;
    EXPECT_EQ(cfg.epsilon(0), 0.1);
    EXPECT_NEAR(cfg.epsilon(2), 0.1 * 0.99 * 0.99, 1e-15);
    cfg.learning_rate = 0.0;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = RlConfig{};
    cfg.discount = 1.0;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = RlConfig{};
    cfg.epsilon0 = 1.5;
    EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Argmin, TieBreakAndRows) {
    EXPECT_EQ(argmin(std::vector<double>{3, 1, 2}), 1u);
    EXPECT_EQ(argmin(std::vector<double>{5, 2, 9}), 1u);
    EXPECT_EQ(argmin(std::vector<double>{1, 1, 3}), 0u);
}

TEST(EpsilonGreedy, ZeroIsGreedy) {
    QTable q(small_grid());
    q.at(0, 0) = 3;
    q.at(0, 1) = 1;
    q.at(0, 2) = 2;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(epsilon_greedy(q, 0, 0.0, rng), 1u);
    }
}

TEST(EpsilonGreedy, OneIsUniform) {
    StateActionGrid g = small_grid();
    g.torque_max = 450.0; // 10 actions
    QTable q(g);
    std::mt19937_64 rng(2);
    std::vector<int> hits(q.actions(), 0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        ++hits[epsilon_greedy(q, 0, 1.0, rng)];
    }
    const double expected = static_cast<double>(draws) / static_cast<double>(hits.size());
    double chi2 = 0.0;
    for (int h : hits) {
        chi2 += (h - expected) * (h - expected) / expected;
    }
    // 9 degrees of freedom, 0.999 quantile.
    EXPECT_LT(chi2, 27.88);
}

TEST(Sarsa, SingleStepExample) {
    QTable q(small_grid());
    RlConfig cfg; // learning rate 0.95, discount 0.1
    EXPECT_EQ(sarsa_update(q, 0, 0, 5.0, 1, 1, cfg), 4.75);
    EXPECT_EQ(q.at(0, 0), 4.75);
}

TEST(Sarsa, FixedPointAndFullStep) {
    QTable q(small_grid());
    RlConfig cfg;
    q.at(1, 2) = 20.0;
    q.at(0, 0) = 7.0; // r + 0.1 * 20 = 7
    EXPECT_EQ(sarsa_update(q, 0, 0, 5.0, 1, 2, cfg), 7.0);

    cfg.learning_rate = 1.0;
    q.at(0, 1) = 123.0;
    EXPECT_EQ(sarsa_update(q, 0, 1, 3.0, 1, 2, cfg), 3.0 + 0.1 * 20.0);
}

TEST(Sarsa, FixedPointProperty) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 100.0), lr(0.01, 1.0), beta(0.0, 0.99);
    for (int i = 0; i < 200; ++i) {
        QTable q(small_grid());
        RlConfig cfg;
        cfg.learning_rate = lr(rng);
        cfg.discount = beta(rng);
        const double next = u(rng);
        const double r = u(rng);
        q.at(3, 1) = next;
        q.at(2, 0) = r + cfg.discount * next;
        const double before = q.at(2, 0);
        sarsa_update(q, 2, 0, r, 3, 1, cfg);
        EXPECT_EQ(q.at(2, 0), before);
    }
}

TEST(Greedy, PolicyAndScaleInvariance) {
    QTable q(small_grid());
    q.at(0, 0) = 5;
    q.at(0, 1) = 2;
    q.at(0, 2) = 9;
    q.at(1, 0) = 1;
    q.at(1, 1) = 1;
    q.at(1, 2) = 3;
    const auto p = greedy_policy(q);
    EXPECT_EQ(p.actions[0], 1u);
    EXPECT_EQ(p.actions[1], 0u);
    EXPECT_EQ(p.torque(0), 50.0);

    std::mt19937_64 rng(4);
    for (int i = 0; i < 20; ++i) {
        const auto t = random_table(StateActionGrid{}, rng);
        const auto base = greedy_policy(t).actions;
        for (double c : {0.5, 1.0, 2.0, 0.123}) {
            EXPECT_EQ(greedy_policy(scale(t, c)).actions, base);
        }
    }
}

TEST(Transfer, ScalesByImnAndRecordsIt) {
    const auto g = small_grid();
    QTable q(g);
    q.at(0, 0) = 3.5;
    Matrix a = Matrix::identity(2), b(2, 2);
    b(0, 1) = b(1, 0) = 1.0;
    auto r = transfer(q, support::as_tpm(a), support::as_tpm(b)); // IMN = 2
    EXPECT_EQ(r.imn, 2.0);
    EXPECT_EQ(r.q.at(0, 0), 7.0);
    ASSERT_TRUE(r.q.meta.transfer_scale.has_value());
    EXPECT_EQ(*r.q.meta.transfer_scale, 2.0);
    EXPECT_FALSE(r.fallback);

    EXPECT_EQ(scale(q, 1.0).values(), q.values());
}

TEST(Transfer, IdenticalCyclesFallBackToSource) {
    QTable q(small_grid());
    q.at(1, 1) = 42.0;
    const auto t = markov::build_tpm(standard_cycle("nedc"), markov::SpeedGrid{});
    const auto r = transfer(q, t, t);
    EXPECT_TRUE(r.fallback);
    EXPECT_EQ(r.imn, 0.0);
    EXPECT_EQ(r.q.values(), q.values());
    EXPECT_TRUE(r.q.meta.transfer_fallback);
}

TEST(Train, ZeroEpisodesReturnsInitialTable) {
    const auto pt = powertrain::Powertrain{};
    RlConfig cfg;
    cfg.episodes = 0;
    std::mt19937_64 rng(5);
    const auto init = random_table(StateActionGrid{}, rng);
    const auto r = train(standard_cycle("nedc"), pt, cfg, StateActionGrid{}, init);
    EXPECT_EQ(r.q.values(), init.values());
    EXPECT_TRUE(r.log.episodes.empty());
}

TEST(Train, DeterministicForFixedSeed) {
    const auto pt = powertrain::Powertrain{};
    const auto cycle = window(standard_cycle("nedc"), 0, 300);
    RlConfig cfg;
    cfg.episodes = 5;
    cfg.seed = 7;
    const auto a = train(cycle, pt, cfg, StateActionGrid{});
    const auto b = train(cycle, pt, cfg, StateActionGrid{});
    EXPECT_EQ(a.q, b.q);
    cfg.seed = 8;
    const auto c = train(cycle, pt, cfg, StateActionGrid{});
    EXPECT_NE(a.q.values(), c.q.values());
}

TEST(Train, CostDecreasesOverEpisodes) {
    const auto pt = powertrain::Powertrain{};
    RlConfig cfg;
    cfg.episodes = 500;
    cfg.seed = 1;
    const auto r = train(standard_cycle("nedc"), pt, cfg, StateActionGrid{});
    ASSERT_EQ(r.log.episodes.size(), 500u);
    auto median = [&](std::size_t from) {
        std::vector<double> c;
        for (std::size_t k = from; k < from + 50; ++k) {
            c.push_back(r.log.episodes[k].cost);
        }
        std::nth_element(c.begin(), c.begin() + 25, c.end());
        return c[25];
    };
    EXPECT_LT(median(450), median(0));
    for (const auto &e : r.log.episodes) {
        EXPECT_GE(e.soc_end, StateActionGrid{}.soc_min);
        EXPECT_LE(e.soc_end, StateActionGrid{}.soc_max);
    }
}

TEST(Train, ClampEventsAreLogged) {
    const auto pt = powertrain::Powertrain{};
    StateActionGrid g;
    g.soc_min = 0.69;
    g.soc_max = 0.71; // two percent of charge band, easily left
    RlConfig cfg;
    cfg.episodes = 3;
    cfg.epsilon0 = 1.0;
    cfg.epsilon_decay = 1.0;
    const auto r = train(window(standard_cycle("ftp75"), 0, 400), pt, cfg, g);
    std::size_t total = 0;
    for (const auto &e : r.log.episodes) {
        total += e.clamp_events;
    }
    EXPECT_GT(total, 0u);
    EXPECT_EQ(total, r.log.clamps.size());
    for (const auto &c : r.log.clamps) {
        EXPECT_TRUE(c.soc_unclamped < g.soc_min || c.soc_unclamped > g.soc_max);
    }
}
