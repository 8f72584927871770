#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "risfl/agent/ddpg.hpp"
#include "risfl/agent/replay.hpp"

using namespace risfl;

namespace {

AgentHyper small_hyper() {
    AgentHyper h;
    h.hidden = 8;
    h.history = 3;
    h.batch_size = 4;
    h.buffer_capacity = 1000;
    h.episodes = 10;
    return h;
}

std::vector<double> constant_state(std::size_t dim, double v) { return std::vector<double>(dim, v); }

// Episode of states 1, 2, ..., n (each a constant vector) with linked next states.
void push_episode(ReplayBuffer& buffer, std::size_t dim, std::size_t adim, double first, std::size_t n) {
    for (std::size_t t = 0; t < n; ++t) {
        const double s = first + static_cast<double>(t);
        buffer.push({constant_state(dim, s), std::vector<double>(adim, s / 10.0), -s, constant_state(dim, s + 1.0),
                     t + 1 == n, t == 0});
    }
}

Batch batch_from(std::size_t state_dim, std::size_t action_dim, std::size_t history, std::size_t n, RngStream& rng) {
    ReplayBuffer buffer(100, state_dim, action_dim);
    for (std::size_t t = 0; t < n; ++t) {
        std::vector<double> s(state_dim), a(action_dim), next(state_dim);
        for (auto& v : s) v = rng.normal();
        for (auto& v : a) v = rng.uniform(-1.0, 1.0);
        for (auto& v : next) v = rng.normal();
        buffer.push({s, a, rng.normal(), next, false, true});
    }
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return buffer.gather(all, history);
}

// Zero the critic's output weights and set its bias, so Q is that constant.
void make_constant(nn::Critic& critic, double value) {
    auto params = critic.parameters();
    params[params.size() - 2]->value.setZero();
    params.back()->value.setConstant(value);
}

}  // namespace

TEST(Hyper, DefaultsAndValidation) {
    const AgentHyper h;
    EXPECT_EQ(h.gamma, 0.8);
    EXPECT_EQ(h.tau, 0.001);
    EXPECT_EQ(h.batch_size, 64u);
    EXPECT_EQ(h.history, 8u);
    EXPECT_EQ(h.hidden, 512u);
    EXPECT_NO_THROW(h.validate());
    auto bad = h;
    bad.gamma = 1.5;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = h;
    bad.buffer_capacity = 10;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Hyper, JsonRoundTripAndUnknownKeys) {
    auto h = small_hyper();
    h.per_slot_updates = true;
    h.lr_actor = 3e-4;
    const auto back = agent_hyper_from_json(to_json(h));
    EXPECT_EQ(to_json(back), to_json(h));
    EXPECT_THROW(agent_hyper_from_json({{"gama", 0.5}}), std::invalid_argument);
    EXPECT_THROW(agent_hyper_from_json({{"tau", -0.1}}), std::invalid_argument);
    EXPECT_EQ(agent_hyper_from_json({{"gamma", 0.5}}, h).hidden, 8u);
}

TEST(Hyper, ExplorationSchedule) {
    AgentHyper h;
    h.episodes = 100;
    h.noise_start = 0.2;
    h.noise_end = 0.01;
    h.noise_decay_fraction = 0.8;
    EXPECT_DOUBLE_EQ(exploration_sigma(h, 0), 0.2);
    EXPECT_NEAR(exploration_sigma(h, 40), 0.105, 1e-15);
    EXPECT_NEAR(exploration_sigma(h, 80), 0.01, 1e-15);
    EXPECT_NEAR(exploration_sigma(h, 99), 0.01, 1e-15);
}

TEST(Replay, FifoEviction) {
    ReplayBuffer buffer(3, 2, 1);
    push_episode(buffer, 2, 1, 1.0, 5);
    EXPECT_EQ(buffer.size(), 3u);
    EXPECT_EQ(buffer.at(0).state, constant_state(2, 3.0));
    EXPECT_EQ(buffer.at(2).state, constant_state(2, 5.0));
    EXPECT_EQ(buffer.at(2).next_state, constant_state(2, 6.0));
    EXPECT_THROW(buffer.at(3), std::out_of_range);
    EXPECT_THROW(ReplayBuffer(0, 2, 1), std::invalid_argument);
}

TEST(Replay, StoredTransitionsReadBackUnchanged) {
    ReplayBuffer buffer(10, 2, 1);
    push_episode(buffer, 2, 1, 1.0, 3);
    push_episode(buffer, 2, 1, 10.0, 2);
    for (std::size_t p = 0; p < 5; ++p) {
        const auto t = buffer.at(p);
        const double s = p < 3 ? 1.0 + static_cast<double>(p) : 10.0 + static_cast<double>(p - 3);
        EXPECT_EQ(t.state, constant_state(2, s));
        EXPECT_EQ(t.next_state, constant_state(2, s + 1.0));
        EXPECT_EQ(t.reward, -s);
        EXPECT_EQ(t.first_in_episode, p == 0 || p == 3);
        EXPECT_EQ(t.done, p == 2 || p == 4);
    }
}

TEST(Replay, UnlinkedNextStateKept) {
    ReplayBuffer buffer(10, 1, 1);
    buffer.push({{1.0}, {0.0}, 0.0, {2.0}, false, true});
    buffer.push({{7.0}, {0.0}, 0.0, {8.0}, false, false});
    EXPECT_EQ(buffer.at(0).next_state, std::vector<double>{2.0});
    EXPECT_THROW(buffer.push({{1.0, 2.0}, {0.0}, 0.0, {2.0}, false, false}), std::invalid_argument);
}

TEST(Replay, HistoryReconstruction) {
    ReplayBuffer buffer(10, 1, 1);
    push_episode(buffer, 1, 1, 1.0, 4);
    const auto b = buffer.gather({1, 3}, 3);
    ASSERT_EQ(b.states.size(), 3u);
    // Position 1 (state 2): history [0, 1, 2], next [1, 2, 3].
    EXPECT_EQ(b.states[0](0, 0), 0.0);
    EXPECT_EQ(b.states[1](0, 0), 1.0);
    EXPECT_EQ(b.states[2](0, 0), 2.0);
    EXPECT_EQ(b.next_states[0](0, 0), 1.0);
    EXPECT_EQ(b.next_states[1](0, 0), 2.0);
    EXPECT_EQ(b.next_states[2](0, 0), 3.0);
    // Position 3 (state 4, terminal): history [2, 3, 4], next [3, 4, 5].
    EXPECT_EQ(b.states[0](0, 1), 2.0);
    EXPECT_EQ(b.states[2](0, 1), 4.0);
    EXPECT_EQ(b.next_states[2](0, 1), 5.0);
    EXPECT_EQ(b.done(0, 1), 1.0);
    EXPECT_EQ(b.done(0, 0), 0.0);
    EXPECT_EQ(b.rewards(0, 0), -2.0);
    EXPECT_DOUBLE_EQ(b.actions(0, 1), 0.4);
}

TEST(Replay, HistoryStopsAtEpisodeStartAndEviction) {
    ReplayBuffer buffer(4, 1, 1);
    push_episode(buffer, 1, 1, 1.0, 3);
    push_episode(buffer, 1, 1, 10.0, 2);
    // Stored: 2, 3, 10, 11. Position 3 (state 11) must not see state 3.
    auto b = buffer.gather({3}, 3);
    EXPECT_EQ(b.states[0](0, 0), 0.0);
    EXPECT_EQ(b.states[1](0, 0), 10.0);
    EXPECT_EQ(b.states[2](0, 0), 11.0);
    // Position 0 (state 2): its predecessor (state 1) was evicted.
    b = buffer.gather({0}, 3);
    EXPECT_EQ(b.states[1](0, 0), 0.0);
    EXPECT_EQ(b.states[2](0, 0), 2.0);
    EXPECT_EQ(b.next_states[2](0, 0), 3.0);
    EXPECT_THROW(buffer.gather({0}, 0), std::invalid_argument);
}

TEST(Replay, SamplePositionsDistinctAndUnderfullRejected) {
    ReplayBuffer buffer(50, 1, 1);
    push_episode(buffer, 1, 1, 1.0, 20);
    auto rng = seeded_rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const auto pos = buffer.sample_positions(rng, 20);
        EXPECT_EQ(std::set<std::size_t>(pos.begin(), pos.end()).size(), 20u);
        EXPECT_LT(*std::max_element(pos.begin(), pos.end()), 20u);
    }
    EXPECT_THROW(buffer.sample_positions(rng, 21), std::invalid_argument);
    EXPECT_THROW(buffer.sample_positions(rng, 0), std::invalid_argument);
}

TEST(Replay, SamplingIsUniform) {
    ReplayBuffer buffer(50, 1, 1);
    push_episode(buffer, 1, 1, 1.0, 20);
    auto rng = seeded_rng(2);
    std::vector<double> counts(20, 0.0);
    const int draws = 20000;
    for (int d = 0; d < draws; ++d)
        for (auto p : buffer.sample_positions(rng, 5)) counts[p] += 1.0;
    const double expected = draws * 5.0 / 20.0;
    double stat = 0.0;
    for (double c : counts) stat += (c - expected) * (c - expected) / expected;
    boost::math::chi_squared dist(19);
    EXPECT_GT(boost::math::cdf(boost::math::complement(dist, stat)), 0.001);
}

TEST(Agent, ActIsDeterministicAndBounded) {
    const auto h = small_hyper();
    DdpgAgent a(4, 3, h, 7), b(4, 3, h, 7);
    const std::vector<std::vector<double>> history{{0.1, 0.2, 0.3, 0.4}, {1.0, -1.0, 0.5, 0.0}};
    EXPECT_EQ(a.act(history, false), a.act(history, false));
    EXPECT_EQ(a.act(history, false), b.act(history, false));
    a.set_exploration(5.0);
    b.set_exploration(5.0);
    for (int i = 0; i < 50; ++i) {
        const auto x = a.act(history, true);
        EXPECT_EQ(x, b.act(history, true));
        for (double v : x) {
            EXPECT_GE(v, -1.0);
            EXPECT_LE(v, 1.0);
        }
    }
    EXPECT_THROW(a.act({{1.0, 2.0}}, false), std::invalid_argument);
}

TEST(Agent, HistoryIsZeroPaddedAtFront) {
    const auto h = small_hyper();
    DdpgAgent agent(2, 1, h, 8);
    const auto seq = agent.history_matrix({{1.0, 2.0}});
    ASSERT_EQ(seq.size(), 3u);
    EXPECT_EQ(seq[0].norm(), 0.0);
    EXPECT_EQ(seq[1].norm(), 0.0);
    EXPECT_EQ(seq[2](1, 0), 2.0);
    const auto full = agent.history_matrix({{1, 1}, {2, 2}, {3, 3}, {4, 4}});
    EXPECT_EQ(full[0](0, 0), 2.0);
    EXPECT_EQ(full[2](0, 0), 4.0);
}

TEST(Agent, TargetsStartEqualToOnline) {
    DdpgAgent agent(4, 2, small_hyper(), 9);
    auto online = agent.critic().parameters(), target = agent.target_critic().parameters();
    for (std::size_t i = 0; i < online.size(); ++i) EXPECT_EQ(online[i]->value, target[i]->value);
}

TEST(Agent, TdTargetExamples) {
    auto rng = seeded_rng(10);
    auto h = small_hyper();
    DdpgAgent agent(4, 2, h, 11);
    make_constant(agent.target_critic(), 2.0);
    Batch batch = batch_from(4, 2, h.history, 3, rng);
    batch.rewards << 1.0, 1.0, -0.5;
    batch.done << 0.0, 1.0, 0.0;
    const auto y = agent.td_target(batch);
    EXPECT_DOUBLE_EQ(y(0, 0), 2.6);
    EXPECT_DOUBLE_EQ(y(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(y(0, 2), 1.1);

    h.gamma = 0.0;
    DdpgAgent myopic(4, 2, h, 11);
    make_constant(myopic.target_critic(), 2.0);
    EXPECT_EQ(myopic.td_target(batch), batch.rewards);
}

TEST(Agent, CriticAtTargetHasZeroLossAndStays) {
    auto rng = seeded_rng(12);
    const auto h = small_hyper();
    DdpgAgent agent(4, 2, h, 13);
    const Batch batch = batch_from(4, 2, h.history, 6, rng);
    const nn::Matrix q = agent.critic().forward(batch.states, batch.actions);
    std::vector<nn::Matrix> before;
    for (auto* p : agent.critic().parameters()) before.push_back(p->value);
    EXPECT_EQ(agent.critic_update(batch, q), 0.0);
    auto after = agent.critic().parameters();
    for (std::size_t i = 0; i < after.size(); ++i) EXPECT_EQ(after[i]->value, before[i]);
}

TEST(Agent, CriticLossDecreasesOnFixedTargets) {
    auto rng = seeded_rng(14);
    auto h = small_hyper();
    h.lr_critic = 1e-2;
    DdpgAgent agent(4, 2, h, 15);
    const Batch batch = batch_from(4, 2, h.history, 16, rng);
    nn::Matrix targets(1, 16);
    for (Eigen::Index i = 0; i < 16; ++i) targets(0, i) = rng.normal();
    const double first = agent.critic_update(batch, targets);
    double last = first;
    for (int i = 0; i < 200; ++i) last = agent.critic_update(batch, targets);
    EXPECT_LT(last, 0.5 * first);
}

TEST(Agent, ActorIgnoresConstantCritic) {
    auto rng = seeded_rng(16);
    const auto h = small_hyper();
    DdpgAgent agent(4, 2, h, 17);
    make_constant(agent.critic(), -3.0);
    const Batch batch = batch_from(4, 2, h.history, 6, rng);
    std::vector<nn::Matrix> before;
    for (auto* p : agent.actor().parameters()) before.push_back(p->value);
    EXPECT_DOUBLE_EQ(agent.actor_update(batch), -3.0);
    auto after = agent.actor().parameters();
    for (std::size_t i = 0; i < after.size(); ++i) EXPECT_EQ(after[i]->value, before[i]);
}

TEST(Agent, ActorUpdateLeavesCriticUntouched) {
    auto rng = seeded_rng(18);
    const auto h = small_hyper();
    DdpgAgent agent(4, 2, h, 19);
    const Batch batch = batch_from(4, 2, h.history, 6, rng);
    std::vector<nn::Matrix> before;
    for (auto* p : agent.critic().parameters()) before.push_back(p->value);
    agent.actor_update(batch);
    auto after = agent.critic().parameters();
    for (std::size_t i = 0; i < after.size(); ++i) EXPECT_EQ(after[i]->value, before[i]);
}

TEST(Agent, ActorAscentRaisesObjective) {
    auto rng = seeded_rng(20);
    auto h = small_hyper();
    h.lr_actor = 1e-2;
    DdpgAgent agent(4, 2, h, 21);
    const Batch batch = batch_from(4, 2, h.history, 16, rng);
    const double first = agent.actor_update(batch);
    double last = first;
    for (int i = 0; i < 100; ++i) last = agent.actor_update(batch);
    EXPECT_GT(last, first);
}

TEST(Agent, SoftUpdateMovesTargetsByTau) {
    auto rng = seeded_rng(22);
    auto h = small_hyper();
    h.tau = 0.1;
    h.lr_critic = 1e-2;
    DdpgAgent agent(4, 2, h, 23);
    const Batch batch = batch_from(4, 2, h.history, 8, rng);
    agent.critic_update(batch, nn::Matrix::Ones(1, 8));
    std::vector<nn::Matrix> old_target;
    for (auto* p : agent.target_critic().parameters()) old_target.push_back(p->value);
    agent.soft_update_targets();
    auto online = agent.critic().parameters(), target = agent.target_critic().parameters();
    bool lagging = false;
    for (std::size_t i = 0; i < online.size(); ++i) {
        const nn::Matrix expected = 0.1 * online[i]->value + 0.9 * old_target[i];
        EXPECT_LT((target[i]->value - expected).cwiseAbs().maxCoeff(), 1e-15);
        lagging = lagging || target[i]->value != online[i]->value;
    }
    EXPECT_TRUE(lagging);
}

TEST(RandomPolicy, UniformInBox) {
    auto rng = seeded_rng(24);
    double sum = 0.0;
    for (int i = 0; i < 1000; ++i)
        for (double v : random_policy(rng, 10)) {
            EXPECT_GE(v, -1.0);
            EXPECT_LT(v, 1.0);
            sum += v;
        }
    EXPECT_NEAR(sum / 10000.0, 0.0, 0.03);
}

TEST(Train, ZeroEpisodesGivesEmptyLog) {
    auto env = make_env(desk_scenario(), Variant::single_ris, 25);
    DdpgAgent agent(env.state_dim(), env.action_dim(), small_hyper(), 26);
    EXPECT_TRUE(train(agent, env, 0, 10).episodes.empty());
}

TEST(Train, DimensionMismatchRejected) {
    auto env = make_env(desk_scenario(), Variant::single_ris, 27);
    DdpgAgent agent(env.state_dim() + 1, env.action_dim(), small_hyper(), 28);
    EXPECT_THROW(train(agent, env, 1, 10), std::invalid_argument);
}

TEST(Train, DeterministicGivenSeeds) {
    auto run = [] {
        auto env = make_env(desk_scenario(), Variant::single_ris, 29);
        DdpgAgent agent(env.state_dim(), env.action_dim(), small_hyper(), 30);
        return train(agent, env, 6, 20);
    };
    const auto a = run(), b = run();
    ASSERT_EQ(a.episodes.size(), 6u);
    EXPECT_EQ(a.rewards(), b.rewards());
    EXPECT_EQ(a.avg_rewards(), b.avg_rewards());
    for (std::size_t e = 0; e < 6; ++e) EXPECT_EQ(a.episodes[e].critic_loss, b.episodes[e].critic_loss);
}

TEST(Train, LogIsConsistent) {
    auto env = make_env(desk_scenario(), Variant::single_ris, 31);
    DdpgAgent agent(env.state_dim(), env.action_dim(), small_hyper(), 32);
    const auto log = train(agent, env, 5, 20);
    const auto rewards = log.rewards();
    for (const auto& rec : log.episodes) {
        EXPECT_GE(rec.slots, 1u);
        EXPECT_LE(rec.slots, 20u);
        EXPECT_LE(rec.mse_violations + rec.rate_violations, 2 * rec.slots);
        EXPECT_DOUBLE_EQ(rec.avg_reward, avg_reward(rewards, rec.episode));
    }
    EXPECT_GT(log.episodes.back().critic_loss, 0.0);
}

TEST(Train, RandomPolicyLoopDeterministic) {
    auto run = [] {
        auto env = make_env(desk_scenario(), Variant::single_ris, 33);
        auto rng = seeded_rng(34);
        return run_random_policy(env, rng, 4, 30).rewards();
    };
    EXPECT_EQ(run(), run());
}
