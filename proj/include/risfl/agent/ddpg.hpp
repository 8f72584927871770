#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "risfl/agent/replay.hpp"
#include "risfl/env/env.hpp"
#include "risfl/nn/networks.hpp"

namespace risfl {

struct AgentHyper {
    double gamma = 0.8;
    double tau = 0.001;
    std::size_t batch_size = 64;
    double lr_actor = 5e-4;
    double lr_critic = 1e-4;
    double noise_start = 0.2;
    double noise_end = 0.01;
    double noise_decay_fraction = 0.8;
    std::size_t history = 8;
    std::size_t episodes = 2200;
    std::size_t slots = 100;
    std::size_t hidden = 512;
    bool recurrent = true;
    std::size_t buffer_capacity = 600000;
    std::size_t updates_per_episode = 1;
    bool per_slot_updates = false;
    double target_policy_noise = 0.0;

    void validate() const;
};

/// Reduced settings for single-core runs of the small scenario.
AgentHyper desk_hyper();

AgentHyper agent_hyper_from_json(const nlohmann::json& j, AgentHyper base = {});
nlohmann::json to_json(const AgentHyper& h);

/// Exploration scale for episode e: linear from noise_start to noise_end over
/// the first noise_decay_fraction of the episodes, then constant.
double exploration_sigma(const AgentHyper& h, std::size_t episode);

class DdpgAgent {
public:
    DdpgAgent(std::size_t state_dim, std::size_t action_dim, const AgentHyper& hyper, std::uint64_t seed);

    const AgentHyper& hyper() const noexcept { return hyper_; }
    std::size_t state_dim() const noexcept { return state_dim_; }
    std::size_t action_dim() const noexcept { return action_dim_; }

    void set_exploration(double sigma) { sigma_ = sigma; }
    double exploration() const noexcept { return sigma_; }

    /// history holds the most recent states, oldest first; it is zero-padded
    /// at the front to the configured length.
    std::vector<double> act(const std::vector<std::vector<double>>& history, bool explore);

    /// r + gamma (1 - done) Q'(s', pi'(s') + xi'), 1 x H.
    nn::Matrix td_target(const Batch& batch);
    /// One Adam step on mean (Q(s, a) - y)^2. Returns the loss before the step.
    double critic_update(const Batch& batch, const nn::Matrix& targets);
    double critic_update(const Batch& batch) { return critic_update(batch, td_target(batch)); }
    /// One Adam ascent step on mean Q(s, pi(s)). Returns the objective before the step.
    double actor_update(const Batch& batch);
    void soft_update_targets();

    nn::Actor& actor() noexcept { return actor_; }
    nn::Critic& critic() noexcept { return critic_; }
    nn::Actor& target_actor() noexcept { return target_actor_; }
    nn::Critic& target_critic() noexcept { return target_critic_; }
    RngStream& sample_rng() noexcept { return sample_rng_; }

    nn::Sequence history_matrix(const std::vector<std::vector<double>>& history) const;

private:
    AgentHyper hyper_;
    std::size_t state_dim_;
    std::size_t action_dim_;
    nn::Actor actor_;
    nn::Critic critic_;
    nn::Actor target_actor_;
    nn::Critic target_critic_;
    nn::AdamState actor_adam_;
    nn::AdamState critic_adam_;
    RngStream noise_rng_;
    RngStream sample_rng_;
    double sigma_ = 0.0;
};

std::vector<double> random_policy(RngStream& rng, std::size_t dim);

struct EpisodeRecord {
    std::size_t episode = 0;
    double reward = 0.0;      // mean per-slot reward
    double avg_reward = 0.0;  // trailing-window mean
    double critic_loss = 0.0;
    double actor_objective = 0.0;
    double mean_psi = 0.0;
    double mean_mse = 0.0;
    std::size_t mse_violations = 0;
    std::size_t rate_violations = 0;
    std::size_t slots = 0;
};

struct TrainingLog {
    std::vector<EpisodeRecord> episodes;
    std::vector<double> rewards() const;
    std::vector<double> avg_rewards() const;
};

/// Runs the training loop: per slot act, step and store; after each episode
/// (or each slot in per-slot mode) sample a batch, update critic then actor and
/// soft-update both targets. Updates start once the buffer holds a full batch.
TrainingLog train(DdpgAgent& agent, Environment& env, std::size_t episodes, std::size_t slots,
                  TrajectoryLogger* logger = nullptr);

/// Uniform random actions through the same episode loop.
TrainingLog run_random_policy(Environment& env, RngStream& rng, std::size_t episodes, std::size_t slots,
                              TrajectoryLogger* logger = nullptr);

}  // namespace risfl
