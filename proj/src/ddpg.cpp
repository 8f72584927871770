#include "risfl/agent/ddpg.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

namespace risfl {

void AgentHyper::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("agent hyperparameters: " + m); };
    if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must lie in [0, 1]");
    if (!(tau >= 0.0 && tau <= 1.0)) fail("tau must lie in [0, 1]");
    if (batch_size == 0) fail("batch size must be positive");
    if (!(lr_actor > 0.0 && lr_critic > 0.0)) fail("learning rates must be positive");
    if (!(noise_start >= 0.0 && noise_end >= 0.0)) fail("exploration noise must be non-negative");
    if (!(noise_decay_fraction > 0.0 && noise_decay_fraction <= 1.0)) fail("noise decay fraction must lie in (0, 1]");
    if (history == 0) fail("history length must be positive");
    if (hidden == 0) fail("hidden width must be positive");
    if (buffer_capacity < batch_size) fail("buffer must hold at least one batch");
    if (!(target_policy_noise >= 0.0)) fail("target policy noise must be non-negative");
}

AgentHyper desk_hyper() {
    AgentHyper h;
    h.episodes = 300;
    h.hidden = 64;
    h.buffer_capacity = 100000;
    h.gamma = 0.0;
    h.lr_actor = 1e-4;
    h.lr_critic = 1e-3;
    h.noise_start = 2.0;
    h.noise_end = 0.0;
    h.updates_per_episode = 10;
    return h;
}

AgentHyper agent_hyper_from_json(const nlohmann::json& j, AgentHyper h) {
    static const std::set<std::string> known{
        "gamma", "tau", "batch_size", "lr_actor", "lr_critic", "noise_start", "noise_end", "noise_decay_fraction",
        "history", "episodes", "slots", "hidden", "recurrent", "buffer_capacity", "updates_per_episode",
        "per_slot_updates", "target_policy_noise"};
    for (const auto& item : j.items())
        if (!known.contains(item.key())) throw std::invalid_argument("agent hyperparameters: unknown key '" + item.key() + "'");
    auto read = [&](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    read("gamma", h.gamma);
    read("tau", h.tau);
    read("batch_size", h.batch_size);
    read("lr_actor", h.lr_actor);
    read("lr_critic", h.lr_critic);
    read("noise_start", h.noise_start);
    read("noise_end", h.noise_end);
    read("noise_decay_fraction", h.noise_decay_fraction);
    read("history", h.history);
    read("episodes", h.episodes);
    read("slots", h.slots);
    read("hidden", h.hidden);
    read("recurrent", h.recurrent);
    read("buffer_capacity", h.buffer_capacity);
    read("updates_per_episode", h.updates_per_episode);
    read("per_slot_updates", h.per_slot_updates);
    read("target_policy_noise", h.target_policy_noise);
    h.validate();
    return h;
}

nlohmann::json to_json(const AgentHyper& h) {
    return {{"gamma", h.gamma},
            {"tau", h.tau},
            {"batch_size", h.batch_size},
            {"lr_actor", h.lr_actor},
            {"lr_critic", h.lr_critic},
            {"noise_start", h.noise_start},
            {"noise_end", h.noise_end},
            {"noise_decay_fraction", h.noise_decay_fraction},
            {"history", h.history},
            {"episodes", h.episodes},
            {"slots", h.slots},
            {"hidden", h.hidden},
            {"recurrent", h.recurrent},
            {"buffer_capacity", h.buffer_capacity},
            {"updates_per_episode", h.updates_per_episode},
            {"per_slot_updates", h.per_slot_updates},
            {"target_policy_noise", h.target_policy_noise}};
}

double exploration_sigma(const AgentHyper& h, std::size_t episode) {
    const double horizon = h.noise_decay_fraction * static_cast<double>(h.episodes);
    const double frac = horizon > 0.0 ? std::min(static_cast<double>(episode) / horizon, 1.0) : 1.0;
    return h.noise_start + (h.noise_end - h.noise_start) * frac;
}

namespace {

nn::NetworkShape shape_for(std::size_t state_dim, std::size_t action_dim, const AgentHyper& h) {
    return {state_dim, action_dim, h.hidden, h.recurrent};
}

}  // namespace

DdpgAgent::DdpgAgent(std::size_t state_dim, std::size_t action_dim, const AgentHyper& hyper, std::uint64_t seed)
    : hyper_(hyper), state_dim_(state_dim), action_dim_(action_dim), noise_rng_(mix_seed(seed, 1)),
      sample_rng_(mix_seed(seed, 2)) {
    hyper_.validate();
    RngStream init(mix_seed(seed, 0));
    const auto shape = shape_for(state_dim, action_dim, hyper_);
    actor_ = nn::Actor(shape, init);
    critic_ = nn::Critic(shape, init);
    target_actor_ = actor_;
    target_critic_ = critic_;
    actor_adam_ = nn::make_adam(actor_.parameters(), hyper_.lr_actor);
    critic_adam_ = nn::make_adam(critic_.parameters(), hyper_.lr_critic);
}

nn::Sequence DdpgAgent::history_matrix(const std::vector<std::vector<double>>& history) const {
    const std::size_t steps = hyper_.recurrent ? hyper_.history : 1;
    const auto sd = static_cast<Eigen::Index>(state_dim_);
    nn::Sequence seq(steps, nn::Matrix::Zero(sd, 1));
    const std::size_t available = std::min(steps, history.size());
    for (std::size_t k = 0; k < available; ++k) {
        const auto& s = history[history.size() - available + k];
        if (s.size() != state_dim_) throw std::invalid_argument("act: state dimension mismatch");
        seq[steps - available + k].col(0) = Eigen::Map<const Eigen::VectorXd>(s.data(), sd);
    }
    return seq;
}

std::vector<double> DdpgAgent::act(const std::vector<std::vector<double>>& history, bool explore) {
    const nn::Matrix a = actor_.forward(history_matrix(history));
    std::vector<double> out(action_dim_);
    for (std::size_t i = 0; i < action_dim_; ++i) {
        double v = a(static_cast<Eigen::Index>(i), 0);
        if (explore && sigma_ > 0.0) v += sigma_ * noise_rng_.normal();
        out[i] = std::clamp(v, -1.0, 1.0);
    }
    return out;
}

namespace {

nn::Sequence trim(const nn::Sequence& seq, bool recurrent) {
    if (recurrent) return seq;
    return {seq.back()};
}

}  // namespace

nn::Matrix DdpgAgent::td_target(const Batch& batch) {
    const nn::Sequence next = trim(batch.next_states, hyper_.recurrent);
    nn::Matrix next_action = target_actor_.forward(next);
    if (hyper_.target_policy_noise > 0.0) {
        for (Eigen::Index c = 0; c < next_action.cols(); ++c)
            for (Eigen::Index r = 0; r < next_action.rows(); ++r)
                next_action(r, c) = std::clamp(next_action(r, c) + hyper_.target_policy_noise * noise_rng_.normal(), -1.0, 1.0);
    }
    const nn::Matrix q_next = target_critic_.forward(next, next_action);
    return (batch.rewards.array() + hyper_.gamma * (1.0 - batch.done.array()) * q_next.array()).matrix();
}

double DdpgAgent::critic_update(const Batch& batch, const nn::Matrix& targets) {
    auto params = critic_.parameters();
    for (auto* p : params) p->zero_grad();
    const nn::Matrix q = critic_.forward_train(trim(batch.states, hyper_.recurrent), batch.actions);
    const nn::Matrix diff = q - targets;
    const double n = static_cast<double>(diff.cols());
    const double loss = diff.squaredNorm() / n;
    critic_.backward(2.0 * diff / n);
    nn::adam_step(critic_adam_, params);
    return loss;
}

double DdpgAgent::actor_update(const Batch& batch) {
    auto actor_params = actor_.parameters();
    for (auto* p : actor_params) p->zero_grad();
    const nn::Sequence states = trim(batch.states, hyper_.recurrent);
    const nn::Matrix actions = actor_.forward_train(states);
    const nn::Matrix q = critic_.forward_train(states, actions);
    const double n = static_cast<double>(q.cols());
    const double objective = q.sum() / n;
    // Descent on -objective.
    const nn::Matrix d_action = critic_.backward(nn::Matrix::Constant(1, q.cols(), -1.0 / n), false);
    for (auto* p : critic_.parameters()) p->zero_grad();
    actor_.backward(d_action);
    nn::adam_step(actor_adam_, actor_params);
    return objective;
}

void DdpgAgent::soft_update_targets() {
    nn::soft_update(target_actor_.parameters(), actor_.parameters(), hyper_.tau);
    nn::soft_update(target_critic_.parameters(), critic_.parameters(), hyper_.tau);
}

std::vector<double> random_policy(RngStream& rng, std::size_t dim) {
    std::vector<double> out(dim);
    for (auto& v : out) v = rng.uniform(-1.0, 1.0);
    return out;
}

std::vector<double> TrainingLog::rewards() const {
    std::vector<double> out;
    for (const auto& e : episodes) out.push_back(e.reward);
    return out;
}

std::vector<double> TrainingLog::avg_rewards() const {
    std::vector<double> out;
    for (const auto& e : episodes) out.push_back(e.avg_reward);
    return out;
}

namespace {

template <class Policy, class Learn>
TrainingLog episode_loop(Environment& env, std::size_t episodes, std::size_t slots, TrajectoryLogger* logger,
                         Policy&& policy, Learn&& learn) {
    TrainingLog log;
    std::vector<double> rewards;
    for (std::size_t e = 0; e < episodes; ++e) {
        EpisodeRecord rec;
        rec.episode = e;
        std::vector<std::vector<double>> history{env.reset()};
        double total = 0.0, psi_total = 0.0, mse_total = 0.0;
        for (std::size_t t = 0; t < slots && !env.done(); ++t) {
            const std::vector<double> state = history.back();
            const std::vector<double> action = policy(e, history);
            const StepOutcome out = env.step(action);
            if (logger) logger->log(e, t, state, action, out);
            total += out.reward;
            psi_total += out.info.terms.psi;
            mse_total += out.info.mse.total;
            rec.mse_violations += out.info.mse_violation ? 1 : 0;
            rec.rate_violations += out.info.rate_violation ? 1 : 0;
            ++rec.slots;
            Transition tr{state, action, out.reward, out.next_state, out.done, t == 0};
            history.push_back(out.next_state);
            learn(tr, false, rec);
        }
        learn(Transition{}, true, rec);
        rec.reward = total / static_cast<double>(rec.slots);
        rec.mean_psi = psi_total / static_cast<double>(rec.slots);
        rec.mean_mse = mse_total / static_cast<double>(rec.slots);
        rewards.push_back(rec.reward);
        rec.avg_reward = avg_reward(rewards, e);
        log.episodes.push_back(rec);
    }
    return log;
}

}  // namespace

TrainingLog train(DdpgAgent& agent, Environment& env, std::size_t episodes, std::size_t slots, TrajectoryLogger* logger) {
    const AgentHyper& h = agent.hyper();
    if (env.state_dim() != agent.state_dim() || env.action_dim() != agent.action_dim())
        throw std::invalid_argument("train: agent and environment dimensions differ");
    ReplayBuffer buffer(h.buffer_capacity, agent.state_dim(), agent.action_dim());
    const std::size_t steps = h.recurrent ? h.history : 1;

    auto update = [&](EpisodeRecord& rec, std::size_t count) {
        double loss = 0.0, objective = 0.0;
        std::size_t done = 0;
        for (std::size_t u = 0; u < count && buffer.size() >= h.batch_size; ++u, ++done) {
            const Batch batch = buffer.sample(agent.sample_rng(), h.batch_size, steps);
            loss += agent.critic_update(batch);
            objective += agent.actor_update(batch);
            agent.soft_update_targets();
        }
        if (done > 0) {
            rec.critic_loss = loss / static_cast<double>(done);
            rec.actor_objective = objective / static_cast<double>(done);
        }
    };

    auto policy = [&](std::size_t e, const std::vector<std::vector<double>>& history) {
        agent.set_exploration(exploration_sigma(h, e));
        return agent.act(history, true);
    };
    auto learn = [&](const Transition& tr, bool episode_end, EpisodeRecord& rec) {
        if (!episode_end) {
            buffer.push(tr);
            if (h.per_slot_updates) update(rec, 1);
        } else if (!h.per_slot_updates) {
            update(rec, h.updates_per_episode);
        }
    };
    return episode_loop(env, episodes, slots, logger, policy, learn);
}

TrainingLog run_random_policy(Environment& env, RngStream& rng, std::size_t episodes, std::size_t slots,
                              TrajectoryLogger* logger) {
    auto policy = [&](std::size_t, const std::vector<std::vector<double>>&) {
        return random_policy(rng, env.action_dim());
    };
    auto learn = [](const Transition&, bool, EpisodeRecord&) {};
    return episode_loop(env, episodes, slots, logger, policy, learn);
}

}  // namespace risfl
