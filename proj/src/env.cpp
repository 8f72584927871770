#include "risfl/env/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

namespace risfl {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

Variant variant_from_string(const std::string& name) {
    if (name == "no_ris") return Variant::no_ris;
    if (name == "single_ris") return Variant::single_ris;
    if (name == "multi_ris") return Variant::multi_ris;
    if (name == "random_phase") return Variant::random_phase;
    throw std::invalid_argument("unknown variant '" + name + "'");
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::no_ris: return "no_ris";
        case Variant::single_ris: return "single_ris";
        case Variant::multi_ris: return "multi_ris";
        case Variant::random_phase: return "random_phase";
    }
    return "unknown";
}

ScenarioConfig apply_variant(const ScenarioConfig& s, Variant v) {
    ScenarioConfig out = s;
    switch (v) {
        case Variant::no_ris:
            out.elements_per_ris.clear();
            out.ris_positions.clear();
            break;
        case Variant::single_ris:
        case Variant::random_phase:
            if (s.total_elements() == 0) throw std::invalid_argument("variant needs at least one surface element");
            out.elements_per_ris = {s.total_elements()};
            out.ris_positions = {{50.0, 0.0, 20.0}};
            break;
        case Variant::multi_ris:
            if (s.num_ris() < 2) throw std::invalid_argument("multi_ris variant needs two or more surfaces");
            break;
    }
    out.validate();
    return out;
}

std::size_t state_dim(const ScenarioConfig& s) {
    const std::size_t m = s.total_elements();
    return 2 * s.num_users() + 2 * m + 2 * s.num_users() * m;
}

std::size_t action_dim(const ScenarioConfig& s) { return s.num_users() + s.total_elements() + 1; }

std::vector<double> encode_state(const ChannelRealization& ch, const LinkGains& gains) {
    std::vector<double> out;
    auto push = [&](Complex z, double scale) {
        out.push_back(z.real() * scale);
        out.push_back(z.imag() * scale);
    };
    for (std::size_t i = 0; i < ch.num_users(); ++i) push(ch.direct_est[i], 1.0 / std::sqrt(gains.direct[i]));
    for (std::size_t x = 0; x < ch.num_ris(); ++x) {
        const double scale = 1.0 / std::sqrt(gains.ris_bs[x]);
        for (const auto& g : ch.ris_bs[x]) push(g, scale);
    }
    for (std::size_t i = 0; i < ch.num_users(); ++i)
        for (std::size_t x = 0; x < ch.num_ris(); ++x) {
            const double scale = 1.0 / std::sqrt(gains.ris_bs[x] * gains.user_ris[i][x]);
            for (const auto& phi : ch.cascaded_est[i][x]) push(phi, scale);
        }
    return out;
}

Allocation decode_action(std::span<const double> raw, const ScenarioConfig& s) {
    if (raw.size() != action_dim(s)) throw std::invalid_argument("decode_action: wrong action dimension");
    auto unit = [&](std::size_t idx) { return std::clamp(raw[idx], -1.0, 1.0); };
    Allocation a;
    std::size_t idx = 0;
    a.power.power.resize(s.num_users());
    for (auto& p : a.power.power) p = std::clamp(s.max_power * (unit(idx++) + 1.0) / 2.0, 0.0, s.max_power);
    for (auto m : s.elements_per_ris) {
        std::vector<double> row(m);
        for (auto& t : row) t = wrap_phase(kPi * (unit(idx++) + 1.0));
        a.phases.theta.push_back(std::move(row));
    }
    a.power.eta = s.eta_min * std::pow(s.eta_max / s.eta_min, (unit(idx) + 1.0) / 2.0);
    return a;
}

nlohmann::json to_json(const SlotInfo& info) {
    return {{"rates", info.rates},
            {"mse", to_json(info.mse)},
            {"bias_bound", info.terms.bias_sq},
            {"var_bound", info.terms.var},
            {"psi", info.terms.psi},
            {"psi_scaled", info.psi_scaled},
            {"chi_m", info.mse_violation ? 1 : 0},
            {"chi_s", info.rate_violation ? 1 : 0}};
}

SlotInfo evaluate_allocation(const ChannelRealization& ch, const ScenarioConfig& s, const Allocation& alloc,
                             const BoundConstants& c) {
    const std::size_t k_users = s.num_airfl_users;
    const ComplexVec est = composite_all(ch, alloc.phases, true);
    const ComplexVec truth = composite_all(ch, alloc.phases, false);
    const std::vector<double> var = composite_variances(ch);

    SlotInfo info;
    if (s.num_noma_users > 0) {
        std::vector<double> est_gain, true_gain(truth.size());
        for (std::size_t n = k_users; n < est.size(); ++n) est_gain.push_back(std::norm(est[n]));
        for (std::size_t i = 0; i < truth.size(); ++i) true_gain[i] = std::norm(truth[i]);
        const auto order = sic_order(est_gain);
        const RateResult r = rates(alloc.power, true_gain, order, k_users, s.sic_residual, s.noise_power, s.bandwidth);
        info.rates = r.per_user;
        for (double rate : info.rates)
            if (rate < s.min_rate) info.rate_violation = true;
    }
    info.mse = analytic_mse(alloc.power, est, var, s.sic_residual, s.noise_power, k_users, s.grad_dim);
    info.mse_violation = info.mse.total > s.mse_tolerance;
    BoundConstants bc = c;
    bc.grad_dim = s.grad_dim;
    info.terms = round_error_terms(alloc.power, est, var, k_users, s.sic_residual, s.noise_power, bc);
    return info;
}

double scale_psi(double psi_value, double reference) { return std::log1p(psi_value / reference); }

double reward_from(const SlotInfo& info, const ScenarioConfig& s) {
    return -info.psi_scaled + s.penalty_mse * (info.mse_violation ? 1.0 : 0.0) +
           s.penalty_rate * (info.rate_violation ? 1.0 : 0.0);
}

Environment::Environment(const ScenarioConfig& scenario, Variant variant, std::uint64_t seed, BoundConstants constants)
    : scenario_(apply_variant(scenario, variant)),
      variant_(variant),
      constants_(std::move(constants)),
      channel_rng_(mix_seed(seed, 1)),
      aod_rng_(mix_seed(seed, 2)),
      phase_rng_(mix_seed(seed, 3)) {
    constants_.validate();
    if (scenario_.user_positions.empty()) {
        RngStream placement(mix_seed(seed, 0));
        scenario_.user_positions = place_users(scenario_, placement);
    }
    scenario_.validate();
    gains_ = link_gains(scenario_);
    state_dim_ = risfl::state_dim(scenario_);
    action_dim_ = risfl::action_dim(scenario_);
}

void Environment::draw_slot() {
    current_ = sample_realization(channel_rng_, scenario_, aods_);
    state_ = encode_state(current_, gains_);
}

std::vector<double> Environment::reset() {
    aods_ = sample_aods(aod_rng_, scenario_.num_ris());
    slot_ = 0;
    done_ = false;
    draw_slot();
    const Allocation reference = inversion_heuristic(current_, scenario_);
    psi_reference_ = evaluate_allocation(current_, scenario_, reference, constants_).terms.psi;
    if (!(psi_reference_ > 0.0)) psi_reference_ = 1.0;
    return state_;
}

StepOutcome Environment::step(std::span<const double> raw_action) {
    if (raw_action.size() != action_dim_) throw std::invalid_argument("step: wrong action dimension");
    return step_allocation(decode_action(raw_action, scenario_));
}

StepOutcome Environment::step_allocation(Allocation alloc) {
    if (done_) throw std::logic_error("step: episode is over, call reset");
    if (variant_ == Variant::random_phase) alloc.phases = random_phases(phase_rng_, scenario_);

    StepOutcome out;
    out.info = evaluate_allocation(current_, scenario_, alloc, constants_);
    out.info.psi_scaled = scale_psi(out.info.terms.psi, psi_reference_);
    out.reward = reward_from(out.info, scenario_);
    last_allocation_ = std::move(alloc);
    ++slot_;
    done_ = slot_ >= scenario_.slots_per_episode || out.info.rate_violation;
    out.done = done_;
    draw_slot();
    out.next_state = state_;
    return out;
}

Environment make_env(const ScenarioConfig& scenario, Variant variant, std::uint64_t seed, BoundConstants constants) {
    return Environment(scenario, variant, seed, std::move(constants));
}

double avg_reward(std::span<const double> episode_rewards, std::size_t e) {
    if (e >= episode_rewards.size()) throw std::out_of_range("avg_reward: episode index past the log");
    const std::size_t first = e >= 100 ? e - 100 : 0;
    double total = 0.0;
    for (std::size_t i = first; i <= e; ++i) total += episode_rewards[i];
    return total / static_cast<double>(e - first + 1);
}

std::uint64_t state_hash(std::span<const double> state) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : state) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

void TrajectoryLogger::log(std::size_t episode, std::size_t slot, std::span<const double> state,
                           std::span<const double> action, const StepOutcome& outcome) {
    nlohmann::json rec;
    rec["episode"] = episode;
    rec["slot"] = slot;
    rec["state_hash"] = state_hash(state);
    rec["action"] = std::vector<double>(action.begin(), action.end());
    rec["reward"] = outcome.reward;
    rec["done"] = outcome.done;
    rec["info"] = to_json(outcome.info);
    out_ << rec.dump() << '\n';
}

}  // namespace risfl
