#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "risfl/channel/channel.hpp"
#include "risfl/convergence/convergence.hpp"
#include "risfl/fl/policy.hpp"
#include "risfl/phy/phy.hpp"

namespace risfl {

enum class Variant { no_ris, single_ris, multi_ris, random_phase };

Variant variant_from_string(const std::string& name);
std::string to_string(Variant v);

/// Scenario with the surface layout of the variant. single_ris and random_phase
/// merge all elements into one surface at (50, 0, 20); no_ris drops every
/// surface; multi_ris keeps the given layout and needs at least two surfaces.
ScenarioConfig apply_variant(const ScenarioConfig& s, Variant v);

std::size_t state_dim(const ScenarioConfig& s);
std::size_t action_dim(const ScenarioConfig& s);

/// Estimated channels scaled by the inverse square root of their expected power.
std::vector<double> encode_state(const ChannelRealization& ch, const LinkGains& gains);

/// Raw action in [-1, 1]^dim (clamped) to powers, phases and eta.
/// Layout: one power per user, then phases surface by surface, then eta.
Allocation decode_action(std::span<const double> raw, const ScenarioConfig& s);

struct SlotInfo {
    std::vector<double> rates;  // bit/s per NOMA user
    MseBreakdown mse;
    RoundErrorTerms terms;      // terms.psi is the raw error term
    double psi_scaled = 0.0;
    bool mse_violation = false;   // chi_m
    bool rate_violation = false;  // chi_s
};

nlohmann::json to_json(const SlotInfo& info);

/// Rates on true channels, SIC order, MSE and error term on estimates.
SlotInfo evaluate_allocation(const ChannelRealization& ch, const ScenarioConfig& s, const Allocation& alloc,
                             const BoundConstants& c);

/// log(1 + psi / reference)
double scale_psi(double psi_value, double reference);

double reward_from(const SlotInfo& info, const ScenarioConfig& s);

struct StepOutcome {
    std::vector<double> next_state;
    double reward = 0.0;
    bool done = false;
    SlotInfo info;
};

class Environment {
public:
    Environment(const ScenarioConfig& scenario, Variant variant, std::uint64_t seed, BoundConstants constants = {});

    const ScenarioConfig& scenario() const noexcept { return scenario_; }
    Variant variant() const noexcept { return variant_; }
    const BoundConstants& constants() const noexcept { return constants_; }
    std::size_t state_dim() const noexcept { return state_dim_; }
    std::size_t action_dim() const noexcept { return action_dim_; }

    std::vector<double> reset();
    StepOutcome step(std::span<const double> raw_action);
    /// Step with an already decoded allocation (baseline policies).
    StepOutcome step_allocation(Allocation alloc);

    const ChannelRealization& realization() const noexcept { return current_; }
    /// Allocation applied by the last step, after any variant override.
    const Allocation& last_allocation() const noexcept { return last_allocation_; }
    const std::vector<double>& state() const noexcept { return state_; }
    bool done() const noexcept { return done_; }
    std::size_t slot() const noexcept { return slot_; }
    double psi_reference() const noexcept { return psi_reference_; }

private:
    void draw_slot();

    ScenarioConfig scenario_;
    Variant variant_;
    BoundConstants constants_;
    LinkGains gains_;
    std::size_t state_dim_ = 0;
    std::size_t action_dim_ = 0;
    RngStream channel_rng_;
    RngStream aod_rng_;
    RngStream phase_rng_;
    std::vector<double> aods_;
    ChannelRealization current_;
    std::vector<double> state_;
    Allocation last_allocation_;
    std::size_t slot_ = 0;
    bool done_ = true;
    double psi_reference_ = 1.0;
};

Environment make_env(const ScenarioConfig& scenario, Variant variant, std::uint64_t seed, BoundConstants constants = {});

/// Mean of the episode rewards in the window [e - 100, e], truncated at 0.
double avg_reward(std::span<const double> episode_rewards, std::size_t e);

/// FNV-1a over the bytes of the state.
std::uint64_t state_hash(std::span<const double> state);

/// JSON-lines trajectory writer.
class TrajectoryLogger {
public:
    explicit TrajectoryLogger(std::ostream& out) : out_(out) {}
    void log(std::size_t episode, std::size_t slot, std::span<const double> state, std::span<const double> action,
             const StepOutcome& outcome);

private:
    std::ostream& out_;
};

}  // namespace risfl
