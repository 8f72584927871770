#pragma once

#include <functional>
#include <string>

#include "risfl/channel/channel.hpp"
#include "risfl/core/scenario.hpp"
#include "risfl/phy/phy.hpp"

namespace risfl {

struct Allocation {
    PowerAllocation power;
    PhaseConfig phases;
};

/// Non-learned baseline. Every surface is co-phased toward the weakest AirFL
/// user, eta = min_k P_max |h_k|^2, AirFL users invert their channel gain, and
/// NOMA users share the largest power that keeps the analytic MSE within
/// tolerance (P_max/10 when the tolerance is already exceeded).
Allocation inversion_heuristic(const ChannelRealization& ch, const ScenarioConfig& s);

/// As inversion_heuristic, but AirFL users scale their power by max(cos(arg h_k), 0)^2
/// so that the real part of each effective gain is at most one.
Allocation aligned_inversion(const ChannelRealization& ch, const ScenarioConfig& s);

using AllocationPolicy = std::function<Allocation(const ChannelRealization&, const ScenarioConfig&, RngStream&)>;

/// "inversion_heuristic" or "aligned_inversion".
AllocationPolicy policy_by_name(const std::string& name);

}  // namespace risfl
