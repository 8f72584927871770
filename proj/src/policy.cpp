#include "risfl/fl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace risfl {

namespace {

PhaseConfig cophase_weakest(const ChannelRealization& ch, const ScenarioConfig& s) {
    std::size_t weakest = 0;
    double weakest_reach = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < s.num_airfl_users; ++k) {
        double reach = std::abs(ch.direct_est[k]);
        for (const auto& cascade : ch.cascaded_est[k])
            for (const auto& phi : cascade) reach += std::abs(phi);
        if (reach < weakest_reach) {
            weakest_reach = reach;
            weakest = k;
        }
    }
    PhaseConfig phases = zero_phases(s);
    const double target = std::arg(ch.direct_est[weakest]);
    for (std::size_t x = 0; x < ch.num_ris(); ++x)
        for (std::size_t m = 0; m < phases.theta[x].size(); ++m)
            phases.theta[x][m] = wrap_phase(target - std::arg(ch.cascaded_est[weakest][x][m]));
    return phases;
}

Allocation invert(const ChannelRealization& ch, const ScenarioConfig& s, bool align) {
    const std::size_t k_users = s.num_airfl_users;
    const std::size_t users = s.num_users();
    if (ch.num_users() != users) throw std::invalid_argument("inversion heuristic: realization does not match scenario");

    Allocation out;
    out.phases = cophase_weakest(ch, s);
    const ComplexVec est = composite_all(ch, out.phases, true);
    const std::vector<double> var = composite_variances(ch);

    double eta = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < k_users; ++k) eta = std::min(eta, s.max_power * std::norm(est[k]));
    if (!(eta > 0.0)) throw std::invalid_argument("inversion heuristic: zero channel");

    out.power.eta = eta;
    out.power.power.assign(users, 0.0);
    for (std::size_t k = 0; k < k_users; ++k) {
        double p = eta / std::norm(est[k]);
        if (align) {
            const double c = std::max(std::cos(std::arg(est[k])), 0.0);
            p *= c * c;
        }
        out.power.power[k] = std::min(p, s.max_power);
    }

    if (users > k_users) {
        const MseBreakdown base = analytic_mse(out.power, est, var, s.sic_residual, s.noise_power, k_users, s.grad_dim);
        double slope = 0.0;
        for (std::size_t n = k_users; n < users; ++n) slope += std::norm(est[n]) + var[n];
        slope *= s.sic_residual / (static_cast<double>(k_users * k_users) * eta);
        double noma_power = s.max_power / 10.0;
        if (base.total <= s.mse_tolerance)
            noma_power = slope > 0.0 ? std::min(s.max_power, (s.mse_tolerance - base.total) / slope) : s.max_power;
        for (std::size_t n = k_users; n < users; ++n) out.power.power[n] = noma_power;
    }
    return out;
}

}  // namespace

Allocation inversion_heuristic(const ChannelRealization& ch, const ScenarioConfig& s) { return invert(ch, s, false); }

Allocation aligned_inversion(const ChannelRealization& ch, const ScenarioConfig& s) { return invert(ch, s, true); }

AllocationPolicy policy_by_name(const std::string& name) {
    if (name == "inversion_heuristic")
        return [](const ChannelRealization& ch, const ScenarioConfig& s, RngStream&) { return inversion_heuristic(ch, s); };
    if (name == "aligned_inversion")
        return [](const ChannelRealization& ch, const ScenarioConfig& s, RngStream&) { return aligned_inversion(ch, s); };
    throw std::invalid_argument("unknown allocation policy '" + name + "'");
}

}  // namespace risfl
