#include "risfl/phy/phy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "risfl/core/stats.hpp"

namespace risfl {

nlohmann::json to_json(const MseBreakdown& m) {
    return {{"misalignment", m.misalignment}, {"sic_error", m.sic_error},         {"csi_error", m.csi_error},
            {"sic_csi_error", m.sic_csi_error}, {"noise_error", m.noise_error}, {"total", m.total}};
}

std::vector<std::size_t> sic_order(std::span<const double> gains) {
    std::vector<std::size_t> order(gains.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return gains[a] < gains[b]; });
    return order;
}

namespace {

void check_alloc(const PowerAllocation& alloc, std::size_t users) {
    if (alloc.power.size() != users) throw std::invalid_argument("power allocation does not cover every user");
}

}  // namespace

std::vector<double> noma_sinrs(const PowerAllocation& alloc, std::span<const double> gains,
                               std::span<const std::size_t> order, std::size_t num_airfl, double sic_residual,
                               double noise) {
    if (!(noise > 0.0)) throw std::invalid_argument("noma_sinrs: noise power must be positive");
    check_alloc(alloc, gains.size());
    const std::size_t num_noma = gains.size() - num_airfl;
    if (order.size() != num_noma) throw std::invalid_argument("noma_sinrs: order must cover every NOMA user");

    double airfl = 0.0;
    for (std::size_t k = 0; k < num_airfl; ++k) airfl += alloc.power[k] * gains[k];

    std::vector<double> received(num_noma);
    for (std::size_t rank = 0; rank < num_noma; ++rank) {
        const std::size_t u = num_airfl + order[rank];
        received[rank] = alloc.power[u] * gains[u];
    }
    std::vector<double> out(num_noma);
    for (std::size_t rank = 0; rank < num_noma; ++rank) {
        double weaker = 0.0, stronger = 0.0;
        for (std::size_t j = 0; j < rank; ++j) weaker += received[j];
        for (std::size_t j = rank + 1; j < num_noma; ++j) stronger += received[j];
        out[order[rank]] = received[rank] / (airfl + weaker + sic_residual * stronger + noise);
    }
    return out;
}

double sinr_noma(const PowerAllocation& alloc, std::span<const double> gains, std::span<const std::size_t> order,
                 std::size_t rank, std::size_t num_airfl, double sic_residual, double noise) {
    if (rank >= order.size()) throw std::out_of_range("sinr_noma: rank outside the NOMA set");
    return noma_sinrs(alloc, gains, order, num_airfl, sic_residual, noise)[order[rank]];
}

RateResult rates(const PowerAllocation& alloc, std::span<const double> gains, std::span<const std::size_t> order,
                 std::size_t num_airfl, double sic_residual, double noise, double bandwidth) {
    RateResult out;
    for (double g : noma_sinrs(alloc, gains, order, num_airfl, sic_residual, noise)) {
        out.per_user.push_back(bandwidth * std::log2(1.0 + g));
        out.total += out.per_user.back();
    }
    return out;
}

Complex received_signal(RngStream& rng, std::span<const Complex> symbols, std::span<const Complex> channels,
                        const PowerAllocation& alloc, std::size_t num_airfl, double sic_residual, double noise,
                        bool residual_mode) {
    if (symbols.size() != channels.size()) throw std::invalid_argument("received_signal: one symbol per user");
    check_alloc(alloc, channels.size());
    const double noma_scale = residual_mode ? std::sqrt(sic_residual) : 1.0;
    Complex y{0.0, 0.0};
    for (std::size_t i = 0; i < channels.size(); ++i) {
        const double scale = i < num_airfl ? 1.0 : noma_scale;
        y += scale * channels[i] * std::sqrt(alloc.power[i]) * symbols[i];
    }
    return y + rng.cscg(noise);
}

MseBreakdown analytic_mse(const PowerAllocation& alloc, std::span<const Complex> estimated,
                          std::span<const double> csi_variances, double sic_residual, double noise,
                          std::size_t num_airfl, std::size_t grad_dim) {
    if (!(alloc.eta > 0.0)) throw std::invalid_argument("analytic_mse: eta must be positive");
    if (estimated.size() != csi_variances.size()) throw std::invalid_argument("analytic_mse: size mismatch");
    check_alloc(alloc, estimated.size());
    if (num_airfl == 0 || num_airfl > estimated.size()) throw std::invalid_argument("analytic_mse: bad AirFL count");

    const double k2 = static_cast<double>(num_airfl * num_airfl);
    const double sqrt_eta = std::sqrt(alloc.eta);
    MseBreakdown m;
    for (std::size_t k = 0; k < num_airfl; ++k) {
        m.misalignment += std::norm(estimated[k] * std::sqrt(alloc.power[k]) / sqrt_eta - 1.0);
        m.csi_error += alloc.power[k] * csi_variances[k];
    }
    for (std::size_t n = num_airfl; n < estimated.size(); ++n) {
        m.sic_error += alloc.power[n] * std::norm(estimated[n]);
        m.sic_csi_error += alloc.power[n] * csi_variances[n];
    }
    m.misalignment /= k2;
    m.csi_error /= k2 * alloc.eta;
    m.sic_error *= sic_residual / (k2 * alloc.eta);
    m.sic_csi_error *= sic_residual / (k2 * alloc.eta);
    m.noise_error = static_cast<double>(grad_dim) * noise / (k2 * alloc.eta);
    m.total = m.misalignment + m.sic_error + m.csi_error + m.sic_csi_error + m.noise_error;
    return m;
}

MonteCarloEstimate monte_carlo_mse(RngStream& rng, const PowerAllocation& alloc, std::span<const Complex> estimated,
                                   std::span<const double> csi_variances, double sic_residual, double noise,
                                   std::size_t num_airfl, std::size_t samples) {
    if (!(alloc.eta > 0.0)) throw std::invalid_argument("monte_carlo_mse: eta must be positive");
    if (samples < 1000) throw std::invalid_argument("monte_carlo_mse: need at least 1000 samples");
    if (estimated.size() != csi_variances.size()) throw std::invalid_argument("monte_carlo_mse: size mismatch");
    check_alloc(alloc, estimated.size());
    const std::size_t users = estimated.size();
    const double scale = 1.0 / (static_cast<double>(num_airfl) * std::sqrt(alloc.eta));

    ComplexVec symbols(users), channels(users);
    RunningStats stats;
    for (std::size_t s = 0; s < samples; ++s) {
        Complex target{0.0, 0.0};
        for (std::size_t i = 0; i < users; ++i) {
            symbols[i] = rng.cscg(1.0);
            channels[i] = estimated[i] + rng.cscg(csi_variances[i]);
            if (i < num_airfl) target += symbols[i];
        }
        target /= static_cast<double>(num_airfl);
        const Complex y = received_signal(rng, symbols, channels, alloc, num_airfl, sic_residual, noise, true);
        stats.add(std::norm(scale * y - target));
    }
    const MeanVar mv = stats.result();
    return {mv.mean, mv.std_error()};
}

}  // namespace risfl
