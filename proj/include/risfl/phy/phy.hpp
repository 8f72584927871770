#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "risfl/core/rng.hpp"

namespace risfl {

/// Transmit powers for every user (AirFL users first, then NOMA users) and the
/// receive denoising factor.
struct PowerAllocation {
    std::vector<double> power;
    double eta = 1.0;
};

struct MseBreakdown {
    double misalignment = 0.0;
    double sic_error = 0.0;
    double csi_error = 0.0;
    double sic_csi_error = 0.0;
    double noise_error = 0.0;
    double total = 0.0;
};

nlohmann::json to_json(const MseBreakdown& m);

/// Ascending order of the given gains; ties keep input order. Returns positions into gains.
std::vector<std::size_t> sic_order(std::span<const double> gains);

/// SINR of every NOMA user under imperfect SIC.
///
/// gains holds |h|^2 for all users (AirFL users 0..K-1, NOMA users K..). order is
/// a NOMA-relative permutation in ascending strength; the strongest is decoded
/// first. Output is indexed NOMA-relative.
std::vector<double> noma_sinrs(const PowerAllocation& alloc, std::span<const double> gains,
                               std::span<const std::size_t> order, std::size_t num_airfl, double sic_residual,
                               double noise);
/// SINR of the NOMA user at SIC rank (0 = weakest).
double sinr_noma(const PowerAllocation& alloc, std::span<const double> gains, std::span<const std::size_t> order,
                 std::size_t rank, std::size_t num_airfl, double sic_residual, double noise);

struct RateResult {
    std::vector<double> per_user;  // bit/s, NOMA-relative
    double total = 0.0;
};

RateResult rates(const PowerAllocation& alloc, std::span<const double> gains, std::span<const std::size_t> order,
                 std::size_t num_airfl, double sic_residual, double noise, double bandwidth);

/// One received sample. channels are the true composite channels of all users.
/// In residual mode the NOMA contribution is scaled by sqrt(sic_residual).
Complex received_signal(RngStream& rng, std::span<const Complex> symbols, std::span<const Complex> channels,
                        const PowerAllocation& alloc, std::size_t num_airfl, double sic_residual, double noise,
                        bool residual_mode);

/// Closed-form aggregation MSE from estimated channels and composite error variances.
MseBreakdown analytic_mse(const PowerAllocation& alloc, std::span<const Complex> estimated,
                          std::span<const double> csi_variances, double sic_residual, double noise,
                          std::size_t num_airfl, std::size_t grad_dim);

struct MonteCarloEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

/// Sample mean of |s_hat - s|^2 per symbol with s the average AirFL symbol.
/// Estimates are held fixed; symbols, channel errors and noise are redrawn per sample.
MonteCarloEstimate monte_carlo_mse(RngStream& rng, const PowerAllocation& alloc, std::span<const Complex> estimated,
                                   std::span<const double> csi_variances, double sic_residual, double noise,
                                   std::size_t num_airfl, std::size_t samples);

}  // namespace risfl
