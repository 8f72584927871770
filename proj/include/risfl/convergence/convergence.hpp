#pragma once

#include <cstddef>
#include <span>

#include "risfl/core/rng.hpp"
#include "risfl/core/scenario.hpp"
#include "risfl/phy/phy.hpp"

namespace risfl {

struct RoundErrorTerms {
    double bias_sq = 0.0;  // bound on ||E eps||^2
    double var = 0.0;      // bound on E||eps||^2
    double psi = 0.0;
};

/// (1/K^2) sum_k |h_k sqrt(p_k)/sqrt(eta) - 1|^2 * varpi^2 over the AirFL users.
double bias_bound(std::span<const Complex> estimated_airfl, std::span<const double> power_airfl, double eta,
                  double grad_norm_bound);

/// Aggregation-error second-moment bound. Channels, powers and variances cover all users.
double variance_bound(std::span<const Complex> estimated, std::span<const double> power, double eta,
                      std::size_t num_airfl, double sic_residual, std::span<const double> csi_variances, double noise,
                      std::size_t grad_dim, double grad_norm_bound);

/// (L lambda^2/2)||delta||^2 + ((1 + L^2 lambda^2)/2) bias_sq + (L lambda^2/2) var
double psi(double bias_sq, double var, const BoundConstants& c);

/// Bias, variance and psi for one allocation.
RoundErrorTerms round_error_terms(const PowerAllocation& alloc, std::span<const Complex> estimated,
                                  std::span<const double> csi_variances, std::size_t num_airfl, double sic_residual,
                                  double noise, const BoundConstants& c);

/// (1 - lambda mu)^T gap_1 + sum_t (1 - lambda mu)^(T - t) psi_t, T = psis.size().
double omega(double initial_gap, std::span<const double> psis, const BoundConstants& c);

/// gap_next <= (1 - lambda mu) gap + psi + slack
bool recursion_check(double gap, double gap_next, double psi_value, const BoundConstants& c, double slack = 0.0);

}  // namespace risfl
