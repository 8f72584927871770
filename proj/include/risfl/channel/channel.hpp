#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "risfl/core/rng.hpp"
#include "risfl/core/scenario.hpp"

namespace risfl {

/// Large-scale gain L(d) = rho0 * d^-alpha. Throws for d < 1 m.
double path_loss(double d, double alpha, double rho0);

/// LoS array response of a half-wavelength uniform linear surface.
ComplexVec los_steering(std::size_t m, double aod);

/// Surface-to-BS Rician channel with the given departure angle.
ComplexVec sample_ris_bs(RngStream& rng, std::size_t m, double d0, double kappa, double alpha, double rho0,
                         double aod);
/// Same, with the departure angle drawn uniformly on [0, 2pi).
ComplexVec sample_ris_bs(RngStream& rng, std::size_t m, double d0, double kappa, double alpha, double rho0);

/// Expected link powers implied by the geometry.
struct LinkGains {
    std::vector<double> direct;                  // [user]
    std::vector<double> ris_bs;                  // [surface]
    std::vector<std::vector<double>> user_ris;   // [user][surface]
};

/// Requires user positions. Throws if any link is shorter than 1 m.
LinkGains link_gains(const ScenarioConfig& s);

struct ChannelRealization {
    std::vector<Complex> direct;                        // r_i
    std::vector<ComplexVec> ris_bs;                     // G_x
    std::vector<std::vector<ComplexVec>> user_ris;      // h_{i,x}
    std::vector<std::vector<ComplexVec>> cascaded;      // Phi_{i,x} = diag(G_x^H) h_{i,x}
    std::vector<Complex> direct_est;
    std::vector<std::vector<ComplexVec>> cascaded_est;
    std::vector<double> direct_var;                     // sigma^2_{r,i}
    std::vector<std::vector<double>> cascaded_var;      // sigma^2_{Phi,i,x}
    std::vector<double> aod;

    std::size_t num_users() const noexcept { return direct.size(); }
    std::size_t num_ris() const noexcept { return ris_bs.size(); }
};

/// One departure angle per surface, uniform on [0, 2pi).
std::vector<double> sample_aods(RngStream& rng, std::size_t num_ris);

/// Draws one slot of small-scale fading and the matching channel estimates.
///
/// Consumes exactly one 64-bit word from rng and draws every link family from
/// its own derived sub-stream, so two scenarios that differ only in surface
/// count, size or impairment level see common random numbers.
ChannelRealization sample_realization(RngStream& rng, const ScenarioConfig& s, std::span<const double> aods);
ChannelRealization sample_realization(RngStream& rng, const ScenarioConfig& s);

/// Overwrites the estimates with true - error, error ~ CSCG(0, csi_level * expected power).
void apply_csi_error(RngStream& rng, ChannelRealization& ch, const LinkGains& gains, double csi_level);

struct PhaseConfig {
    std::vector<std::vector<double>> theta;  // [surface][element], radians in [0, 2pi)

    ComplexVec phasors(std::size_t x) const;
};

double wrap_phase(double theta);
PhaseConfig zero_phases(const ScenarioConfig& s);
PhaseConfig random_phases(RngStream& rng, const ScenarioConfig& s);

/// r_i + sum_x v_x^H Phi_{i,x}, with v_x^H Phi = sum_m e^{j theta_m} Phi_m.
Complex composite(const ChannelRealization& ch, const PhaseConfig& phases, std::size_t user, bool use_estimates);
ComplexVec composite_all(const ChannelRealization& ch, const PhaseConfig& phases, bool use_estimates);

/// sigma^2_r + sum_x M_x sigma^2_Phi,x
double composite_variance(double direct_var, std::span<const std::size_t> elements, std::span<const double> cascaded_var);
double composite_variance(const ChannelRealization& ch, std::size_t user);
std::vector<double> composite_variances(const ChannelRealization& ch);

}  // namespace risfl
