#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "risfl/channel/channel.hpp"
#include "risfl/convergence/convergence.hpp"
#include "risfl/fl/policy.hpp"
#include "risfl/fl/task.hpp"

namespace risfl {

/// Over-the-air estimate of the average gradient.
///
/// channels are the true composite channels of all users (AirFL first). Each
/// coordinate is sent as one real symbol; NOMA users add i.i.d. unit symbols
/// scaled by sqrt(sic_residual); the real part of y / (K sqrt(eta)) is kept.
Eigen::VectorXd ota_aggregate(RngStream& rng, const std::vector<Eigen::VectorXd>& gradients,
                              std::span<const Complex> channels, const PowerAllocation& alloc, double sic_residual,
                              double noise);

/// w - learn_rate * aggregated
Eigen::VectorXd global_update(const Eigen::VectorXd& w, const Eigen::VectorXd& aggregated, double learn_rate);

enum class AggregationMode { perfect, over_the_air };

struct AirFLOptions {
    std::size_t rounds = 200;
    BoundConstants constants;  // learn_rate is the step size
    AggregationMode mode = AggregationMode::over_the_air;
    ScenarioConfig scenario;   // user positions must be placed
    AllocationPolicy policy;
    /// Overrides channel sampling when set.
    std::function<ChannelRealization(RngStream&)> channel_source;
    /// Zero vector when empty.
    Eigen::VectorXd initial;
};

struct AirFLRound {
    Eigen::VectorXd w;           // model before the update
    Eigen::VectorXd gradient;    // exact average gradient
    Eigen::VectorXd aggregated;  // received estimate
    Eigen::VectorXd error;       // aggregated - gradient
    double gap = 0.0;            // F(w) - F*, before the update
    double gap_next = 0.0;       // after the update
    RoundErrorTerms terms;
    double mse_total = 0.0;
    double omega = 0.0;          // bound on gap_next
};

struct AirFLRun {
    double initial_gap = 0.0;
    std::vector<AirFLRound> rounds;
};

AirFLRun run_airfl(const QuadraticTask& task, const AirFLOptions& options, RngStream& rng);

}  // namespace risfl
