#include "risfl/fl/airfl.hpp"

#include <cmath>
#include <stdexcept>

namespace risfl {

Eigen::VectorXd ota_aggregate(RngStream& rng, const std::vector<Eigen::VectorXd>& gradients,
                              std::span<const Complex> channels, const PowerAllocation& alloc, double sic_residual,
                              double noise) {
    if (!(alloc.eta > 0.0)) throw std::invalid_argument("ota_aggregate: eta must be positive");
    const std::size_t k_users = gradients.size();
    if (k_users == 0 || k_users > channels.size() || alloc.power.size() != channels.size())
        throw std::invalid_argument("ota_aggregate: inconsistent user counts");
    const Eigen::Index dim = gradients.front().size();

    ComplexVec airfl_gain(k_users);
    for (std::size_t k = 0; k < k_users; ++k) airfl_gain[k] = channels[k] * std::sqrt(alloc.power[k]);
    ComplexVec noma_gain;
    const double residual = std::sqrt(sic_residual);
    for (std::size_t n = k_users; n < channels.size(); ++n)
        noma_gain.push_back(residual * channels[n] * std::sqrt(alloc.power[n]));

    const double scale = 1.0 / (static_cast<double>(k_users) * std::sqrt(alloc.eta));
    Eigen::VectorXd out(dim);
    for (Eigen::Index q = 0; q < dim; ++q) {
        Complex y{0.0, 0.0};
        for (std::size_t k = 0; k < k_users; ++k) y += airfl_gain[k] * gradients[k][q];
        for (const auto& g : noma_gain) y += g * rng.cscg(1.0);
        y += rng.cscg(noise);
        out[q] = scale * y.real();
    }
    return out;
}

Eigen::VectorXd global_update(const Eigen::VectorXd& w, const Eigen::VectorXd& aggregated, double learn_rate) {
    if (w.size() != aggregated.size()) throw std::invalid_argument("global_update: shape mismatch");
    return w - learn_rate * aggregated;
}

AirFLRun run_airfl(const QuadraticTask& task, const AirFLOptions& o, RngStream& rng) {
    const BoundConstants& c = o.constants;
    c.validate();
    if (c.learn_rate > 2.0 / (2.0 + task.smoothness()))
        throw std::invalid_argument("run_airfl: learning rate exceeds 2/(2+L)");
    const bool over_air = o.mode == AggregationMode::over_the_air;
    if (over_air) {
        if (!o.policy) throw std::invalid_argument("run_airfl: over-the-air mode needs an allocation policy");
        if (o.scenario.num_airfl_users != task.num_users())
            throw std::invalid_argument("run_airfl: scenario and task disagree on the AirFL user count");
    }

    Eigen::VectorXd w = o.initial.size() > 0 ? o.initial : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(task.dim()));
    AirFLRun run;
    run.initial_gap = task.gap(w);
    const double rho = 1.0 - c.learn_rate * c.pl_constant;
    double omega_value = run.initial_gap;

    std::vector<double> aods;
    if (over_air && !o.channel_source) aods = sample_aods(rng, o.scenario.num_ris());

    for (std::size_t t = 0; t < o.rounds; ++t) {
        AirFLRound r;
        r.w = w;
        r.gap = task.gap(w);
        std::vector<Eigen::VectorXd> grads;
        r.gradient = Eigen::VectorXd::Zero(w.size());
        for (std::size_t k = 0; k < task.num_users(); ++k) {
            grads.push_back(task.local_gradient(k, w));
            r.gradient += grads.back();
        }
        r.gradient /= static_cast<double>(task.num_users());

        if (over_air) {
            const ChannelRealization ch =
                o.channel_source ? o.channel_source(rng) : sample_realization(rng, o.scenario, aods);
            const Allocation alloc = o.policy(ch, o.scenario, rng);
            const ComplexVec est = composite_all(ch, alloc.phases, true);
            const ComplexVec truth = composite_all(ch, alloc.phases, false);
            const std::vector<double> var = composite_variances(ch);
            r.aggregated = ota_aggregate(rng, grads, truth, alloc.power, o.scenario.sic_residual, o.scenario.noise_power);
            BoundConstants round_constants = c;
            round_constants.grad_dim = task.dim();
            r.terms = round_error_terms(alloc.power, est, var, task.num_users(), o.scenario.sic_residual,
                                        o.scenario.noise_power, round_constants);
            r.mse_total = analytic_mse(alloc.power, est, var, o.scenario.sic_residual, o.scenario.noise_power,
                                       task.num_users(), task.dim())
                              .total;
        } else {
            r.aggregated = r.gradient;
            r.terms.psi = psi(0.0, 0.0, c);
        }
        r.error = r.aggregated - r.gradient;
        w = global_update(w, r.aggregated, c.learn_rate);
        r.gap_next = task.gap(w);
        omega_value = rho * omega_value + r.terms.psi;
        r.omega = omega_value;
        run.rounds.push_back(std::move(r));
    }
    return run;
}

}  // namespace risfl
