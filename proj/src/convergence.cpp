#include "risfl/convergence/convergence.hpp"

#include <cmath>
#include <stdexcept>

namespace risfl {

namespace {

double contraction(const BoundConstants& c) {
    const double lm = c.learn_rate * c.pl_constant;
    if (!(lm > 0.0 && lm < 1.0)) throw std::invalid_argument("need 0 < lambda * mu < 1");
    return 1.0 - lm;
}

}  // namespace

double bias_bound(std::span<const Complex> estimated_airfl, std::span<const double> power_airfl, double eta,
                  double grad_norm_bound) {
    if (!(eta > 0.0)) throw std::invalid_argument("bias_bound: eta must be positive");
    if (estimated_airfl.size() != power_airfl.size() || estimated_airfl.empty())
        throw std::invalid_argument("bias_bound: size mismatch");
    const double k = static_cast<double>(estimated_airfl.size());
    const double sqrt_eta = std::sqrt(eta);
    double total = 0.0;
    for (std::size_t i = 0; i < estimated_airfl.size(); ++i)
        total += std::norm(estimated_airfl[i] * std::sqrt(power_airfl[i]) / sqrt_eta - 1.0);
    return total * grad_norm_bound / (k * k);
}

double variance_bound(std::span<const Complex> estimated, std::span<const double> power, double eta,
                      std::size_t num_airfl, double sic_residual, std::span<const double> csi_variances, double noise,
                      std::size_t grad_dim, double grad_norm_bound) {
    if (!(eta > 0.0)) throw std::invalid_argument("variance_bound: eta must be positive");
    if (estimated.size() != power.size() || estimated.size() != csi_variances.size())
        throw std::invalid_argument("variance_bound: size mismatch");
    if (num_airfl == 0 || num_airfl > estimated.size()) throw std::invalid_argument("variance_bound: bad AirFL count");
    const double k2 = static_cast<double>(num_airfl * num_airfl);
    const double sqrt_eta = std::sqrt(eta);
    double airfl = 0.0;
    for (std::size_t k = 0; k < num_airfl; ++k)
        airfl += std::norm(estimated[k] * std::sqrt(power[k]) / sqrt_eta - 1.0) + csi_variances[k] * power[k] / eta;
    double noma = 0.0;
    for (std::size_t n = num_airfl; n < estimated.size(); ++n)
        noma += (std::norm(estimated[n]) + csi_variances[n]) * power[n];
    return airfl * grad_norm_bound / k2 + sic_residual * noma / (k2 * eta) +
           static_cast<double>(grad_dim) * noise / (k2 * eta);
}

double psi(double bias_sq, double var, const BoundConstants& c) {
    const double l = c.smoothness, lr = c.learn_rate;
    if (lr > 2.0 / (2.0 + l)) throw std::invalid_argument("psi: learning rate exceeds 2/(2+L)");
    const double half_l_lr2 = 0.5 * l * lr * lr;
    return half_l_lr2 * c.delta_norm_sq() + 0.5 * (1.0 + l * l * lr * lr) * bias_sq + half_l_lr2 * var;
}

RoundErrorTerms round_error_terms(const PowerAllocation& alloc, std::span<const Complex> estimated,
                                  std::span<const double> csi_variances, std::size_t num_airfl, double sic_residual,
                                  double noise, const BoundConstants& c) {
    RoundErrorTerms t;
    t.bias_sq = bias_bound(estimated.first(num_airfl), std::span<const double>(alloc.power).first(num_airfl),
                           alloc.eta, c.grad_norm_bound);
    t.var = variance_bound(estimated, alloc.power, alloc.eta, num_airfl, sic_residual, csi_variances, noise,
                           c.grad_dim, c.grad_norm_bound);
    t.psi = psi(t.bias_sq, t.var, c);
    return t;
}

double omega(double initial_gap, std::span<const double> psis, const BoundConstants& c) {
    const double rho = contraction(c);
    double value = initial_gap;
    for (double p : psis) value = rho * value + p;
    return value;
}

bool recursion_check(double gap, double gap_next, double psi_value, const BoundConstants& c, double slack) {
    return gap_next <= contraction(c) * gap + psi_value + slack;
}

}  // namespace risfl
