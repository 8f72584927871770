#include "risfl/channel/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace risfl {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Sub-stream identifiers for one slot.
constexpr std::uint64_t kSurfaceStream = 1;
constexpr std::uint64_t kDirectStream = 2;
constexpr std::uint64_t kErrorStream = 3;
constexpr std::uint64_t kUserRisStream = 1000;
constexpr std::uint64_t kCascadeErrorStream = 1'000'000;

}  // namespace

double path_loss(double d, double alpha, double rho0) {
    if (!(d >= 1.0)) throw std::invalid_argument("path_loss: distance below the 1 m reference");
    return rho0 * std::pow(d, -alpha);
}

ComplexVec los_steering(std::size_t m, double aod) {
    if (m == 0) throw std::invalid_argument("los_steering: need at least one element");
    ComplexVec out(m);
    const double step = kTwoPi * 0.5 * std::sin(aod);
    for (std::size_t k = 0; k < m; ++k) out[k] = std::polar(1.0, step * static_cast<double>(k));
    return out;
}

ComplexVec sample_ris_bs(RngStream& rng, std::size_t m, double d0, double kappa, double alpha, double rho0,
                         double aod) {
    if (kappa < 0.0) throw std::invalid_argument("sample_ris_bs: negative Rician factor");
    const double amplitude = std::sqrt(path_loss(d0, alpha, rho0));
    const double los_weight = std::sqrt(kappa / (kappa + 1.0));
    const double nlos_weight = std::sqrt(1.0 / (kappa + 1.0));
    ComplexVec out = los_steering(m, aod);
    for (auto& g : out) g = amplitude * (los_weight * g + nlos_weight * rng.cscg(1.0));
    return out;
}

ComplexVec sample_ris_bs(RngStream& rng, std::size_t m, double d0, double kappa, double alpha, double rho0) {
    const double aod = kTwoPi * rng.uniform();
    return sample_ris_bs(rng, m, d0, kappa, alpha, rho0, aod);
}

LinkGains link_gains(const ScenarioConfig& s) {
    if (s.user_positions.size() != s.num_users())
        throw std::invalid_argument("link_gains: user positions not placed");
    LinkGains g;
    for (const auto& p : s.ris_positions)
        g.ris_bs.push_back(path_loss(distance(s.bs_position, p), s.exponent_ris, s.ref_path_loss));
    for (const auto& u : s.user_positions) {
        g.direct.push_back(path_loss(distance(s.bs_position, u), s.exponent_direct, s.ref_path_loss));
        std::vector<double> row;
        for (const auto& p : s.ris_positions) row.push_back(path_loss(distance(u, p), s.exponent_ris, s.ref_path_loss));
        g.user_ris.push_back(std::move(row));
    }
    return g;
}

std::vector<double> sample_aods(RngStream& rng, std::size_t num_ris) {
    std::vector<double> out(num_ris);
    for (auto& a : out) a = kTwoPi * rng.uniform();
    return out;
}

ChannelRealization sample_realization(RngStream& rng, const ScenarioConfig& s, std::span<const double> aods) {
    if (aods.size() != s.num_ris()) throw std::invalid_argument("sample_realization: one AoD per surface required");
    const LinkGains gains = link_gains(s);
    const std::uint64_t slot_seed = rng.next_u64();
    const std::size_t users = s.num_users();
    const std::size_t surfaces = s.num_ris();

    ChannelRealization ch;
    ch.aod.assign(aods.begin(), aods.end());

    RngStream surface_rng(mix_seed(slot_seed, kSurfaceStream));
    for (std::size_t x = 0; x < surfaces; ++x) {
        const double d0 = distance(s.bs_position, s.ris_positions[x]);
        ch.ris_bs.push_back(sample_ris_bs(surface_rng, s.elements_per_ris[x], d0, s.rician_kappa, s.exponent_ris,
                                          s.ref_path_loss, aods[x]));
    }

    RngStream direct_rng(mix_seed(slot_seed, kDirectStream));
    ch.direct.resize(users);
    for (std::size_t i = 0; i < users; ++i) ch.direct[i] = direct_rng.cscg(gains.direct[i]);

    ch.user_ris.resize(users);
    ch.cascaded.resize(users);
    for (std::size_t i = 0; i < users; ++i) {
        RngStream user_rng(mix_seed(slot_seed, kUserRisStream + i));
        for (std::size_t x = 0; x < surfaces; ++x) {
            ComplexVec h = sample_cscg(user_rng, gains.user_ris[i][x], s.elements_per_ris[x]);
            ComplexVec phi(h.size());
            for (std::size_t m = 0; m < h.size(); ++m) phi[m] = std::conj(ch.ris_bs[x][m]) * h[m];
            ch.user_ris[i].push_back(std::move(h));
            ch.cascaded[i].push_back(std::move(phi));
        }
    }

    RngStream error_rng(mix_seed(slot_seed, kErrorStream));
    apply_csi_error(error_rng, ch, gains, s.csi_level);
    return ch;
}

ChannelRealization sample_realization(RngStream& rng, const ScenarioConfig& s) {
    const auto aods = sample_aods(rng, s.num_ris());
    return sample_realization(rng, s, aods);
}

void apply_csi_error(RngStream& rng, ChannelRealization& ch, const LinkGains& gains, double csi_level) {
    if (!(csi_level >= 0.0)) throw std::invalid_argument("apply_csi_error: negative CSI level");
    const std::size_t users = ch.num_users();
    const std::size_t surfaces = ch.num_ris();
    if (gains.direct.size() != users || gains.ris_bs.size() != surfaces)
        throw std::invalid_argument("apply_csi_error: link gains do not match the realization");

    const std::uint64_t base = rng.next_u64();
    RngStream direct_rng(mix_seed(base, 0));
    ch.direct_est.resize(users);
    ch.direct_var.resize(users);
    for (std::size_t i = 0; i < users; ++i) {
        ch.direct_var[i] = csi_level * gains.direct[i];
        ch.direct_est[i] = ch.direct[i] - direct_rng.cscg(ch.direct_var[i]);
    }

    ch.cascaded_est.assign(users, {});
    ch.cascaded_var.assign(users, {});
    for (std::size_t i = 0; i < users; ++i) {
        RngStream user_rng(mix_seed(base, kCascadeErrorStream + i));
        for (std::size_t x = 0; x < surfaces; ++x) {
            const double var = csi_level * gains.ris_bs[x] * gains.user_ris[i][x];
            ComplexVec est = ch.cascaded[i][x];
            for (auto& e : est) e -= user_rng.cscg(var);
            ch.cascaded_est[i].push_back(std::move(est));
            ch.cascaded_var[i].push_back(var);
        }
    }
}

ComplexVec PhaseConfig::phasors(std::size_t x) const {
    ComplexVec out(theta.at(x).size());
    for (std::size_t m = 0; m < out.size(); ++m) out[m] = std::polar(1.0, theta[x][m]);
    return out;
}

double wrap_phase(double theta) {
    double t = std::fmod(theta, kTwoPi);
    if (t < 0.0) t += kTwoPi;
    if (t >= kTwoPi) t = 0.0;
    return t;
}

PhaseConfig zero_phases(const ScenarioConfig& s) {
    PhaseConfig p;
    for (auto m : s.elements_per_ris) p.theta.emplace_back(m, 0.0);
    return p;
}

PhaseConfig random_phases(RngStream& rng, const ScenarioConfig& s) {
    PhaseConfig p;
    for (auto m : s.elements_per_ris) {
        std::vector<double> row(m);
        for (auto& t : row) t = kTwoPi * rng.uniform();
        p.theta.push_back(std::move(row));
    }
    return p;
}

Complex composite(const ChannelRealization& ch, const PhaseConfig& phases, std::size_t user, bool use_estimates) {
    if (user >= ch.num_users()) throw std::out_of_range("composite: user index out of range");
    if (phases.theta.size() != ch.num_ris()) throw std::invalid_argument("composite: phase config has wrong surface count");
    const auto& cascade = use_estimates ? ch.cascaded_est[user] : ch.cascaded[user];
    Complex h = use_estimates ? ch.direct_est[user] : ch.direct[user];
    for (std::size_t x = 0; x < ch.num_ris(); ++x) {
        if (phases.theta[x].size() != cascade[x].size())
            throw std::invalid_argument("composite: phase config has wrong element count");
        for (std::size_t m = 0; m < cascade[x].size(); ++m) h += std::polar(1.0, phases.theta[x][m]) * cascade[x][m];
    }
    return h;
}

ComplexVec composite_all(const ChannelRealization& ch, const PhaseConfig& phases, bool use_estimates) {
    ComplexVec out(ch.num_users());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = composite(ch, phases, i, use_estimates);
    return out;
}

double composite_variance(double direct_var, std::span<const std::size_t> elements, std::span<const double> cascaded_var) {
    if (elements.size() != cascaded_var.size())
        throw std::invalid_argument("composite_variance: one variance per surface required");
    double total = direct_var;
    for (std::size_t x = 0; x < elements.size(); ++x) total += static_cast<double>(elements[x]) * cascaded_var[x];
    return total;
}

double composite_variance(const ChannelRealization& ch, std::size_t user) {
    std::vector<std::size_t> elements;
    for (const auto& g : ch.ris_bs) elements.push_back(g.size());
    return composite_variance(ch.direct_var.at(user), elements, ch.cascaded_var.at(user));
}

std::vector<double> composite_variances(const ChannelRealization& ch) {
    std::vector<double> out(ch.num_users());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = composite_variance(ch, i);
    return out;
}

}  // namespace risfl
