#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "risfl/core/rng.hpp"

namespace risfl {

using Vec3 = std::array<double, 3>;

double distance(const Vec3& a, const Vec3& b);
double dbm_to_watt(double dbm);
double watt_to_dbm(double watt);

/// Physical and network constants of one simulated cell. Powers are linear (W).
struct ScenarioConfig {
    std::size_t num_airfl_users = 14;
    std::size_t num_noma_users = 4;
    std::vector<std::size_t> elements_per_ris{20, 20, 20};
    double bandwidth = 1e6;
    double noise_power = dbm_to_watt(-114.0);
    double max_power = dbm_to_watt(10.0);
    double sic_residual = 0.04;
    double csi_level = 0.02;
    double rician_kappa = 2.0;
    double ref_path_loss = 1e-3;
    double exponent_direct = 3.5;
    double exponent_ris = 2.2;
    double min_rate = 1e6;
    double mse_tolerance = 0.01;
    std::size_t grad_dim = 10;
    Vec3 bs_position{0.0, 0.0, 20.0};
    std::vector<Vec3> ris_positions{{50.0, 50.0, 10.0}, {-50.0, 50.0, 10.0}, {0.0, -50.0, 10.0}};
    /// Empty means "draw uniformly on the user disc" when an environment is built.
    std::vector<Vec3> user_positions;
    double user_radius = 100.0;
    double element_spacing_ratio = 0.5;

    // Episode and reward shaping.
    double penalty_mse = -1.0;
    double penalty_rate = -1.0;
    std::size_t slots_per_episode = 100;
    double eta_min = 1e-14;
    double eta_max = 1.0;

    std::size_t num_ris() const noexcept { return elements_per_ris.size(); }
    std::size_t num_users() const noexcept { return num_airfl_users + num_noma_users; }
    std::size_t total_elements() const noexcept;

    /// Throws std::invalid_argument on the first violated invariant.
    void validate() const;
};

/// Full-size cell of the reference system (three 20-element surfaces).
ScenarioConfig reference_scenario();
/// Small cell for quick training runs: 4 AirFL users, 2 NOMA users, one 8-element surface.
ScenarioConfig desk_scenario();

ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioConfig& s);
ScenarioConfig load_scenario(const std::filesystem::path& path);
void save_scenario(const ScenarioConfig& s, const std::filesystem::path& path);

/// Users placed uniformly on the disc of radius user_radius around the base station, at ground level.
std::vector<Vec3> place_users(const ScenarioConfig& s, RngStream& rng);

/// Constants of the convergence analysis.
struct BoundConstants {
    double smoothness = 1.0;       // L
    double pl_constant = 0.5;      // mu
    double learn_rate = 0.5;       // lambda
    double grad_norm_bound = 1.0;  // varpi^2, bound on E||g_k||^2
    std::vector<double> var_bounds;  // delta_i per coordinate
    std::size_t grad_dim = 10;

    double delta_norm_sq() const;
    /// Throws std::invalid_argument if the constants are inconsistent.
    void validate() const;
};

BoundConstants bound_constants_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BoundConstants& c);

}  // namespace risfl
