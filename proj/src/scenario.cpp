#include "risfl/core/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

namespace risfl {

using nlohmann::json;

double distance(const Vec3& a, const Vec3& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double watt_to_dbm(double watt) { return 10.0 * std::log10(watt) + 30.0; }

std::size_t ScenarioConfig::total_elements() const noexcept {
    return std::accumulate(elements_per_ris.begin(), elements_per_ris.end(), std::size_t{0});
}

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument("scenario: " + message);
}

bool finite(const Vec3& v) { return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]); }

Vec3 vec3_from_json(const json& j, const std::string& key) {
    if (!j.is_array() || j.size() != 3) throw std::invalid_argument("scenario: " + key + " needs [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::vector<Vec3> positions_from_json(const json& j, const std::string& key) {
    if (!j.is_array()) throw std::invalid_argument("scenario: " + key + " must be a list");
    std::vector<Vec3> out;
    for (const auto& p : j) out.push_back(vec3_from_json(p, key));
    return out;
}

}  // namespace

void ScenarioConfig::validate() const {
    require(num_airfl_users >= 1, "need at least one AirFL user");
    for (auto m : elements_per_ris) require(m >= 1, "every surface needs at least one element");
    require(ris_positions.size() == elements_per_ris.size(), "one position per surface required");
    require(bandwidth > 0.0, "bandwidth must be positive");
    require(noise_power > 0.0, "noise power must be positive");
    require(max_power > 0.0, "max power must be positive");
    require(sic_residual >= 0.0 && sic_residual <= 1.0, "SIC residual must lie in [0, 1]");
    require(csi_level >= 0.0, "CSI level must be non-negative");
    require(rician_kappa >= 0.0, "Rician factor must be non-negative");
    require(ref_path_loss > 0.0, "reference path loss must be positive");
    require(std::isfinite(exponent_direct) && std::isfinite(exponent_ris), "path-loss exponents must be finite");
    require(min_rate >= 0.0, "minimum rate must be non-negative");
    require(mse_tolerance > 0.0, "MSE tolerance must be positive");
    require(grad_dim >= 1, "gradient dimension must be positive");
    require(finite(bs_position), "base-station position must be finite");
    for (const auto& p : ris_positions) require(finite(p), "surface positions must be finite");
    for (const auto& p : user_positions) require(finite(p), "user positions must be finite");
    require(user_positions.empty() || user_positions.size() == num_users(),
            "user_positions must list every user or be empty");
    require(user_radius > 0.0, "user radius must be positive");
    require(element_spacing_ratio == 0.5, "element spacing ratio is fixed at 0.5");
    require(slots_per_episode >= 1, "episodes need at least one slot");
    require(eta_min > 0.0 && eta_max > eta_min, "need 0 < eta_min < eta_max");
}

ScenarioConfig reference_scenario() { return ScenarioConfig{}; }

ScenarioConfig desk_scenario() {
    ScenarioConfig s;
    s.num_airfl_users = 4;
    s.num_noma_users = 2;
    s.elements_per_ris = {8};
    s.ris_positions = {{50.0, 0.0, 20.0}};
    return s;
}

ScenarioConfig scenario_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("scenario: expected a JSON object");
    static const std::set<std::string> known{
        "num_airfl_users", "num_noma_users", "num_ris", "elements_per_ris", "bandwidth_hz",
        "noise_power_w", "noise_power_dbm", "max_power_w", "max_power_dbm", "sic_residual",
        "csi_level", "rician_kappa", "ref_path_loss", "exponent_direct", "exponent_ris",
        "min_rate_bps", "mse_tolerance", "grad_dim", "bs_position", "ris_positions",
        "user_positions", "user_radius_m", "element_spacing_ratio", "penalty_mse", "penalty_rate",
        "slots_per_episode", "eta_min", "eta_max"};
    for (const auto& item : j.items())
        if (!known.contains(item.key())) throw std::invalid_argument("scenario: unknown key '" + item.key() + "'");
    if (j.contains("noise_power_w") && j.contains("noise_power_dbm"))
        throw std::invalid_argument("scenario: give noise power in W or dBm, not both");
    if (j.contains("max_power_w") && j.contains("max_power_dbm"))
        throw std::invalid_argument("scenario: give max power in W or dBm, not both");

    ScenarioConfig s;
    auto read = [&](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    read("num_airfl_users", s.num_airfl_users);
    read("num_noma_users", s.num_noma_users);
    read("elements_per_ris", s.elements_per_ris);
    read("bandwidth_hz", s.bandwidth);
    read("noise_power_w", s.noise_power);
    if (j.contains("noise_power_dbm")) s.noise_power = dbm_to_watt(j.at("noise_power_dbm").get<double>());
    read("max_power_w", s.max_power);
    if (j.contains("max_power_dbm")) s.max_power = dbm_to_watt(j.at("max_power_dbm").get<double>());
    read("sic_residual", s.sic_residual);
    read("csi_level", s.csi_level);
    read("rician_kappa", s.rician_kappa);
    read("ref_path_loss", s.ref_path_loss);
    read("exponent_direct", s.exponent_direct);
    read("exponent_ris", s.exponent_ris);
    read("min_rate_bps", s.min_rate);
    read("mse_tolerance", s.mse_tolerance);
    read("grad_dim", s.grad_dim);
    if (j.contains("bs_position")) s.bs_position = vec3_from_json(j.at("bs_position"), "bs_position");
    if (j.contains("ris_positions")) s.ris_positions = positions_from_json(j.at("ris_positions"), "ris_positions");
    if (j.contains("user_positions"))
        s.user_positions = positions_from_json(j.at("user_positions"), "user_positions");
    read("user_radius_m", s.user_radius);
    read("element_spacing_ratio", s.element_spacing_ratio);
    read("penalty_mse", s.penalty_mse);
    read("penalty_rate", s.penalty_rate);
    read("slots_per_episode", s.slots_per_episode);
    read("eta_min", s.eta_min);
    read("eta_max", s.eta_max);
    if (j.contains("num_ris") && j.at("num_ris").get<std::size_t>() != s.elements_per_ris.size())
        throw std::invalid_argument("scenario: num_ris disagrees with elements_per_ris");
    s.validate();
    return s;
}

json to_json(const ScenarioConfig& s) {
    auto positions = [](const std::vector<Vec3>& ps) {
        json out = json::array();
        for (const auto& p : ps) out.push_back(p);
        return out;
    };
    json j;
    j["num_airfl_users"] = s.num_airfl_users;
    j["num_noma_users"] = s.num_noma_users;
    j["num_ris"] = s.num_ris();
    j["elements_per_ris"] = s.elements_per_ris;
    j["bandwidth_hz"] = s.bandwidth;
    j["noise_power_w"] = s.noise_power;
    j["max_power_w"] = s.max_power;
    j["sic_residual"] = s.sic_residual;
    j["csi_level"] = s.csi_level;
    j["rician_kappa"] = s.rician_kappa;
    j["ref_path_loss"] = s.ref_path_loss;
    j["exponent_direct"] = s.exponent_direct;
    j["exponent_ris"] = s.exponent_ris;
    j["min_rate_bps"] = s.min_rate;
    j["mse_tolerance"] = s.mse_tolerance;
    j["grad_dim"] = s.grad_dim;
    j["bs_position"] = s.bs_position;
    j["ris_positions"] = positions(s.ris_positions);
    j["user_positions"] = positions(s.user_positions);
    j["user_radius_m"] = s.user_radius;
    j["element_spacing_ratio"] = s.element_spacing_ratio;
    j["penalty_mse"] = s.penalty_mse;
    j["penalty_rate"] = s.penalty_rate;
    j["slots_per_episode"] = s.slots_per_episode;
    j["eta_min"] = s.eta_min;
    j["eta_max"] = s.eta_max;
    return j;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
    return scenario_from_json(json::parse(in));
}

void save_scenario(const ScenarioConfig& s, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scenario file " + path.string());
    out << to_json(s).dump(2) << '\n';
}

std::vector<Vec3> place_users(const ScenarioConfig& s, RngStream& rng) {
    std::vector<Vec3> out;
    out.reserve(s.num_users());
    for (std::size_t i = 0; i < s.num_users(); ++i) {
        const double r = s.user_radius * std::sqrt(rng.uniform());
        const double phi = 2.0 * std::numbers::pi * rng.uniform();
        out.push_back({s.bs_position[0] + r * std::cos(phi), s.bs_position[1] + r * std::sin(phi), 0.0});
    }
    return out;
}

double BoundConstants::delta_norm_sq() const {
    double total = 0.0;
    for (double d : var_bounds) total += d * d;
    return total;
}

void BoundConstants::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("bound constants: " + m); };
    if (!(smoothness > 0.0)) fail("L must be positive");
    if (!(pl_constant > 0.0 && pl_constant <= smoothness)) fail("need 0 < mu <= L");
    if (!(learn_rate > 0.0 && learn_rate <= 2.0 / (2.0 + smoothness))) fail("need 0 < lambda <= 2/(2+L)");
    if (!(grad_norm_bound >= 0.0)) fail("gradient norm bound must be non-negative");
    for (double d : var_bounds)
        if (!(d >= 0.0)) fail("variance bounds must be non-negative");
    if (!var_bounds.empty() && var_bounds.size() != grad_dim) fail("one variance bound per gradient coordinate");
}

BoundConstants bound_constants_from_json(const json& j) {
    static const std::set<std::string> known{"smoothness", "pl_constant", "learn_rate", "grad_norm_bound",
                                             "var_bounds", "grad_dim"};
    for (const auto& item : j.items())
        if (!known.contains(item.key())) throw std::invalid_argument("bound constants: unknown key '" + item.key() + "'");
    BoundConstants c;
    if (j.contains("smoothness")) j.at("smoothness").get_to(c.smoothness);
    if (j.contains("pl_constant")) j.at("pl_constant").get_to(c.pl_constant);
    if (j.contains("learn_rate")) j.at("learn_rate").get_to(c.learn_rate);
    if (j.contains("grad_norm_bound")) j.at("grad_norm_bound").get_to(c.grad_norm_bound);
    if (j.contains("var_bounds")) j.at("var_bounds").get_to(c.var_bounds);
    if (j.contains("grad_dim")) j.at("grad_dim").get_to(c.grad_dim);
    c.validate();
    return c;
}

json to_json(const BoundConstants& c) {
    return json{{"smoothness", c.smoothness},         {"pl_constant", c.pl_constant},
                {"learn_rate", c.learn_rate},         {"grad_norm_bound", c.grad_norm_bound},
                {"var_bounds", c.var_bounds},         {"grad_dim", c.grad_dim}};
}

}  // namespace risfl
