#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "risfl/agent/ddpg.hpp"
#include "risfl/core/scenario.hpp"
#include "risfl/env/env.hpp"
#include "risfl/fl/airfl.hpp"
#include "risfl/fl/task.hpp"

namespace risfl::cli {

enum class ExperimentKind { mse_oracle, bound_check, train, sweep, variant_compare, airfl_run };

ExperimentKind kind_from_string(const std::string& name);
std::string to_string(ExperimentKind kind);

struct SweepSpec {
    /// airfl_users, max_power_dbm, csi_level, sic_residual, elements or variant
    /// (K, P_max, eps_h, eps_b and M are accepted as aliases).
    std::string axis;
    std::vector<nlohmann::json> values;
    /// heuristic (the configured policy), random, ddpg or lstm_ddpg.
    std::string method = "heuristic";
    /// Optional trend expectation checked with paired standard errors.
    std::string expect_metric;  // reward, psi or mse
    std::string expect_trend;   // non_increasing or non_decreasing
};

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::mse_oracle;
    std::string name = "experiment";
    std::string profile = "default";  // default or desk
    ScenarioConfig scenario;
    AgentHyper hyper;
    std::optional<BoundConstants> constants;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output_dir;

    std::string policy = "inversion_heuristic";
    Variant variant = Variant::multi_ris;
    std::vector<Variant> variants{Variant::no_ris, Variant::single_ris, Variant::multi_ris};
    std::vector<std::string> methods{"lstm_ddpg", "ddpg", "random"};
    std::size_t slots = 200;        // evaluation slots per seed
    std::size_t rounds = 200;       // learning rounds
    std::size_t samples = 1000000;  // Monte Carlo samples per configuration
    double z_limit = 3.0;           // mse_oracle tolerance in standard errors
    double se_slack = 2.0;          // trend and bound checks
    double tie_slack = 1.0;         // learned-versus-plain tie allowance
    double improvement = 0.2;       // required margin over the random policy, relative to its magnitude
    std::size_t final_window = 50;  // episodes averaged for final scores
    std::size_t trend_start = 50;   // first episode of the slope fit
    AggregationMode mode = AggregationMode::over_the_air;
    SyntheticTaskOptions task;
    std::uint64_t task_seed = 1;
    SweepSpec sweep;
    std::size_t threads = 0;  // 0: hardware concurrency
};

/// Command-line values that take precedence over the config file.
struct SpecOverrides {
    std::optional<std::string> profile;
    std::optional<std::vector<std::uint64_t>> seeds;
    std::optional<std::filesystem::path> output_dir;
    std::optional<std::size_t> threads;
};

/// Resolves a config object. Relative "scenario" and "agent" file references are
/// taken from base_dir. Unknown keys and kind-specific omissions throw
/// std::invalid_argument.
ExperimentSpec parse_spec(const nlohmann::json& config, const SpecOverrides& overrides = {},
                          const std::filesystem::path& base_dir = {});
ExperimentSpec load_spec(const std::filesystem::path& path, const SpecOverrides& overrides = {});

/// Fully resolved configuration; parse_spec(to_json(spec)) reproduces spec.
nlohmann::json to_json(const ExperimentSpec& spec);

std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Tidy table with a fixed column order.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns);

    using Cell = std::variant<std::string, double, std::int64_t, std::uint64_t, std::monostate>;
    void add_row(std::vector<Cell> cells);

    const std::vector<std::string>& columns() const noexcept { return columns_; }
    std::size_t rows() const noexcept { return rows_.size(); }
    std::string render() const;

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<Cell>> rows_;
};

/// 17 significant digits.
std::string format_number(double value);

struct Check {
    std::string id;
    bool pass = false;
    std::string detail;
};

struct RunResult {
    std::vector<Check> checks;
    std::vector<std::filesystem::path> files;
    bool all_pass() const;
};

/// Runs the experiment and writes manifest.json, the metric CSVs and
/// summary.json into spec.output_dir. Files written before a failure are removed.
RunResult run(const ExperimentSpec& spec);

/// The package version recorded in manifests.
std::string code_version();

}  // namespace risfl::cli
