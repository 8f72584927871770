#include "risfl/cli/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "risfl/channel/channel.hpp"
#include "risfl/core/stats.hpp"
#include "risfl/fl/policy.hpp"
#include "risfl/phy/phy.hpp"

#ifndef RISFL_VERSION
#define RISFL_VERSION "unknown"
#endif

namespace risfl::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& message) { throw std::invalid_argument("config: " + message); }

const std::vector<std::pair<ExperimentKind, std::string>>& kind_names() {
    static const std::vector<std::pair<ExperimentKind, std::string>> names{
        {ExperimentKind::mse_oracle, "mse_oracle"}, {ExperimentKind::bound_check, "bound_check"},
        {ExperimentKind::train, "train"},           {ExperimentKind::sweep, "sweep"},
        {ExperimentKind::variant_compare, "variant_compare"}, {ExperimentKind::airfl_run, "airfl_run"}};
    return names;
}

const std::set<std::string> kMethods{"lstm_ddpg", "ddpg", "random"};

std::string canonical_axis(const std::string& axis) {
    static const std::map<std::string, std::string> aliases{
        {"K", "airfl_users"}, {"P_max", "max_power_dbm"}, {"eps_h", "csi_level"}, {"eps_b", "sic_residual"}, {"M", "elements"}};
    static const std::set<std::string> axes{"airfl_users", "max_power_dbm", "csi_level", "sic_residual", "elements", "variant"};
    if (auto it = aliases.find(axis); it != aliases.end()) return it->second;
    if (!axes.contains(axis)) fail("unknown sweep axis '" + axis + "'");
    return axis;
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) fail(where + " must be a JSON object");
    for (const auto& item : j.items())
        if (!known.contains(item.key())) fail("unknown key '" + item.key() + "' in " + where);
}

json read_reference(const json& value, const fs::path& base_dir, const std::string& what) {
    if (value.is_string()) {
        fs::path p = value.get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        std::ifstream in(p);
        if (!in) fail("cannot open " + what + " file " + p.string());
        try {
            return json::parse(in);
        } catch (const json::exception& e) {
            fail(what + " file " + p.string() + ": " + e.what());
        }
    }
    if (!value.is_object()) fail(what + " must be an object or a file name");
    return value;
}

ScenarioConfig merge_scenario(const ScenarioConfig& base, const json& overrides) {
    json j = to_json(base);
    j.erase("num_ris");
    if (overrides.contains("noise_power_dbm")) j.erase("noise_power_w");
    if (overrides.contains("max_power_dbm")) j.erase("max_power_w");
    for (const auto& item : overrides.items()) j[item.key()] = item.value();
    return scenario_from_json(j);
}

template <class T>
T read_positive(const json& config, const char* key, T fallback) {
    if (!config.contains(key)) return fallback;
    const json& v = config.at(key);
    if (!v.is_number()) fail(std::string(key) + " must be a number");
    const T value = v.get<T>();
    if (!(value > T{0})) fail(std::string(key) + " must be positive");
    return value;
}

std::string value_label(const json& v) { return v.is_string() ? v.get<std::string>() : format_number(v.get<double>()); }

BoundConstants default_constants(const ScenarioConfig& s) {
    BoundConstants c;
    c.grad_dim = s.grad_dim;
    return c;
}

ScenarioConfig placed_for_seed(ScenarioConfig s, std::uint64_t seed) {
    if (s.user_positions.empty()) {
        RngStream placement(mix_seed(seed, 0));
        s.user_positions = place_users(s, placement);
    }
    return s;
}

// Scenario and variant for one sweep value.
std::pair<ScenarioConfig, Variant> apply_axis(ScenarioConfig s, Variant variant, const std::string& axis, const json& v) {
    auto number = [&]() {
        if (!v.is_number()) fail("sweep value for " + axis + " must be a number");
        return v.get<double>();
    };
    if (axis == "variant") {
        if (!v.is_string()) fail("sweep value for variant must be a string");
        variant = variant_from_string(v.get<std::string>());
    } else if (axis == "airfl_users") {
        const double k = number();
        if (!(k >= 1.0) || k != std::floor(k)) fail("airfl_users values must be positive integers");
        s.num_airfl_users = static_cast<std::size_t>(k);
        s.user_positions.clear();
    } else if (axis == "max_power_dbm") {
        s.max_power = dbm_to_watt(number());
    } else if (axis == "csi_level") {
        s.csi_level = number();
    } else if (axis == "sic_residual") {
        s.sic_residual = number();
    } else if (axis == "elements") {
        const double m = number();
        if (!(m >= 1.0) || m != std::floor(m)) fail("elements values must be positive integers");
        if (s.elements_per_ris.empty()) fail("elements sweep needs at least one surface");
        for (auto& e : s.elements_per_ris) e = static_cast<std::size_t>(m);
    }
    s.validate();
    apply_variant(s, variant).validate();
    return {s, variant};
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

bool is_default_value(const std::string& profile, const std::string& axis, const json& v) {
    const ScenarioConfig d = profile == "desk" ? desk_scenario() : reference_scenario();
    if (axis == "variant") return v.get<std::string>() == to_string(profile == "desk" ? Variant::single_ris : Variant::multi_ris);
    const double x = v.get<double>();
    if (axis == "airfl_users") return close(x, static_cast<double>(d.num_airfl_users));
    if (axis == "max_power_dbm") return close(x, watt_to_dbm(d.max_power));
    if (axis == "csi_level") return close(x, d.csi_level);
    if (axis == "sic_residual") return close(x, d.sic_residual);
    return !d.elements_per_ris.empty() && close(x, static_cast<double>(d.elements_per_ris.front()));
}

/// Runs fn once per seed on a worker pool; results come back in seed order.
template <class Result, class Fn>
std::vector<Result> map_seeds(const std::vector<std::uint64_t>& seeds, std::size_t threads, Fn fn) {
    std::vector<Result> out(seeds.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) {
            try {
                out[i] = fn(seeds[i]);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::size_t count = threads > 0 ? threads : std::max(1u, std::thread::hardware_concurrency());
    count = std::min(count, seeds.size());
    if (count <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
    return out;
}

struct KindOutput {
    std::vector<std::pair<std::string, CsvTable>> tables;
    std::vector<Check> checks;
};

std::string describe(double value, double limit, const char* relation) {
    std::ostringstream s;
    s << format_number(value) << ' ' << relation << ' ' << format_number(limit);
    return s.str();
}

// ---------------------------------------------------------------- mse_oracle

struct OracleRow {
    MseBreakdown analytic;
    MonteCarloEstimate mc;
};

KindOutput run_mse_oracle(const ExperimentSpec& spec) {
    const ScenarioConfig base = apply_variant(spec.scenario, spec.variant);
    const auto rows = map_seeds<OracleRow>(spec.seeds, spec.threads, [&](std::uint64_t seed) {
        const ScenarioConfig s = placed_for_seed(base, seed);
        RngStream rng(mix_seed(seed, 51));
        const ChannelRealization ch = sample_realization(rng, s);
        Allocation alloc = inversion_heuristic(ch, s);
        alloc.phases = random_phases(rng, s);
        for (auto& p : alloc.power.power) p = std::clamp(p * rng.uniform(0.5, 1.5), 0.0, s.max_power);
        alloc.power.eta *= rng.uniform(0.5, 2.0);
        const ComplexVec est = composite_all(ch, alloc.phases, true);
        const std::vector<double> var = composite_variances(ch);
        OracleRow row;
        row.analytic = analytic_mse(alloc.power, est, var, s.sic_residual, s.noise_power, s.num_airfl_users, 1);
        row.mc = monte_carlo_mse(rng, alloc.power, est, var, s.sic_residual, s.noise_power, s.num_airfl_users,
                                 spec.samples);
        return row;
    });

    KindOutput out;
    CsvTable table({"seed", "analytic", "monte_carlo", "std_error", "z", "misalignment", "sic_error", "csi_error",
                    "sic_csi_error", "noise_error", "pass"});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const double z = (r.mc.estimate - r.analytic.total) / r.mc.std_error;
        const bool pass = std::abs(z) <= spec.z_limit;
        table.add_row({spec.seeds[i], r.analytic.total, r.mc.estimate, r.mc.std_error, z, r.analytic.misalignment,
                       r.analytic.sic_error, r.analytic.csi_error, r.analytic.sic_csi_error, r.analytic.noise_error,
                       std::string(pass ? "true" : "false")});
        out.checks.push_back({"oracle_seed_" + std::to_string(spec.seeds[i]), pass,
                              "|z| = " + describe(std::abs(z), spec.z_limit, "<=")});
    }
    out.tables.emplace_back("mse_oracle.csv", std::move(table));
    return out;
}

// ------------------------------------------------------- bound_check, airfl_run

QuadraticTask make_task(const ExperimentSpec& spec) {
    SyntheticTaskOptions o = spec.task;
    o.num_users = spec.scenario.num_airfl_users;
    o.dim = spec.scenario.grad_dim;
    RngStream rng(spec.task_seed);
    return QuadraticTask::synthetic(rng, o);
}

AirFLOptions airfl_options(const ExperimentSpec& spec, const BoundConstants& c, std::uint64_t seed, AggregationMode mode) {
    AirFLOptions o;
    o.rounds = spec.rounds;
    o.constants = c;
    o.mode = mode;
    o.scenario = placed_for_seed(apply_variant(spec.scenario, spec.variant), seed);
    o.policy = policy_by_name(spec.policy);
    return o;
}

CsvTable round_table(const std::vector<std::uint64_t>& seeds, const std::vector<AirFLRun>& runs) {
    CsvTable table({"seed", "round", "gap", "gap_next", "omega", "psi", "bias_sq", "variance", "mse_total",
                    "error_norm"});
    for (std::size_t i = 0; i < runs.size(); ++i)
        for (std::size_t t = 0; t < runs[i].rounds.size(); ++t) {
            const auto& r = runs[i].rounds[t];
            table.add_row({seeds[i], static_cast<std::uint64_t>(t + 1), r.gap, r.gap_next, r.omega, r.terms.psi,
                           r.terms.bias_sq, r.terms.var, r.mse_total, r.error.norm()});
        }
    return table;
}

KindOutput run_bound_check(const ExperimentSpec& spec, bool checks_only_finite) {
    const QuadraticTask task = make_task(spec);
    const BoundConstants c = spec.constants.value_or(estimate_constants(task, spec.rounds));
    const auto runs = map_seeds<AirFLRun>(spec.seeds, spec.threads, [&](std::uint64_t seed) {
        RngStream rng(mix_seed(seed, 61));
        return run_airfl(task, airfl_options(spec, c, seed, spec.mode), rng);
    });

    KindOutput out;
    out.tables.emplace_back("rounds.csv", round_table(spec.seeds, runs));
    if (checks_only_finite) {
        bool finite = true;
        for (const auto& run : runs)
            for (const auto& r : run.rounds) finite = finite && std::isfinite(r.gap_next) && std::isfinite(r.omega);
        out.checks.push_back({"finite", finite, finite ? "all gaps finite" : "non-finite gap"});
        return out;
    }

    const double rho = 1.0 - c.learn_rate * c.pl_constant;
    CsvTable agg({"round", "mean_gap_next", "se_gap_next", "mean_omega", "mean_recursion_residual",
                  "se_recursion_residual", "perfect_gap_next", "perfect_omega"});
    RngStream perfect_rng(mix_seed(spec.seeds.front(), 62));
    const AirFLRun perfect =
        run_airfl(task, airfl_options(spec, c, spec.seeds.front(), AggregationMode::perfect), perfect_rng);

    bool dominance = true, recursion = true, exact = true;
    double worst_dom = -INFINITY, worst_rec = -INFINITY, worst_exact = -INFINITY;
    for (std::size_t t = 0; t < spec.rounds; ++t) {
        std::vector<double> gaps, omegas, residuals;
        for (const auto& run : runs) {
            const auto& r = run.rounds[t];
            gaps.push_back(r.gap_next);
            omegas.push_back(r.omega);
            residuals.push_back(r.gap_next - rho * r.gap - r.terms.psi);
        }
        const MeanVar g = mean_var(gaps), o = mean_var(omegas), d = mean_var(residuals);
        const double g_se = gaps.size() > 1 ? g.std_error() : 0.0;
        const double d_se = residuals.size() > 1 ? d.std_error() : 0.0;
        const double dom_margin = g.mean - (o.mean + spec.se_slack * g_se);
        const double rec_margin = d.mean - spec.se_slack * d_se;
        worst_dom = std::max(worst_dom, dom_margin);
        worst_rec = std::max(worst_rec, rec_margin);
        dominance = dominance && dom_margin <= 0.0;
        recursion = recursion && rec_margin <= 0.0;

        const auto& p = perfect.rounds[t];
        const double exact_margin = p.gap_next - rho * p.gap;
        worst_exact = std::max(worst_exact, exact_margin);
        exact = exact && recursion_check(p.gap, p.gap_next, 0.0, c, 1e-10);
        agg.add_row({static_cast<std::uint64_t>(t + 1), g.mean, g_se, o.mean, d.mean, d_se, p.gap_next, p.omega});
    }
    out.tables.emplace_back("bound.csv", std::move(agg));
    out.checks.push_back({"dominance", dominance, "worst mean gap minus bound and slack " + format_number(worst_dom)});
    out.checks.push_back({"recursion", recursion, "worst mean residual minus slack " + format_number(worst_rec)});
    out.checks.push_back({"recursion_perfect", exact, "worst perfect-mode residual " + format_number(worst_exact)});
    return out;
}

// ------------------------------------------------- heuristic and learned scoring

struct SlotScore {
    double reward = 0.0;
    double psi = 0.0;
    double mse = 0.0;
    double sum_rate = 0.0;
    double mse_violation_rate = 0.0;
    double rate_violation_rate = 0.0;
};

SlotScore score_heuristic(const ScenarioConfig& s, Variant v, std::uint64_t seed, std::size_t slots,
                          const std::string& policy_name, const std::optional<BoundConstants>& constants) {
    Environment env(s, v, seed, constants.value_or(default_constants(s)));
    const AllocationPolicy policy = policy_by_name(policy_name);
    RngStream policy_rng(mix_seed(seed, 71));
    RunningStats reward, psi, mse, rate;
    double mse_viol = 0.0, rate_viol = 0.0;
    for (std::size_t t = 0; t < slots; ++t) {
        if (env.done()) env.reset();
        const StepOutcome out = env.step_allocation(policy(env.realization(), env.scenario(), policy_rng));
        reward.add(out.reward);
        psi.add(out.info.terms.psi);
        mse.add(out.info.mse.total);
        double total = 0.0;
        for (double r : out.info.rates) total += r;
        rate.add(total);
        mse_viol += out.info.mse_violation ? 1.0 : 0.0;
        rate_viol += out.info.rate_violation ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(slots);
    return {reward.result().mean, psi.result().mean, mse.result().mean, rate.result().mean, mse_viol / n, rate_viol / n};
}

TrainingLog run_method(const std::string& method, const ScenarioConfig& s, Variant v, std::uint64_t seed,
                       const AgentHyper& hyper, const std::optional<BoundConstants>& constants) {
    Environment env(s, v, seed, constants.value_or(default_constants(s)));
    if (method == "random") {
        RngStream rng(mix_seed(seed, 81));
        return run_random_policy(env, rng, hyper.episodes, hyper.slots);
    }
    AgentHyper h = hyper;
    h.recurrent = method == "lstm_ddpg";
    DdpgAgent agent(env.state_dim(), env.action_dim(), h, mix_seed(seed, 82));
    return train(agent, env, h.episodes, h.slots);
}

struct LearnedScore {
    SlotScore final_scores;  // reward holds the final-window mean of the trailing average
    double slope = 0.0;
};

LearnedScore summarize_log(const TrainingLog& log, std::size_t window) {
    LearnedScore out;
    const std::size_t n = log.episodes.size();
    const std::size_t from = n > window ? n - window : 0;
    RunningStats avg, psi, mse;
    for (std::size_t e = from; e < n; ++e) {
        avg.add(log.episodes[e].avg_reward);
        psi.add(log.episodes[e].mean_psi);
        mse.add(log.episodes[e].mean_mse);
    }
    out.final_scores.reward = avg.result().mean;
    out.final_scores.psi = psi.result().mean;
    out.final_scores.mse = mse.result().mean;
    return out;
}

double trend_slope(const std::vector<std::vector<double>>& curves, std::size_t start) {
    if (curves.empty()) return 0.0;
    const std::size_t n = curves.front().size();
    if (n < start + 2) return 0.0;
    std::vector<double> x, y;
    for (std::size_t e = start; e < n; ++e) {
        double sum = 0.0;
        for (const auto& c : curves) sum += c[e];
        x.push_back(static_cast<double>(e));
        y.push_back(sum / static_cast<double>(curves.size()));
    }
    return least_squares_slope(x, y);
}

// --------------------------------------------------------------------- train

KindOutput run_train(const ExperimentSpec& spec) {
    KindOutput out;
    CsvTable episodes({"method", "seed", "episode", "reward", "avg_reward", "critic_loss", "actor_objective",
                       "mean_psi", "mean_mse", "mse_violations", "rate_violations", "slots"});
    CsvTable summary({"method", "row", "seed", "final_avg_reward", "final_psi", "final_mse", "slope"});
    std::map<std::string, std::vector<double>> finals;
    std::map<std::string, double> slopes;

    for (const auto& method : spec.methods) {
        const auto logs = map_seeds<TrainingLog>(spec.seeds, spec.threads, [&](std::uint64_t seed) {
            return run_method(method, spec.scenario, spec.variant, seed, spec.hyper, spec.constants);
        });
        std::vector<std::vector<double>> curves;
        std::vector<double> final_avg, final_psi, final_mse;
        for (std::size_t i = 0; i < logs.size(); ++i) {
            for (const auto& r : logs[i].episodes)
                episodes.add_row({method, spec.seeds[i], static_cast<std::uint64_t>(r.episode), r.reward, r.avg_reward,
                                  r.critic_loss, r.actor_objective, r.mean_psi, r.mean_mse,
                                  static_cast<std::uint64_t>(r.mse_violations),
                                  static_cast<std::uint64_t>(r.rate_violations), static_cast<std::uint64_t>(r.slots)});
            curves.push_back(logs[i].avg_rewards());
            const auto s = summarize_log(logs[i], spec.final_window);
            const double slope = trend_slope({logs[i].avg_rewards()}, spec.trend_start);
            summary.add_row({method, std::string("seed"), spec.seeds[i], s.final_scores.reward, s.final_scores.psi,
                             s.final_scores.mse, slope});
            final_avg.push_back(s.final_scores.reward);
            final_psi.push_back(s.final_scores.psi);
            final_mse.push_back(s.final_scores.mse);
        }
        const double slope = trend_slope(curves, spec.trend_start);
        const MeanVar a = mean_var(final_avg), p = mean_var(final_psi), m = mean_var(final_mse);
        summary.add_row({method, std::string("mean"), std::monostate{}, a.mean, p.mean, m.mean, slope});
        summary.add_row({method, std::string("std"), std::monostate{}, std::sqrt(a.variance), std::sqrt(p.variance),
                         std::sqrt(m.variance), std::monostate{}});
        finals[method] = final_avg;
        slopes[method] = slope;
    }
    out.tables.emplace_back("episodes.csv", std::move(episodes));
    out.tables.emplace_back("train_summary.csv", std::move(summary));

    auto mean_of = [](const std::vector<double>& v) { return mean_var(v).mean; };
    if (finals.contains("lstm_ddpg") && finals.contains("random")) {
        const double learned = mean_of(finals["lstm_ddpg"]), random = mean_of(finals["random"]);
        const double needed = random + spec.improvement * std::abs(random);
        out.checks.push_back({"beats_random", learned >= needed, describe(learned, needed, ">=")});
    }
    if (finals.contains("lstm_ddpg") && finals.contains("ddpg")) {
        std::vector<double> diff;
        for (std::size_t i = 0; i < spec.seeds.size(); ++i) diff.push_back(finals["lstm_ddpg"][i] - finals["ddpg"][i]);
        const MeanVar d = mean_var(diff);
        const double se = diff.size() > 1 ? d.std_error() : 0.0;
        out.checks.push_back({"matches_plain", d.mean >= -spec.tie_slack * se, describe(d.mean, -spec.tie_slack * se, ">=")});
    }
    if (finals.contains("lstm_ddpg")) {
        const std::size_t episodes_run = spec.hyper.episodes;
        const bool enough = episodes_run >= spec.trend_start + 2;
        const double slope = slopes["lstm_ddpg"];
        out.checks.push_back({"positive_trend", enough && slope > 0.0,
                              enough ? describe(slope, 0.0, ">") : "too few episodes for a trend"});
    }
    if (out.checks.empty()) out.checks.push_back({"completed", true, "no comparison requested"});
    return out;
}

// ---------------------------------------------------------- variant_compare

KindOutput run_variant_compare(const ExperimentSpec& spec) {
    KindOutput out;
    CsvTable table({"variant", "row", "seed", "reward", "psi", "mse", "sum_rate", "mse_violation_rate",
                    "rate_violation_rate"});
    std::map<Variant, std::vector<SlotScore>> scores;
    for (Variant v : spec.variants) {
        scores[v] = map_seeds<SlotScore>(spec.seeds, spec.threads, [&](std::uint64_t seed) {
            return score_heuristic(spec.scenario, v, seed, spec.slots, spec.policy, spec.constants);
        });
        std::vector<double> reward, psi, mse, rate;
        for (std::size_t i = 0; i < spec.seeds.size(); ++i) {
            const auto& s = scores[v][i];
            table.add_row({to_string(v), std::string("seed"), spec.seeds[i], s.reward, s.psi, s.mse, s.sum_rate,
                           s.mse_violation_rate, s.rate_violation_rate});
            reward.push_back(s.reward);
            psi.push_back(s.psi);
            mse.push_back(s.mse);
            rate.push_back(s.sum_rate);
        }
        const MeanVar r = mean_var(reward), p = mean_var(psi), m = mean_var(mse), q = mean_var(rate);
        table.add_row({to_string(v), std::string("mean"), std::monostate{}, r.mean, p.mean, m.mean, q.mean,
                       std::monostate{}, std::monostate{}});
        table.add_row({to_string(v), std::string("std"), std::monostate{}, std::sqrt(r.variance), std::sqrt(p.variance),
                       std::sqrt(m.variance), std::sqrt(q.variance), std::monostate{}, std::monostate{}});
    }
    out.tables.emplace_back("variants.csv", std::move(table));

    // Expected ordering of the error term: multi <= single <= none.
    const std::vector<Variant> chain{Variant::multi_ris, Variant::single_ris, Variant::no_ris};
    std::vector<Variant> present;
    for (Variant v : chain)
        if (scores.contains(v)) present.push_back(v);
    for (std::size_t k = 0; k + 1 < present.size(); ++k) {
        std::vector<double> diff;
        for (std::size_t i = 0; i < spec.seeds.size(); ++i)
            diff.push_back(scores[present[k]][i].psi - scores[present[k + 1]][i].psi);
        const MeanVar d = mean_var(diff);
        const double limit = spec.se_slack * (diff.size() > 1 ? d.std_error() : 0.0);
        out.checks.push_back({"psi_" + to_string(present[k]) + "_le_" + to_string(present[k + 1]), d.mean <= limit,
                              "paired mean difference " + describe(d.mean, limit, "<=")});
    }
    if (out.checks.empty()) out.checks.push_back({"completed", true, "no ordered pair of variants"});
    return out;
}

// --------------------------------------------------------------------- sweep

KindOutput run_sweep(const ExperimentSpec& spec) {
    const std::string axis = canonical_axis(spec.sweep.axis);
    const bool learned = spec.sweep.method != "heuristic";
    KindOutput out;
    CsvTable table({"axis", "value", "is_default", "row", "seed", "reward", "psi", "mse", "sum_rate",
                    "mse_violation_rate", "rate_violation_rate"});
    CsvTable summary({"axis", "value", "is_default", "reward_mean", "reward_std", "psi_mean", "psi_std", "mse_mean",
                      "mse_std"});
    std::vector<std::vector<SlotScore>> all;

    for (const json& value : spec.sweep.values) {
        const auto [scenario, variant] = apply_axis(spec.scenario, spec.variant, axis, value);
        const auto scores = map_seeds<SlotScore>(spec.seeds, spec.threads, [&](std::uint64_t seed) {
            if (!learned) return score_heuristic(scenario, variant, seed, spec.slots, spec.policy, spec.constants);
            const auto log = run_method(spec.sweep.method, scenario, variant, seed, spec.hyper, spec.constants);
            return summarize_log(log, spec.final_window).final_scores;
        });
        const std::string label = value_label(value);
        const std::string tag = is_default_value(spec.profile, axis, value) ? "true" : "false";
        std::vector<double> reward, psi, mse;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            const auto& s = scores[i];
            table.add_row({axis, label, tag, std::string("seed"), spec.seeds[i], s.reward, s.psi, s.mse,
                           learned ? CsvTable::Cell{std::monostate{}} : CsvTable::Cell{s.sum_rate},
                           learned ? CsvTable::Cell{std::monostate{}} : CsvTable::Cell{s.mse_violation_rate},
                           learned ? CsvTable::Cell{std::monostate{}} : CsvTable::Cell{s.rate_violation_rate}});
            reward.push_back(s.reward);
            psi.push_back(s.psi);
            mse.push_back(s.mse);
        }
        const MeanVar r = mean_var(reward), p = mean_var(psi), m = mean_var(mse);
        table.add_row({axis, label, tag, std::string("mean"), std::monostate{}, r.mean, p.mean, m.mean, std::monostate{},
                       std::monostate{}, std::monostate{}});
        table.add_row({axis, label, tag, std::string("std"), std::monostate{}, std::sqrt(r.variance),
                       std::sqrt(p.variance), std::sqrt(m.variance), std::monostate{}, std::monostate{},
                       std::monostate{}});
        summary.add_row({axis, label, tag, r.mean, std::sqrt(r.variance), p.mean, std::sqrt(p.variance), m.mean,
                         std::sqrt(m.variance)});
        all.push_back(scores);
    }
    out.tables.emplace_back("sweep.csv", std::move(table));
    out.tables.emplace_back("sweep_summary.csv", std::move(summary));

    if (spec.sweep.expect_metric.empty()) {
        out.checks.push_back({"completed", true, "no trend expectation"});
        return out;
    }
    auto metric = [&](const SlotScore& s) {
        if (spec.sweep.expect_metric == "reward") return s.reward;
        if (spec.sweep.expect_metric == "psi") return s.psi;
        return s.mse;
    };
    // non_decreasing: x_k - x_{k+1} <= slack * SE, paired by seed.
    const double sign = spec.sweep.expect_trend == "non_decreasing" ? 1.0 : -1.0;
    bool ok = true;
    std::string detail;
    for (std::size_t k = 0; k + 1 < all.size(); ++k) {
        std::vector<double> diff;
        for (std::size_t i = 0; i < spec.seeds.size(); ++i) diff.push_back(sign * (metric(all[k][i]) - metric(all[k + 1][i])));
        const MeanVar d = mean_var(diff);
        const double limit = spec.se_slack * (diff.size() > 1 ? d.std_error() : 0.0);
        ok = ok && d.mean <= limit;
        if (!detail.empty()) detail += "; ";
        detail += value_label(spec.sweep.values[k]) + "->" + value_label(spec.sweep.values[k + 1]) + ": " +
                  describe(d.mean, limit, "<=");
    }
    out.checks.push_back({spec.sweep.expect_metric + "_" + spec.sweep.expect_trend, ok, detail});
    return out;
}

KindOutput dispatch(const ExperimentSpec& spec) {
    switch (spec.kind) {
        case ExperimentKind::mse_oracle: return run_mse_oracle(spec);
        case ExperimentKind::bound_check: return run_bound_check(spec, false);
        case ExperimentKind::airfl_run: return run_bound_check(spec, true);
        case ExperimentKind::train: return run_train(spec);
        case ExperimentKind::sweep: return run_sweep(spec);
        case ExperimentKind::variant_compare: return run_variant_compare(spec);
    }
    throw std::logic_error("unhandled experiment kind");
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

ExperimentKind kind_from_string(const std::string& name) {
    for (const auto& [kind, label] : kind_names())
        if (label == name) return kind;
    fail("unknown experiment kind '" + name + "'");
}

std::string to_string(ExperimentKind kind) {
    for (const auto& [k, label] : kind_names())
        if (k == kind) return label;
    return "unknown";
}

std::string code_version() { return RISFL_VERSION; }

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto first = item.find_first_not_of(' ');
        item = first == std::string::npos ? std::string() : item.substr(first, item.find_last_not_of(' ') - first + 1);
        if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
            fail("seed list entries must be non-negative integers, got '" + item + "'");
        seeds.push_back(std::stoull(item));
    }
    if (seeds.empty()) fail("seed list is empty");
    return seeds;
}

ExperimentSpec parse_spec(const json& config, const SpecOverrides& overrides, const fs::path& base_dir) {
    static const std::set<std::string> known{
        "kind",     "name",   "profile",  "scenario",   "agent",        "constants",    "seeds",      "output",
        "policy",   "variant", "variants", "methods",   "slots",        "rounds",       "samples",    "z_limit",
        "se_slack", "tie_slack", "improvement", "final_window", "trend_start", "mode", "task", "task_seed",
        "sweep",    "threads"};
    reject_unknown(config, known, "experiment config");
    if (!config.contains("kind")) fail("missing 'kind'");

    ExperimentSpec spec;
    spec.kind = kind_from_string(config.at("kind").get<std::string>());
    spec.name = config.value("name", to_string(spec.kind));
    spec.profile = overrides.profile.value_or(config.value("profile", std::string("default")));
    if (spec.profile != "default" && spec.profile != "desk") fail("profile must be 'default' or 'desk'");
    const bool desk = spec.profile == "desk";

    spec.scenario = desk ? desk_scenario() : reference_scenario();
    if (config.contains("scenario"))
        spec.scenario = merge_scenario(spec.scenario, read_reference(config.at("scenario"), base_dir, "scenario"));
    const AgentHyper base_hyper = desk ? desk_hyper() : AgentHyper{};
    spec.hyper = config.contains("agent")
                     ? agent_hyper_from_json(read_reference(config.at("agent"), base_dir, "agent"), base_hyper)
                     : base_hyper;
    if (config.contains("constants")) spec.constants = bound_constants_from_json(config.at("constants"));

    if (overrides.seeds) {
        spec.seeds = *overrides.seeds;
    } else if (config.contains("seeds")) {
        if (!config.at("seeds").is_array()) fail("seeds must be an array");
        for (const auto& s : config.at("seeds")) {
            if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0))
                fail("seeds must be non-negative integers");
            spec.seeds.push_back(s.get<std::uint64_t>());
        }
    }
    if (spec.seeds.empty()) fail("seed list must be non-empty");

    if (overrides.output_dir) {
        spec.output_dir = *overrides.output_dir;
    } else if (config.contains("output")) {
        spec.output_dir = config.at("output").get<std::string>();
    } else {
        fail("no output directory ('output' or --out)");
    }

    spec.policy = config.value("policy", spec.policy);
    policy_by_name(spec.policy);
    spec.variant = config.contains("variant") ? variant_from_string(config.at("variant").get<std::string>())
                                              : (desk ? Variant::single_ris : Variant::multi_ris);
    if (config.contains("variants")) {
        spec.variants.clear();
        for (const auto& v : config.at("variants")) spec.variants.push_back(variant_from_string(v.get<std::string>()));
        if (spec.variants.empty()) fail("variants must be non-empty");
    } else if (desk) {
        spec.variants = {Variant::no_ris, Variant::single_ris};
    }
    if (config.contains("methods")) {
        spec.methods = config.at("methods").get<std::vector<std::string>>();
        if (spec.methods.empty()) fail("methods must be non-empty");
        std::set<std::string> seen;
        for (const auto& m : spec.methods) {
            if (!kMethods.contains(m)) fail("unknown method '" + m + "'");
            if (!seen.insert(m).second) fail("method '" + m + "' listed twice");
        }
    }
    spec.slots = read_positive<std::size_t>(config, "slots", spec.slots);
    spec.rounds = read_positive<std::size_t>(config, "rounds", spec.rounds);
    spec.samples = read_positive<std::size_t>(config, "samples", spec.samples);
    if (spec.samples < 1000) fail("samples must be at least 1000");
    spec.z_limit = read_positive<double>(config, "z_limit", spec.z_limit);
    spec.se_slack = read_positive<double>(config, "se_slack", spec.se_slack);
    spec.tie_slack = read_positive<double>(config, "tie_slack", spec.tie_slack);
    spec.improvement = config.value("improvement", spec.improvement);
    spec.final_window = read_positive<std::size_t>(config, "final_window", spec.final_window);
    spec.trend_start = config.value("trend_start", spec.trend_start);
    if (config.contains("mode")) {
        const auto mode = config.at("mode").get<std::string>();
        if (mode == "perfect") {
            spec.mode = AggregationMode::perfect;
        } else if (mode != "over_the_air") {
            fail("mode must be 'over_the_air' or 'perfect'");
        }
    }
    if (config.contains("task")) {
        const json& t = config.at("task");
        reject_unknown(t, {"samples_per_user", "condition_number", "heterogeneity", "label_noise"}, "task");
        spec.task.samples_per_user = t.value("samples_per_user", spec.task.samples_per_user);
        spec.task.condition_number = t.value("condition_number", spec.task.condition_number);
        spec.task.heterogeneity = t.value("heterogeneity", spec.task.heterogeneity);
        spec.task.label_noise = t.value("label_noise", spec.task.label_noise);
    }
    spec.task.num_users = spec.scenario.num_airfl_users;
    spec.task.dim = spec.scenario.grad_dim;
    spec.task_seed = config.value("task_seed", spec.task_seed);
    spec.threads = overrides.threads.value_or(config.value("threads", spec.threads));

    if (config.contains("sweep")) {
        if (spec.kind != ExperimentKind::sweep) fail("'sweep' only applies to kind 'sweep'");
        const json& s = config.at("sweep");
        reject_unknown(s, {"axis", "values", "method", "expect"}, "sweep");
        if (!s.contains("axis")) fail("sweep needs an 'axis'");
        spec.sweep.axis = canonical_axis(s.at("axis").get<std::string>());
        if (!s.contains("values") || !s.at("values").is_array() || s.at("values").empty())
            fail("sweep values must be a non-empty array");
        for (const auto& v : s.at("values")) spec.sweep.values.push_back(v);
        spec.sweep.method = s.value("method", spec.sweep.method);
        if (spec.sweep.method != "heuristic" && !kMethods.contains(spec.sweep.method))
            fail("unknown sweep method '" + spec.sweep.method + "'");
        if (s.contains("expect")) {
            const json& e = s.at("expect");
            reject_unknown(e, {"metric", "trend"}, "sweep expect");
            spec.sweep.expect_metric = e.value("metric", std::string());
            spec.sweep.expect_trend = e.value("trend", std::string());
            if (spec.sweep.expect_metric != "reward" && spec.sweep.expect_metric != "psi" &&
                spec.sweep.expect_metric != "mse")
                fail("expect metric must be reward, psi or mse");
            if (spec.sweep.expect_trend != "non_increasing" && spec.sweep.expect_trend != "non_decreasing")
                fail("expect trend must be non_increasing or non_decreasing");
        }
    } else if (spec.kind == ExperimentKind::sweep) {
        fail("kind 'sweep' needs a 'sweep' object");
    }

    // Geometry must be valid for every scenario the experiment will build.
    switch (spec.kind) {
        case ExperimentKind::variant_compare:
            for (Variant v : spec.variants) apply_variant(spec.scenario, v).validate();
            break;
        case ExperimentKind::sweep:
            for (const auto& v : spec.sweep.values) apply_axis(spec.scenario, spec.variant, spec.sweep.axis, v);
            break;
        default:
            apply_variant(spec.scenario, spec.variant).validate();
    }
    return spec;
}

ExperimentSpec load_spec(const fs::path& path, const SpecOverrides& overrides) {
    std::ifstream in(path);
    if (!in) fail("cannot open " + path.string());
    json config;
    try {
        config = json::parse(in);
    } catch (const json::exception& e) {
        fail(path.string() + ": " + e.what());
    }
    return parse_spec(config, overrides, path.parent_path());
}

json to_json(const ExperimentSpec& spec) {
    json j;
    j["kind"] = to_string(spec.kind);
    j["name"] = spec.name;
    j["profile"] = spec.profile;
    j["scenario"] = to_json(spec.scenario);
    j["agent"] = to_json(spec.hyper);
    if (spec.constants) j["constants"] = to_json(*spec.constants);
    j["seeds"] = spec.seeds;
    j["output"] = spec.output_dir.string();
    j["policy"] = spec.policy;
    j["variant"] = to_string(spec.variant);
    j["variants"] = json::array();
    for (Variant v : spec.variants) j["variants"].push_back(to_string(v));
    j["methods"] = spec.methods;
    j["slots"] = spec.slots;
    j["rounds"] = spec.rounds;
    j["samples"] = spec.samples;
    j["z_limit"] = spec.z_limit;
    j["se_slack"] = spec.se_slack;
    j["tie_slack"] = spec.tie_slack;
    j["improvement"] = spec.improvement;
    j["final_window"] = spec.final_window;
    j["trend_start"] = spec.trend_start;
    j["mode"] = spec.mode == AggregationMode::perfect ? "perfect" : "over_the_air";
    j["task"] = {{"samples_per_user", spec.task.samples_per_user},
                 {"condition_number", spec.task.condition_number},
                 {"heterogeneity", spec.task.heterogeneity},
                 {"label_noise", spec.task.label_noise}};
    j["task_seed"] = spec.task_seed;
    if (spec.kind == ExperimentKind::sweep) {
        json s{{"axis", spec.sweep.axis}, {"values", spec.sweep.values}, {"method", spec.sweep.method}};
        if (!spec.sweep.expect_metric.empty())
            s["expect"] = {{"metric", spec.sweep.expect_metric}, {"trend", spec.sweep.expect_trend}};
        j["sweep"] = s;
    }
    j["threads"] = spec.threads;
    return j;
}

CsvTable::CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {
    if (columns_.empty()) throw std::invalid_argument("CsvTable: no columns");
}

void CsvTable::add_row(std::vector<Cell> cells) {
    if (cells.size() != columns_.size()) throw std::invalid_argument("CsvTable: row width differs from header");
    rows_.push_back(std::move(cells));
}

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

namespace {

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

struct CellText {
    std::string operator()(const std::string& s) const { return quote(s); }
    std::string operator()(double v) const { return format_number(v); }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(std::uint64_t v) const { return std::to_string(v); }
    std::string operator()(std::monostate) const { return {}; }
};

}  // namespace

std::string CsvTable::render() const {
    std::string out;
    for (std::size_t c = 0; c < columns_.size(); ++c) out += (c ? "," : "") + quote(columns_[c]);
    out += '\n';
    for (const auto& row : rows_) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += std::visit(CellText{}, row[c]);
        }
        out += '\n';
    }
    return out;
}

bool RunResult::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

RunResult run(const ExperimentSpec& spec) {
    KindOutput output = dispatch(spec);

    RunResult result;
    result.checks = std::move(output.checks);
    const fs::path dir = spec.output_dir;
    const bool created = !fs::exists(dir);
    try {
        fs::create_directories(dir);
        json files = json::array();
        for (const auto& [name, table] : output.tables) {
            const fs::path p = dir / name;
            result.files.push_back(p);
            write_text(p, table.render());
            files.push_back(name);
        }
        const json manifest{{"format", "risfl-manifest"}, {"version", 1},     {"code_version", code_version()},
                            {"kind", to_string(spec.kind)}, {"seeds", spec.seeds}, {"config", to_json(spec)},
                            {"outputs", files}};
        result.files.push_back(dir / "manifest.json");
        write_text(result.files.back(), manifest.dump(2) + "\n");

        json checks = json::array();
        for (const auto& c : result.checks) checks.push_back({{"id", c.id}, {"pass", c.pass}, {"detail", c.detail}});
        const json summary{{"experiment", spec.name}, {"kind", to_string(spec.kind)}, {"pass", result.all_pass()},
                           {"checks", checks}};
        result.files.push_back(dir / "summary.json");
        write_text(result.files.back(), summary.dump(2) + "\n");
    } catch (...) {
        std::error_code ec;
        for (const auto& p : result.files) fs::remove(p, ec);
        if (created) fs::remove(dir, ec);
        throw;
    }
    return result;
}

}  // namespace risfl::cli
