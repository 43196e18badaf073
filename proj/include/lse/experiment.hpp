#pragma once

#include "lse/replica.hpp"
#include "lse/simulator.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lse {

inline constexpr const char* kVersion = "0.1.0";

enum class Mode { replica, sweep, simulate, compare, calibrate, saving, plot };

Mode parse_mode(std::string_view name);
const char* to_string(Mode mode) noexcept;

/// Line-oriented experiment description:
///
///   # comment
///   [section]
///   key = value
///
/// Keys are addressed as "section.key". Unknown sections or keys are a
/// ConfigError; see documented_keys() for the full list.
class ExperimentConfig {
public:
    static ExperimentConfig parse(std::string_view text, std::string_view origin = "<string>");
    static ExperimentConfig load(const std::filesystem::path& path);

    void set(std::string_view key, std::string_view value);
    /// "section.key=value"
    void apply_override(std::string_view assignment);
    std::optional<std::string> get(std::string_view key) const;
    bool has(std::string_view key) const { return get(key).has_value(); }
    void erase(std::string_view key);

    /// Canonical text: sections and keys sorted, one assignment per line.
    std::string serialize() const;
    const std::map<std::string, std::string>& values() const noexcept { return values_; }

private:
    std::map<std::string, std::string> values_;
};

struct KeyDoc {
    const char* key;
    const char* default_value;
    const char* description;
};

const std::vector<KeyDoc>& documented_keys();

/// "1.0:0.1:2.8" or "1, 1.5, 2"; values must be strictly increasing.
std::vector<double> parse_grid(std::string_view text);

struct SweepRow {
    double alpha_inverse = 0.0;
    double lambda = 0.0;
    double lambda0 = 0.0;
    double chi = 0.0;
    double p = 0.0;
    double eta = 0.0;
    double papr_db = 0.0;
    double distortion_db = 0.0;
    double residual = 0.0;
    long iterations = 0;
    std::string status = "ok";
};

std::string format_number(double v);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> parse_sweep_csv(std::string_view text);

/// One replica point at load 1/alpha_inverse; direct (lambda, lambda0) or
/// calibrated targets according to the config. Failures become status rows.
SweepRow replica_point(const ExperimentConfig& config, double alpha_inverse, double eta_target,
                       std::optional<double> papr_db);

struct SweepCurve {
    double eta_target = 1.0;
    std::optional<double> papr_db;
    std::vector<SweepRow> rows;
    std::string file_name;
};

/// One curve per (targets.eta, targets.papr_db) pair over system.alpha_inverse.
std::vector<SweepCurve> run_replica_sweep(const ExperimentConfig& config, int threads = 1);

struct ComparisonLine {
    std::string quantity;
    double replica = 0.0;
    double empirical = 0.0;
    double ci95 = 0.0;
    double relative_gap = 0.0;
};

struct CompareReport {
    SweepRow replica;
    MonteCarloReport simulation;
    std::vector<ComparisonLine> lines;
    double ks_decoupled = 0.0;
    double ks_halves = 0.0;
};

MonteCarloConfig simulation_config(const ExperimentConfig& config, const PenaltySpec& penalty,
                                   double alpha, int threads);
CompareReport run_compare(const ExperimentConfig& config, int threads = 1);
std::string compare_csv(const CompareReport& report);

struct SavingRow {
    double alpha_inverse = 0.0;
    double eta = 0.0;
    double papr_db = 0.0;
    double distortion_db = 0.0;
    double eta_random = 0.0;
    double saving = 0.0;
    std::string status = "ok";
};

/// Equal-distortion random-TAS fraction for optimal TAS at fraction eta.
/// Throws NotAchievable if either side cannot be met.
SavingRow antenna_saving_point(double alpha_inverse, double lambda_s, double p_target, double eta,
                               std::optional<double> papr_db, const SolveOptions& opts = {});
std::vector<SavingRow> run_antenna_saving(const ExperimentConfig& config, int threads = 1);
std::string saving_csv(const std::vector<SavingRow>& rows);

struct PlotCurve {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Reads alpha_inverse and distortion_db columns; SchemaError when absent or
/// malformed.
PlotCurve read_plot_curve(const std::filesystem::path& csv);
std::string emit_plot(const std::vector<PlotCurve>& curves, std::string_view title = "");
std::string emit_plot(const std::vector<std::filesystem::path>& csvs, std::string_view title = "");

struct RunOptions {
    std::filesystem::path out_dir = ".";
    int threads = 1;
};

/// Runs `mode`, writing its outputs and manifest.txt into out_dir. Returns
/// the written files in order.
std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& config, Mode mode,
                                                  const RunOptions& opts);

} // namespace lse
