#pragma once

#include "extinct/analysis.hpp"
#include "extinct/dynamics.hpp"
#include "extinct/error.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace extinct::io {

inline constexpr const char* kToolVersion = "extinct 1.0.0";

/// Either a catalog entry with its parameters or an expression over x1..xn.
struct HSpecConfig {
    std::string catalog;  // empty when `expression` is used
    double a = 1.0;
    std::vector<double> weights;
    double p = 2.0;
    std::string expression;
};

struct PerturbationConfig {
    std::string kind = "none";  // none, fixed_direction, rotational, oscillating, custom
    double M = 0.0;
    double delta = 0.0;
    double c_star = 0.0;
    double r_star = kInfinity;
    std::vector<double> direction;
    double omega = 1.0;
    std::vector<std::string> expression;  // one component per coordinate, over t, y1..yn
};

struct IntegratorConfig {
    Scheme scheme = Scheme::desingularized;
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    double rho_floor = 1e-10;  // relative to |y0|^alpha
    std::size_t max_steps = 1'000'000;
};

struct AnalysisConfig {
    double tail_fraction = 0.25;
    double fit_decades = 2.0;
};

struct ExperimentConfig {
    Matrix matrix;
    HSpecConfig h_spec;
    double alpha = 0.0;
    PerturbationConfig perturbation;
    Vector y0;
    double t0 = 0.0;
    IntegratorConfig integrator;
    AnalysisConfig analysis;
    std::uint64_t seed = 1;
    std::string hash;  // FNV-1a of the canonical JSON text
};

/// Strict parsing: unknown fields and missing matrix, h_spec, alpha or y0 are
/// rejected with ConfigInvalid naming the field path. Malformed JSON raises ParseError.
ExperimentConfig parse_config(const std::string& text);
/// Reads and parses a file. Throws IoError when it cannot be read.
ExperimentConfig load_config(const std::filesystem::path& path);

/// A module failure tagged with the pipeline stage that raised it.
class StageError : public Error {
public:
    StageError(std::string stage, const Error& cause)
        : Error(cause.kind(), stage + ": " + strip_kind(cause)), stage_(std::move(stage)) {}
    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

private:
    static std::string strip_kind(const Error& e) {
        const std::string what = e.what();
        const std::string prefix = std::string(to_string(e.kind())) + ": ";
        return what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
    }
    std::string stage_;
};

struct RunStatus {
    enum class State { verified, failed, error };
    State state = State::error;
    std::vector<std::string> failed_clauses;
    std::string error_kind;
    std::string error_stage;
    std::string error_message;
};

struct RunSummary {
    double t_star = 0.0;
    double t_star_err = 0.0;
    double Lambda = 0.0;
    double mu = kInfinity;
    Vector xi_star;
    Vector v_star;
    double eps_main = kInfinity;
    double eps_ir = kInfinity;
    double eps_ry = kInfinity;
    double residual_xiHA = 0.0;
    std::map<std::string, double> fit_r2;
    RunStatus status;
    std::string config_hash;
    std::string tool_version = kToolVersion;
};

/// Built pieces of a configured system.
struct BuiltSystem {
    SystemSpec sys;
    HomogeneousFn H;
};
/// Builds the system from a config; failures carry their stage label.
BuiltSystem build_system(const ExperimentConfig& config);

/// Full results of one run, including the in-memory trajectory.
struct RunResult {
    RunSummary summary;
    BuiltSystem built;
    Trajectory traj;
    analysis::EigenvalueMatch match;
    analysis::AsymptoticProfile profile;
    analysis::VerificationReport report;
};

/// decompose, integrate, analyze and verify. Writes trajectory.csv, summary.json
/// and plot_data.csv into `out_dir` when given. Throws StageError.
RunResult run_experiment(const ExperimentConfig& config,
                         const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Summary of a run that failed with `e`.
RunSummary error_summary(const Error& e, const std::string& config_hash);

std::string summary_to_json(const RunSummary& s);

struct SweepEntry {
    std::string name;
    std::filesystem::path config_path;
    std::optional<ExperimentConfig> config;  // empty when the config could not be loaded
    RunSummary summary;
};

/// Runs every config with up to `parallelism` workers. Results keep the input
/// order. Each run writes into `out_dir`/<index>_<name>/ and the aggregate
/// table goes to `out_dir`/sweep.csv.
std::vector<SweepEntry> sweep(const std::vector<std::filesystem::path>& configs, int parallelism,
                              const std::filesystem::path& out_dir);

/// CSV with header t,rho,lambda,y_0,... and 17 significant digits. Throws IoError.
void export_trajectory(const Trajectory& traj, const std::filesystem::path& path);

struct TrajectoryRow {
    double t = 0.0;
    double rho = 0.0;
    double lambda = 0.0;
    Vector y;
};
/// Reads a file written by export_trajectory. Throws IoError or ParseError.
std::vector<TrajectoryRow> read_trajectory(const std::filesystem::path& path);

/// Expands a shell glob pattern into sorted paths.
std::vector<std::filesystem::path> expand_glob(const std::string& pattern);

std::uint64_t fnv1a(const std::string& text);

}  // namespace extinct::io
