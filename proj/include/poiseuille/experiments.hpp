#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "poiseuille/energy.hpp"
#include "poiseuille/nonlinear.hpp"

namespace poiseuille {

// -------------------------------------------------------------------------
// Configuration.

struct ProfileConfig {
    std::string kind = "gaussian";  // "gaussian" or "single-mode"
    double k0 = 2.0;
    double sigma_k = 1.0;
    double amplitude = 1e-4;
    // Per-mode centre offsets drawn uniformly from [-y_spread, y_spread] and,
    // with random_phase, uniform phases. Zero spread without phases is the
    // separable profile a e^{-y^2/2} e^{-(k-k0)^2 / 2 sigma_k^2}.
    double y_spread = 0.0;
    bool random_phase = false;
};

struct ExperimentConfig {
    std::string kind = "linear-decay";
    std::vector<double> k_list{1.0};
    std::vector<double> nu_list;  // empty: use physics.nu only
    // Multiples of the implied bootstrap threshold (threshold-sweep).
    std::vector<double> amplitude_list{0.1, 1.0, 10.0, 100.0};
    // nonlinear-bootstrap: when set, the amplitude is this multiple of the
    // threshold implied by a pilot run at profile.amplitude.
    std::optional<double> threshold_multiple;
    ProfileConfig profile;
    double fit_skip_fraction = 0.1;
    int n_states = 100;
    // Trajectory length in units of 1 / max(lambda_k, nu) (sweeps) or 1 / lambda_{k0} (bootstrap).
    double horizon_factor = 5.0;
    // Target number of recorded samples when observer_stride is automatic.
    int samples = 400;
    double identity_tolerance = 1e-7;
    double band_low = 0.05;
    double band_high = 20.0;
};

struct RunConfig {
    // grid
    double L_y = 10.0;
    int n_y = 128;
    // spectrum
    double K_max = 16.0;
    double delta_k = 0.25;
    double dealias = 2.0 / 3.0;
    // physics
    double nu = 1e-2;
    EnergyConstants constants;
    // time
    std::optional<double> dt;  // absent: automatic per experiment
    double T = 10.0;
    int observer_stride = 0;  // 0: automatic from experiment.samples
    ExperimentConfig experiment;
    std::string output_dir = "out";
    std::uint64_t seed = 1;

    // ConfigError on any violated constraint.
    void validate() const;
};

const std::vector<std::string>& experiment_kinds();

// Defaults tuned per experiment kind; unknown kind throws ConfigError.
RunConfig default_config(const std::string& kind);

/// Parse a JSON document. Missing keys take the defaults of the document's
/// experiment.kind; unknown keys, wrong types and invalid values throw ConfigError.
/// A document without experiment.kind takes `fallback_kind`.
RunConfig parse_config(const std::string& text, const std::string& fallback_kind = "linear-decay");
RunConfig load_config(const std::filesystem::path& path, const std::string& fallback_kind = "linear-decay");
nlohmann::json config_to_json(const RunConfig& config);
std::string serialize_config(const RunConfig& config);

// -------------------------------------------------------------------------
// Rate fitting.

struct RateFit {
    double rate = 0.0;  // negated slope of log E against t
    double t_begin = 0.0;
    double t_end = 0.0;
    std::size_t samples = 0;
    double residual = 0.0;  // RMS deviation of log E from the fitted line
    double predicted = 0.0;  // 4 c lambda_k, filled by callers that know it
    bool window_shrunk = false;
    std::string warning;
};

/// Least-squares fit on t >= t0 + skip_fraction (t_N - t0). A nonpositive E
/// inside the window truncates the window before it (with a warning); fewer
/// than 8 usable samples throws DomainError.
RateFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& E, double skip_fraction = 0.1);

// Least-squares slope of log y against log x. Needs two distinct positive points.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// -------------------------------------------------------------------------
// Initial data.

// Deterministic per-cell seed derived from the run seed (splitmix64).
std::uint64_t cell_seed(std::uint64_t seed, std::uint64_t cell);

/// Random boundary-vanishing state omega = Delta_k g, g a complex sum of three
/// Gaussians with centres in [-2, 2] and widths in [0.8, 1.2], evaluated analytically.
CVector random_localized_state(double k, const Grid1D& grid, std::mt19937_64& rng);

// a e^{-y^2/2} with boundary samples clamped.
CVector gaussian_mode(double amplitude, const Grid1D& grid);

// Initial field from the profile, reality enforced and dealiased.
Field build_profile(const ProfileConfig& profile, const ModeBank& bank, const ConvolutionPlan& plan,
                    std::uint64_t seed);

// -------------------------------------------------------------------------
// Experiment drivers (no file output).

struct LinearCell {
    double k = 0.0;
    double nu = 0.0;
    double lambda = 0.0;
    double dt = 0.0;
    double T = 0.0;
    int stride = 1;
    std::vector<EnergySample> series;
    std::vector<double> omega_l2;  // ||omega_k(t)||^2 per sample
    double c_star = 0.0;
    std::optional<RateFit> fit;              // rate of E_k
    std::optional<RateFit> compensated_fit;  // rate of e^{2 nu k^2 t} E_k
    // E_k(t) <= e^{-4 c~ lambda t} E_k(0) (1 + 1e-6), c~ = 0.5 c*
    bool gronwall_held = true;
    double gronwall_worst = 0.0;  // max of E_k(t) / (e^{-4 c~ lambda t} E_k(0))
    double boundary_worst = 0.0;
};

/// Gaussian-data linear trajectory of length T. dt comes from the config when
/// pinned, else min(default_time_step, rotation_time_step).
LinearCell run_linear_cell(double k, double nu, double T, const RunConfig& config, bool fit);

struct IdentityCell {
    double k = 0.0;
    double nu = 0.0;
    std::array<double, 6> max_residual{};  // the five identities, then the combined form
    double worst = 0.0;
    double coarse_worst = 0.0;
};

struct IdentitySuite {
    int n_y = 0;
    int coarse_n_y = 0;
    std::vector<IdentityCell> cells;
    double max_residual = 0.0;
    double coarse_max_residual = 0.0;
    double shrink = 0.0;  // coarse / fine
};

// n_states random states per (nu, k) cell at n_y and at n_y / 2.
IdentitySuite run_identity_suite(const RunConfig& config, int workers);

struct BandCell {
    double k = 0.0;
    double nu = 0.0;
    std::vector<double> ratios;
    double low = 0.0;
    double high = 0.0;
};

struct EquivalenceBand {
    std::vector<BandCell> cells;
    double low = 0.0;
    double high = 0.0;
    std::size_t states = 0;
};

EquivalenceBand run_equivalence_band(const RunConfig& config, int workers);

struct RateSweep {
    std::vector<LinearCell> cells;  // nu-major, k-minor
    std::vector<double> reported_rate;  // 0 for k = 0 rates below 10 nu / L_y^2
    std::map<double, double> slope_k;      // per nu, over in-regime k
    std::map<double, double> slope_nu;     // per k in regime for every nu
    std::map<double, double> comp_slope_k;
    std::map<double, double> comp_slope_nu;
    double min_c_star = 0.0;
    bool gronwall_held = true;
};

// Every (nu, k) in nu_list x k_list with horizon horizon_factor / max(lambda_k, nu).
RateSweep run_rate_sweep(const RunConfig& config, int workers);

struct BootstrapPoint {
    double multiple = 0.0;  // of the implied threshold; 0 for a direct amplitude
    BootstrapRun run;
    double sup_ratio = 0.0;  // sup E / E(0)
};

struct BootstrapReport {
    double horizon = 0.0;
    std::optional<BootstrapRun> pilot;
    std::optional<double> empirical_C;
    std::optional<double> threshold;  // on E(0)
    std::vector<BootstrapPoint> points;
    bool monotone = true;  // sup E / E(0) nondecreasing across the sweep
};

/// Pilot at profile.amplitude, then one run per multiple of the implied
/// threshold (the multiple applies to E(0), so amplitudes scale as its root).
/// An empty `multiples` list runs the profile amplitude directly.
BootstrapReport run_bootstrap_experiment(const RunConfig& config, const std::vector<double>& multiples,
                                         int workers);

// -------------------------------------------------------------------------
// Output.

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

// Shortest round-trip formatting; IoError when the file cannot be written.
void emit_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

struct SvgSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

// Line plot; with log_y, nonpositive samples are dropped.
void emit_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
              const std::string& y_label, const std::vector<SvgSeries>& series, bool log_y = true);

struct ManifestFile {
    std::string path;  // relative to the output directory
    std::string kind;  // "csv" or "svg"
    std::vector<std::string> columns;
};

struct RunManifest {
    nlohmann::json config;
    std::string code_version;
    std::string started;
    std::string finished;
    std::string status = "ok";  // "ok" or "failed"
    int exit_code = 0;
    std::string failure;
    nlohmann::json summary = nlohmann::json::object();
    std::vector<ManifestFile> files;

    nlohmann::json to_json() const;
};

// Write manifest.json through a temporary file and a rename.
void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitBlowUp = 3, kExitVerification = 4 };

struct RunOptions {
    int workers = 1;
};

/// Dispatch on experiment.kind, write CSV/SVG files and the manifest into
/// output_dir. Failures after the output directory exists are recorded in the
/// manifest; the exit code follows the 0/2/3/4 contract.
RunManifest run_experiment(const RunConfig& config, const RunOptions& options = {});

/// Run fn(i) for i in [0, n) on up to `workers` threads. Results are indexed
/// by i, so output order never depends on scheduling. The first exception
/// thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

// Command-line entry point shared by the tool and the tests.
int cli_main(int argc, char** argv);

const char* code_version();

}  // namespace poiseuille
