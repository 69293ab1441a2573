#pragma once

#include "mz/io.hpp"
#include "mz/metrics.hpp"
#include "mz/predict.hpp"

#include <cstdint>
#include <stdexcept>

namespace mz {

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
    std::string case_label = "rda:a";
    int N = 0;                          // 0 selects the family default
    int d = 0;                          // resolved count when resolved_indices is empty
    std::vector<int> resolved_indices;  // empty selects the system default
    int Ns_train = 0, Ns_test = 0;
    std::uint64_t seed_train = 1, seed_test = 2;
    double T = 0.0;
    std::vector<double> dt_list;
    Scheme scheme = Scheme::Midpoint;
    SolveMode mode = SolveMode::Full;
    double lambda_R = 0.0, lambda_K = 0.0;
    std::vector<double> lambda_grid;
    std::vector<double> m_fraction_list;
    int lsqr_max_iter = 500;
    double lsqr_atol = 1e-14;
    bool lsqr_precondition = true;
    double solver_tol = 1e-12;
    double rank_tol = 1e-10;
    std::string output_dir = "out";
    int threads = 1;
    DerivativeSource derivative = DerivativeSource::Difference;
    bool scaled_kernel_penalty = true;
    bool merge_partial = true;
    bool literal_d2 = false;
    double diagnostics_slack = 0.01;
    std::string name;  // file stem for emitted artifacts

    // Canonical JSON text; the basis of config_hash.
    std::string canonical() const;
    std::string hash() const;
    SolveOptions solve_options() const;
};

// Accepts a single experiment object or {"defaults": {...}, "experiments": [...]}.
std::vector<ExperimentConfig> load_configs(const std::string& path);
std::vector<ExperimentConfig> parse_configs(const std::string& json_text);
// Fills family defaults and checks mode-specific fields.
void finalize(ExperimentConfig& cfg, bool require_ladder);

struct ExperimentData {
    SystemSpec sys;
    ProjectionSpec proj;
    std::vector<SnapshotEnsemble> train, test;  // one per dt_list entry
};

// Integrates once at the finest step and subsamples the coarser levels.
ExperimentData generate_data(const ExperimentConfig& cfg);

struct ConvergenceRow {
    double dt = 0.0;
    int NT = 0;
    double E_Phi = 0.0, E_K = 0.0, E_R = 0.0;
    std::optional<double> rate_K, rate_R;
    ReferenceKind k_reference = ReferenceKind::Analytic;
};

struct TableArtifact {
    Table table;
    Metadata meta;
};

struct ConvergenceResult {
    std::vector<ConvergenceRow> rows;
    TableArtifact artifact;
};
ConvergenceResult run_convergence(const ExperimentConfig& cfg);

struct FiniteMemoryRow {
    double fraction = 0.0;
    int m = 0;
    double E_Phi = 0.0;
    int lsqr_iterations = 0;
    std::vector<double> kernel_norms;  // ||K_n||_F, n = 0..N_T-1
};
struct FiniteMemoryResult {
    double dt = 0.0;
    int NT = 0;
    std::vector<FiniteMemoryRow> rows;
    TableArtifact artifact;
    Table lag_profile;
};
FiniteMemoryResult run_finite_memory(const ExperimentConfig& cfg);

struct RegularizationResult {
    double dt = 0.0;
    std::vector<double> lambdas;
    Mat E_Phi;  // rows lambda_R, cols lambda_K; +inf where the march failed
    TableArtifact artifact;
};
RegularizationResult run_regularization(const ExperimentConfig& cfg);

struct DiagnosticsResult {
    std::optional<ConditioningReport> conditioning;
    std::vector<LsDiagnostics> partial_unmerged;
    std::vector<LsDiagnostics> nonstationary;
    int d = 0, d_tilde = 0;
    std::string report;
};
DiagnosticsResult run_diagnostics(const ExperimentConfig& cfg);

// Single-stage helpers behind the generate / reconstruct / predict commands.
ReconstructionReport reconstruct(const ExperimentConfig& cfg, const SystemSpec& sys, const SnapshotEnsemble& train);

// Writes table.csv / table.md / meta under cfg.output_dir using cfg.name.
void emit(const ExperimentConfig& cfg, const std::string& suffix, const TableArtifact& art);

}  // namespace mz
