#pragma once

// Batch front-end: JSON run configs in, CSV tables and JSON reports out.
// Every output file carries the SHA-256 of the canonical config dump.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bubblelab/diagnostics.hpp"
#include "bubblelab/radial_solver.hpp"

namespace bubblelab::cli {

inline constexpr const char* kConfigSchema = "bubblelab.run/1";
inline constexpr const char* kReportSchema = "bubblelab.report/1";

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_solver = 3, exit_assertion = 4 };

struct Toggles {
  bool rate_fit = true;
  bool local_rate_fit = true;
  bool sign_law = true;
  bool matching = true;
  bool outer = true;
  bool pohozaev = true;
  bool b0 = true;
  bool uniqueness = true;
  bool concentration = true;
  bool nondegeneracy = true;
  bool mesh_convergence = true;
  bool psi1 = true;
};

struct Thresholds {
  double slope_rel = 0.02;          // rate-law slope, relative
  double intercept_rel = 0.05;      // rate-law intercept, relative to |log ell|
  double decay_rel = 0.10;          // decay exponents vs the sigma-rate
  double pohozaev = 1e-6;           // linearized and pair residuals
  double pohozaev_r_ratio = 2.0;    // r-independence factor
  double kernel = 1e-6;             // nondegeneracy minimum after rescaling
  double deficit = 0.01;            // concentration at the top of the branch
  double mesh_convergence = 1e-3;   // |rho - rho_fine| / |rho_fine - 8 pi (1+a)|
  double psi1 = 1e-9;
};

struct RunConfig {
  greenfns::WeightSpec spec;
  MeshPolicy mesh;
  double lambda_start = 6.0;
  double lambda_end = 14.0;
  int steps = 33;
  Toggles diagnostics;
  diagnostics::Window window;
  double r0 = 0.25;
  double outer_r0 = 0.5;
  int k_max = 8;
  Thresholds thresholds;
  std::string output_dir = "out";
};

/// Parses and validates; throws ConfigError naming every offending field.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical form with every default filled in (sorted keys).
nlohmann::json config_to_json(const RunConfig& config);

/// SHA-256 (hex) of the canonical dump without output_dir.
std::string config_hash(const RunConfig& config);

/// Seed for the eigensolver start vectors, taken from the hash.
std::uint64_t config_seed(const RunConfig& config);

/// Writes through a temporary file in the same directory and renames it.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Branch table, one row per point, 17 significant digits.
std::string branch_csv(const Branch& branch, const std::string& hash);
/// Two-column (radius, u) snapshot of a point.
std::string field_csv(const SolutionPoint& point, const std::string& hash);

struct CommandOutput {
  int exit_code = exit_ok;
  std::vector<std::filesystem::path> files;
  nlohmann::json summary;
};

/// Continuation over the configured lambda range; throws SolverError with
/// the partial branch already written when it stops early.
Branch run_branch(const RunConfig& config);

CommandOutput cmd_branch(const RunConfig& config, const std::filesystem::path& out);
CommandOutput cmd_verify(const RunConfig& config, const std::filesystem::path& out);
CommandOutput cmd_spectrum(const RunConfig& config, const std::filesystem::path& out);
CommandOutput cmd_pohozaev(const RunConfig& config, const std::filesystem::path& out);

/// The verification report for a computed branch (no files written).
nlohmann::json verify_report(const RunConfig& config, const Branch& branch);

/// Machine-readable error document.
nlohmann::json error_json(int exit_code, const std::string& kind, const std::string& message,
                          const std::vector<std::string>& fields = {});

}  // namespace bubblelab::cli
