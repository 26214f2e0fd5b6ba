#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "qnnv/model.hpp"
#include "qnnv/verdict.hpp"

namespace qnnv {

/// Stable process exit codes.
enum ExitCode : int {
  exit_safe = 0,
  exit_usage = 1,
  exit_internal = 2,
  exit_unsafe = 10,
  exit_unknown = 20,
};

struct RobustnessSpec {
  /// CSV file, one reference point per line.
  std::filesystem::path x0_path;
  double radius = 0.0;
  std::size_t target = 0;
};

struct RunConfig {
  std::filesystem::path model_path;
  std::string model_format; ///< "nnet", "json" or empty (by extension)
  NnetOptions nnet;
  bool normalize = false;

  std::vector<std::filesystem::path> property_paths;
  std::optional<RobustnessSpec> robustness;

  std::string quant = "fxp:4.4";
  /// Custom activation tables, by activation name.
  std::map<std::string, std::filesystem::path> lut_paths;

  std::vector<std::string> solvers{"z3"};
  /// Explicit executables, by solver name; otherwise searched.
  std::map<std::string, std::filesystem::path> solver_paths;
  std::chrono::duration<double> timeout{60};
  unsigned parallelism = 1;
  bool per_assert = false;

  bool invariants = true;
  /// Subset of {"smt2", "c", "invariants"}.
  std::set<std::string> emit;
  /// false: stop after writing the emitted artifacts.
  bool solve = true;
  bool keep_artifacts = false;
  std::filesystem::path output_dir = "qnnv-out";

  /// Decide with the brute-force oracle instead of solvers.
  bool use_oracle = false;
  std::uint64_t oracle_limit = std::uint64_t{1} << 20;

  /// Throws ConfigError.
  void validate() const;
};

struct StageTimes {
  std::chrono::duration<double> parse{0};
  std::chrono::duration<double> invariants{0};
  std::chrono::duration<double> encode{0};
  std::chrono::duration<double> solve{0};
};

struct ReportEntry {
  std::string property;
  /// Index of the assert in per-assert mode.
  std::optional<std::size_t> assert_index;
  Verdict verdict;
  StageTimes times;
  double invariant_mean_width = 0.0;
  std::size_t invariant_count = 0;
  std::vector<std::filesystem::path> artifacts;
};

struct Report {
  std::string model;
  std::string quant;
  std::vector<ReportEntry> entries;

  /// One JSON object per entry.
  std::string jsonl() const;
  /// Fixed-width table with the same fields.
  std::string table() const;
  /// Any SOLVER_ERROR: internal; else any UNSAFE: unsafe; else any
  /// UNKNOWN/TIMEOUT: unknown; else safe.
  int exit_code() const;
};

/// load model -> properties -> invariants -> encode -> solve -> report. With
/// solve = false only the requested artifacts are written. Report files
/// (report.jsonl, report.txt) and counterexamples (<property>.cex.json) go to
/// the output directory. Stage failures are rethrown as StageError.
Report run_pipeline(const RunConfig& rc);

class StageError : public std::runtime_error {
public:
  StageError(std::string stage, const std::string& what, int exit_code)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)), exit_code_(exit_code) {}

  const std::string& stage() const { return stage_; }
  /// exit_usage for bad input or configuration, exit_internal otherwise.
  int exit_code() const { return exit_code_; }

private:
  std::string stage_;
  int exit_code_;
};

/// Counterexample as JSON: inputs (raw and value), violated assert, trace.
std::string counterexample_json(const Counterexample& cex);

} // namespace qnnv
