#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qnnv/encoder.hpp"
#include "qnnv/verdict.hpp"

namespace qnnv {

/// How to invoke an SMT-LIB2 solver. `{file}` in `args` is replaced by the
/// script path. The dialect tag only records where the model format came
/// from; the model reader accepts every supported style.
struct SolverSpec {
  std::string name;
  std::filesystem::path executable;
  std::vector<std::string> args{"{file}"};
  std::string dialect = "smtlib";
  std::vector<std::string> version_args{"--version"};
};

/// Argument template for a known solver (z3, yices-smt2, bitwuzla,
/// boolector, cvc5); anything else is passed the file only.
SolverSpec default_solver_spec(const std::string& name, const std::filesystem::path& executable);

/// Looks the executable up in `dirs`, then in PATH. QNNV_SOLVER_DIR, when
/// set, is searched before `dirs`.
std::optional<SolverSpec> find_solver(const std::string& name,
                                      const std::vector<std::filesystem::path>& dirs = {});

/// Runs the version probe; returns the first line of its output, or nullopt
/// if the executable does not run or exits non-zero.
std::optional<std::string> probe_solver(const SolverSpec& spec);

/// Output of one child process run to completion or killed at the deadline.
struct ProcessResult {
  std::string out;
  std::string err;
  int exit_code = -1;   ///< -1 when killed by a signal
  int signal = 0;
  bool timed_out = false;
  bool spawn_failed = false;
  std::chrono::duration<double> wall_time{0};
};

/// Spawns argv[0] in a fresh process group with stdin from /dev/null and
/// collects both output streams. At the deadline the whole group gets
/// SIGKILL and is reaped before returning.
ProcessResult run_process(const std::vector<std::string>& argv, std::chrono::duration<double> timeout);

/// Where to keep the script and solver output of a job (`stem.smt2`,
/// `stem.out`, `stem.err`). Without it they go to a temporary file that is
/// removed afterwards.
struct ArtifactPaths {
  std::filesystem::path dir;
  std::string stem;
};

/// sat: decode, replay and validate the witness (UNSAFE, or SOLVER_ERROR if
/// replay disagrees); unsat: SAFE; unknown: UNKNOWN; deadline: TIMEOUT with
/// wall_time = timeout; anything else: SOLVER_ERROR with diagnostics.
Verdict run_solver(const SmtScript& script, const SolverSpec& spec, std::chrono::duration<double> timeout,
                   const std::optional<ArtifactPaths>& artifacts = std::nullopt);

struct SolverJob {
  std::shared_ptr<const SmtScript> script;
  SolverSpec spec;
  std::chrono::duration<double> timeout{60};
  std::optional<ArtifactPaths> artifacts;
};

struct BatchStats {
  /// Most solver processes alive at the same time.
  std::size_t peak_live = 0;
  /// Job indices in the order their processes were started.
  std::vector<std::size_t> start_order;
};

/// Runs every job with at most `parallelism` solvers alive at once. Results
/// are in job order; a failing job yields its own SOLVER_ERROR.
std::vector<Verdict> run_batch(const std::vector<SolverJob>& jobs, unsigned parallelism,
                               BatchStats* stats = nullptr);

} // namespace qnnv
