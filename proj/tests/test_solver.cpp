#include "doctest.h"

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sys/stat.h>
#include <thread>
#include <unistd.h>

#include "qnnv/encoder.hpp"
#include "qnnv/error.hpp"
#include "qnnv/interval.hpp"
#include "qnnv/property.hpp"
#include "qnnv/solver.hpp"
#include "support.hpp"

using namespace qnnv;
namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::string t = (fs::temp_directory_path() / "qnnv-solver-XXXXXX").string();
    path = ::mkdtemp(t.data());
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

// A shell script standing in for a solver.
SolverSpec fake(const TempDir& d, const std::string& name, const std::string& body) {
  const fs::path p = d.path / name;
  std::ofstream(p) << "#!/bin/sh\n" << body << "\n";
  fs::permissions(p, fs::perms::owner_all);
  SolverSpec s;
  s.name = name;
  s.executable = p;
  return s;
}

FxpConfig q44() {
  FxpConfig c;
  c.int_bits = 4;
  c.frac_bits = 4;
  return c;
}

std::shared_ptr<const SmtScript> identity_script(const char* prop) {
  const ModelIR m({DenseLayer(1, 1, {1.0}, {0.0}, Activation::relu)});
  return std::make_shared<SmtScript>(encode(m, q44(), LutSet::defaults(), parse_property(prop)));
}

const char* kSafe = "assume x[0] >= 0; assume x[0] <= 1; assert y[0] >= 0;";
const char* kUnsafe = "assume x[0] >= 0; assume x[0] <= 1; assert y[0] > 0.5;";

// Dead or zombie (not yet reaped by whoever inherited it).
bool gone(pid_t pid) {
  if (::kill(pid, 0) != 0) return true;
  std::ifstream stat("/proc/" + std::to_string(pid) + "/stat");
  std::string pid_s, comm, state;
  stat >> pid_s >> comm >> state;
  return state == "Z" || state == "X";
}

} // namespace

TEST_CASE("process runner") {
  const ProcessResult ok = run_process({"/bin/sh", "-c", "echo out; echo err >&2; exit 3"}, 10s);
  CHECK(ok.out == "out\n");
  CHECK(ok.err == "err\n");
  CHECK(ok.exit_code == 3);
  CHECK_FALSE(ok.timed_out);
  const ProcessResult big = run_process({"/bin/sh", "-c", "head -c 1000000 /dev/zero; head -c 500000 /dev/zero >&2"}, 10s);
  CHECK(big.out.size() == 1000000);
  CHECK(big.err.size() == 500000);
  const ProcessResult missing = run_process({"/nonexistent/solver"}, 1s);
  CHECK(missing.spawn_failed);
  const ProcessResult sig = run_process({"/bin/sh", "-c", "kill -9 $$"}, 10s);
  CHECK(sig.signal == SIGKILL);
  CHECK(sig.exit_code == -1);
}

TEST_CASE("timeouts kill the whole process group") {
  TempDir d;
  const fs::path pidfile = d.path / "pid";
  const auto start = std::chrono::steady_clock::now();
  const ProcessResult r = run_process(
      {"/bin/sh", "-c", "sleep 300 & echo $! > " + pidfile.string() + "; wait"}, 0.5s);
  const auto took = std::chrono::steady_clock::now() - start;
  CHECK(r.timed_out);
  CHECK(took < 5s);
  pid_t child = 0;
  std::ifstream(pidfile) >> child;
  REQUIRE(child > 0);
  bool dead = false;
  for (int i = 0; i < 50 && !dead; ++i) {
    dead = gone(child);
    if (!dead) std::this_thread::sleep_for(20ms);
  }
  CHECK(dead);
}

TEST_CASE("solver answers map to verdicts") {
  TempDir d;
  const auto safe = identity_script(kSafe);
  CHECK(run_solver(*safe, fake(d, "u", "echo unsat"), 10s).status == Status::safe);
  const Verdict unk = run_solver(*safe, fake(d, "k", "echo unknown; echo incomplete >&2"), 10s);
  CHECK(unk.status == Status::unknown);
  CHECK(unk.diagnostics.find("incomplete") != std::string::npos);
  const Verdict err = run_solver(*safe, fake(d, "e", "echo '(error \"line 3: bad\")'; exit 1"), 10s);
  CHECK(err.status == Status::solver_error);
  CHECK(err.diagnostics.find("line 3: bad") != std::string::npos);
  const Verdict t = run_solver(*safe, fake(d, "t", "sleep 30"), 0.3s);
  CHECK(t.status == Status::timeout);
  CHECK(t.wall_time.count() == doctest::Approx(0.3));
  SolverSpec none;
  none.name = "none";
  none.executable = d.path / "missing";
  CHECK(run_solver(*safe, none, 1s).status == Status::solver_error);

  // a sat answer whose witness does not replay is an error, never UNSAFE
  const Verdict lie = run_solver(*safe, fake(d, "l", "echo sat; echo '((in_0 #b000001000))'"), 10s);
  CHECK(lie.status == Status::solver_error);
  CHECK(lie.diagnostics.find("replay") != std::string::npos);
  const Verdict nomodel = run_solver(*safe, fake(d, "n", "echo sat"), 10s);
  CHECK(nomodel.status == Status::solver_error);

  const auto unsafe = identity_script(kUnsafe);
  const Verdict ok = run_solver(*unsafe, fake(d, "s", "echo sat; echo '((in_0 #b000000100))'"), 10s);
  REQUIRE(ok.status == Status::unsafe);
  CHECK(ok.counterexample->input_values[0].value == 0.25);
}

TEST_CASE("artifacts") {
  TempDir d;
  const auto safe = identity_script(kSafe);
  run_solver(*safe, fake(d, "u", "cat \"$1\" > /dev/null; echo unsat; echo note >&2"), 10s,
             ArtifactPaths{d.path / "art", "job"});
  CHECK(fs::exists(d.path / "art" / "job.smt2"));
  std::ifstream out(d.path / "art" / "job.out");
  std::string first;
  out >> first;
  CHECK(first == "unsat");
  CHECK(fs::file_size(d.path / "art" / "job.err") == 5);
}

TEST_CASE("solver discovery") {
  TempDir d;
  fake(d, "mysolver", "echo 'mysolver 1.0'");
  CHECK_FALSE(find_solver("mysolver"));
  const auto s = find_solver("mysolver", {d.path});
  REQUIRE(s);
  CHECK(s->executable == d.path / "mysolver");
  CHECK(probe_solver(*s) == "mysolver 1.0");
  ::setenv("QNNV_SOLVER_DIR", d.path.c_str(), 1);
  CHECK(find_solver("mysolver"));
  ::unsetenv("QNNV_SOLVER_DIR");
  SolverSpec broken = *s;
  broken.executable = d.path / "nope";
  CHECK_FALSE(probe_solver(broken));
  CHECK(default_solver_spec("z3", "/x/z3").args == std::vector<std::string>{"-smt2", "{file}"});
  CHECK(default_solver_spec("other", "/x/o").args == std::vector<std::string>{"{file}"});
}

TEST_CASE("batch concurrency bound and order") {
  TempDir d;
  const SolverSpec slow = fake(d, "slow", "sleep 0.3; echo unsat");
  std::vector<SolverJob> jobs;
  for (int i = 0; i < 8; ++i) jobs.push_back({identity_script(kSafe), slow, 10s, std::nullopt});

  BatchStats par;
  const auto start = std::chrono::steady_clock::now();
  const auto r = run_batch(jobs, 4, &par);
  const auto took = std::chrono::steady_clock::now() - start;
  CHECK(r.size() == 8);
  for (const auto& v : r) CHECK(v.status == Status::safe);
  CHECK(par.peak_live <= 4);
  CHECK(par.peak_live >= 2);
  CHECK(took < 2.0s); // 8 x 0.3 s sequentially

  BatchStats seq;
  run_batch(jobs, 1, &seq);
  CHECK(seq.peak_live == 1);
  CHECK(seq.start_order == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});

  CHECK_THROWS_AS(run_batch(jobs, 0), ConfigError);
  CHECK(run_batch({}, 3).empty());

  // one broken job does not affect the others
  jobs[3].script = nullptr;
  jobs[5].spec.executable = d.path / "missing";
  const auto mixed = run_batch(jobs, 3);
  CHECK(mixed[3].status == Status::solver_error);
  CHECK(mixed[5].status == Status::solver_error);
  CHECK(mixed[4].status == Status::safe);
}

TEST_CASE("parallel and sequential batches agree" * doctest::skip(!test::z3())) {
  std::mt19937_64 rng(83);
  std::vector<SolverJob> jobs;
  for (int i = 0; i < 12; ++i) {
    const ModelIR m = test::random_toy_model(rng);
    Property p;
    p.assumes.push_back({{{1.0, {Tier::input, 0}}}, Comparator::ge, -1.0});
    p.assumes.push_back({{{1.0, {Tier::input, 0}}}, Comparator::le, 1.0});
    p.asserts.push_back({{{1.0, {Tier::output, 0}}}, Comparator::lt, test::uniform(rng, 0.0, 4.0)});
    auto s = std::make_shared<SmtScript>(encode(m, q44(), LutSet::defaults(), p));
    jobs.push_back({s, *test::z3(), 60s, std::nullopt});
  }
  const auto a = run_batch(jobs, 1);
  const auto b = run_batch(jobs, 4);
  int unsafe = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    CHECK(a[i].status == b[i].status);
    CHECK(a[i].status != Status::solver_error);
    if (a[i].status == Status::unsafe) {
      ++unsafe;
      CHECK(a[i].counterexample->input_values.size() == b[i].counterexample->input_values.size());
    }
  }
  MESSAGE(unsafe << " of " << jobs.size() << " unsafe");
}
