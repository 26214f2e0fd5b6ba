#include "qnnv/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "qnnv/error.hpp"

extern char** environ;

namespace qnnv {

namespace fs = std::filesystem;

SolverSpec default_solver_spec(const std::string& name, const fs::path& executable) {
  SolverSpec s;
  s.name = name;
  s.executable = executable;
  if (name == "z3") {
    s.args = {"-smt2", "{file}"};
  } else if (name == "yices" || name == "yices-smt2") {
    s.args = {"{file}"};
    s.dialect = "yices";
  } else if (name == "boolector") {
    s.args = {"--smt2", "-m", "{file}"};
  } else if (name == "cvc5") {
    s.args = {"--lang=smt2", "{file}"};
  }
  return s;
}

namespace {

bool is_executable(const fs::path& p) {
  std::error_code ec;
  return fs::is_regular_file(p, ec) && ::access(p.c_str(), X_OK) == 0;
}

std::string binary_name(const std::string& name) { return name == "yices" ? "yices-smt2" : name; }

} // namespace

std::optional<SolverSpec> find_solver(const std::string& name, const std::vector<fs::path>& dirs) {
  std::vector<fs::path> search;
  if (const char* env = std::getenv("QNNV_SOLVER_DIR"); env && *env) search.emplace_back(env);
  search.insert(search.end(), dirs.begin(), dirs.end());
  if (const char* path = std::getenv("PATH")) {
    std::stringstream ss(path);
    std::string dir;
    while (std::getline(ss, dir, ':')) {
      if (!dir.empty()) search.emplace_back(dir);
    }
  }
  for (const fs::path& d : search) {
    const fs::path candidate = d / binary_name(name);
    if (is_executable(candidate)) return default_solver_spec(name, candidate);
  }
  return std::nullopt;
}

std::optional<std::string> probe_solver(const SolverSpec& spec) {
  std::vector<std::string> argv{spec.executable.string()};
  argv.insert(argv.end(), spec.version_args.begin(), spec.version_args.end());
  const ProcessResult r = run_process(argv, std::chrono::seconds(10));
  if (r.spawn_failed || r.timed_out || r.exit_code != 0) return std::nullopt;
  const std::string text = r.out.empty() ? r.err : r.out;
  return text.substr(0, text.find('\n'));
}

ProcessResult run_process(const std::vector<std::string>& argv, std::chrono::duration<double> timeout) {
  ProcessResult result;
  const auto start = std::chrono::steady_clock::now();
  int out_pipe[2];
  int err_pipe[2];
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    result.spawn_failed = true;
    result.err = std::strerror(errno);
    return result;
  }
  if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    result.spawn_failed = true;
    result.err = std::strerror(errno);
    return result;
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, 0, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], 1);
  posix_spawn_file_actions_adddup2(&actions, err_pipe[1], 2);
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);

  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  pid_t pid = 0;
  const int rc = ::posix_spawn(&pid, args[0], &actions, &attr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);
  if (rc != 0) {
    ::close(out_pipe[0]);
    ::close(err_pipe[0]);
    result.spawn_failed = true;
    result.err = "cannot start " + argv[0] + ": " + std::strerror(rc);
    return result;
  }

  const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(timeout);
  pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
  std::string* sinks[2] = {&result.out, &result.err};
  int open_fds = 2;
  char buf[65536];
  while (open_fds > 0) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      result.timed_out = true;
      break;
    }
    const int n = ::poll(fds, 2, static_cast<int>(std::min<long long>(left.count() + 1, 1000)));
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (int i = 0; i < 2; ++i) {
      if (fds[i].fd < 0 || fds[i].revents == 0) continue;
      const ssize_t got = ::read(fds[i].fd, buf, sizeof buf);
      if (got > 0) {
        sinks[i]->append(buf, static_cast<std::size_t>(got));
      } else if (got == 0 || errno != EINTR) {
        ::close(fds[i].fd);
        fds[i].fd = -1;
        --open_fds;
      }
    }
  }
  if (result.timed_out) ::kill(-pid, SIGKILL);
  for (auto& f : fds) {
    if (f.fd >= 0) ::close(f.fd);
  }
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (result.timed_out) {
    // grandchildren that escaped the first signal
    ::kill(-pid, SIGKILL);
  }
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.signal = WTERMSIG(status);
  }
  result.wall_time = std::chrono::steady_clock::now() - start;
  return result;
}

namespace {

struct ScriptFile {
  fs::path path;
  bool keep = false;

  ~ScriptFile() {
    if (!keep && !path.empty()) {
      std::error_code ec;
      fs::remove(path, ec);
    }
  }
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
  if (!f) throw Error("cannot write " + p.string());
}

fs::path temp_script_path() {
  std::string tmpl = (fs::temp_directory_path() / "qnnv-XXXXXX.smt2").string();
  const int fd = ::mkstemps(tmpl.data(), 5);
  if (fd < 0) throw Error(std::string("cannot create temporary script: ") + std::strerror(errno));
  ::close(fd);
  return tmpl;
}

std::string first_atom(const std::string& out, std::size_t& end) {
  std::size_t b = out.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) {
    end = out.size();
    return {};
  }
  end = out.find_first_of(" \t\r\n()", b);
  if (end == std::string::npos) end = out.size();
  return out.substr(b, end - b);
}

std::string tail(const std::string& s, std::size_t n = 2000) {
  return s.size() <= n ? s : "..." + s.substr(s.size() - n);
}

Verdict run_solver_impl(const SmtScript& script, const SolverSpec& spec,
                        std::chrono::duration<double> timeout, const std::optional<ArtifactPaths>& artifacts,
                        const std::function<void()>& on_start, const std::function<void()>& on_exit) {
  Verdict v;
  v.solver = spec.name;
  RenderOptions ro;
  ro.get_values = script.inputs;
  ScriptFile file;
  if (artifacts) {
    fs::create_directories(artifacts->dir);
    file.path = artifacts->dir / (artifacts->stem + ".smt2");
    file.keep = true;
  } else {
    file.path = temp_script_path();
  }
  write_file(file.path, script.render(ro));

  std::vector<std::string> argv{spec.executable.string()};
  for (const auto& a : spec.args) argv.push_back(a == "{file}" ? file.path.string() : a);
  on_start();
  const ProcessResult r = run_process(argv, timeout);
  on_exit();
  if (artifacts) {
    write_file(artifacts->dir / (artifacts->stem + ".out"), r.out);
    write_file(artifacts->dir / (artifacts->stem + ".err"), r.err);
  }
  v.wall_time = r.wall_time;
  if (r.spawn_failed) {
    v.status = Status::solver_error;
    v.diagnostics = r.err;
    return v;
  }
  if (r.timed_out) {
    v.status = Status::timeout;
    v.wall_time = timeout;
    return v;
  }
  std::size_t end = 0;
  const std::string answer = first_atom(r.out, end);
  if (answer == "unsat") {
    v.status = Status::safe;
  } else if (answer == "unknown") {
    v.status = Status::unknown;
    v.diagnostics = tail(r.err);
  } else if (answer == "sat") {
    try {
      Counterexample cex = decode_model(script, std::string_view(r.out).substr(end));
      if (const auto why = validate_counterexample(*script.problem, cex)) {
        v.status = Status::solver_error;
        v.diagnostics = "counterexample failed replay validation: " + *why + "\nsolver output:\n" + tail(r.out);
      } else {
        v.status = Status::unsafe;
        v.counterexample = std::move(cex);
      }
    } catch (const Error& e) {
      v.status = Status::solver_error;
      v.diagnostics = std::string("cannot decode solver model: ") + e.what() + "\nsolver output:\n" + tail(r.out);
    }
  } else {
    v.status = Status::solver_error;
    v.diagnostics = "unexpected solver output (exit " + std::to_string(r.exit_code) +
                    (r.signal ? ", signal " + std::to_string(r.signal) : std::string()) + "):\n" +
                    tail(r.out) + tail(r.err);
  }
  return v;
}

} // namespace

Verdict run_solver(const SmtScript& script, const SolverSpec& spec, std::chrono::duration<double> timeout,
                   const std::optional<ArtifactPaths>& artifacts) {
  return run_solver_impl(script, spec, timeout, artifacts, [] {}, [] {});
}

std::vector<Verdict> run_batch(const std::vector<SolverJob>& jobs, unsigned parallelism, BatchStats* stats) {
  if (parallelism == 0) throw ConfigError("parallelism must be at least 1");
  std::vector<Verdict> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t live = 0;
  BatchStats local;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const SolverJob& job = jobs[i];
      try {
        if (!job.script) throw Error("job has no script");
        results[i] = run_solver_impl(
            *job.script, job.spec, job.timeout, job.artifacts,
            [&] {
              std::lock_guard lock(mu);
              ++live;
              local.peak_live = std::max(local.peak_live, live);
              local.start_order.push_back(i);
            },
            [&] {
              std::lock_guard lock(mu);
              --live;
            });
      } catch (const std::exception& e) {
        results[i].status = Status::solver_error;
        results[i].solver = job.spec.name;
        results[i].diagnostics = e.what();
      }
    }
  };

  const unsigned n = static_cast<unsigned>(std::min<std::size_t>(parallelism, std::max<std::size_t>(jobs.size(), 1)));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (stats) *stats = std::move(local);
  return results;
}

} // namespace qnnv
