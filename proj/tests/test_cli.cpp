#include "doctest.h"

#include <fstream>
#include <sstream>
#include <unistd.h>

#include "json.hpp"
#include "qnnv/solver.hpp"
#include "support.hpp"

using namespace qnnv;
namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

struct Workspace {
  fs::path dir;
  Workspace() {
    std::string t = (fs::temp_directory_path() / "qnnv-cli-XXXXXX").string();
    dir = ::mkdtemp(t.data());
    write("id.json", R"({"format_version": 1, "layers": [
      {"type": "dense", "weights": [[1.0]], "bias": [0.0], "activation": "relu"}]})");
    write("two.json", R"({"format_version": 1, "layers": [
      {"type": "dense", "weights": [[1.0, -1.0], [-1.0, 1.0]], "bias": [0.0, 0.0], "activation": "linear"}]})");
    write("safe.prop", "assume x[0] >= 0; assume x[0] <= 1;\nassert y[0] >= 0;\n");
    write("unsafe.prop", "assume x[0] >= 0; assume x[0] <= 1;\nassert y[0] > 0.5;\n");
    write("bad.prop", "assume x[0] >= 0;\nassert y[0] >> 1;\n");
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
    return dir / name;
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }

  ProcessResult run(std::vector<std::string> args) const {
    args.insert(args.begin(), QNNV_BINARY);
    return run_process(args, 120s);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

} // namespace

TEST_CASE("usage errors exit 1") {
  Workspace w;
  CHECK(w.run({}).exit_code == 1);
  CHECK(w.run({"frobnicate"}).exit_code == 1);
  CHECK(w.run({"verify", "-p", w.path("safe.prop")}).exit_code == 1); // no model
  CHECK(w.run({"verify", "-m", w.path("missing.json"), "-p", w.path("safe.prop")}).exit_code == 1);
  CHECK(w.run({"verify", "-m", w.path("id.json"), "-p", w.path("safe.prop"), "-q", "fxp:9"}).exit_code == 1);
  CHECK(w.run({"verify", "-m", w.path("id.json"), "-p", w.path("safe.prop"), "-j", "0"}).exit_code == 1);
  CHECK(w.run({"verify", "-m", w.path("id.json"), "-p", w.path("safe.prop"), "--emit", "pdf"}).exit_code == 1);
  const ProcessResult bad = w.run({"verify", "-m", w.path("id.json"), "-p", w.path("bad.prop")});
  CHECK(bad.exit_code == 1);
  CHECK(bad.err.find("line 2") != std::string::npos);
  CHECK(w.run({"verify", "-m", w.path("id.json"), "-p", w.path("safe.prop"), "-s", "nosuchsolver"}).exit_code == 1);
  CHECK(w.run({"--help"}).exit_code == 0);
}

TEST_CASE("verify exit codes and reports" * doctest::skip(!test::z3())) {
  Workspace w;
  const std::string out = w.path("out");
  const ProcessResult safe = w.run({"verify", "-m", w.path("id.json"), "-p", w.path("safe.prop"), "-o", out});
  CHECK(safe.exit_code == 0);
  CHECK(safe.out.find("SAFE") != std::string::npos);

  const ProcessResult unsafe = w.run({"verify", "-m", w.path("id.json"), "-p", w.path("safe.prop"), "-p",
                                      w.path("unsafe.prop"), "-q", "float32", "-o", out});
  CHECK(unsafe.exit_code == 10);
  std::istringstream lines(slurp(fs::path(out) / "report.jsonl"));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("status"));
    ++n;
  }
  CHECK(n == 2);
  CHECK(fs::exists(fs::path(out) / "report.txt"));
  const auto cex = nlohmann::json::parse(slurp(fs::path(out) / "unsafe.cex.json"));
  const double x = cex["inputs"][0]["value"].get<double>();
  CHECK(x >= 0.0);
  CHECK(x <= 0.5);
  CHECK(cex["violated_assert"] == 0);
  CHECK(cex["trace"]["post"][0][0]["value"].get<double>() == x);
}

TEST_CASE("robustness, per-assert and oracle modes" * doctest::skip(!test::z3())) {
  Workspace w;
  w.write("x0.csv", "# reference points\n0.5, 0.25\n-1,1\n");
  const std::vector<std::string> base{"-m", w.path("two.json"), "--robustness", w.path("x0.csv"),
                                      "--radius", "0.125", "--target", "0", "-q", "fxp:3.4", "-o", w.path("r")};
  std::vector<std::string> verify{"verify"};
  verify.insert(verify.end(), base.begin(), base.end());
  verify.push_back("--per-assert");
  const ProcessResult v = w.run(verify);
  // the first point keeps class 0 in the ball, the second does not
  CHECK(v.exit_code == 10);
  std::vector<std::string> oracle{"oracle"};
  oracle.insert(oracle.end(), base.begin(), base.end());
  const ProcessResult o = w.run(oracle);
  CHECK(o.exit_code == 10);
  CHECK(o.out.find("robustness_0") != std::string::npos);
  CHECK(o.out.find("robustness_1") != std::string::npos);
}

TEST_CASE("emit-only writes artifacts and exits 0") {
  Workspace w;
  const std::string out = w.path("e");
  const ProcessResult r = w.run({"emit", "-m", w.path("id.json"), "-p", w.path("unsafe.prop"), "--emit",
                                 "smt2,c,invariants", "-o", out});
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(fs::path(out) / "unsafe.smt2"));
  CHECK(fs::exists(fs::path(out) / "unsafe.c"));
  CHECK(fs::exists(fs::path(out) / "unsafe.invariants.txt"));
  CHECK(slurp(fs::path(out) / "unsafe.smt2").find("(check-sat)") != std::string::npos);
}

TEST_CASE("solver timeout exits 20") {
  Workspace w;
  const fs::path slow =
      w.write("slow.sh", "#!/bin/sh\ncase \"$1\" in --version) echo slow 1.0 ;; *) sleep 30 ;; esac\n");
  fs::permissions(slow, fs::perms::owner_all);
  const auto start = std::chrono::steady_clock::now();
  const ProcessResult r = w.run({"verify", "-m", w.path("id.json"), "-p", w.path("safe.prop"), "-s",
                                 "slow=" + slow.string(), "-t", "0.5", "-o", w.path("t")});
  CHECK(r.exit_code == 20);
  CHECK(std::chrono::steady_clock::now() - start < 10s);
  CHECK(r.out.find("TIMEOUT") != std::string::npos);
}

TEST_CASE("config file and lut-build") {
  Workspace w;
  const ProcessResult lb = w.run({"lut-build", "-a", "tanh", "--lo", "-3", "--hi", "3", "--lipschitz", "1",
                                  "--epsilon", "0.004", "-o", w.path("tanh.lut")});
  CHECK(lb.exit_code == 0);
  CHECK(lb.out.find("751 samples") != std::string::npos);
  w.write("net.json", R"({"format_version": 1, "layers": [
      {"type": "dense", "weights": [[1.0]], "bias": [0.0], "activation": "tanh"}]})");
  w.write("t.prop", "assume x[0] >= -1; assume x[0] <= 1; assert y[0] <= 1;\n");
  w.write("run.toml", "[oracle]\nmodel = \"" + w.path("net.json") + "\"\nproperty = \"" + w.path("t.prop") +
                          "\"\nquant = \"fxp:2.6\"\nlut = \"tanh=" + w.path("tanh.lut") + "\"\nout = \"" +
                          w.path("c") + "\"\n");
  const ProcessResult r = w.run({"--config", w.path("run.toml"), "oracle"});
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("fxp:2.6") != std::string::npos);
  CHECK(w.run({"oracle", "-m", w.path("net.json"), "-p", w.path("t.prop"), "--lut", "relu=" + w.path("tanh.lut")})
            .exit_code == 1);
}
