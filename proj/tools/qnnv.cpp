// qnnv: verify quantized feedforward networks against assume/assert properties.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "qnnv/error.hpp"
#include "qnnv/lut.hpp"
#include "qnnv/pipeline.hpp"

namespace {

struct Options {
  qnnv::RunConfig rc;
  std::string hidden_act = "relu";
  std::string output_act = "linear";
  std::vector<std::string> solvers;
  std::vector<std::string> luts;
  std::vector<std::string> emit;
  std::string robustness;
  double radius = 0.0;
  std::size_t target = 0;
  double timeout = 60.0;
  bool no_invariants = false;
};

void add_run_options(CLI::App* app, Options& o) {
  app->add_option("-m,--model", o.rc.model_path, "network file (.nnet or .json)")->required();
  app->add_option("--model-format", o.rc.model_format, "nnet or json (default: by extension)")
      ->check(CLI::IsMember({"nnet", "json"}));
  app->add_option("--hidden-activation", o.hidden_act, "NNET hidden layer activation")
      ->check(CLI::IsMember({"relu", "sigmoid", "tanh", "linear"}));
  app->add_option("--output-activation", o.output_act, "NNET output layer activation")
      ->check(CLI::IsMember({"relu", "sigmoid", "tanh", "linear"}));
  app->add_flag("--normalize", o.rc.normalize, "fold NNET normalization constants into the network");
  app->add_option("-p,--property", o.rc.property_paths, "property DSL file (repeatable)");
  auto* rob = app->add_option("--robustness", o.robustness, "CSV of reference points, one per line");
  app->add_option("--radius", o.radius, "L-infinity radius of the robustness ball")->needs(rob);
  app->add_option("--target", o.target, "expected class of every reference point")->needs(rob);
  app->add_option("-q,--quant", o.rc.quant, "fxp:I.F[:wrap|sat][:rne|tn] or float32")
      ->capture_default_str();
  app->add_option("--lut", o.luts, "custom activation table, e.g. sigmoid=table.lut");
  app->add_option("-s,--solver", o.solvers, "solver name or name=/path/to/binary (repeatable)");
  app->add_option("-t,--timeout", o.timeout, "per-query timeout in seconds")->capture_default_str();
  app->add_option("-j,--jobs", o.rc.parallelism, "solver processes run in parallel")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_flag("--per-assert", o.rc.per_assert, "one query per assert");
  app->add_flag("--no-invariants", o.no_invariants, "do not inject interval invariants");
  app->add_option("--emit", o.emit, "artifacts to write: smt2, c, invariants")->delimiter(',');
  app->add_flag("--keep-artifacts", o.rc.keep_artifacts, "keep solver scripts and outputs");
  app->add_option("-o,--out", o.rc.output_dir, "output directory")->capture_default_str();
}

std::pair<std::string, std::string> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) return {s, {}};
  return {s.substr(0, eq), s.substr(eq + 1)};
}

void finish(Options& o) {
  o.rc.nnet.hidden_activation = qnnv::parse_activation(o.hidden_act);
  o.rc.nnet.output_activation = qnnv::parse_activation(o.output_act);
  o.rc.timeout = std::chrono::duration<double>(o.timeout);
  o.rc.invariants = !o.no_invariants;
  o.rc.emit.insert(o.emit.begin(), o.emit.end());
  if (!o.robustness.empty()) o.rc.robustness = qnnv::RobustnessSpec{o.robustness, o.radius, o.target};
  if (!o.solvers.empty()) {
    o.rc.solvers.clear();
    for (const auto& s : o.solvers) {
      auto [name, path] = split_assignment(s);
      o.rc.solvers.push_back(name);
      if (!path.empty()) o.rc.solver_paths[name] = path;
    }
  }
  for (const auto& l : o.luts) {
    auto [act, path] = split_assignment(l);
    if (path.empty()) throw qnnv::ConfigError("--lut expects ACTIVATION=FILE, got '" + l + "'");
    o.rc.lut_paths[act] = path;
  }
}

int run(Options& o) {
  finish(o);
  const qnnv::Report report = qnnv::run_pipeline(o.rc);
  std::cout << report.table();
  for (const auto& e : report.entries) {
    if (!e.verdict.diagnostics.empty() && e.verdict.status != qnnv::Status::safe &&
        e.verdict.status != qnnv::Status::unsafe) {
      std::cerr << e.property << ": " << e.verdict.diagnostics << "\n";
    }
  }
  if (!o.rc.solve) {
    for (const auto& e : report.entries) {
      for (const auto& a : e.artifacts) std::cout << a.string() << "\n";
    }
    return qnnv::exit_safe;
  }
  return report.exit_code();
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verifier for quantized feedforward neural networks"};
  app.set_config("--config", "", "TOML-style key = value file; flags override it");
  app.require_subcommand(1);

  Options verify;
  auto* v = app.add_subcommand("verify", "encode and solve every property");
  add_run_options(v, verify);

  Options oracle;
  auto* o = app.add_subcommand("oracle", "decide every property by exhaustive enumeration");
  add_run_options(o, oracle);
  o->add_option("--limit", oracle.rc.oracle_limit, "largest grid enumerated")->capture_default_str();

  Options emit;
  auto* e = app.add_subcommand("emit", "write artifacts without solving (default: smt2)");
  add_run_options(e, emit);

  std::string act = "sigmoid";
  double lo = -8.0;
  double hi = 8.0;
  double lipschitz = 0.25;
  double epsilon = 0.002;
  std::string lut_out;
  auto* lb = app.add_subcommand("lut-build", "build and audit an activation lookup table");
  lb->add_option("-a,--activation", act, "sigmoid or tanh")
      ->check(CLI::IsMember({"sigmoid", "tanh"}))
      ->capture_default_str();
  lb->add_option("--lo", lo, "domain lower end")->capture_default_str();
  lb->add_option("--hi", hi, "domain upper end")->capture_default_str();
  lb->add_option("--lipschitz", lipschitz, "Lipschitz constant")->capture_default_str();
  lb->add_option("--epsilon", epsilon, "error bound")->capture_default_str();
  lb->add_option("-o,--out", lut_out, "table file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : qnnv::exit_usage;
  }

  try {
    if (*v) return run(verify);
    if (*o) {
      oracle.rc.use_oracle = true;
      return run(oracle);
    }
    if (*e) {
      emit.rc.solve = false;
      if (emit.emit.empty()) emit.emit.push_back("smt2");
      return run(emit);
    }
    if (*lb) {
      const qnnv::LookupTable t = qnnv::build_lut(act, lo, hi, lipschitz, epsilon);
      std::ofstream f(lut_out, std::ios::binary);
      f << qnnv::write_lut_text(t);
      if (!f) throw qnnv::Error("cannot write " + lut_out);
      std::printf("%s: %zu samples on [%g, %g], audited max error %.6g over %zu points\n", act.c_str(),
                  t.samples().size(), lo, hi, t.certificate()->max_error, t.certificate()->points);
      return qnnv::exit_safe;
    }
  } catch (const qnnv::StageError& err) {
    std::cerr << "qnnv: " << err.what() << "\n";
    return err.exit_code();
  } catch (const qnnv::ConfigError& err) {
    std::cerr << "qnnv: " << err.what() << "\n";
    return qnnv::exit_usage;
  } catch (const qnnv::LutError& err) {
    std::cerr << "qnnv: " << err.what() << "\n";
    return qnnv::exit_usage;
  } catch (const qnnv::ParseError& err) {
    std::cerr << "qnnv: " << err.what() << "\n";
    return qnnv::exit_usage;
  } catch (const std::exception& err) {
    std::cerr << "qnnv: internal error: " << err.what() << "\n";
    return qnnv::exit_internal;
  }
  return qnnv::exit_usage;
}
