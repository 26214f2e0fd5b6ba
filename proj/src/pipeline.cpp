#include "qnnv/pipeline.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "json.hpp"

#include "qnnv/encoder.hpp"
#include "qnnv/error.hpp"
#include "qnnv/interval.hpp"
#include "qnnv/oracle.hpp"
#include "qnnv/property.hpp"
#include "qnnv/solver.hpp"

namespace qnnv {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

void RunConfig::validate() const {
  if (model_path.empty()) throw ConfigError("no model given");
  if (property_paths.empty() && !robustness) throw ConfigError("no property given");
  parse_quant_spec(quant);
  if (parallelism == 0) throw ConfigError("parallelism must be at least 1");
  if (!(timeout.count() > 0)) throw ConfigError("timeout must be positive");
  if (solve && !use_oracle && solvers.empty()) throw ConfigError("no solver selected");
  for (const auto& e : emit) {
    if (e != "smt2" && e != "c" && e != "invariants") {
      throw ConfigError("unknown emit target '" + e + "' (expected smt2, c or invariants)");
    }
  }
  for (const auto& [act, path] : lut_paths) {
    if (act != "sigmoid" && act != "tanh") throw ConfigError("no table slot for activation '" + act + "'");
  }
}

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
  if (!f) throw Error("cannot write " + p.string());
}

int error_exit_code(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const DimensionError*>(&e) || dynamic_cast<const LutError*>(&e) ||
      dynamic_cast<const GridTooLarge*>(&e)) {
    return exit_usage;
  }
  return exit_internal;
}

/// Runs f, converting failures to StageError attributed to `stage`.
template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what(), error_exit_code(e));
  }
}

std::vector<std::vector<double>> read_points(const fs::path& p) {
  std::vector<std::vector<double>> out;
  std::istringstream in(read_text(p));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(cell, &used);
      } catch (const std::logic_error&) {
        throw ParseError("not a number: '" + cell + "'", line_no);
      }
      if (cell.find_first_not_of(" \t\r", used) != std::string::npos) {
        throw ParseError("not a number: '" + cell + "'", line_no);
      }
      row.push_back(v);
    }
    out.push_back(std::move(row));
  }
  if (out.empty()) throw ParseError("no reference point in " + p.string());
  return out;
}

std::string safe_stem(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return s;
}

json value_json(const QuantValue& v) {
  json j;
  j["raw"] = v.raw;
  if (std::isfinite(v.value)) {
    j["value"] = v.value;
  } else {
    j["value"] = std::isnan(v.value) ? "nan" : (v.value > 0 ? "inf" : "-inf");
  }
  return j;
}

json layer_json(const std::vector<std::vector<QuantValue>>& layers) {
  json out = json::array();
  for (const auto& l : layers) {
    json row = json::array();
    for (const auto& v : l) row.push_back(value_json(v));
    out.push_back(row);
  }
  return out;
}

double seconds(std::chrono::duration<double> d) { return d.count(); }

} // namespace

std::string counterexample_json(const Counterexample& cex) {
  json j;
  j["inputs"] = json::array();
  for (const auto& v : cex.input_values) j["inputs"].push_back(value_json(v));
  j["violated_assert"] = cex.violated_assert;
  j["trace"] = {{"pre", layer_json(cex.trace.pre)}, {"post", layer_json(cex.trace.post)}};
  return j.dump(2);
}

std::string Report::jsonl() const {
  std::string out;
  for (const ReportEntry& e : entries) {
    json j;
    j["model"] = model;
    j["quant"] = quant;
    j["property"] = e.property;
    j["assert"] = e.assert_index ? json(*e.assert_index) : json(nullptr);
    j["solver"] = e.verdict.solver;
    j["status"] = std::string(to_string(e.verdict.status));
    j["wall_time"] = seconds(e.verdict.wall_time);
    j["times"] = {{"parse", seconds(e.times.parse)},
                  {"invariants", seconds(e.times.invariants)},
                  {"encode", seconds(e.times.encode)},
                  {"solve", seconds(e.times.solve)}};
    j["invariants"] = {{"count", e.invariant_count}, {"mean_width", e.invariant_mean_width}};
    if (e.verdict.counterexample) {
      json x = json::array();
      for (const auto& v : e.verdict.counterexample->input_values) x.push_back(value_json(v));
      j["counterexample"] = {{"inputs", x}, {"violated_assert", e.verdict.counterexample->violated_assert}};
    }
    j["artifacts"] = json::array();
    for (const auto& a : e.artifacts) j["artifacts"].push_back(a.string());
    j["diagnostics"] = e.verdict.diagnostics;
    out += j.dump() + "\n";
  }
  return out;
}

std::string Report::table() const {
  std::ostringstream out;
  char line[256];
  out << "model " << model << ", " << quant << "\n";
  std::snprintf(line, sizeof line, "%-28s %-10s %-13s %10s %10s %12s\n", "property", "solver", "status",
                "solve[s]", "total[s]", "inv.width");
  out << line;
  for (const ReportEntry& e : entries) {
    std::string name = e.property;
    if (e.assert_index) name += "#" + std::to_string(*e.assert_index);
    const double total = seconds(e.times.parse + e.times.invariants + e.times.encode + e.times.solve);
    std::snprintf(line, sizeof line, "%-28s %-10s %-13s %10.3f %10.3f %12.6g\n", name.c_str(),
                  e.verdict.solver.c_str(), std::string(to_string(e.verdict.status)).c_str(),
                  seconds(e.times.solve), total, e.invariant_mean_width);
    out << line;
  }
  return out.str();
}

int Report::exit_code() const {
  bool unsafe = false;
  bool unknown = false;
  for (const ReportEntry& e : entries) {
    switch (e.verdict.status) {
    case Status::solver_error: return exit_internal;
    case Status::unsafe: unsafe = true; break;
    case Status::unknown:
    case Status::timeout: unknown = true; break;
    case Status::safe: break;
    }
  }
  if (unsafe) return exit_unsafe;
  if (unknown) return exit_unknown;
  return exit_safe;
}

Report run_pipeline(const RunConfig& rc) {
  stage("config", [&] {
    rc.validate();
    return 0;
  });
  const QuantFormat format = parse_quant_spec(rc.quant);

  const auto t_parse = Clock::now();
  const ModelIR model = stage("model", [&] {
    ModelIR m = load_model(rc.model_path.string(), rc.model_format, rc.nnet);
    return rc.normalize ? apply_normalization(m) : m;
  });

  std::vector<Property> properties = stage("property", [&] {
    std::vector<Property> ps;
    for (const auto& path : rc.property_paths) {
      ps.push_back(parse_property(read_text(path), model.input_dim(), model.output_dim(),
                                  path.stem().string()));
    }
    if (rc.robustness) {
      const auto points = read_points(rc.robustness->x0_path);
      for (std::size_t k = 0; k < points.size(); ++k) {
        if (points[k].size() != model.input_dim()) {
          throw DimensionError("reference point " + std::to_string(k + 1) + " has " +
                               std::to_string(points[k].size()) + " values, model has " +
                               std::to_string(model.input_dim()) + " inputs");
        }
        ps.push_back(robustness_property(points[k], rc.robustness->radius, rc.robustness->target,
                                         model.output_dim(),
                                         points.size() == 1 ? "robustness" : "robustness_" + std::to_string(k)));
      }
    }
    return ps;
  });

  const LutSet luts = stage("lut", [&] {
    LutSet set = LutSet::defaults();
    for (const auto& [act, path] : rc.lut_paths) {
      auto t = std::make_shared<const LookupTable>(read_lut_text(read_text(path)));
      (act == "sigmoid" ? set.sigmoid : set.tanh) = std::move(t);
    }
    return set;
  });
  const auto parse_time = Clock::now() - t_parse;

  stage("output", [&] {
    fs::create_directories(rc.output_dir);
    return 0;
  });

  Report report;
  report.model = rc.model_path.string();
  report.quant = to_string(format);

  struct Pending {
    ReportEntry entry;
    std::shared_ptr<const SmtScript> script;
    const Property* property;
  };
  std::vector<Pending> pending;

  for (const Property& p : properties) {
    const std::string stem = safe_stem(p.name);
    ReportEntry base;
    base.property = p.name;
    base.times.parse = parse_time;

    std::optional<InvariantMap> inv;
    std::string vacuity;
    if (rc.invariants || rc.emit.contains("invariants")) {
      const auto t0 = Clock::now();
      stage("invariants", [&] {
        try {
          const Box box = extract_box(p, model.input_dim(), format);
          inv = infer_invariants(model, box, luts, format);
        } catch (const VacuousProperty& e) {
          vacuity = std::string("vacuous property: ") + e.what();
        }
        return 0;
      });
      base.times.invariants = Clock::now() - t0;
      if (inv) {
        base.invariant_mean_width = inv->mean_width();
        base.invariant_count = inv->bounded_count();
      }
      if (inv && rc.emit.contains("invariants")) {
        const fs::path path = rc.output_dir / (stem + ".invariants.txt");
        stage("output", [&] {
          write_text(path, format_invariant_report(*inv));
          return 0;
        });
        base.artifacts.push_back(path);
      }
      if (!rc.invariants) {
        inv.reset();
        base.invariant_count = 0;
        base.invariant_mean_width = 0.0;
      }
    }

    if (rc.emit.contains("c")) {
      const fs::path path = rc.output_dir / (stem + ".c");
      stage("emit", [&] {
        write_text(path, emit_c(model, format, luts, p, inv ? &*inv : nullptr));
        return 0;
      });
      base.artifacts.push_back(path);
    }

    if (rc.use_oracle && rc.solve) {
      ReportEntry e = base;
      const auto t0 = Clock::now();
      OracleOptions oo;
      oo.limit = rc.oracle_limit;
      e.verdict = stage("oracle", [&] { return brute_force_verify(model, format, luts, p, oo); });
      e.times.solve = Clock::now() - t0;
      if (!vacuity.empty() && e.verdict.diagnostics.empty()) e.verdict.diagnostics = vacuity;
      pending.push_back({std::move(e), nullptr, &p});
      continue;
    }

    std::vector<std::optional<std::size_t>> goals;
    if (rc.per_assert) {
      for (std::size_t i = 0; i < p.asserts.size(); ++i) goals.emplace_back(i);
    } else {
      goals.emplace_back(std::nullopt);
    }
    for (const auto& goal : goals) {
      ReportEntry e = base;
      e.assert_index = goal;
      const auto t0 = Clock::now();
      EncodeOptions eo;
      eo.only_assert = goal;
      auto script = std::make_shared<const SmtScript>(
          stage("encode", [&] { return encode(model, format, luts, p, inv ? &*inv : nullptr, eo); }));
      e.times.encode = Clock::now() - t0;
      if (rc.emit.contains("smt2")) {
        const fs::path path =
            rc.output_dir / (stem + (goal ? "_assert" + std::to_string(*goal) : std::string()) + ".smt2");
        stage("output", [&] {
          write_text(path, script->render());
          return 0;
        });
        e.artifacts.push_back(path);
      }
      e.verdict.diagnostics = vacuity;
      pending.push_back({std::move(e), script, &p});
    }
  }

  if (!rc.solve) {
    for (auto& pd : pending) {
      pd.entry.verdict.status = Status::unknown;
      pd.entry.verdict.diagnostics = "not solved";
      report.entries.push_back(std::move(pd.entry));
    }
    return report;
  }

  if (!rc.use_oracle) {
    std::vector<SolverSpec> specs = stage("solver", [&] {
      std::vector<SolverSpec> out;
      for (const std::string& name : rc.solvers) {
        std::optional<SolverSpec> spec;
        if (const auto it = rc.solver_paths.find(name); it != rc.solver_paths.end()) {
          spec = default_solver_spec(name, it->second);
        } else {
          spec = find_solver(name);
        }
        if (!spec) throw ConfigError("solver '" + name + "' not found (set QNNV_SOLVER_DIR or --solver " + name + "=PATH)");
        if (!probe_solver(*spec)) {
          throw ConfigError("solver '" + name + "' at " + spec->executable.string() + " does not run");
        }
        out.push_back(*spec);
      }
      return out;
    });

    std::vector<SolverJob> jobs;
    std::vector<ReportEntry> job_entries;
    for (const auto& pd : pending) {
      for (const SolverSpec& spec : specs) {
        SolverJob job;
        job.script = pd.script;
        job.spec = spec;
        job.timeout = rc.timeout;
        if (rc.keep_artifacts) {
          std::string stem = safe_stem(pd.entry.property) + "." + spec.name;
          if (pd.entry.assert_index) stem += ".assert" + std::to_string(*pd.entry.assert_index);
          job.artifacts = ArtifactPaths{rc.output_dir / "artifacts", stem};
        }
        jobs.push_back(std::move(job));
        job_entries.push_back(pd.entry);
      }
    }
    const std::vector<Verdict> verdicts = run_batch(jobs, rc.parallelism);
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
      ReportEntry e = std::move(job_entries[i]);
      const std::string note = e.verdict.diagnostics;
      e.verdict = verdicts[i];
      if (!note.empty()) e.verdict.diagnostics = note + (e.verdict.diagnostics.empty() ? "" : "\n" + e.verdict.diagnostics);
      e.times.solve = verdicts[i].wall_time;
      if (jobs[i].artifacts) {
        const auto& a = *jobs[i].artifacts;
        for (const char* ext : {".smt2", ".out", ".err"}) e.artifacts.push_back(a.dir / (a.stem + ext));
      }
      report.entries.push_back(std::move(e));
    }
  } else {
    for (auto& pd : pending) report.entries.push_back(std::move(pd.entry));
  }

  stage("report", [&] {
    for (ReportEntry& e : report.entries) {
      if (!e.verdict.counterexample) continue;
      std::string stem = safe_stem(e.property);
      if (e.assert_index) stem += ".assert" + std::to_string(*e.assert_index);
      if (rc.solvers.size() > 1 && !rc.use_oracle) stem += "." + e.verdict.solver;
      const fs::path path = rc.output_dir / (stem + ".cex.json");
      write_text(path, counterexample_json(*e.verdict.counterexample));
      e.artifacts.push_back(path);
    }
    write_text(rc.output_dir / "report.jsonl", report.jsonl());
    write_text(rc.output_dir / "report.txt", report.table());
    return 0;
  });
  return report;
}

} // namespace qnnv
