// Acceptance suite: one PASS/FAIL line per primary criterion, exit status 1
// if any of them fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <unistd.h>

#include "qnnv/encoder.hpp"
#include "qnnv/error.hpp"
#include "qnnv/interpreter.hpp"
#include "qnnv/interval.hpp"
#include "qnnv/lut.hpp"
#include "qnnv/oracle.hpp"
#include "qnnv/pipeline.hpp"
#include "qnnv/property.hpp"
#include "reference.hpp"
#include "support.hpp"

using namespace qnnv;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

FxpConfig q(int i, int f, Overflow o = Overflow::wrap, Rounding r = Rounding::floor) {
  FxpConfig c;
  c.int_bits = i;
  c.frac_bits = f;
  c.overflow = o;
  c.rounding = r;
  return c;
}

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int n, const char* title, const Outcome& o, double seconds) {
  std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", n, title, o.detail.c_str(), seconds);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Every solver verdict produced anywhere in this run, for the witness audit.
struct SolverAudit {
  std::size_t verdicts = 0;
  std::size_t unsafe = 0;
  std::size_t replay_ok = 0;
  std::size_t solver_errors = 0;
  std::vector<std::string> problems;

  void add(const Verdict& v, const ModelIR& m, const QuantFormat& f, const Property& p) {
    ++verdicts;
    if (v.status == Status::solver_error) {
      ++solver_errors;
      problems.push_back(p.name + ": " + v.diagnostics.substr(0, 200));
    }
    if (v.status != Status::unsafe) return;
    ++unsafe;
    if (!v.counterexample) {
      problems.push_back(p.name + ": UNSAFE without witness");
      return;
    }
    // replay independently of the solver driver's own validation
    const Trace t = interpret_quantized(m, f, LutSet::defaults(), v.counterexample->input_values);
    const PropertyCheck c = check_property(p, t, f);
    if (c.assumes_hold && c.violated_assert) {
      ++replay_ok;
    } else {
      problems.push_back(p.name + ": witness does not replay");
    }
  }
};

SolverAudit audit;

struct Workdir {
  fs::path path;
  Workdir() {
    std::string t = (fs::temp_directory_path() / "qnnv-accept-XXXXXX").string();
    path = ::mkdtemp(t.data());
  }
  ~Workdir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

struct Instance {
  ModelIR model;
  FxpConfig cfg;
  Property property;
};

// Random toy instance; thresholds come from the outputs the oracle grid can
// actually reach so that both verdicts occur.
Instance make_instance(std::mt19937_64& rng, const FxpConfig& cfg, bool robustness, int id) {
  const LutSet luts = LutSet::defaults();
  for (;;) {
    ModelIR m = test::random_toy_model(rng);
    const Interval range = quant_range(cfg);
    const double step = std::ldexp(1.0, -cfg.frac_bits);
    auto grid_value = [&](double lo, double hi) {
      return std::round(test::uniform(rng, lo, hi) / step) * step;
    };
    Property p;
    if (robustness) {
      std::vector<double> x0;
      std::vector<QuantValue> xq;
      for (std::size_t i = 0; i < m.input_dim(); ++i) {
        x0.push_back(grid_value(std::max(range.lo, -2.0), std::min(range.hi, 2.0)));
        xq.push_back(quantize_input(x0.back(), cfg));
      }
      const auto y = interpret_quantized(m, cfg, luts, xq).outputs();
      if (y.size() < 2) continue; // robustness needs two classes
      std::size_t target = 0;
      for (std::size_t j = 1; j < y.size(); ++j) {
        if (y[j].raw > y[target].raw) target = j;
      }
      const double radius = step * static_cast<double>(test::pick(rng, 1, 8));
      p = robustness_property(x0, radius, target, y.size());
    } else {
      for (std::size_t i = 0; i < m.input_dim(); ++i) {
        double a = grid_value(std::max(range.lo, -2.5), std::min(range.hi, 2.5));
        double b = grid_value(std::max(range.lo, -2.5), std::min(range.hi, 2.5));
        if (a > b) std::swap(a, b);
        p.assumes.push_back({{{1.0, {Tier::input, i}}}, Comparator::ge, a});
        p.assumes.push_back({{{1.0, {Tier::input, i}}}, Comparator::le, b});
      }
      if (m.input_dim() == 2 && test::pick(rng, 0, 3) == 0) {
        p.assumes.push_back({{{1.0, {Tier::input, 0}}, {1.0, {Tier::input, 1}}}, Comparator::le, test::uniform(rng, -1, 1)});
      }
      // output range over the box, from the quantized network itself
      const std::size_t k = test::pick(rng, 0, m.output_dim() - 1);
      const QuantGrid grid(extract_box(p, m.input_dim(), cfg), cfg);
      const Interpreter run(m, cfg, luts);
      double lo = INFINITY;
      double hi = -INFINITY;
      for (std::uint64_t g = 0; g < grid.size(); ++g) {
        const double v = run.run(grid.point(g)).outputs()[k].value;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      const double th = test::uniform(rng, lo - 0.1, hi + 0.1);
      const auto cmp = static_cast<Comparator>(test::pick(rng, 0, 3));
      p.asserts.push_back({{{1.0, {Tier::output, k}}}, cmp, th});
      if (m.output_dim() > 1 && test::pick(rng, 0, 2) == 0) {
        p.asserts.push_back({{{1.0, {Tier::output, 0}}, {-0.5, {Tier::output, 1}}}, Comparator::gt, test::uniform(rng, -1, 0.5)});
      }
    }
    p.name = "i" + std::to_string(id);
    return {std::move(m), cfg, std::move(p)};
  }
}

struct PipelineRun {
  Verdict verdict;
  double solve_seconds = 0.0;
};

PipelineRun run_through_pipeline(const Workdir& w, const Instance& in, bool invariants) {
  const fs::path model = w.path / (in.property.name + ".json");
  const fs::path prop = w.path / (in.property.name + ".prop");
  if (!fs::exists(model)) {
    write(model, to_json(in.model));
    write(prop, to_dsl(in.property));
  }
  RunConfig rc;
  rc.model_path = model;
  rc.property_paths = {prop};
  rc.quant = to_string(QuantFormat{in.cfg});
  rc.invariants = invariants;
  rc.timeout = std::chrono::seconds(120);
  rc.output_dir = w.path / "out";
  if (const auto z = test::z3()) rc.solver_paths["z3"] = z->executable;
  const Report r = run_pipeline(rc);
  return {r.entries.at(0).verdict, r.entries.at(0).times.solve.count()};
}

// ---------------------------------------------------------------------------

struct OracleSuite {
  std::size_t instances = 0;
  std::size_t agree = 0;
  std::size_t agree_without_inv = 0;
  std::size_t unsafe = 0;
  std::size_t inv_matches_noinv = 0;
  std::vector<double> t_inv;
  std::vector<double> t_noinv;
  std::vector<std::string> mismatches;
  bool ran = false;
};

OracleSuite run_oracle_suite() {
  OracleSuite s;
  if (!test::z3()) return s;
  s.ran = true;
  Workdir w;
  std::mt19937_64 rng(20240601);
  const LutSet luts = LutSet::defaults();
  int id = 0;
  for (const FxpConfig cfg : {q(2, 4), q(4, 4)}) {
    for (int k = 0; k < 64; ++k) {
      const Instance in = make_instance(rng, cfg, k % 2 == 1, id++);
      const Verdict oracle = brute_force_verify(in.model, in.cfg, luts, in.property);
      // each variant runs twice in A-B-B-A order; the faster run of each is
      // kept, since at this size one sample is mostly process start-up noise
      const bool inv_first = k % 2 == 0;
      PipelineRun a1 = run_through_pipeline(w, in, inv_first);
      PipelineRun b1 = run_through_pipeline(w, in, !inv_first);
      PipelineRun b2 = run_through_pipeline(w, in, !inv_first);
      PipelineRun a2 = run_through_pipeline(w, in, inv_first);
      for (const PipelineRun* r : {&a1, &b1, &b2, &a2}) audit.add(r->verdict, in.model, in.cfg, in.property);
      PipelineRun with = inv_first ? a1 : b1;
      PipelineRun with2 = inv_first ? a2 : b2;
      PipelineRun without = inv_first ? b1 : a1;
      PipelineRun without2 = inv_first ? b2 : a2;
      const bool stable = with.verdict.status == with2.verdict.status &&
                          without.verdict.status == without2.verdict.status;
      with.solve_seconds = std::min(with.solve_seconds, with2.solve_seconds);
      without.solve_seconds = std::min(without.solve_seconds, without2.solve_seconds);
      ++s.instances;
      if (oracle.status == Status::unsafe) ++s.unsafe;
      if (with.verdict.status == oracle.status && stable) {
        ++s.agree;
      } else {
        s.mismatches.push_back(in.property.name + " " + to_string(QuantFormat{cfg}) + ": pipeline " +
                               std::string(to_string(with.verdict.status)) + ", oracle " +
                               std::string(to_string(oracle.status)));
      }
      if (without.verdict.status == oracle.status && stable) ++s.agree_without_inv;
      if (with.verdict.status == without.verdict.status) ++s.inv_matches_noinv;
      s.t_inv.push_back(with.solve_seconds);
      s.t_noinv.push_back(without.solve_seconds);
    }
  }
  return s;
}

Outcome criterion1(const OracleSuite& s) {
  if (!s.ran) return {false, "no z3 executable found; the SMT pipeline cannot run"};
  Outcome o;
  o.pass = s.instances >= 100 && s.agree == s.instances && s.agree_without_inv == s.instances;
  o.detail = fmt("%zu/%zu instances agree with the oracle (%zu UNSAFE, %zu SAFE)", s.agree, s.instances, s.unsafe,
                 s.instances - s.unsafe);
  for (std::size_t i = 0; i < std::min<std::size_t>(s.mismatches.size(), 5); ++i) o.detail += "; " + s.mismatches[i];
  return o;
}

Outcome criterion2() {
  Outcome o{true, ""};
  struct Case {
    const char* name;
    double lo, hi, lambda;
    std::function<double(double)> f;
  };
  const Case cases[] = {{"sigmoid", -8, 8, 0.25, [](double u) { return 1 / (1 + std::exp(-u)); }},
                        {"tanh", -4, 4, 1.0, [](double u) { return std::tanh(u); }}};
  for (const Case& c : cases) {
    const LookupTable t = build_lut(c.name, c.lo, c.hi, c.lambda, 0.002);
    // independent sweep: 10^6 uniform points over the table domain
    const std::size_t n = 1'000'000;
    double worst = 0.0;
    std::size_t over = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = c.lo + (c.hi - c.lo) * static_cast<double>(i) / static_cast<double>(n - 1);
      const double e = std::abs(lut_eval(t, u) - c.f(u));
      worst = std::max(worst, e);
      if (e > 0.002) ++over;
    }
    // and beyond the domain, where the table clamps
    for (double u = -50; u <= 50; u += 1e-3) {
      const double e = std::abs(lut_eval(t, u) - c.f(u));
      worst = std::max(worst, e);
      if (e > 0.002) ++over;
    }
    o.pass = o.pass && over == 0 && t.certificate() && t.certificate()->max_error <= 0.002;
    o.detail += fmt("%s%s N=%zu max error %.6f, %zu violations", o.detail.empty() ? "" : "; ", c.name,
                    t.samples().size(), worst, over);
  }
  return o;
}

Outcome criterion3() {
  using test::Op;
  std::size_t exhaustive = 0;
  std::size_t exhaustive_ok = 0;
  for (Overflow ov : {Overflow::wrap, Overflow::saturate}) {
    for (Rounding r : {Rounding::floor, Rounding::nearest_even}) {
      const FxpConfig c = q(2, 2, ov, r);
      for (Op op : {Op::add, Op::sub, Op::mult, Op::div}) {
        for (std::int64_t a = c.min_raw(); a <= c.max_raw(); ++a) {
          for (std::int64_t b = c.min_raw(); b <= c.max_raw(); ++b) {
            ++exhaustive;
            if (test::ref_op(op, a, b, c) == test::lib_op(op, a, b, c)) ++exhaustive_ok;
          }
        }
      }
    }
  }
  std::mt19937_64 rng(88);
  std::size_t random = 0;
  std::size_t random_ok = 0;
  const FxpConfig base = q(8, 8);
  std::uniform_int_distribution<std::int64_t> raw(base.min_raw(), base.max_raw());
  for (int i = 0; i < 100'000; ++i) {
    FxpConfig c = base;
    c.overflow = i % 2 ? Overflow::wrap : Overflow::saturate;
    c.rounding = (i / 2) % 2 ? Rounding::floor : Rounding::nearest_even;
    const auto op = static_cast<Op>((i / 4) % 4);
    const std::int64_t a = raw(rng);
    const std::int64_t b = raw(rng);
    ++random;
    if (test::ref_op(op, a, b, c) == test::lib_op(op, a, b, c)) ++random_ok;
  }
  return {exhaustive == 1024 * 16 && exhaustive_ok == exhaustive && random == 100'000 && random_ok == random,
          fmt("Q(2,2) exhaustive %zu/%zu bit-exact, Q(8,8) random %zu/%zu", exhaustive_ok, exhaustive, random_ok,
              random)};
}

std::size_t containment_violations(const InvariantMap& inv, const Trace& t) {
  std::size_t bad = 0;
  for (std::size_t l = 0; l < t.pre.size(); ++l) {
    for (std::size_t j = 0; j < t.pre[l].size(); ++j) {
      const auto& b = inv.layers[l][j];
      if (!b) {
        ++bad; // fixed point always has bounds
        continue;
      }
      if (!b->pre.contains(t.pre[l][j].value) || !b->post.contains(t.post[l][j].value)) ++bad;
    }
  }
  return bad;
}

Outcome criterion4() {
  std::mt19937_64 rng(4242);
  const LutSet luts = LutSet::defaults();
  auto box_for = [&](const ModelIR& m, const FxpConfig& c) {
    const Interval r = quant_range(c);
    for (;;) {
      Box b;
      for (std::size_t i = 0; i < m.input_dim(); ++i) {
        double a = test::uniform(rng, std::max(r.lo, -8.0), std::min(r.hi, 8.0));
        double d = test::uniform(rng, std::max(r.lo, -8.0), std::min(r.hi, 8.0));
        if (a > d) std::swap(a, d);
        b.push_back({a, d});
      }
      try {
        QuantGrid g(b, c);
        return b;
      } catch (const VacuousProperty&) {
      }
    }
  };
  std::size_t points = 0;
  std::size_t bad = 0;
  for (int n = 0; n < 20; ++n) {
    const ModelIR m = test::random_toy_model(rng);
    const FxpConfig c = q(2, 4, n % 2 ? Overflow::wrap : Overflow::saturate);
    const Box box = box_for(m, c);
    const InvariantMap inv = infer_invariants(m, box, luts, c);
    const QuantGrid g(box, c);
    const Interpreter run(m, c, luts);
    for (std::uint64_t k = 0; k < g.size(); ++k) {
      bad += containment_violations(inv, run.run(g.point(k)));
      ++points;
    }
  }
  std::size_t samples = 0;
  for (int n = 0; n < 10; ++n) {
    const ModelIR m = test::random_toy_model(rng);
    const FxpConfig c = q(4, 12, n % 2 ? Overflow::wrap : Overflow::saturate);
    const Box box = box_for(m, c);
    const InvariantMap inv = infer_invariants(m, box, luts, c);
    const QuantGrid g(box, c);
    const Interpreter run(m, c, luts);
    std::uniform_int_distribution<std::uint64_t> idx(0, g.size() - 1);
    for (int s = 0; s < 10'000; ++s) {
      bad += containment_violations(inv, run.run(g.point(idx(rng))));
      ++samples;
    }
  }
  return {bad == 0, fmt("%zu exhaustive Q(2,4) points on 20 nets, %zu Q(4,12) samples on 10 nets, %zu violations",
                        points, samples, bad)};
}

Outcome criterion6(const OracleSuite& s) {
  if (!s.ran) return {false, "no z3 executable found"};
  const double with = median(s.t_inv);
  const double without = median(s.t_noinv);
  const bool same = s.inv_matches_noinv == s.instances;
  std::size_t faster = 0;
  for (std::size_t i = 0; i < s.t_inv.size(); ++i) faster += s.t_inv[i] < s.t_noinv[i];
  return {same && with <= without,
          fmt("%zu/%zu verdicts identical; median solve %.4f s with invariants, %.4f s without; "
              "invariants faster on %zu of %zu",
              s.inv_matches_noinv, s.instances, with, without, faster, s.t_inv.size())};
}

// Word-length trend on a fixed 2-6-2 ReLU net with a property that holds at
// every width, so the solver has to refute the whole input box.
Outcome criterion7() {
  if (!test::z3()) return {false, "no z3 executable found"};
  const fs::path model = test::data_dir() / "trend_2x6x2.json";
  const ModelIR m = load_model(model.string());
  Workdir w;
  Property p = parse_property("assume x[0] >= -1; assume x[0] <= 1; assume x[1] >= -1; assume x[1] <= 1;\n"
                              "assert y[0] - y[1] < 6;\n",
                              2, 2, "trend");
  write(w.path / "trend.prop", to_dsl(p));
  struct Width {
    int bits;
    FxpConfig cfg;
    double timeout;
  };
  // the 32-bit point is only logged, so it gets a shorter leash
  const Width widths[] = {{8, q(3, 4), 300}, {16, q(7, 8), 300}, {32, q(15, 16), 30}};
  int ordered = 0;
  int ordered32 = 0;
  for (int run = 0; run < 3; ++run) {
    std::vector<double> t;
    std::string line;
    for (const Width& wd : widths) {
      RunConfig rc;
      rc.model_path = model;
      rc.property_paths = {w.path / "trend.prop"};
      rc.quant = to_string(QuantFormat{wd.cfg});
      rc.timeout = std::chrono::duration<double>(wd.timeout);
      rc.invariants = false; // measure the arithmetic, not the pruning
      rc.output_dir = w.path / "out";
      rc.solver_paths["z3"] = test::z3()->executable;
      const Report r = run_pipeline(rc);
      const Verdict& v = r.entries[0].verdict;
      audit.add(v, m, wd.cfg, p);
      t.push_back(r.entries[0].times.solve.count());
      line += fmt("%s%d-bit %.3f s %s", line.empty() ? "" : ", ", wd.bits, t.back(),
                  std::string(to_string(v.status)).c_str());
    }
    std::printf("  run %d: %s\n", run + 1, line.c_str());
    if (t[0] <= t[1]) ++ordered;
    if (t[1] <= t[2]) ++ordered32;
  }
  std::printf("  16-bit <= 32-bit in %d of 3 runs (logged only)\n", ordered32);
  return {ordered >= 2, fmt("8-bit <= 16-bit solve time in %d of 3 runs", ordered)};
}

Outcome criterion8() {
  const ModelIR m = load_model((test::data_dir() / "acasxu_like.nnet").string());
  const Box box{{0, 60760}, {-3.141592, 3.141592}, {-3.141592, 3.141592}, {100, 1200}, {0, 1200}};
  const InvariantMap real = infer_invariants(m, box, LutSet::defaults());
  bool finite = real.bounded_count() == 305;
  for (const auto& layer : real.layers) {
    for (const auto& n : layer) {
      finite = finite && n && std::isfinite(n->pre.lo) && std::isfinite(n->pre.hi) && std::isfinite(n->post.lo) &&
               std::isfinite(n->post.hi);
    }
  }
  Property p = parse_property("assume x[0] >= 0; assume x[0] <= 60760;\n"
                              "assume x[1] >= -3.141592; assume x[1] <= 3.141592;\n"
                              "assume x[2] >= -3.141592; assume x[2] <= 3.141592;\n"
                              "assume x[3] >= 100; assume x[3] <= 1200;\n"
                              "assume x[4] >= 0; assume x[4] <= 1200;\n"
                              "assert y[0] <= y[1];\n",
                              5, 5, "acas");
  const auto t0 = Clock::now();
  std::size_t bytes = 0;
  const InvariantMap inv32 = infer_invariants(m, extract_box(p, 5, Float32Format{}), LutSet::defaults(), Float32Format{});
  bytes += encode(m, Float32Format{}, LutSet::defaults(), p, &inv32).render().size();
  const FxpConfig wide = q(16, 15);
  const InvariantMap invq = infer_invariants(m, extract_box(p, 5, wide), LutSet::defaults(), wide);
  bytes += encode(m, wide, LutSet::defaults(), p, &invq).render().size();
  bytes += emit_c(m, Float32Format{}, LutSet::defaults(), p, &inv32).size();
  const double emit_s = since(t0);
  return {finite && emit_s < 30.0,
          fmt("7-layer 5-input network parsed, %zu neurons with finite bounds, %zu bytes emitted in %.2f s",
              real.bounded_count(), bytes, emit_s)};
}

Outcome criterion5() {
  Outcome o;
  o.pass = audit.unsafe > 0 && audit.replay_ok == audit.unsafe && audit.solver_errors == 0 && audit.problems.empty();
  o.detail = fmt("%zu solver verdicts, %zu UNSAFE, %zu replay-validated, %zu SOLVER_ERROR", audit.verdicts,
                 audit.unsafe, audit.replay_ok, audit.solver_errors);
  for (std::size_t i = 0; i < std::min<std::size_t>(audit.problems.size(), 5); ++i) o.detail += "; " + audit.problems[i];
  return o;
}

} // namespace

int main() {
  if (const auto z = test::z3()) {
    std::printf("solver: %s (%s)\n", z->executable.c_str(), probe_solver(*z).value_or("?").c_str());
  } else {
    std::printf("solver: none found\n");
  }
  auto timed = [](int n, const char* title, const std::function<Outcome()>& f) {
    const auto t = Clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    report(n, title, o, since(t));
  };

  const auto t1 = Clock::now();
  OracleSuite suite;
  try {
    suite = run_oracle_suite();
  } catch (const std::exception& e) {
    std::printf("oracle suite aborted: %s\n", e.what());
  }
  report(1, "oracle equivalence", criterion1(suite), since(t1));
  timed(2, "lookup table error bound", criterion2);
  timed(3, "fixed-point arithmetic", criterion3);
  timed(4, "interval soundness", criterion4);
  report(6, "invariant neutrality and pruning", criterion6(suite), 0.0);
  timed(7, "word-length trend", criterion7);
  timed(8, "NNET compatibility", criterion8);
  // last, so it covers every solver verdict above
  timed(5, "counterexample validity", criterion5);
  return failures == 0 ? 0 : 1;
}
