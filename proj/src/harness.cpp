#include "derids/harness.hpp"

#include "derids/csv_io.hpp"
#include "derids/errors.hpp"
#include "derids/robust_regression.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <thread>

namespace derids {

namespace {

// Stream ids inside a run; every cell of the grid reuses them.
enum Stream : std::uint64_t {
  kTruth = 1,
  kD1Clean = 2,
  kPoison = 3,
  kD2Clean = 4,
  kEvasion = 5,
  kTestClean = 6,
  kTestEvasion = 7,
};

}  // namespace

void RunConfig::validate() const {
  if (n2 < 1 || n1 < n2) throw DomainError("need n1 >= n2 >= 1");
  if (!(anomaly_fraction > 0.0 && anomaly_fraction < 1.0))
    throw DomainError("anomaly_fraction must lie in (0, 1)");
  if (!(mean_abs_command > 0.0)) throw DomainError("mean_abs_command must be positive");
  if (!(clean_noise_rel >= 0.0)) throw DomainError("clean noise must be nonnegative");
  if (num_runs < 1) throw DomainError("num_runs must be positive");
  poisoning.validate();
  evasion.validate();
  trainer.validate();
}

std::vector<Cell> ScenarioGrid::cells() const {
  std::vector<Cell> out;
  for (double f : poison_fractions)
    for (double pm : poison_magnitudes)
      for (double em : evasion_magnitudes) out.push_back(Cell{f, pm, em});
  return out;
}

void ScenarioGrid::validate() const {
  if (poison_fractions.empty() || poison_magnitudes.empty() || evasion_magnitudes.empty())
    throw DomainError("scenario grid axes must be nonempty");
}

std::string_view to_string(Method method) noexcept {
  return method == Method::proposed ? "proposed" : "baseline";
}

std::uint64_t run_seed(std::uint64_t master_seed, int run_index) {
  return split_seed(master_seed, static_cast<std::uint64_t>(run_index));
}

ScenarioData generate_scenario(const Cell& cell, int run_index, const RunConfig& cfg) {
  const auto seed = run_seed(cfg.master_seed, run_index);
  auto truth = draw_ground_truth(split_seed(seed, kTruth), cfg.mean_abs_command, cfg.clean_noise_rel);

  AttackSpec poison = cfg.poisoning;
  poison.kind = AttackKind::poisoning;
  poison.fraction = cell.poison_fraction;
  poison.magnitude = cell.poison_magnitude;
  poison.seed = split_seed(seed, kPoison);
  auto d1 = inject_poisoning(generate_clean(truth, cfg.n1, split_seed(seed, kD1Clean)), poison);

  AttackSpec evasion = cfg.evasion;
  evasion.kind = AttackKind::evasion;
  evasion.fraction = cfg.anomaly_fraction;
  evasion.magnitude = cell.evasion_magnitude;
  evasion.seed = split_seed(seed, kEvasion);
  auto d2 = inject_evasion(generate_clean(truth, cfg.n2, split_seed(seed, kD2Clean)), evasion,
                           cfg.anomaly_fraction);
  evasion.seed = split_seed(seed, kTestEvasion);
  auto d2_test = inject_evasion(generate_clean(truth, cfg.n2, split_seed(seed, kTestClean)), evasion,
                                cfg.anomaly_fraction);

  return ScenarioData{std::move(truth), std::move(d1.data), std::move(d1.attacked), std::move(d2.data),
                      std::move(d2_test.data)};
}

RunResult run_scenario(const Cell& cell, int run_index, const RunConfig& cfg) {
  RunResult result;
  result.cell = cell;
  result.run_index = run_index;
  result.run_seed = run_seed(cfg.master_seed, run_index);
  const auto data = generate_scenario(cell, run_index, cfg);

  try {
    auto trained = train(data.d1, data.d2, cfg.trainer);
    auto& out = result.proposed;
    out.alpha = trained.model.alpha;
    out.tau = trained.detector.tau();
    out.lambda = trained.model.lambda;
    out.held_out = evaluate(out.alpha, out.tau, data.d2_test);
    out.in_sample = evaluate(out.alpha, out.tau, data.d2);
    out.ok = true;
  } catch (const Error& e) {
    result.proposed.ok = false;
    result.proposed.error = e.what();
  }

  try {
    auto& out = result.baseline;
    out.alpha = fit_least_squares(data.d1);
    out.tau = tune_threshold_baseline(out.alpha, data.d2).tau();
    out.held_out = evaluate(out.alpha, out.tau, data.d2_test);
    out.in_sample = evaluate(out.alpha, out.tau, data.d2);
    out.ok = true;
  } catch (const Error& e) {
    result.baseline.ok = false;
    result.baseline.error = e.what();
  }
  return result;
}

std::vector<RunResult> run_grid(const ScenarioGrid& grid, const RunConfig& cfg, int jobs) {
  grid.validate();
  cfg.validate();
  const auto cells = grid.cells();
  const std::size_t runs = static_cast<std::size_t>(cfg.num_runs);
  const std::size_t total = cells.size() * runs;
  std::vector<RunResult> results(total);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job = next++; job < total; job = next++)
      results[job] = run_scenario(cells[job / runs], static_cast<int>(job % runs), cfg);
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(total)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  return results;
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  s.count = values.size();
  if (values.empty()) {
    s.mean = std::nan("");
    s.std = std::nan("");
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() == 1) {
    s.single_run = true;
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return s;
}

const CellSummary& EvalReport::find(const Cell& cell, Method method) const {
  for (const auto& c : cells)
    if (c.cell == cell && c.method == method) return c;
  throw DomainError("cell not present in report");
}

EvalReport aggregate(std::vector<RunResult> runs, const ScenarioGrid& grid, const RunConfig& cfg) {
  const auto cells = grid.cells();
  auto cell_pos = [&](const Cell& c) {
    return static_cast<std::size_t>(std::find(cells.begin(), cells.end(), c) - cells.begin());
  };
  std::stable_sort(runs.begin(), runs.end(), [&](const RunResult& a, const RunResult& b) {
    const auto ca = cell_pos(a.cell), cb = cell_pos(b.cell);
    return ca != cb ? ca < cb : a.run_index < b.run_index;
  });

  EvalReport report;
  report.config = cfg;
  report.grid = grid;
  report.scaling = cfg.trainer.scaling;
  for (const auto& cell : cells) {
    for (Method m : {Method::proposed, Method::baseline}) {
      CellSummary s;
      s.cell = cell;
      s.method = m;
      std::vector<double> ia, ip, ir;
      for (const auto& run : runs) {
        if (!(run.cell == cell)) continue;
        const auto& o = run.outcome(m);
        if (!o.ok) {
          ++s.failures;
          report.failures.push_back(FailureRecord{cell, run.run_index, m, o.error});
          continue;
        }
        s.raw_accuracy.push_back(o.held_out.metrics.accuracy);
        s.raw_precision.push_back(o.held_out.metrics.precision);
        s.raw_recall.push_back(o.held_out.metrics.recall);
        ia.push_back(o.in_sample.metrics.accuracy);
        ip.push_back(o.in_sample.metrics.precision);
        ir.push_back(o.in_sample.metrics.recall);
      }
      s.accuracy = summarize(s.raw_accuracy);
      s.precision = summarize(s.raw_precision);
      s.recall = summarize(s.raw_recall);
      s.in_sample_accuracy = summarize(ia);
      s.in_sample_precision = summarize(ip);
      s.in_sample_recall = summarize(ir);
      report.cells.push_back(std::move(s));
    }
  }
  report.runs = std::move(runs);
  return report;
}

namespace {

using json = nlohmann::ordered_json;

json to_json(const MetricSummary& s) {
  json j;
  j["mean"] = s.mean;
  j["std"] = s.std;
  j["count"] = s.count;
  j["single_run"] = s.single_run;
  return j;
}

json to_json(const Cell& c) {
  return json{{"poison_fraction", c.poison_fraction},
              {"poison_magnitude", c.poison_magnitude},
              {"evasion_magnitude", c.evasion_magnitude}};
}

json to_json(const AttackSpec& a) {
  return json{{"kind", to_string(a.kind)}, {"noise_rel", a.noise_rel}, {"sign", to_string(a.sign)}};
}

json to_json(const Evaluation& e) {
  return json{{"tp", e.counts.tp},
              {"tn", e.counts.tn},
              {"fp", e.counts.fp},
              {"fn", e.counts.fn},
              {"accuracy", e.metrics.accuracy},
              {"precision", e.metrics.precision},
              {"recall", e.metrics.recall},
              {"precision_defined", e.metrics.precision_defined},
              {"recall_defined", e.metrics.recall_defined}};
}

json to_json(const MethodOutcome& o) {
  json j;
  j["ok"] = o.ok;
  if (!o.ok) {
    j["error"] = o.error;
    return j;
  }
  j["alpha"] = std::vector<double>(o.alpha.begin(), o.alpha.end());
  j["tau"] = o.tau;
  j["lambda"] = o.lambda ? json(*o.lambda) : json(nullptr);
  j["held_out"] = to_json(o.held_out);
  j["in_sample"] = to_json(o.in_sample);
  return j;
}

json config_json(const RunConfig& c) {
  const auto& t = c.trainer;
  json trainer{{"K", t.K},
               {"beta_tau_rel", t.beta_tau_rel},
               {"beta_lambda_rel", t.beta_lambda_rel},
               {"lambda_min", t.lambda_min},
               {"stop_tol", t.stop_tol ? json(*t.stop_tol) : json(nullptr)},
               {"inner_tol", t.inner_tol},
               {"inner_max_iter", t.inner_max_iter}};
  return json{{"n1", c.n1},
              {"n2", c.n2},
              {"anomaly_fraction", c.anomaly_fraction},
              {"mean_abs_command", c.mean_abs_command},
              {"clean_noise_rel", c.clean_noise_rel},
              {"poisoning", to_json(c.poisoning)},
              {"evasion", to_json(c.evasion)},
              {"num_runs", c.num_runs},
              {"master_seed", c.master_seed},
              {"trainer", trainer}};
}

std::string percent(const MetricSummary& s) {
  if (s.count == 0) return "failed";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f(%.1f)", 100.0 * s.mean, 100.0 * s.std);
  return buf;
}

std::string pct_label(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%g%%", 100.0 * v);
  return buf;
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  json j;
  j["config"] = config_json(report.config);
  j["grid"] = json{{"poison_fractions", report.grid.poison_fractions},
                   {"poison_magnitudes", report.grid.poison_magnitudes},
                   {"evasion_magnitudes", report.grid.evasion_magnitudes}};
  j["conventions"] = json{{"gradient_scaling", to_string(report.scaling)},
                          {"sign_at_zero", "+1"},
                          {"boundary_verdict", "normal"},
                          {"metrics_split", "held_out"}};
  json cells = json::array();
  for (const auto& c : report.cells) {
    json jc = to_json(c.cell);
    jc["method"] = to_string(c.method);
    jc["held_out"] = json{{"accuracy", to_json(c.accuracy)},
                          {"precision", to_json(c.precision)},
                          {"recall", to_json(c.recall)}};
    jc["in_sample"] = json{{"accuracy", to_json(c.in_sample_accuracy)},
                           {"precision", to_json(c.in_sample_precision)},
                           {"recall", to_json(c.in_sample_recall)}};
    jc["raw_held_out"] = json{{"accuracy", c.raw_accuracy},
                              {"precision", c.raw_precision},
                              {"recall", c.raw_recall}};
    jc["failures"] = c.failures;
    cells.push_back(std::move(jc));
  }
  j["cells"] = std::move(cells);
  json runs = json::array();
  for (const auto& r : report.runs) {
    json jr = to_json(r.cell);
    jr["run_index"] = r.run_index;
    jr["run_seed"] = r.run_seed;
    jr["proposed"] = to_json(r.proposed);
    jr["baseline"] = to_json(r.baseline);
    runs.push_back(std::move(jr));
  }
  j["runs"] = std::move(runs);
  json failures = json::array();
  for (const auto& f : report.failures) {
    json jf = to_json(f.cell);
    jf["run_index"] = f.run_index;
    jf["method"] = to_string(f.method);
    jf["error"] = f.error;
    failures.push_back(std::move(jf));
  }
  j["failures"] = std::move(failures);
  return j.dump(2) + "\n";
}

std::string format_table(const EvalReport& report, double poison_fraction) {
  const auto& g = report.grid;
  constexpr int kCol = 11;
  std::ostringstream out;
  out << "Poisoning on " << pct_label(poison_fraction) << " of D1; mean(std) in percent over "
      << report.config.num_runs << " runs, held-out D2'\n";

  const int group_width = 3 * kCol;
  out << std::left << std::setw(10) << "" << std::setw(11) << "";
  for (double em : g.evasion_magnitudes)
    out << "| " << std::setw(group_width) << (pct_label(em) + " evasion attack magnitude");
  out << '\n';
  out << std::setw(10) << "method" << std::setw(11) << "poisoning";
  for (std::size_t k = 0; k < g.evasion_magnitudes.size(); ++k)
    out << "| " << std::setw(kCol) << "accuracy" << std::setw(kCol) << "precision" << std::setw(kCol)
        << "recall";
  out << '\n';
  for (Method m : {Method::proposed, Method::baseline}) {
    bool first = true;
    for (double pm : g.poison_magnitudes) {
      out << std::setw(10) << (first ? std::string(to_string(m)) : "") << std::setw(11) << pct_label(pm);
      first = false;
      for (double em : g.evasion_magnitudes) {
        const auto& s = report.find(Cell{poison_fraction, pm, em}, m);
        out << "| " << std::setw(kCol) << percent(s.accuracy) << std::setw(kCol) << percent(s.precision)
            << std::setw(kCol) << percent(s.recall);
      }
      out << '\n';
    }
  }
  return out.str();
}

std::string trace_detection(const Cell& cell, int run_index, const RunConfig& cfg) {
  const auto data = generate_scenario(cell, run_index, cfg);
  const auto run = run_scenario(cell, run_index, cfg);
  if (!run.proposed.ok) throw Error("proposed method failed: " + run.proposed.error);
  if (!run.baseline.ok) throw Error("baseline failed: " + run.baseline.error);

  const Vector rp = data.d2_test.residuals(run.proposed.alpha);
  const Vector rb = data.d2_test.residuals(run.baseline.alpha);
  std::ostringstream out;
  out << "idx,truth,residual_proposed,tau_proposed,verdict_proposed,residual_baseline,tau_baseline,"
         "verdict_baseline\n";
  for (Eigen::Index i = 0; i < rp.size(); ++i) {
    out << i << ',' << to_int(data.d2_test.labels()[static_cast<std::size_t>(i)]) << ','
        << format_double(rp[i]) << ',' << format_double(run.proposed.tau) << ','
        << to_int(detect_residual(rp[i], run.proposed.tau)) << ',' << format_double(rb[i]) << ','
        << format_double(run.baseline.tau) << ',' << to_int(detect_residual(rb[i], run.baseline.tau))
        << '\n';
  }
  return out.str();
}

}  // namespace derids
