#include "derids/cli.hpp"

#include "derids/csv_io.hpp"
#include "derids/detector.hpp"
#include "derids/errors.hpp"
#include "derids/harness.hpp"
#include "derids/robust_regression.hpp"
#include "derids/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

namespace derids::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

/// Raised for flag combinations CLI11 cannot express.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct CommonFlags {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out;
  std::string config;
  int jobs = 1;
};

struct GenerateFlags {
  RunConfig run;
  double poison_frac = 0.1;
  double poison_mag = 0.4;
  double evasion_mag = 0.4;
  std::string poison_sign = "one_sided";
  std::string evasion_sign = "symmetric";
};

struct TrainFlags {
  std::string d1, d2, trace;
  std::string method = "proposed";
  std::string convention = "unscaled";
  TrainerConfig trainer;
  std::optional<double> tau_init, lambda_init, stop_tol;
};

struct DetectFlags {
  std::string model, data;
};

struct ReproduceFlags {
  RunConfig run;
  std::vector<double> fractions{0.1, 0.3};
  int trace_run = 0;
};

struct SavedModel {
  Vector alpha;
  double tau = 0.0;
  std::optional<double> lambda;
  std::string method;
};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

// Flat `key = value` overlay: keys are long flag names, command-line flags win.
std::vector<std::string> apply_config(const std::vector<std::string>& args, CLI::App& app) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path || args.empty()) return args;

  CLI::App* sub = nullptr;
  for (auto* s : app.get_subcommands({}))
    if (s->get_name() == args.front()) sub = s;
  if (!sub) throw UsageError("--config needs a subcommand");

  auto given = [&](const std::string& key) {
    for (const auto& a : args)
      if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) return true;
    return false;
  };

  std::istringstream in(read_text_file(*path));
  std::vector<std::string> extra;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value in config file", line_no);
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key == "config" || !sub->get_option_no_throw("--" + key))
      throw UsageError("unknown config key '" + key + "' for '" + sub->get_name() + "'");
    if (!given(key)) {
      extra.push_back("--" + key);
      extra.push_back(value);
    }
  }
  std::vector<std::string> merged(args.begin(), args.begin() + 1);
  merged.insert(merged.end(), extra.begin(), extra.end());
  merged.insert(merged.end(), args.begin() + 1, args.end());
  return merged;
}

void add_common(CLI::App* sub, CommonFlags& c, bool out_required) {
  sub->add_option("--seed", c.seed, "Master seed; all randomness derives from it");
  auto* out = sub->add_option("--out", c.out, "Output path");
  if (out_required) out->required();
  sub->add_option("--config", c.config, "Flat key = value file; command-line flags take precedence");
  sub->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

void add_data_flags(CLI::App* sub, RunConfig& run) {
  sub->add_option("--n1", run.n1, "Points in the unlabeled training set D1")->check(CLI::PositiveNumber);
  sub->add_option("--n2", run.n2, "Points in the labeled sets D2 and D2'")->check(CLI::PositiveNumber);
  sub->add_option("--anomaly-frac", run.anomaly_fraction, "Share of +1 labels in D2")
      ->check(CLI::Range(0.0, 1.0));
  sub->add_option("--mean-abs-command", run.mean_abs_command, "Target mean |p| of generated commands")
      ->check(CLI::PositiveNumber);
  sub->add_option("--clean-noise", run.clean_noise_rel, "Relative measurement noise on clean commands")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--poison-noise", run.poisoning.noise_rel, "Relative noise added to poisoned commands")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--evasion-noise", run.evasion.noise_rel, "Relative noise added to evasion commands")
      ->check(CLI::NonNegativeNumber);
}

std::string model_json(const SavedModel& m, const std::optional<std::string>& convention,
                       const json& provenance) {
  json j;
  j["alpha"] = std::vector<double>(m.alpha.begin(), m.alpha.end());
  j["tau"] = m.tau;
  if (m.lambda) j["lambda"] = *m.lambda;
  j["method"] = m.method;
  j["eq6_convention"] = convention ? json(*convention) : json(nullptr);
  j["seed_provenance"] = provenance;
  return j.dump(2) + "\n";
}

SavedModel load_model(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ParseError("model file '" + path + "': " + e.what(), 0);
  }
  SavedModel m;
  try {
    const auto alpha = j.at("alpha").get<std::vector<double>>();
    m.alpha = Eigen::Map<const Vector>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
    m.tau = j.at("tau").get<double>();
    if (j.contains("lambda") && !j["lambda"].is_null()) m.lambda = j["lambda"].get<double>();
    m.method = j.value("method", "");
  } catch (const json::exception& e) {
    throw SchemaError("model file '" + path + "': " + e.what());
  }
  if (m.alpha.size() < 2 || !m.alpha.allFinite()) throw SchemaError("model alpha must be finite, d >= 2");
  DetectorConfig check(m.tau);
  return m;
}

int cmd_generate(const GenerateFlags& g, const CommonFlags& c, std::ostream& out) {
  RunConfig run = g.run;
  run.master_seed = c.seed;
  run.poisoning.sign = sign_mode_from_string(g.poison_sign);
  run.evasion.sign = sign_mode_from_string(g.evasion_sign);
  run.validate();
  const Cell cell{g.poison_frac, g.poison_mag, g.evasion_mag};
  const auto data = generate_scenario(cell, 0, run);
  const auto clean = generate_clean(data.truth, run.n1, split_seed(run_seed(run.master_seed, 0), 2));

  const fs::path dir(c.out);
  save_dataset(clean, dir / "d1_clean.csv");
  save_dataset(data.d1, dir / "d1.csv");
  save_dataset(data.d2, dir / "d2.csv");
  save_dataset(data.d2_test, dir / "d2_test.csv");
  save_index_set(data.poisoned, dir / "d1_poisoned_idx.csv");

  out << "seed " << run.master_seed << " -> run seed " << run_seed(run.master_seed, 0) << '\n';
  out << "alpha_true";
  for (double a : data.truth.alpha_true) out << ' ' << format_double(a);
  out << '\n'
      << "wrote d1_clean.csv d1.csv d2.csv d2_test.csv d1_poisoned_idx.csv (" << data.poisoned.size()
      << " poisoned) to " << dir.string() << '\n';
  return kSuccess;
}

int cmd_train(TrainFlags t, const CommonFlags& c, std::ostream& out, std::ostream& err) {
  const auto d1 = load_dataset(t.d1, DatasetKind::unlabeled);
  const auto d2 = load_dataset(t.d2, DatasetKind::labeled);
  if (d1.dim() != d2.dim()) throw SchemaError("D1 and D2 feature dimensions differ");
  json provenance{{"seed", c.seed_given ? json(c.seed) : json(nullptr)}, {"d1", t.d1}, {"d2", t.d2}};

  SavedModel model;
  model.method = t.method;
  std::optional<std::string> convention;
  if (t.method == "baseline") {
    model.alpha = fit_least_squares(d1);
    model.tau = tune_threshold_baseline(model.alpha, d2).tau();
  } else if (t.method == "proposed") {
    t.trainer.scaling = scaling_from_string(t.convention);
    t.trainer.tau_init = t.tau_init;
    t.trainer.lambda_init = t.lambda_init;
    t.trainer.stop_tol = t.stop_tol;
    convention = std::string(to_string(t.trainer.scaling));
    try {
      auto result = train(d1, d2, t.trainer);
      model.alpha = result.model.alpha;
      model.tau = result.detector.tau();
      model.lambda = result.model.lambda;
      if (!t.trace.empty()) write_text_file(t.trace, result.trace.to_csv());
      out << "iterations " << result.trace.records.size() << " (stop: " << to_string(result.trace.reason)
          << "), outer loss " << format_double(result.outer_loss) << '\n';
    } catch (const TrainingError& e) {
      if (!t.trace.empty()) write_text_file(t.trace, e.trace().to_csv());
      err << "training failed: " << e.what() << '\n';
      return kInternalFailure;
    }
  } else {
    throw UsageError("--method must be 'proposed' or 'baseline'");
  }
  write_text_file(c.out, model_json(model, convention, provenance));
  out << "tau " << format_double(model.tau);
  if (model.lambda) out << ", lambda " << format_double(*model.lambda);
  out << '\n';
  return kSuccess;
}

int cmd_detect(const DetectFlags& d, const CommonFlags& c, std::ostream& out) {
  const auto model = load_model(d.model);
  const auto data = load_dataset(d.data);
  if (data.dim() != model.alpha.size())
    throw SchemaError("model has " + std::to_string(model.alpha.size()) + " coefficients, dataset has " +
                      std::to_string(data.dim()) + " features");
  const auto csv = detection_csv(model.alpha, model.tau, data);
  if (!c.out.empty()) write_text_file(c.out, csv);
  std::size_t flagged = 0;
  const Vector r = data.residuals(model.alpha);
  for (double ri : r) flagged += detect_residual(ri, model.tau) == Label::anomaly;
  out << flagged << " of " << r.size() << " points flagged as anomalies\n";
  return flagged ? kAnomalyDetected : kSuccess;
}

int cmd_evaluate(const DetectFlags& d, const CommonFlags& c, std::ostream& out) {
  const auto model = load_model(d.model);
  const auto data = load_dataset(d.data, DatasetKind::labeled);
  if (data.dim() != model.alpha.size()) throw SchemaError("model and dataset dimensions differ");
  const auto e = evaluate(model.alpha, model.tau, data);
  json j{{"tp", e.counts.tp},
         {"tn", e.counts.tn},
         {"fp", e.counts.fp},
         {"fn", e.counts.fn},
         {"accuracy", e.metrics.accuracy},
         {"precision", e.metrics.precision},
         {"recall", e.metrics.recall},
         {"precision_defined", e.metrics.precision_defined},
         {"recall_defined", e.metrics.recall_defined}};
  const auto text = j.dump(2) + "\n";
  if (!c.out.empty()) write_text_file(c.out, text);
  out << text;
  return kSuccess;
}

int cmd_reproduce(const ReproduceFlags& r, const CommonFlags& c, std::ostream& out, std::ostream& err) {
  RunConfig run = r.run;
  run.master_seed = c.seed;
  ScenarioGrid grid;
  grid.poison_fractions = r.fractions;
  run.validate();
  grid.validate();
  if (r.trace_run < 0 || r.trace_run >= run.num_runs) throw UsageError("--trace-run out of range");

  auto report = aggregate(run_grid(grid, run, c.jobs), grid, run);
  const fs::path dir(c.out);
  for (std::size_t k = 0; k < grid.poison_fractions.size(); ++k) {
    const auto table = format_table(report, grid.poison_fractions[k]);
    write_text_file(dir / ("table" + std::to_string(k + 1) + ".txt"), table);
    out << table << '\n';
  }
  write_text_file(dir / "report.json", report_to_json(report));

  // Highest poisoning fraction, 100% poisoning / 70% evasion magnitudes.
  const Cell traced{grid.poison_fractions.back(), 1.0, 0.7};
  try {
    write_text_file(dir / "detection_trace.csv", trace_detection(traced, r.trace_run, run));
  } catch (const Error& e) {
    err << "trace not written: " << e.what() << '\n';
  }
  if (!report.failures.empty()) {
    err << report.failures.size() << " run(s) failed; see report.json\n";
    return kInternalFailure;
  }
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Poisoning- and evasion-robust intrusion detection for DER commands", "derids"};
  app.require_subcommand(1);

  CommonFlags common;
  GenerateFlags gen;
  TrainFlags tr;
  DetectFlags det;
  ReproduceFlags rep;

  auto* generate = app.add_subcommand("generate", "Write synthetic D1 (clean and poisoned), D2, D2'");
  add_common(generate, common, true);
  add_data_flags(generate, gen.run);
  generate->add_option("--poison-frac", gen.poison_frac, "Share of D1 poisoned")->check(CLI::Range(0.0, 1.0));
  generate->add_option("--poison-mag", gen.poison_mag, "Relative poisoning perturbation")
      ->check(CLI::NonNegativeNumber);
  generate->add_option("--poison-sign", gen.poison_sign, "symmetric or one_sided")
      ->check(CLI::IsMember({"symmetric", "one_sided"}));
  generate->add_option("--evasion-mag", gen.evasion_mag, "Relative evasion perturbation")
      ->check(CLI::NonNegativeNumber);
  generate->add_option("--evasion-sign", gen.evasion_sign, "symmetric or one_sided")
      ->check(CLI::IsMember({"symmetric", "one_sided"}));

  auto* train_cmd = app.add_subcommand("train", "Fit a detector (bilevel or least-squares baseline)");
  add_common(train_cmd, common, true);
  train_cmd->add_option("--d1", tr.d1, "Unlabeled training CSV")->required();
  train_cmd->add_option("--d2", tr.d2, "Labeled training CSV")->required();
  train_cmd->add_option("--method", tr.method, "proposed or baseline")
      ->check(CLI::IsMember({"proposed", "baseline"}));
  train_cmd->add_option("--trace", tr.trace, "Trace CSV output");
  train_cmd->add_option("--K", tr.trainer.K, "Outer iteration budget")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--beta-tau", tr.trainer.beta_tau_rel, "tau step relative to tau_1")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--beta-lambda", tr.trainer.beta_lambda_rel, "lambda step relative to lambda_1")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--tau-init", tr.tau_init, "Explicit tau_1")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lambda-init", tr.lambda_init, "Explicit lambda_1")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lambda-min", tr.trainer.lambda_min, "Floor for lambda")->check(CLI::PositiveNumber);
  train_cmd->add_option("--stop-tol", tr.stop_tol, "Outer-loss plateau tolerance")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--inner-max-iter", tr.trainer.inner_max_iter, "Inner solver iteration budget")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--gradient-scaling", tr.convention, "unscaled or lambda_scaled")
      ->check(CLI::IsMember({"unscaled", "lambda_scaled"}));

  auto* detect_cmd = app.add_subcommand("detect", "Per-point verdicts; exit 3 if any anomaly");
  add_common(detect_cmd, common, false);
  detect_cmd->add_option("--model", det.model, "Model JSON")->required();
  detect_cmd->add_option("--data", det.data, "Dataset CSV (labeled or unlabeled)")->required();

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Confusion counts and metrics on labeled data");
  add_common(evaluate_cmd, common, false);
  evaluate_cmd->add_option("--model", det.model, "Model JSON")->required();
  evaluate_cmd->add_option("--data", det.data, "Labeled dataset CSV")->required();

  auto* reproduce = app.add_subcommand("reproduce", "Run the scenario grid and write tables and traces");
  add_common(reproduce, common, true);
  add_data_flags(reproduce, rep.run);
  reproduce->add_option("--runs", rep.run.num_runs, "Independent runs per cell")->check(CLI::PositiveNumber);
  reproduce->add_option("--K", rep.run.trainer.K, "Outer iteration budget")->check(CLI::NonNegativeNumber);
  reproduce->add_option("--poison-fracs", rep.fractions, "Poisoning fractions, one table each");
  reproduce->add_option("--trace-run", rep.trace_run, "Run index for the per-point trace");

  try {
    auto merged = apply_config(args, app);
    std::vector<std::string> reversed(merged.rbegin(), merged.rend());
    app.parse(reversed);
    common.seed_given = app.get_subcommands().front()->count("--seed") > 0;

    if (generate->parsed()) return cmd_generate(gen, common, out);
    if (train_cmd->parsed()) return cmd_train(tr, common, out, err);
    if (detect_cmd->parsed()) return cmd_detect(det, common, out);
    if (evaluate_cmd->parsed()) return cmd_evaluate(det, common, out);
    if (reproduce->parsed()) return cmd_reproduce(rep, common, out, err);
    return kUsageOrIo;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageOrIo;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageOrIo;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kUsageOrIo;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kUsageOrIo;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return kUsageOrIo;
  } catch (const DomainError& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kUsageOrIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternalFailure;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace derids::cli
