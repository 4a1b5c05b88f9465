/*
 * Copyright 2026 The DFFRec Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "dffrec/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "CLI11.hpp"
#include "dffrec/ablation.hpp"
#include "dffrec/config.hpp"
#include "dffrec/error.hpp"
#include "dffrec/gradcheck.hpp"
#include "dffrec/run.hpp"
#include "dffrec/synth.hpp"

namespace dffrec {
namespace {

namespace fs = std::filesystem;

struct RunFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  int jobs = 1;
  bool print_defaults = false;
};

void AddRunFlags(CLI::App* cmd, RunFlags& flags, bool config_required) {
  auto* opt = cmd->add_option("--config", flags.config_path, "run config file");
  if (config_required) opt->check(CLI::ExistingFile);
  cmd->add_option("--set", flags.overrides, "key=value config override");
  cmd->add_option("--jobs", flags.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--print-defaults", flags.print_defaults,
                "print every config key with its default and exit");
}

RunConfig ResolveConfig(const RunFlags& flags) {
  if (flags.config_path.empty()) throw UsageError("--config is required");
  RunConfig config = LoadRunConfig(flags.config_path);
  for (const auto& o : flags.overrides) ApplyConfigOverride(config, o);
  return config;
}

void PrintSummary(std::ostream& out, const EvalReport& report) {
  char buf[160];
  for (const auto& c : report.cutoffs) {
    std::snprintf(buf, sizeof(buf), "%s HR@%zu=%.4f NDCG@%zu=%.4f\n",
                  report.phase.c_str(), c.cutoff, c.hit_rate, c.cutoff, c.ndcg);
    out << buf;
  }
}

int CmdSynth(const std::string& spec_path, std::uint64_t seed,
             const std::string& out_store, const std::string& out_log,
             const std::string& out_caption, std::ostream& out) {
  const SynthSpec spec =
      spec_path.empty() ? SynthSpec{} : LoadSynthSpec(spec_path);
  ValidateSynthSpec(spec);
  const SynthCatalog catalog = GenerateCatalog(spec, seed);
  const InteractionLog log = GenerateInteractions(spec, catalog, seed);
  for (const auto& p : {out_store, out_log, out_caption}) {
    const fs::path path(p);
    if (!p.empty() && path.has_parent_path()) {
      fs::create_directories(path.parent_path());
    }
  }
  catalog.store.Write(out_store);
  log.WriteTsv(out_log);
  if (!out_caption.empty()) {
    GenerateCaptionStore(spec, catalog, seed).Write(out_caption);
  }
  out << "wrote " << catalog.store.num_items() << " items x "
      << spec.num_layers << " layers to " << out_store << ", "
      << log.num_events() << " interactions to " << out_log << "\n";
  return kExitOk;
}

int CmdValidate(const std::string& store_path, const std::string& log_path,
                std::ostream& out, std::ostream& err) {
  for (const auto& p : {store_path, log_path}) {
    if (!fs::exists(p)) throw DataError("file not found: " + p);
  }
  const FeatureStore store = ReadStore(store_path);
  const InteractionLog log = InteractionLog::ReadTsv(log_path);
  const StoreValidationReport report = ValidateStore(store, log);
  if (report.clean()) {
    out << "ok: " << store.num_items() << " items, L=" << store.header().num_layers
        << ", dim=" << store.header().dim << ", " << log.num_events()
        << " interactions\n";
    return kExitOk;
  }
  err << "invalid: " << report.Summary() << "\n";
  return kExitData;
}

int CmdTrain(const RunConfig& config, int jobs, std::ostream& out) {
  const Dataset data = LoadDataset(config);
  for (const auto& w : data.split.warnings) out << "warning: " << w << "\n";
  const TrainOutcome outcome =
      TrainAndEvaluate(data, data.store ? &*data.store : nullptr, config, jobs);
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  outcome.run.model->SaveCheckpoint((dir / "checkpoint.dffc").string());
  outcome.validation.Write(dir / "report_validation");
  outcome.test.Write(dir / "report_test");
  WriteTextFile(dir / "manifest.json",
                BuildManifest("train", config, data, outcome, UtcTimestamp()));
  out << "best epoch " << outcome.run.best_epoch << " of "
      << outcome.run.history.size() << ", val HR@10 "
      << outcome.run.best_val_hit_rate_10 << "\n";
  PrintSummary(out, outcome.test);
  out << "outputs in " << dir.string() << "\n";
  return kExitOk;
}

int CmdEval(const RunConfig& config, const std::string& checkpoint,
            const std::string& phase_name, std::ostream& out) {
  if (!fs::exists(checkpoint)) {
    throw DataError("checkpoint not found: " + checkpoint);
  }
  Phase phase;
  if (phase_name == "test") {
    phase = Phase::kTest;
  } else if (phase_name == "validation" || phase_name == "val") {
    phase = Phase::kValidation;
  } else {
    throw UsageError("--phase must be test or validation, got '" + phase_name +
                     "'");
  }
  const Dataset data = LoadDataset(config);
  Recommender model(config.model, data.catalog,
                    data.store ? &*data.store : nullptr, config.seed);
  model.LoadCheckpoint(checkpoint);
  const EvalReport report = Evaluate(model, data.split, phase, config.eval);
  const fs::path stem =
      fs::path(config.output_dir) / ("eval_" + report.phase);
  report.Write(stem);
  out << report.ToText();
  out << "report written to " << stem.string() << ".{json,txt,csv}\n";
  return kExitOk;
}

int CmdSweep(const std::string& which, const RunConfig& config, int jobs,
             std::ostream& out) {
  const Dataset data = LoadDataset(config, which == "strategy-matrix");
  SweepOptions options;
  options.jobs = jobs;
  SweepResult result;
  if (which == "layer-sweep") {
    result = LayerSweep(data, config, options);
  } else if (which == "strategy-matrix") {
    result = StrategyMatrix(data, config, options);
  } else {
    result = DffRun(data, config, options);
  }
  out << FormatSweepTable(result);
  out << "curve rows appended to " << result.csv_path.string() << "\n";
  return kExitOk;
}

int CmdGradcheck(int seeds, float h, double tol, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const auto cases = RunGradCheckSuite(seeds, h, tol);
  bool ok = true;
  char buf[200];
  for (const auto& c : cases) {
    ok = ok && c.report.passed;
    std::snprintf(buf, sizeof(buf),
                  "%-4s %-24s max_rel_err=%.3e coords=%zu\n",
                  c.report.passed ? "ok" : "FAIL", c.name.c_str(),
                  c.report.max_relative_error, c.report.coordinates);
    out << buf;
  }
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  std::snprintf(buf, sizeof(buf), "%s: %zu cases, tol %.1e, %.2f s\n",
                ok ? "PASS" : "FAIL", cases.size(), tol, secs);
  out << buf;
  return ok ? kExitOk : kExitNumerical;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Sequential recommender with multi-layer content fusion", "dffrec"};
  app.require_subcommand(1);

  std::string spec_path, out_store, out_log, out_caption;
  std::uint64_t seed = 0;
  bool print_spec = false;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--spec", spec_path, "synthetic spec file")
      ->check(CLI::ExistingFile);
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--out-store", out_store, "feature store output");
  synth->add_option("--out-log", out_log, "interaction log output");
  synth->add_option("--out-caption-store", out_caption,
                    "optional single-layer caption-style store output");
  synth->add_flag("--print-defaults", print_spec, "print the default spec");

  std::string store_path, log_path;
  auto* validate = app.add_subcommand("validate", "check a store against a log");
  validate->add_option("--store", store_path)->required();
  validate->add_option("--log", log_path)->required();

  RunFlags train_flags;
  auto* train = app.add_subcommand("train", "split, train, evaluate");
  AddRunFlags(train, train_flags, false);

  RunFlags eval_flags;
  std::string checkpoint, phase = "test";
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  AddRunFlags(eval, eval_flags, false);
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--phase", phase, "test or validation");

  RunFlags sweep_flags[3];
  CLI::App* sweeps[3];
  const char* sweep_names[3] = {"layer-sweep", "strategy-matrix", "dff"};
  const char* sweep_help[3] = {"per-layer fusion curve plus uniform average",
                               "integration strategy x feature source",
                               "learned layer weights with gated fusion"};
  for (int i = 0; i < 3; ++i) {
    sweeps[i] = app.add_subcommand(sweep_names[i], sweep_help[i]);
    AddRunFlags(sweeps[i], sweep_flags[i], false);
  }

  int gc_seeds = 100;
  float gc_h = 1e-3F;
  double gc_tol = 1e-3;
  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gradcheck->add_option("--seeds", gc_seeds)->check(CLI::PositiveNumber);
  gradcheck->set_help_flag("--help", "Print this help message and exit");
  gradcheck->add_option("--h", gc_h);
  gradcheck->add_option("--tol", gc_tol);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (synth->parsed()) {
      if (print_spec) {
        out << SynthSpecToText(SynthSpec{});
        return kExitOk;
      }
      if (out_store.empty() || out_log.empty()) {
        throw UsageError("synth needs --out-store and --out-log");
      }
      return CmdSynth(spec_path, seed, out_store, out_log, out_caption, out);
    }
    if (validate->parsed()) return CmdValidate(store_path, log_path, out, err);
    if (gradcheck->parsed()) return CmdGradcheck(gc_seeds, gc_h, gc_tol, out);

    const auto run_with = [&](const RunFlags& flags, auto&& body) -> int {
      if (flags.print_defaults) {
        out << ConfigToText(RunConfig{});
        return kExitOk;
      }
      return body(ResolveConfig(flags), flags.jobs);
    };
    if (train->parsed()) {
      return run_with(train_flags, [&](const RunConfig& c, int jobs) {
        return CmdTrain(c, jobs, out);
      });
    }
    if (eval->parsed()) {
      return run_with(eval_flags, [&](const RunConfig& c, int) {
        return CmdEval(c, checkpoint, phase, out);
      });
    }
    for (int i = 0; i < 3; ++i) {
      if (sweeps[i]->parsed()) {
        return run_with(sweep_flags[i], [&](const RunConfig& c, int jobs) {
          return CmdSweep(sweep_names[i], c, jobs, out);
        });
      }
    }
    throw UsageError("no command given");
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace dffrec
