// Copyright 2026 The eagrs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line driver: synth, pretrain, relevance, train, analyze.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "eagrs/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using namespace eagrs;
using pipeline::RunConfig;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDivergence = 3,
  kRoiMismatch = 4,
  kMissingArtifact = 5,
};

struct Exit {
  int code;
  std::string message;
};

struct Options {
  std::string run = "default";
  std::string config;
  std::string dataset;
  std::optional<std::uint64_t> seed;
  std::optional<double> q, alpha, tau;
  std::optional<std::size_t> folds, epochs1, epochs3;
  std::string ablation;
  std::size_t workers = 1;
  std::string sweep_q;
  std::string mcnemar_vs;
  std::string out;
};

fs::path run_root() {
  const char* env = std::getenv("EAGRS_RUN_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

fs::path resolve_run(const std::string& name) {
  if (fs::is_directory(name) && fs::exists(fs::path(name) / "config.json")) return fs::path(name);
  return run_root() / name;
}

RunConfig read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Exit{kConfigError, "config: cannot open " + path.string()};
  try {
    return pipeline::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Exit{kConfigError, "config: " + path.string() + ": " + e.what()};
  }
}

RunConfig default_config() {
  RunConfig cfg;
  cfg.synthetic = fcdata::SyntheticConfig::with_default_plant(16, 100, 200, 0.6, 7);
  return cfg;
}

/// Loads the config (explicit file, then the run's stored copy, then
/// defaults), applies flag overrides, validates it and stores it canonically.
RunConfig resolve_config(const Options& o, const fs::path& run_dir, fs::path& base_dir) {
  RunConfig cfg;
  base_dir = fs::current_path();
  if (!o.config.empty()) {
    cfg = read_config(o.config);
  } else if (fs::exists(run_dir / "config.json")) {
    cfg = read_config(run_dir / "config.json");
  } else {
    cfg = default_config();
  }
  if (!o.dataset.empty()) {
    cfg.dataset = fs::absolute(o.dataset).lexically_normal().string();
    cfg.synthetic.reset();
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.q) cfg.q = *o.q;
  if (o.alpha) cfg.alpha = *o.alpha;
  if (o.tau) cfg.step3.tau = *o.tau;
  if (o.folds) cfg.folds = *o.folds;
  if (o.epochs1) cfg.step1.epochs = *o.epochs1;
  if (o.epochs3) cfg.step3.epochs = *o.epochs3;
  if (!o.ablation.empty()) cfg.ablation = roiselect::ablation_from_name(o.ablation);
  cfg.validate();
  pipeline::write_text(run_dir / "config.json", pipeline::to_json(cfg).dump(2) + "\n");
  return cfg;
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw Exit{kMissingArtifact, what + " not found: " + p.string()};
}

sae::SaeModel load_checkpoint(const fs::path& run_dir, std::size_t r) {
  const fs::path p = run_dir / "checkpoints" / "sae.eagm";
  require_file(p, "SAE checkpoint (run `pretrain` first)");
  sae::SaeModel model = sae::SaeModel::load(p);
  if (model.roi_count() != r) {
    throw Exit{kRoiMismatch, "checkpoint was trained for R=" + std::to_string(model.roi_count()) +
                                 " but the dataset has R=" + std::to_string(r)};
  }
  return model;
}

std::string case_dir(const RunConfig& cfg) { return std::string(roiselect::ablation_name(cfg.ablation)); }

int cmd_synth(const Options& o) {
  const fs::path run_dir = resolve_run(o.run);
  fs::path base;
  RunConfig cfg = resolve_config(o, run_dir, base);
  if (!cfg.synthetic) throw Exit{kConfigError, "synthetic: config has no synthetic spec"};
  const auto subjects = fcdata::generate_cohort(*cfg.synthetic, o.workers);
  const fs::path out = o.out.empty() ? run_dir / "data" : fs::path(o.out);
  fcdata::save_dataset(subjects, out / "manifest.jsonl");
  std::cout << "wrote " << subjects.size() << " subjects (R=" << cfg.synthetic->r << ") to "
            << (out / "manifest.jsonl").string() << "\n";
  return kOk;
}

int cmd_pretrain(const Options& o) {
  const fs::path run_dir = resolve_run(o.run);
  fs::path base;
  RunConfig cfg = resolve_config(o, run_dir, base);
  const auto subjects = pipeline::load_subjects(cfg, base, o.workers);
  if (!o.sweep_q.empty()) {
    const auto qs = pipeline::parse_range(o.sweep_q);
    const auto data = pipeline::flatten_all(subjects);
    const double eval_qs[] = {0.1, 0.2, 0.3, 0.4, 0.5};
    const auto sweep = pipeline::sweep_q(cfg, data, data, qs, eval_qs, o.workers);
    for (std::size_t n = 0; n < qs.size(); ++n) {
      sweep.models[n].save(run_dir / "checkpoints" / ("sae_q" + pipeline::format_double(qs[n]) + ".eagm"));
    }
    pipeline::write_text(run_dir / "reports" / "q_sweep.csv", pipeline::sweep_csv(sweep.rows));
    std::printf("%6s %7s %12s %12s\n", "q", "eval_q", "masked_mse", "zero_mse");
    for (const auto& r : sweep.rows) {
      std::printf("%6.2f %7.2f %12.6f %12.6f\n", r.q, r.eval_q, r.error.model_mse, r.error.zero_mse);
    }
    return kOk;
  }
  const auto result = pipeline::pretrain(cfg, subjects);
  result.model.save(run_dir / "checkpoints" / "sae.eagm");
  pipeline::write_text(run_dir / "logs" / "pretrain.csv", pipeline::pretrain_log_csv(result.log));
  for (std::size_t l = 1; l <= result.model.depth(); ++l) {
    for (auto it = result.log.rbegin(); it != result.log.rend(); ++it) {
      if (it->layer != l) continue;
      std::printf("layer %zu: epochs %zu, rec_x %.6f, rec_h %.6f\n", l, it->epoch, it->rec_loss_x, it->rec_loss_h);
      break;
    }
  }
  return kOk;
}

int cmd_relevance(const Options& o) {
  const fs::path run_dir = resolve_run(o.run);
  fs::path base;
  RunConfig cfg = resolve_config(o, run_dir, base);
  const auto subjects = pipeline::load_subjects(cfg, base, o.workers);
  const sae::SaeModel model = load_checkpoint(run_dir, subjects.front().fc.rows());
  const auto rel = pipeline::compute_relevance(cfg, model, subjects, o.workers);
  lrp::save_tensors(run_dir / "relevance" / "relevance.eagr", rel.tensors);
  pipeline::write_text(run_dir / "relevance" / "repvectors.csv", pipeline::repvectors_csv(subjects, rel.reps));
  std::cout << "relevance for " << subjects.size() << " subjects written to " << (run_dir / "relevance").string()
            << "\n";
  return kOk;
}

int cmd_train(const Options& o) {
  const fs::path run_dir = resolve_run(o.run);
  fs::path base;
  RunConfig cfg = resolve_config(o, run_dir, base);
  const auto subjects = pipeline::load_subjects(cfg, base, o.workers);
  const std::size_t r = subjects.front().fc.rows();
  sae::SaeModel model;
  if (!roiselect::uses_svm(cfg.ablation)) model = load_checkpoint(run_dir, r);
  std::vector<roiselect::RepVectors> reps;
  if (roiselect::needs_relevance(cfg.ablation)) {
    const fs::path p = run_dir / "relevance" / "repvectors.csv";
    require_file(p, "representative vectors (run `relevance` first)");
    reps = pipeline::read_repvectors_csv(p, subjects);
    if (reps.front().rois() != r) throw Exit{kRoiMismatch, "representative vectors have a different R"};
  }

  const std::string name = case_dir(cfg);
  std::vector<std::string> fold_logs(cfg.folds);
  auto hook = [&](std::size_t fold, roiselect::DiagnosisModel& dm, const roiselect::Step3Result& res) {
    nn::save_layers(run_dir / "checkpoints" / ("step3_" + name + "_fold" + std::to_string(fold) + ".eagm"),
                    dm.layers());
    for (const auto& e : res.log) {
      fold_logs[fold] += std::to_string(fold) + "," + std::to_string(e.epoch) + "," +
                         pipeline::format_double(e.train_loss) + "," + pipeline::format_double(e.val_loss) + "\n";
    }
  };
  const auto report = pipeline::cross_validate(cfg, model, subjects, reps, o.workers, hook);

  const fs::path rep_dir = run_dir / "reports" / name;
  pipeline::write_text(rep_dir / "metrics.csv", pipeline::metrics_csv(report));
  pipeline::write_text(rep_dir / "predictions.csv", pipeline::predictions_csv(report, subjects));
  pipeline::write_text(rep_dir / "selections.csv", pipeline::selections_csv(report, subjects));
  if (!roiselect::uses_svm(cfg.ablation)) {
    std::string log = "fold,epoch,train_loss,val_loss\n";
    for (const auto& f : fold_logs) log += f;
    pipeline::write_text(run_dir / "logs" / ("train_" + name + ".csv"), log);
  }

  std::printf("case %s, %zu folds\n%6s %8s %8s %8s %8s\n", name.c_str(), cfg.folds, "fold", "auc", "acc", "sen",
              "spec");
  for (std::size_t f = 0; f < report.folds.size(); ++f) {
    const auto& m = report.folds[f];
    std::printf("%6zu %8.4f %8.4f %8.4f %8.4f\n", f, m.auc, m.acc, m.sen, m.spec);
  }
  const auto a = report.summary(&pipeline::FoldMetrics::auc), c = report.summary(&pipeline::FoldMetrics::acc);
  std::printf("AUC %.4f +- %.4f, ACC %.4f +- %.4f\n", a.mean, a.std, c.mean, c.std);

  if (!o.mcnemar_vs.empty()) {
    std::string base_run = o.mcnemar_vs, base_case;
    if (const auto colon = base_run.rfind(':'); colon != std::string::npos) {
      base_case = base_run.substr(colon + 1);
      base_run = base_run.substr(0, colon);
    }
    const fs::path base_dir = resolve_run(base_run);
    if (base_case.empty()) {
      require_file(base_dir / "config.json", "baseline run config");
      base_case = case_dir(read_config(base_dir / "config.json"));
    } else {
      base_case = std::string(roiselect::ablation_name(roiselect::ablation_from_name(base_case)));
    }
    const fs::path base_pred = base_dir / "reports" / base_case / "predictions.csv";
    require_file(base_pred, "baseline predictions");
    const auto mine = pipeline::read_predictions_csv(rep_dir / "predictions.csv");
    const auto theirs = pipeline::read_predictions_csv(base_pred);
    std::string csv = "baseline,b,c,chi2,p\n";
    try {
      const auto m = pipeline::compare_predictions(mine, theirs);
      csv += o.mcnemar_vs + "," + std::to_string(m.b) + "," + std::to_string(m.c) + "," +
             pipeline::format_double(m.chi2) + "," + pipeline::format_double(m.p) + "\n";
      std::printf("McNemar vs %s: b=%zu c=%zu chi2=%.4f p=%.4g\n", o.mcnemar_vs.c_str(), m.b, m.c, m.chi2, m.p);
    } catch (const Error& e) {
      if (e.code() != Errc::kNoDiscordantPairs) throw;
      csv += o.mcnemar_vs + ",0,0,nan,nan\n";
      std::printf("McNemar vs %s: no discordant pairs\n", o.mcnemar_vs.c_str());
    }
    pipeline::write_text(rep_dir / "mcnemar.csv", csv);
  }
  return kOk;
}

int cmd_analyze(const Options& o) {
  const fs::path run_dir = resolve_run(o.run);
  fs::path base;
  RunConfig cfg = resolve_config(o, run_dir, base);
  const fs::path rep_dir = run_dir / "reports" / case_dir(cfg);
  require_file(rep_dir / "selections.csv", "selections (run `train` first)");
  const auto table = pipeline::read_selections_csv(rep_dir / "selections.csv");
  const auto a = pipeline::analyze(table, cfg.cluster_cut, cfg.clusters);
  pipeline::write_text(rep_dir / "sr.csv", pipeline::sr_csv(a));
  pipeline::write_text(rep_dir / "sr_bands.csv", pipeline::bands_csv(a));
  pipeline::write_text(rep_dir / "dendrogram.json", a.dendrogram.to_json().dump(2) + "\n");
  pipeline::write_text(rep_dir / "subtypes.csv", pipeline::subtypes_csv(a));

  std::printf("%5s %8s %8s\n", "roi", "sr_asd", "sr_td");
  for (std::size_t r = 0; r < a.sr_asd.size(); ++r) std::printf("%5zu %8.3f %8.3f\n", r, a.sr_asd[r], a.sr_td[r]);
  std::printf("ASD high (SR > 0.75): %s\n", pipeline::join_indices(a.bands_asd.high).c_str());
  std::printf("ASD moderate (0.5 < SR <= 0.75): %s\n", pipeline::join_indices(a.bands_asd.moderate).c_str());
  std::printf("ASD subtypes: %zu clusters over %zu subjects\n", a.cluster_count, a.asd_ids.size());
  return kOk;
}

int exit_for(const Error& e) {
  switch (e.code()) {
    case Errc::kInvalidConfig:
    case Errc::kInvalidRatio:
    case Errc::kNonPositiveTemperature:
      return kConfigError;
    case Errc::kDiverged:
    case Errc::kNonFiniteLoss:
      return kDivergence;
    case Errc::kMissingFile:
    case Errc::kMissingRelevance:
    case Errc::kPrerequisiteNotTrained:
      return kMissingArtifact;
    default:
      return kFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eagrs: explainable ROI selection for FC-based diagnosis"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--run", o.run, "Run name under $EAGRS_RUN_ROOT (default ./runs), or a run directory");
    sub->add_option("--config", o.config, "Config JSON; defaults to the run's stored config.json");
    sub->add_option("--dataset", o.dataset, "Dataset manifest (JSONL); replaces the synthetic spec");
    sub->add_option("--seed", o.seed, "Root seed");
    sub->add_option("--q", o.q, "ROI masking ratio");
    sub->add_option("--alpha", o.alpha, "Weight of the input reconstruction term");
    sub->add_option("--tau", o.tau, "Gumbel-softmax temperature");
    sub->add_option("--folds", o.folds, "Cross-validation folds");
    sub->add_option("--ablation", o.ablation, "Ablation case")->check(CLI::IsMember({"full", "I", "II", "III", "IV", "V", "VI"}));
    sub->add_option("--step1-epochs", o.epochs1, "Epochs per SAE layer");
    sub->add_option("--step3-epochs", o.epochs3, "Epochs for the selection/classifier stage");
    sub->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort with planted ROIs");
  add_common(synth);
  synth->add_option("--out", o.out, "Output directory (default <run>/data)");
  auto* pre = app.add_subcommand("pretrain", "Step 1: masked SAE pretraining");
  add_common(pre);
  pre->add_option("--sweep-q", o.sweep_q, "Masking-ratio sweep a:b:step");
  auto* rel = app.add_subcommand("relevance", "Step 2: relevance tensors and representative vectors");
  add_common(rel);
  auto* train = app.add_subcommand("train", "Step 3: k-fold training and evaluation");
  add_common(train);
  train->add_option("--mcnemar-vs", o.mcnemar_vs, "Baseline run for McNemar's test, as run[:case]");
  auto* analyze = app.add_subcommand("analyze", "Selection ratios and subtype clustering");
  add_common(analyze);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*pre) return cmd_pretrain(o);
    if (*rel) return cmd_relevance(o);
    if (*train) return cmd_train(o);
    if (*analyze) return cmd_analyze(o);
  } catch (const Exit& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
