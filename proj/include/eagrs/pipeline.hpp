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

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "eagrs/error.hpp"
#include "eagrs/eval/kfold.hpp"
#include "eagrs/eval/metrics.hpp"
#include "eagrs/eval/selection.hpp"
#include "eagrs/eval/svm.hpp"
#include "eagrs/eval/ward.hpp"
#include "eagrs/fcdata/dataset.hpp"
#include "eagrs/fcdata/synth.hpp"
#include "eagrs/lrp.hpp"
#include "eagrs/parallel.hpp"
#include "eagrs/roiselect.hpp"
#include "eagrs/sae.hpp"

namespace eagrs::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using fcdata::format_double;

// Sub-stream tags under the root seed.
inline constexpr std::uint64_t kStreamStep1 = 1;
inline constexpr std::uint64_t kStreamFolds = 2;
inline constexpr std::uint64_t kStreamStep3 = 3;
inline constexpr std::uint64_t kStreamInit = 4;

struct RunConfig {
  std::string dataset;                            // manifest path; empty when synthetic
  std::optional<fcdata::SyntheticConfig> synthetic;
  double q = 0.1;
  double alpha = 0.5;
  std::vector<double> hidden_fractions{1.5, 0.3};  // SAE widths as fractions of D
  sae::Step1Config step1{};
  roiselect::Step3Config step3{};
  std::size_t folds = 5;
  std::uint64_t seed = 7;
  roiselect::AblationCase ablation = roiselect::AblationCase::kFull;
  double lrp_epsilon = 1e-6;
  lrp::MeanAxis mean_axis = lrp::MeanAxis::kTarget;
  double cluster_cut = 0.3;
  std::size_t clusters = 0;  // nonzero overrides the height cut

  RunConfig() {
    step1.q = q;
    step1.alpha = alpha;
    step3.lr = 1e-4;
  }

  sae::Step1Config step1_config() const {
    sae::Step1Config c = step1;
    c.q = q;
    c.alpha = alpha;
    c.seed = RngStream(seed).split(kStreamStep1).next_u64();
    return c;
  }

  roiselect::Step3Config step3_config(std::size_t fold) const {
    roiselect::Step3Config c = step3;
    c.seed = RngStream(seed).split(kStreamStep3).split(fold).next_u64();
    return c;
  }

  std::vector<std::size_t> hidden_dims(std::size_t d) const {
    std::vector<std::size_t> out;
    for (double f : hidden_fractions) {
      out.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * static_cast<double>(d)))));
    }
    return out;
  }

  void validate() const {
    if (dataset.empty() && !synthetic) throw Error(Errc::kInvalidConfig, "dataset: no dataset path or synthetic spec");
    if (!(q >= 0.0 && q < 1.0)) throw Error(Errc::kInvalidConfig, "q: must be in [0,1)");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(Errc::kInvalidConfig, "alpha: must be in [0,1]");
    if (!(step3.tau > 0.0)) throw Error(Errc::kInvalidConfig, "tau: must be positive");
    if (folds < 3) throw Error(Errc::kInvalidConfig, "folds: need at least 3 (train/val/test)");
    if (hidden_fractions.empty()) throw Error(Errc::kInvalidConfig, "hidden_fractions: empty");
    if (synthetic) synthetic->validate();
  }
};

inline json synthetic_to_json(const fcdata::SyntheticConfig& s) {
  json planted = json::array();
  for (const auto& g : s.planted) planted.push_back({{"label", g.label}, {"rois", g.rois}});
  return {{"r", s.r},
          {"n_per_class", s.n_per_class},
          {"t", s.t},
          {"effect_size", s.effect_size},
          {"seed", s.seed},
          {"planted", planted},
          {"base_factors", s.base_factors},
          {"base_loading", s.base_loading},
          {"subject_jitter", s.subject_jitter}};
}

inline fcdata::SyntheticConfig synthetic_from_json(const json& j) {
  fcdata::SyntheticConfig s;
  s.r = j.value("r", s.r);
  s.n_per_class = j.value("n_per_class", s.n_per_class);
  s.t = j.value("t", s.t);
  s.effect_size = j.value("effect_size", s.effect_size);
  s.seed = j.value("seed", s.seed);
  s.base_factors = j.value("base_factors", s.base_factors);
  s.base_loading = j.value("base_loading", s.base_loading);
  s.subject_jitter = j.value("subject_jitter", s.subject_jitter);
  if (j.contains("planted")) {
    for (const auto& g : j.at("planted")) {
      s.planted.push_back({g.at("label").get<int>(), g.at("rois").get<std::vector<std::size_t>>()});
    }
  } else {
    s = fcdata::SyntheticConfig::with_default_plant(s.r, s.n_per_class, s.t, s.effect_size, s.seed);
  }
  return s;
}

inline json to_json(const RunConfig& c) {
  json j = {
      {"dataset", c.dataset},
      {"synthetic", c.synthetic ? synthetic_to_json(*c.synthetic) : json(nullptr)},
      {"q", c.q},
      {"alpha", c.alpha},
      {"hidden_fractions", c.hidden_fractions},
      {"step1",
       {{"lr", c.step1.lr}, {"batch", c.step1.batch}, {"epochs", c.step1.epochs},
        {"weight_decay", c.step1.weight_decay}, {"patience", c.step1.patience}}},
      {"step3",
       {{"lr", c.step3.lr}, {"batch", c.step3.batch}, {"epochs", c.step3.epochs},
        {"weight_decay", c.step3.weight_decay}, {"patience", c.step3.patience}}},
      {"tau", c.step3.tau},
      {"folds", c.folds},
      {"seed", c.seed},
      {"ablation", std::string(roiselect::ablation_name(c.ablation))},
      {"lrp_epsilon", c.lrp_epsilon},
      {"mean_axis", c.mean_axis == lrp::MeanAxis::kTarget ? "target" : "source"},
      {"cluster_cut", c.cluster_cut},
      {"clusters", c.clusters},
  };
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline RunConfig from_json(const json& j) {
  static const char* kKnown[] = {"dataset", "synthetic", "q", "alpha", "hidden_fractions", "step1", "step3", "tau",
                                 "folds", "seed", "ablation", "lrp_epsilon", "mean_axis", "cluster_cut", "clusters"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
      throw Error(Errc::kInvalidConfig, key + ": unknown config field");
    }
  }
  RunConfig c;
  try {
    c.dataset = j.value("dataset", c.dataset);
    if (j.contains("synthetic") && !j.at("synthetic").is_null()) c.synthetic = synthetic_from_json(j.at("synthetic"));
    c.q = j.value("q", c.q);
    c.alpha = j.value("alpha", c.alpha);
    c.hidden_fractions = j.value("hidden_fractions", c.hidden_fractions);
    if (j.contains("step1")) {
      const auto& s = j.at("step1");
      c.step1.lr = s.value("lr", c.step1.lr);
      c.step1.batch = s.value("batch", c.step1.batch);
      c.step1.epochs = s.value("epochs", c.step1.epochs);
      c.step1.weight_decay = s.value("weight_decay", c.step1.weight_decay);
      c.step1.patience = s.value("patience", c.step1.patience);
    }
    if (j.contains("step3")) {
      const auto& s = j.at("step3");
      c.step3.lr = s.value("lr", c.step3.lr);
      c.step3.batch = s.value("batch", c.step3.batch);
      c.step3.epochs = s.value("epochs", c.step3.epochs);
      c.step3.weight_decay = s.value("weight_decay", c.step3.weight_decay);
      c.step3.patience = s.value("patience", c.step3.patience);
    }
    c.step3.tau = j.value("tau", c.step3.tau);
    c.folds = j.value("folds", c.folds);
    c.seed = j.value("seed", c.seed);
    c.ablation = roiselect::ablation_from_name(j.value("ablation", std::string("full")));
    c.lrp_epsilon = j.value("lrp_epsilon", c.lrp_epsilon);
    const std::string axis = j.value("mean_axis", std::string("target"));
    if (axis != "target" && axis != "source") throw Error(Errc::kInvalidConfig, "mean_axis: target or source");
    c.mean_axis = axis == "target" ? lrp::MeanAxis::kTarget : lrp::MeanAxis::kSource;
    c.cluster_cut = j.value("cluster_cut", c.cluster_cut);
    c.clusters = j.value("clusters", c.clusters);
  } catch (const json::exception& e) {
    throw Error(Errc::kInvalidConfig, e.what());
  }
  return c;
}

inline std::vector<fcdata::Subject> load_subjects(const RunConfig& cfg, const fs::path& base_dir,
                                                  std::size_t workers) {
  if (!cfg.dataset.empty()) {
    fs::path p(cfg.dataset);
    if (p.is_relative()) p = base_dir / p;
    if (!fs::exists(p)) throw Error(Errc::kInvalidConfig, "dataset: file not found: " + p.string());
    return fcdata::load_dataset(p);
  }
  if (!cfg.synthetic) throw Error(Errc::kInvalidConfig, "dataset: no dataset path or synthetic spec");
  return fcdata::generate_cohort(*cfg.synthetic, workers);
}

inline sae::FlatDataset flatten_all(const std::vector<fcdata::Subject>& subjects) {
  sae::FlatDataset out;
  out.reserve(subjects.size());
  for (const auto& s : subjects) out.push_back(flatten_upper(s.fc));
  return out;
}

struct PretrainResult {
  sae::SaeModel model;
  std::vector<sae::EpochLog> log;
};

/// Step 1 on every subject; labels are not used.
inline PretrainResult pretrain(const RunConfig& cfg, const std::vector<fcdata::Subject>& subjects) {
  if (subjects.empty()) throw Error(Errc::kInvalidConfig, "dataset: no subjects");
  const sae::FlatDataset data = flatten_all(subjects);
  const std::size_t d = data.front().size();
  RngStream init = RngStream(cfg.seed).split(kStreamInit);
  const auto hidden = cfg.hidden_dims(d);
  PretrainResult out{sae::SaeModel(d, hidden, init), {}};
  out.log = sae::train_sae(out.model, data, cfg.step1_config());
  return out;
}

inline constexpr std::uint64_t kStreamSweepEval = 5;

struct SweepRow {
  double q = 0.0;
  double eval_q = 0.0;
  sae::MaskedReconstruction error;
};

struct SweepResult {
  std::vector<sae::SaeModel> models;  // one per q
  std::vector<SweepRow> rows;
};

/// Pretrains one SAE per masking ratio and scores each on masked-entry
/// reconstruction at every ratio in `eval_qs`. Evaluation masks share one
/// seed across models so the comparison is paired.
inline SweepResult sweep_q(const RunConfig& cfg, const sae::FlatDataset& train, const sae::FlatDataset& eval_data,
                           std::span<const double> qs, std::span<const double> eval_qs, std::size_t workers) {
  SweepResult out;
  out.models.resize(qs.size());
  std::vector<std::vector<SweepRow>> rows(qs.size());
  const std::uint64_t eval_seed = RngStream(cfg.seed).split(kStreamSweepEval).next_u64();
  parallel_for(qs.size(), workers, [&](std::size_t n) {
    RunConfig c = cfg;
    c.q = qs[n];
    RngStream init = RngStream(c.seed).split(kStreamInit);
    sae::SaeModel model(train.front().size(), c.hidden_dims(train.front().size()), init);
    sae::train_sae(model, train, c.step1_config());
    for (double e : eval_qs) rows[n].push_back({qs[n], e, sae::masked_reconstruction_error(model, eval_data, e, eval_seed)});
    out.models[n] = std::move(model);
  });
  for (auto& r : rows) out.rows.insert(out.rows.end(), r.begin(), r.end());
  return out;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "q,eval_q,masked_mse,zero_mse,entries\n";
  for (const auto& r : rows) {
    out += format_double(r.q) + "," + format_double(r.eval_q) + "," + format_double(r.error.model_mse) + "," +
           format_double(r.error.zero_mse) + "," + std::to_string(r.error.entries) + "\n";
  }
  return out;
}

/// "a:b:step", inclusive of b up to rounding.
inline std::vector<double> parse_range(const std::string& spec) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = spec.find(':', start);
    parts.push_back(fcdata::parse_double(spec.substr(start, pos - start), "--sweep-q"));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
    throw Error(Errc::kInvalidConfig, "sweep-q: expected a:b:step with a <= b and step > 0");
  }
  std::vector<double> out;
  const auto steps = static_cast<std::size_t>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  for (std::size_t k = 0; k <= steps; ++k) {
    // Round to 12 decimals so 0.1 * 3 prints as 0.3.
    out.push_back(std::round((parts[0] + static_cast<double>(k) * parts[2]) * 1e12) / 1e12);
  }
  return out;
}

struct RelevanceResult {
  std::vector<lrp::RelevanceTensor> tensors;
  std::vector<roiselect::RepVectors> reps;
};

/// Step 2: relevance tensors and representative vectors, parallel across subjects.
inline RelevanceResult compute_relevance(const RunConfig& cfg, const sae::SaeModel& model,
                                         const std::vector<fcdata::Subject>& subjects, std::size_t workers) {
  RelevanceResult out{std::vector<lrp::RelevanceTensor>(subjects.size()),
                      std::vector<roiselect::RepVectors>(subjects.size())};
  const auto rule = lrp::RelevanceRule::eps(cfg.lrp_epsilon);
  parallel_for(subjects.size(), workers, [&](std::size_t i) {
    out.tensors[i] = lrp::global_relevance(model, subjects[i].fc, rule, 1, subjects[i].id);
    out.reps[i] = roiselect::representative_vectors(out.tensors[i], cfg.mean_axis);
  });
  return out;
}

struct FoldMetrics {
  double auc = 0.0, acc = 0.0, sen = 0.0, spec = 0.0;
};

struct SubjectResult {
  std::size_t fold = 0;
  double score = 0.0;
  int predicted = 0;
  Vector selection;
};

struct CvReport {
  roiselect::AblationCase ablation = roiselect::AblationCase::kFull;
  std::vector<FoldMetrics> folds;
  std::vector<SubjectResult> subjects;  // indexed like the input cohort

  eval::Summary summary(double FoldMetrics::*field) const {
    std::vector<double> v;
    for (const auto& f : folds) v.push_back(f.*field);
    return eval::summarize(v);
  }
};

inline FoldMetrics fold_metrics(std::span<const std::size_t> idx, const std::vector<SubjectResult>& results,
                                std::span<const int> labels) {
  std::vector<double> scores;
  std::vector<int> preds, ys;
  for (std::size_t i : idx) {
    scores.push_back(results[i].score);
    preds.push_back(results[i].predicted);
    ys.push_back(labels[i]);
  }
  const auto cm = eval::confusion_metrics(preds, ys);
  return {eval::roc_auc(scores, ys), cm.acc, cm.sen, cm.spec};
}

namespace detail {

inline std::vector<Vector> svm_features(const std::vector<roiselect::RepVectors>& reps, std::span<const std::size_t> idx,
                                        bool use_fv) {
  std::vector<Vector> out;
  for (std::size_t i : idx) out.push_back(use_fv ? reps[i].fv : reps[i].fc);
  return out;
}

inline std::vector<int> pick(std::span<const int> labels, std::span<const std::size_t> idx) {
  std::vector<int> out;
  for (std::size_t i : idx) out.push_back(labels[i]);
  return out;
}

}  // namespace detail

/// Cases II and III: linear SVM on fv or fc, C chosen on the validation fold.
inline void run_svm_fold(const std::vector<roiselect::RepVectors>& reps, std::span<const int> labels,
                         const eval::FoldSplit& split, bool use_fv, std::size_t fold,
                         std::vector<SubjectResult>& results) {
  const auto xtr = detail::svm_features(reps, split.train, use_fv);
  const auto ytr = detail::pick(labels, split.train);
  const auto xval = detail::svm_features(reps, split.val, use_fv);
  const auto yval = detail::pick(labels, split.val);
  double best_auc = -1.0;
  double best_c = 1.0;
  for (double c : {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3}) {
    const auto svm = eval::LinearSvm::fit(xtr, ytr, c);
    std::vector<double> scores;
    for (const auto& x : xval) scores.push_back(svm.decision(x));
    const double auc = eval::roc_auc(scores, yval);
    if (auc > best_auc) {
      best_auc = auc;
      best_c = c;
    }
  }
  const auto svm = eval::LinearSvm::fit(xtr, ytr, best_c);
  for (std::size_t i : split.test) {
    const double s = svm.decision(use_fv ? reps[i].fv : reps[i].fc);
    results[i] = {fold, s, s >= 0.0 ? 1 : 0, Vector(reps[i].rois(), 1.0)};
  }
}

/// Optional per-fold hook, e.g. to checkpoint the trained model.
using FoldHook = std::function<void(std::size_t fold, roiselect::DiagnosisModel&, const roiselect::Step3Result&)>;

/// k-fold rotation: fold f is the test set, fold f+1 validation, the rest
/// training. Folds run in parallel; `reps` may be empty for case I.
inline CvReport cross_validate(const RunConfig& cfg, const sae::SaeModel& model,
                               const std::vector<fcdata::Subject>& subjects,
                               const std::vector<roiselect::RepVectors>& reps, std::size_t workers = 1,
                               const FoldHook& hook = {}) {
  const auto labels = fcdata::labels_of(subjects);
  const auto plan = eval::stratified_kfold(labels, cfg.folds, RngStream(cfg.seed).split(kStreamFolds).next_u64());
  CvReport report;
  report.ablation = cfg.ablation;
  report.subjects.resize(subjects.size());
  report.folds.resize(cfg.folds);
  if (roiselect::needs_relevance(cfg.ablation) && reps.size() != subjects.size()) {
    throw Error(Errc::kMissingRelevance, "representative vectors do not cover the cohort");
  }

  std::vector<Vector> flat;
  flat.reserve(subjects.size());
  for (const auto& s : subjects) flat.push_back(flatten_upper(s.fc));
  std::vector<roiselect::Sample> samples(subjects.size());
  for (std::size_t i = 0; i < subjects.size(); ++i) samples[i] = {&flat[i], reps.empty() ? nullptr : &reps[i], labels[i]};

  parallel_for(cfg.folds, workers, [&](std::size_t fold) {
    const auto split = plan.split(fold);
    if (roiselect::uses_svm(cfg.ablation)) {
      run_svm_fold(reps, labels, split, cfg.ablation == roiselect::AblationCase::kII, fold, report.subjects);
    } else {
      const auto s3 = cfg.step3_config(fold);
      RngStream init = RngStream(s3.seed).split(kStreamInit);
      roiselect::DiagnosisModel dm(model, cfg.ablation, s3.tau, init);
      const auto result = roiselect::train_step3(dm, samples, split.train, split.val, s3);
      for (std::size_t i : split.test) {
        const auto p = dm.predict(samples[i]);
        report.subjects[i] = {fold, p.score, p.label, p.selection};
      }
      if (hook) hook(fold, dm, result);
    }
    report.folds[fold] = fold_metrics(split.test, report.subjects, labels);
  });
  return report;
}

// ---------------------------------------------------------------------------
// Artifact files

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  out << text;
}

inline std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kMissingFile, path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

inline std::string csv_row(std::initializer_list<std::string> cells) {
  std::string out;
  for (const auto& c : cells) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out;
}

inline std::string pretrain_log_csv(const std::vector<sae::EpochLog>& log) {
  std::string out = "layer,epoch,rec_loss_x,rec_loss_h,objective\n";
  for (const auto& e : log) {
    out += csv_row({std::to_string(e.layer), std::to_string(e.epoch), format_double(e.rec_loss_x),
                    format_double(e.rec_loss_h), format_double(e.objective)}) + "\n";
  }
  return out;
}

inline std::string repvectors_csv(const std::vector<fcdata::Subject>& subjects,
                                  const std::vector<roiselect::RepVectors>& reps) {
  const std::size_t r = reps.empty() ? 0 : reps.front().rois();
  std::string out = "id";
  for (std::size_t k = 0; k < r; ++k) out += ",fv_" + std::to_string(k);
  for (std::size_t k = 0; k < r; ++k) out += ",fc_" + std::to_string(k);
  out += '\n';
  for (std::size_t i = 0; i < reps.size(); ++i) {
    out += subjects[i].id;
    for (double v : reps[i].fv) out += "," + format_double(v);
    for (double v : reps[i].fc) out += "," + format_double(v);
    out += '\n';
  }
  return out;
}

/// Reads the cache written by repvectors_csv, ordered like `subjects`.
inline std::vector<roiselect::RepVectors> read_repvectors_csv(const fs::path& path,
                                                              const std::vector<fcdata::Subject>& subjects) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw Error(Errc::kParseError, path.string() + ":1:1: empty file");
  const std::size_t cols = fcdata::split_csv_line(lines.front()).size();
  if (cols < 3 || (cols - 1) % 2 != 0) throw Error(Errc::kParseError, path.string() + ":1:1: bad header");
  const std::size_t r = (cols - 1) / 2;
  std::map<std::string, roiselect::RepVectors> by_id;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto cells = fcdata::split_csv_line(lines[n]);
    const std::string where = path.string() + ":" + std::to_string(n + 1);
    if (cells.size() != cols) throw Error(Errc::kParseError, where + ": expected " + std::to_string(cols) + " columns");
    roiselect::RepVectors rv;
    for (std::size_t k = 0; k < r; ++k) rv.fv.push_back(fcdata::parse_double(cells[1 + k], where));
    for (std::size_t k = 0; k < r; ++k) rv.fc.push_back(fcdata::parse_double(cells[1 + r + k], where));
    by_id[std::string(cells[0])] = std::move(rv);
  }
  std::vector<roiselect::RepVectors> out;
  for (const auto& s : subjects) {
    auto it = by_id.find(s.id);
    if (it == by_id.end()) throw Error(Errc::kMissingRelevance, "no representative vectors for " + s.id);
    out.push_back(it->second);
  }
  return out;
}

inline std::string metrics_csv(const CvReport& rep) {
  std::string out = "fold,auc,acc,sen,spec\n";
  for (std::size_t f = 0; f < rep.folds.size(); ++f) {
    const auto& m = rep.folds[f];
    out += csv_row({std::to_string(f), format_double(m.auc), format_double(m.acc), format_double(m.sen),
                    format_double(m.spec)}) + "\n";
  }
  const auto a = rep.summary(&FoldMetrics::auc), c = rep.summary(&FoldMetrics::acc),
             se = rep.summary(&FoldMetrics::sen), sp = rep.summary(&FoldMetrics::spec);
  out += csv_row({"mean", format_double(a.mean), format_double(c.mean), format_double(se.mean),
                  format_double(sp.mean)}) + "\n";
  out += csv_row({"std", format_double(a.std), format_double(c.std), format_double(se.std), format_double(sp.std)}) +
         "\n";
  return out;
}

inline std::string predictions_csv(const CvReport& rep, const std::vector<fcdata::Subject>& subjects) {
  std::string out = "id,label,fold,score,predicted\n";
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto& s = rep.subjects[i];
    out += csv_row({subjects[i].id, std::to_string(subjects[i].label), std::to_string(s.fold), format_double(s.score),
                    std::to_string(s.predicted)}) + "\n";
  }
  return out;
}

inline std::string selections_csv(const CvReport& rep, const std::vector<fcdata::Subject>& subjects) {
  const std::size_t r = subjects.empty() ? 0 : subjects.front().fc.rows();
  std::string out = "id,label,predicted";
  for (std::size_t k = 0; k < r; ++k) out += ",roi_" + std::to_string(k);
  out += '\n';
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto& s = rep.subjects[i];
    out += subjects[i].id + "," + std::to_string(subjects[i].label) + "," + std::to_string(s.predicted);
    for (double g : s.selection) out += g >= 0.5 ? ",1" : ",0";
    out += '\n';
  }
  return out;
}

struct SelectionTable {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<int> predicted;
  std::vector<Vector> selections;
};

inline SelectionTable read_selections_csv(const fs::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw Error(Errc::kParseError, path.string() + ":1:1: empty file");
  const std::size_t cols = fcdata::split_csv_line(lines.front()).size();
  if (cols < 4) throw Error(Errc::kParseError, path.string() + ":1:1: bad header");
  SelectionTable t;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto cells = fcdata::split_csv_line(lines[n]);
    const std::string where = path.string() + ":" + std::to_string(n + 1);
    if (cells.size() != cols) throw Error(Errc::kParseError, where + ": expected " + std::to_string(cols) + " columns");
    t.ids.emplace_back(cells[0]);
    t.labels.push_back(static_cast<int>(fcdata::parse_double(cells[1], where)));
    t.predicted.push_back(static_cast<int>(fcdata::parse_double(cells[2], where)));
    Vector sel;
    for (std::size_t k = 3; k < cols; ++k) sel.push_back(fcdata::parse_double(cells[k], where));
    t.selections.push_back(std::move(sel));
  }
  return t;
}

struct PredictionTable {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<int> predicted;
};

inline PredictionTable read_predictions_csv(const fs::path& path) {
  const auto lines = read_lines(path);
  PredictionTable t;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto cells = fcdata::split_csv_line(lines[n]);
    const std::string where = path.string() + ":" + std::to_string(n + 1);
    if (cells.size() != 5) throw Error(Errc::kParseError, where + ": expected 5 columns");
    t.ids.emplace_back(cells[0]);
    t.labels.push_back(static_cast<int>(fcdata::parse_double(cells[1], where)));
    t.predicted.push_back(static_cast<int>(fcdata::parse_double(cells[4], where)));
  }
  return t;
}

/// McNemar between two prediction tables, matched by subject id.
inline eval::McNemarResult compare_predictions(const PredictionTable& a, const PredictionTable& b) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < b.ids.size(); ++i) index[b.ids[i]] = i;
  std::vector<int> pa, pb, y;
  for (std::size_t i = 0; i < a.ids.size(); ++i) {
    auto it = index.find(a.ids[i]);
    if (it == index.end()) throw Error(Errc::kLengthMismatch, "subject " + a.ids[i] + " missing from baseline");
    pa.push_back(a.predicted[i]);
    pb.push_back(b.predicted[it->second]);
    y.push_back(a.labels[i]);
  }
  if (pa.size() != b.ids.size()) throw Error(Errc::kLengthMismatch, "runs cover different cohorts");
  return eval::mcnemar(pa, pb, y);
}

// ---------------------------------------------------------------------------
// Selection analysis

struct Analysis {
  Vector sr_asd;
  Vector sr_td;
  eval::SrBands bands_asd;
  eval::SrBands bands_td;
  std::vector<std::string> asd_ids;
  eval::Dendrogram dendrogram;
  std::vector<int> clusters;  // per ASD subject
  std::size_t cluster_count = 0;
};

/// SR per group, SR bands, and Ward subtypes of the ASD selection vectors.
inline Analysis analyze(const SelectionTable& t, double cut, std::size_t clusters) {
  Analysis a;
  a.sr_asd = eval::selection_ratio(t.selections, t.labels, fcdata::kLabelASD);
  a.sr_td = eval::selection_ratio(t.selections, t.labels, fcdata::kLabelTD);
  a.bands_asd = eval::sr_bands(a.sr_asd);
  a.bands_td = eval::sr_bands(a.sr_td);
  std::vector<Vector> feats;
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    if (t.labels[i] != fcdata::kLabelASD) continue;
    a.asd_ids.push_back(t.ids[i]);
    feats.push_back(t.selections[i]);
  }
  a.dendrogram = eval::ward_cluster(feats);
  a.clusters = clusters > 0 ? a.dendrogram.cut_by_count(clusters) : a.dendrogram.cut_by_normalized_height(cut);
  for (int c : a.clusters) a.cluster_count = std::max(a.cluster_count, static_cast<std::size_t>(c) + 1);
  return a;
}

inline std::string sr_csv(const Analysis& a) {
  std::string out = "roi,sr_asd,sr_td\n";
  for (std::size_t r = 0; r < a.sr_asd.size(); ++r) {
    out += csv_row({std::to_string(r), format_double(a.sr_asd[r]), format_double(a.sr_td[r])}) + "\n";
  }
  return out;
}

inline std::string join_indices(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t x : v) out += (out.empty() ? "" : " ") + std::to_string(x);
  return out;
}

inline std::string bands_csv(const Analysis& a) {
  std::string out = "group,band,rois\n";
  out += "asd,moderate," + join_indices(a.bands_asd.moderate) + "\n";
  out += "asd,high," + join_indices(a.bands_asd.high) + "\n";
  out += "td,moderate," + join_indices(a.bands_td.moderate) + "\n";
  out += "td,high," + join_indices(a.bands_td.high) + "\n";
  return out;
}

inline std::string subtypes_csv(const Analysis& a) {
  std::string out = "id,cluster\n";
  for (std::size_t i = 0; i < a.asd_ids.size(); ++i) out += a.asd_ids[i] + "," + std::to_string(a.clusters[i]) + "\n";
  return out;
}

}  // namespace eagrs::pipeline
