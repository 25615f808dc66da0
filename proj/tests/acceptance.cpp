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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "eagrs/eval/kfold.hpp"
#include "eagrs/eval/metrics.hpp"
#include "eagrs/eval/selection.hpp"
#include "eagrs/eval/ward.hpp"
#include "eagrs/pipeline.hpp"
#include "oracles.hpp"

namespace {

namespace fs = std::filesystem;
using namespace eagrs;
using pipeline::RunConfig;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

bool run_criterion(int n, const char* name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs > limit_s) {
    o.pass = false;
    o.detail += "; over time limit " + fmt("%.0f s", limit_s);
  }
  std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str(), secs);
  std::fflush(stdout);
  return o.pass;
}

// ---------------------------------------------------------------------------

Outcome lrp_conservation() {
  double worst_zero = 0.0, worst_eps = 0.0;
  const int nets = 120;
  for (int seed = 0; seed < nets; ++seed) {
    for (bool bias : {false, true}) {
      RngStream rng(static_cast<std::uint64_t>(seed) * 2 + (bias ? 1 : 0));
      const auto layers = testing::random_net(rng, bias);
      const auto path = testing::path_of(layers);
      const Vector x = testing::random_vector(rng, layers.front().in_dim());
      const auto trace = lrp::trace_forward(path, x);
      const std::size_t unit = rng.uniform_index(trace.output.size());
      Vector seed_rel(trace.output.size(), 0.0);
      seed_rel[unit] = trace.output[unit];
      if (!bias) {
        const Vector rel = lrp::propagate(path, trace, seed_rel, lrp::RelevanceRule::zero());
        worst_zero = std::max(worst_zero, std::abs(testing::sum(rel) - trace.output[unit]));
      } else {
        const Vector rel = lrp::propagate(path, trace, seed_rel, lrp::RelevanceRule::eps(1e-6));
        worst_eps = std::max(worst_eps, std::abs(testing::sum(rel) - testing::absorption_oracle(layers, x, unit, 1e-6)));
      }
    }
  }
  return {worst_zero < 1e-9 && worst_eps < 1e-7,
          std::to_string(nets) + " nets each, zero-rule max error " + fmt("%.2e", worst_zero) +
              ", eps-rule vs absorption max error " + fmt("%.2e", worst_eps)};
}

/// Level-wise SAE objective gradients on a small random model. Level 1
/// retries inputs until no SELU pre-activation sits on its kink.
double sae_gradient_error(std::uint64_t seed) {
  RngStream rng(seed);
  const std::size_t r = 5;
  const std::size_t hidden[] = {6 + rng.uniform_index(6), 2 + rng.uniform_index(4)};
  sae::SaeModel m(upper_dim(r), hidden, rng);
  for (auto* l : {&m.encoder(0), &m.encoder(1), &m.generator(0), &m.generator(1)})
    for (double& b : l->bias()) b = rng.uniform(-0.3, 0.3);
  m.mark_trained(0);
  const double alpha = rng.uniform();
  double worst = 0.0;
  for (std::size_t level : {1, 2}) {
    Vector x, masked;
    for (int attempt = 0; attempt < 100; ++attempt) {
      x = flatten_upper(testing::random_fc(rng, r));
      masked = fcdata::apply_mask_flat(x, r, fcdata::sample_mask(r, 0.2, rng));
      m.encoder(0).forward(masked);
      bool clear = true;
      for (double z : m.encoder(0).cached_pre()) clear = clear && std::abs(z) > 1e-3;
      if (clear) break;
    }
    auto& enc = m.encoder(level - 1);
    auto& gen = m.generator(level - 1);
    enc.zero_grad();
    gen.zero_grad();
    sae::layer_objective(m, x, masked, level, alpha, true);
    auto blocks = enc.params();
    const auto g = gen.params();
    blocks.insert(blocks.end(), g.begin(), g.end());
    const auto res = nn::gradient_check_blocks(
        blocks, [&] { return sae::layer_objective(m, x, masked, level, alpha, false).objective; }, 1e-4,
        nn::Stencil::kFourPoint);
    worst = std::max(worst, res.max_rel_error);
  }
  return worst;
}

Outcome gradient_fidelity() {
  double worst_sae = 0.0, worst_diag = 0.0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    worst_sae = std::max(worst_sae, sae_gradient_error(seed));
    // psi (merge, dense, gate with frozen noise), encoder path and C together.
    worst_diag = std::max(worst_diag, testing::end_to_end_error(roiselect::AblationCase::kFull, seed));
  }
  return {worst_sae < 1e-5 && worst_diag < 1e-5,
          std::to_string(seeds) + " seeds, SAE E/G max rel error " + fmt("%.2e", worst_sae) +
              ", psi+E+C max rel error " + fmt("%.2e", worst_diag)};
}

Outcome algorithm_oracles() {
  double worst = 0.0;
  std::size_t rep_mismatch = 0;
  const int toys = 20;
  for (int s = 0; s < toys; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    const auto m = testing::toy_sae(6, {8, 4}, 500 + seed);
    RngStream rng(seed);
    const Matrix fc = testing::random_fc(rng, 6);
    for (std::size_t r = 0; r < 6; ++r) {
      const Matrix fast = lrp::relevance_for_seed(m, fc, r);
      const Matrix brute = testing::brute_relevance_for_seed(m, fc, r);
      for (std::size_t k = 0; k < 36; ++k) worst = std::max(worst, std::abs(fast.data()[k] - brute.data()[k]));
    }
    const auto t = lrp::global_relevance(m, fc);
    const auto got = roiselect::representative_vectors(t);
    const auto want = testing::brute_rep(t);
    if (got.fv != want.fv || got.fc != want.fc) ++rep_mismatch;
  }
  return {worst <= 1e-12 && rep_mismatch == 0,
          std::to_string(toys) + " R=6 toys, seed-map max error " + fmt("%.2e", worst) + ", representative vector " +
              "mismatches " + std::to_string(rep_mismatch)};
}

// ---------------------------------------------------------------------------
// Synthetic cohort R=16, N=200, T=200, effect 0.6, cohort seed 7.

RunConfig synthetic_config(std::uint64_t root_seed) {
  RunConfig cfg;
  cfg.synthetic = fcdata::SyntheticConfig::with_default_plant(16, 100, 200, 0.6, 7);
  cfg.seed = root_seed;
  return cfg;
}

struct SeedRun {
  double full = 0.0, case_i = 0.0, case_ii = 0.0;
  pipeline::CvReport full_report;
};

const std::vector<fcdata::Subject>& cohort() {
  static const auto subjects = pipeline::load_subjects(synthetic_config(7), ".", 1);
  return subjects;
}

double mean_auc(const pipeline::CvReport& r) { return r.summary(&pipeline::FoldMetrics::auc).mean; }

pipeline::CvReport run_case(RunConfig cfg, roiselect::AblationCase c, const sae::SaeModel& model,
                            const std::vector<roiselect::RepVectors>& reps) {
  cfg.ablation = c;
  return pipeline::cross_validate(cfg, model, cohort(), reps);
}

std::map<std::uint64_t, SeedRun>& seed_runs() {
  static std::map<std::uint64_t, SeedRun> runs;
  return runs;
}

const SeedRun& full_run(std::uint64_t root_seed) {
  auto& runs = seed_runs();
  if (auto it = runs.find(root_seed); it != runs.end()) return it->second;
  const RunConfig cfg = synthetic_config(root_seed);
  const auto pre = pipeline::pretrain(cfg, cohort());
  const auto rel = pipeline::compute_relevance(cfg, pre.model, cohort(), 1);
  SeedRun out;
  out.full_report = run_case(cfg, roiselect::AblationCase::kFull, pre.model, rel.reps);
  out.full = mean_auc(out.full_report);
  out.case_i = mean_auc(run_case(cfg, roiselect::AblationCase::kI, pre.model, rel.reps));
  out.case_ii = mean_auc(run_case(cfg, roiselect::AblationCase::kII, pre.model, rel.reps));
  return runs[root_seed] = out;
}

Outcome planted_recovery() {
  const auto& subjects = cohort();
  const RunConfig cfg = synthetic_config(7);
  const auto& run = full_run(7);
  const auto& report = run.full_report;
  const double auc = run.full;
  std::vector<Vector> sel;
  for (const auto& s : report.subjects) sel.push_back(s.selection);
  const auto sr = eval::selection_ratio(sel, fcdata::labels_of(subjects), fcdata::kLabelASD);
  const auto& planted = cfg.synthetic->planted.front().rois;
  // Tie-pessimistic: a planted ROI counts only if at most k ROIs reach its SR.
  std::size_t hits = 0;
  for (std::size_t p : planted) {
    std::size_t at_least = 0;
    for (double v : sr) at_least += v >= sr[p] ? 1 : 0;
    hits += at_least <= planted.size() ? 1 : 0;
  }
  const double frac = static_cast<double>(hits) / static_cast<double>(planted.size());
  std::string srs;
  for (double v : sr) srs += fmt("%.2f ", v);
  return {auc >= 0.80 && frac >= 0.60, "test AUC " + fmt("%.4f", auc) + ", planted in top-" +
                                           std::to_string(planted.size()) + " " + std::to_string(hits) + "/" +
                                           std::to_string(planted.size()) + ", ASD SR [" + srs + "]"};
}

Outcome ablation_ordering() {
  int ordered = 0;
  std::string detail;
  const std::uint64_t seeds[] = {7, 8, 9, 10, 11};
  for (auto s : seeds) {
    const auto& r = full_run(s);
    const bool ok = r.full >= r.case_i && r.case_i >= r.case_ii;
    ordered += ok ? 1 : 0;
    detail += "seed " + std::to_string(s) + ": " + fmt("%.4f", r.full) + " / " + fmt("%.4f", r.case_i) + " / " +
              fmt("%.4f", r.case_ii) + (ok ? "" : " (out of order)") + "; ";
  }
  return {ordered * 2 > 5, std::to_string(ordered) + "/5 seeds with full >= I >= II by AUC; " + detail};
}

Outcome masking_sweep() {
  const auto& subjects = cohort();
  sae::FlatDataset train, held_out;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    (i % 5 == 0 ? held_out : train).push_back(flatten_upper(subjects[i].fc));
  }
  const RunConfig cfg = synthetic_config(7);
  const double qs[] = {0.1, 0.2};
  const double eval_qs[] = {0.1, 0.2, 0.3, 0.4, 0.5};
  const auto sweep = pipeline::sweep_q(cfg, train, held_out, qs, eval_qs, 1);
  pipeline::write_text("acceptance_q_sweep.csv", pipeline::sweep_csv(sweep.rows));
  bool ok = true;
  double worst_ratio = 0.0;
  for (const auto& row : sweep.rows) {
    ok = ok && row.error.entries > 0 && row.error.model_mse < row.error.zero_mse;
    worst_ratio = std::max(worst_ratio, row.error.model_mse / row.error.zero_mse);
  }
  return {ok, std::to_string(sweep.rows.size()) + " (q, eval q) pairs on held-out subjects, worst masked/zero MSE " +
                  "ratio " + fmt("%.4f", worst_ratio) + ", summary in acceptance_q_sweep.csv"};
}

Outcome statistical_utilities() {
  std::vector<std::string> failed;
  auto check = [&](bool ok, const char* what) {
    if (!ok) failed.push_back(what);
  };
  check(eval::roc_auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}) == 0.75, "auc example");
  check(eval::roc_auc(std::vector<double>{0.9, 0.4, 0.6, 0.1}, std::vector<int>{1, 1, 0, 0}) == 0.75, "auc pairs");
  check(eval::roc_auc(std::vector<double>{0.3, 0.3, 0.3, 0.3}, std::vector<int>{0, 1, 0, 1}) == 0.5, "auc ties");
  check(eval::roc_auc(std::vector<double>{0.1, 0.9, 0.2, 0.8}, std::vector<int>{0, 1, 0, 1}) == 1.0, "auc perfect");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(seed);
    std::vector<double> s(60);
    std::vector<int> y(60);
    for (std::size_t i = 0; i < 60; ++i) {
      s[i] = std::round(rng.uniform() * 20) / 20;
      y[i] = i % 3 == 0 ? 1 : 0;
    }
    check(std::abs(eval::roc_auc(s, y) - testing::pairwise_auc(s, y)) < 1e-12, "auc vs pairwise");
  }
  const auto cm = eval::confusion_metrics(std::vector<int>{1, 1, 1, 0, 0, 0, 1, 1}, std::vector<int>{1, 1, 1, 1, 0, 0, 0, 0});
  check(cm.acc == 5.0 / 8.0 && cm.sen == 0.75 && cm.spec == 0.5, "confusion");
  const std::vector<int> truth{1, 0, 1, 0, 1};
  const auto same = eval::confusion_metrics(truth, truth);
  const auto flipped = eval::confusion_metrics(std::vector<int>{0, 1, 0, 1, 0}, truth);
  check(same.acc == 1 && same.sen == 1 && same.spec == 1, "confusion identity");
  check(flipped.acc == 0 && flipped.sen == 0 && flipped.spec == 0, "confusion negation");
  const auto mc = eval::mcnemar_from_counts(10, 2);
  check(std::abs(mc.chi2 - 49.0 / 12.0) < 1e-12 && mc.p < 0.05, "mcnemar");
  check(std::abs(eval::mcnemar_from_counts(5, 5).chi2 - 0.1) < 1e-15, "mcnemar b=c");
  std::vector<int> labels(418, 1);
  labels.resize(418 + 478, 0);
  const auto plan = eval::stratified_kfold(labels, 5, 3);
  for (std::size_t f = 0; f < 5; ++f) {
    double pos = 0, neg = 0;
    for (auto i : plan.members(f)) (labels[i] ? pos : neg) += 1;
    check(std::abs(pos - 83.6) <= 1.0 && std::abs(neg - 95.6) <= 1.0, "fold balance");
  }
  const auto balanced = eval::stratified_kfold(std::vector<int>{1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}, 5, 1);
  for (std::size_t f = 0; f < 5; ++f) check(balanced.members(f).size() == 4, "10+10 folds");
  const auto three = eval::ward_cluster(std::vector<Vector>{{0.0}, {0.1}, {10.0}});
  check(three.cut_by_count(2) == std::vector<int>{0, 0, 1}, "ward three points");
  check(eval::ward_cluster(std::vector<Vector>{{2.0, 1.0}, {7.0, 3.0}, {2.0, 1.0}}).merges[0].height == 0.0, "ward duplicates");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(seed);
    std::vector<Vector> x;
    for (int i = 0; i < 8; ++i) x.push_back(testing::random_vector(rng, 3));
    const auto d = eval::ward_cluster(x);
    const auto want = testing::brute_ward_heights(x);
    for (std::size_t k = 0; k < want.size(); ++k) check(std::abs(d.merges[k].height - want[k]) < 1e-9, "ward heights");
  }
  std::string detail = "AUC, confusion, McNemar chi2 " + fmt("%.6f", mc.chi2) + ", fold balance, Ward heights";
  if (!failed.empty()) detail += "; failed: " + failed.front();
  return {failed.empty(), detail};
}

// ---------------------------------------------------------------------------
// Determinism through the command line.

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> artifacts(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

Outcome determinism() {
  const fs::path root = fs::absolute("acceptance_runs");
  fs::remove_all(root);
  fs::create_directories(root / "b");
  ::setenv("EAGRS_RUN_ROOT", root.c_str(), 1);
  RunConfig cfg;
  cfg.synthetic = fcdata::SyntheticConfig::with_default_plant(16, 20, 100, 0.6, 7);
  cfg.step1.epochs = 20;
  cfg.step3.epochs = 20;
  cfg.step1.batch = 10;
  cfg.step3.batch = 10;
  pipeline::write_text(root / "config.json", pipeline::to_json(cfg).dump(2));
  const std::vector<std::string> steps{"synth",     "pretrain --sweep-q 0.1:0.2:0.1", "pretrain", "relevance",
                                       "train",     "train --ablation II",            "train --ablation I --mcnemar-vs a:II",
                                       "analyze --ablation full"};
  auto run_all = [&](const std::string& run, const std::string& extra) {
    for (const auto& s : steps) {
      const std::string cmd = std::string(EAGRS_CLI_PATH) + " " + s + " --run " + run + extra + " > " +
                              (root / "log.txt").string() + " 2>&1";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) throw std::runtime_error("`" + s + "` failed: " + slurp(root / "log.txt"));
    }
  };
  run_all("a", " --config " + (root / "config.json").string());
  const auto first = artifacts(root / "a");
  // Same run again from its stored config, then a fresh run directory seeded
  // only with that config and four workers.
  run_all("a", "");
  const auto again = artifacts(root / "a");
  fs::copy_file(root / "a" / "config.json", root / "b" / "config.json");
  run_all("b", " --workers 4");
  const auto second = artifacts(root / "b");
  return {again == first && second == first,
          std::to_string(first.size()) + " artifacts; rerun in place " + (again == first ? "identical" : "DIFFERS") +
              ", fresh run with --workers 4 " + (second == first ? "identical" : "DIFFERS")};
}

}  // namespace

int main() {
  bool ok = true;
  ok &= run_criterion(1, "LRP conservation", 10, lrp_conservation);
  ok &= run_criterion(2, "gradient fidelity", 60, gradient_fidelity);
  ok &= run_criterion(3, "algorithm oracles", 30, algorithm_oracles);
  ok &= run_criterion(4, "planted-signal recovery", 15 * 60, planted_recovery);
  ok &= run_criterion(5, "ablation ordering", 0, ablation_ordering);
  ok &= run_criterion(6, "masking-ratio sweep", 10 * 60, masking_sweep);
  ok &= run_criterion(7, "statistical utilities", 5, statistical_utilities);
  ok &= run_criterion(8, "determinism", 0, determinism);
  std::printf("%s\n", ok ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
  return ok ? 0 : 1;
}
