// Copyright 2026 The AOPD Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Acceptance suite: one PASS/FAIL line per criterion. Run everything, or a
// single criterion with --criterion N. Exit status is nonzero if any selected
// criterion fails.

#include "aopd/config.hpp"
#include "aopd/oracle.hpp"
#include "aopd/random.hpp"
#include "aopd/rollout.hpp"
#include "aopd/trainer.hpp"
#include "aopd/verify.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

namespace {

using namespace aopd;
namespace fs = std::filesystem;

// Pinned thresholds.
constexpr int kSeeds = 5;
constexpr int kMajority = 4;
constexpr int kGradientInstances = 1000;
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr double kGradientSuiteSeconds = 60.0;
constexpr int kReductionSteps = 20;
constexpr double kGuidanceBound = 1.0;
constexpr double kOpdWitnessTeacher = 1e-4;
constexpr double kOpdWitnessStudent = 0.9;
constexpr double kOpdWitnessMin = 7.0;
constexpr int kEscapeSteps = 200;
constexpr double kEscapeLr = 0.5;
constexpr double kEscapeAopdMin = 0.5;
constexpr double kEscapeOpdMax = 0.01;
constexpr std::size_t kHeavyTailTokens = 10000;
constexpr int kZeroAdvInstances = 1000;
constexpr double kZeroAdvMax = 1e-6;
constexpr double kOpdNormMax = 1e-6;
constexpr double kGuidanceNormMin = 1e-3;
constexpr double kTvMin = 1e-3;
constexpr double kProgressSeconds = 300.0;
constexpr int kEntropyWindow = 30;
constexpr std::size_t kK1Samples = 100000;
constexpr double kK1Sigmas = 3.0;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string num(double v, const char* f = "%.4g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Weak-student default: V=16, m=2, uniform-init, 90 steps, batch 64, horizon 32.
TrainConfig weak_default(Objective o, int seed_index) {
  TrainConfig c;
  c.objective.objective = o;
  const std::uint64_t s = static_cast<std::uint64_t>(seed_index);
  c.seeds = {s, s + 100, s + 200};
  return c;
}

std::map<std::string, TrainResult>& run_cache() {
  static std::map<std::string, TrainResult> cache;
  return cache;
}

const TrainResult& run(const TrainConfig& c) {
  const std::string key = config_to_string(c);
  auto& cache = run_cache();
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, train(c)).first;
  return it->second;
}

TrainConfig with_beta(TrainConfig c, double beta) {
  c.objective.beta = beta;
  return c;
}

// 1 -------------------------------------------------------------------------
Verdict gradient_suite() {
  VerifyOptions o;
  o.instances = kGradientInstances;
  o.fd_step = kFdStep;
  o.rel_tol = kFdRelTol;
  const auto t0 = std::chrono::steady_clock::now();
  const VerifyReport r = verify_gradients(o);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& p : r.properties) {
    worst = std::max(worst, p.worst);
    checked += p.checked;
  }
  Verdict v{r.passed() && secs < kGradientSuiteSeconds, {}};
  v.detail = std::to_string(r.properties.size()) + " properties x " +
             std::to_string(kGradientInstances) + " instances, " +
             std::to_string(r.failures.size()) + " failures, worst rel err " + num(worst) +
             ", " + num(secs, "%.2f") + " s";
  if (!r.failures.empty()) {
    v.detail += "; first: " + r.failures[0].property + " seed " +
                std::to_string(r.failures[0].instance_seed);
  }
  return v;
}

// 2 -------------------------------------------------------------------------
bool same_losses(const TrainResult& a, const TrainResult& b) {
  if (a.metrics.size() != b.metrics.size()) return false;
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    if (a.metrics[i].loss_total != b.metrics[i].loss_total) return false;
  }
  return a.student == b.student;
}

Verdict reductions() {
  int opd_ok = 0, fkl_ok = 0;
  for (int s = 1; s <= kSeeds; ++s) {
    TrainConfig aopd = weak_default(Objective::aopd, s);
    aopd.steps = kReductionSteps;
    TrainConfig opd = aopd;
    opd.objective.objective = Objective::opd;
    TrainConfig fkl = aopd;
    fkl.objective.objective = Objective::gkd;

    aopd.objective.tau = -1.0;
    opd_ok += same_losses(run(aopd), run(opd));
    aopd.objective.tau = 1.0;
    aopd.objective.beta = 1.0;
    fkl_ok += same_losses(run(aopd), run(fkl));
  }
  return {opd_ok == kSeeds && fkl_ok == kSeeds,
          std::to_string(kReductionSteps) + "-step runs, bit-identical losses and final tables: " +
              "tau=-1 vs OPD " + std::to_string(opd_ok) + "/" + std::to_string(kSeeds) +
              ", tau=+1 vs forward KL " + std::to_string(fkl_ok) + "/" + std::to_string(kSeeds)};
}

// 3 -------------------------------------------------------------------------
Verdict boundedness() {
  // Every training run the suite performs that has a guidance branch.
  std::map<std::string, double> worst;
  auto note = [&](const std::string& family, const TrainResult& r) {
    double& w = worst[family];
    for (const auto& m : r.metrics) w = std::max(w, m.max_abs_guidance_component);
  };
  for (int s = 1; s <= kSeeds; ++s) {
    const TrainConfig base = weak_default(Objective::aopd, s);
    note("forward-kl (AOPD default)", run(base));
    for (double beta : {0.0, 0.25, 0.5, 0.75, 0.9}) {
      note("jsd beta=" + num(beta, "%g"), run(with_beta(base, beta)));
    }
    TrainConfig gkd = base;
    gkd.objective.objective = Objective::gkd;
    gkd.steps = kReductionSteps;
    note("forward-kl (tau=+1)", run(gkd));
  }
  // Randomized token-level instances for both forward-KL variants and the beta grid.
  VerifyOptions o;
  o.instances = kGradientInstances;
  const VerifyReport bounded = verify_boundedness(o);
  for (const auto& p : bounded.properties) {
    if (p.property.rfind("fkl_token", 0) == 0) worst["instances " + p.property] = p.worst;
  }
  for (double beta : {0.0, 0.25, 0.5, 0.75, 0.9}) {
    double& w = worst["instances jsd beta=" + num(beta, "%g")];
    for (int i = 0; i < kGradientInstances; ++i) {
      const std::uint64_t seed = derive_seed(0x3b0d, static_cast<std::uint64_t>(i));
      const double scale = (i % 3 == 0) ? 25.0 : (i % 3 == 1 ? 5.0 : 1.0);
      const GradientInstance inst = make_gradient_instance(seed, scale);
      const auto g = jsd_token(softmax(inst.z_teacher), inst.z_student, inst.support, beta);
      w = std::max(w, g.grad_logits.cwiseAbs().maxCoeff());
    }
  }

  bool within = true;
  std::string detail;
  for (const auto& [family, w] : worst) {
    const bool ok = w <= kGuidanceBound;
    within = within && ok;
    detail += (detail.empty() ? "" : "; ") + family + " max " + num(w) + (ok ? "" : " (OUT)");
  }

  // OPD witness: sampled token with P_T = 1e-4, P_S = 0.9.
  Vector<double> pt(3), ps(3);
  pt << kOpdWitnessTeacher, 0.5 * (1 - kOpdWitnessTeacher), 0.5 * (1 - kOpdWitnessTeacher);
  ps << kOpdWitnessStudent, 0.05, 0.05;
  const Advantage a = compute_advantage(pt, ps, 0);
  const auto g = opd_token(a.value, 0, Vector<double>(ps.array().log().matrix()));
  // d loss / d ln P_S(y) = -A: the coefficient the policy gradient scales by.
  const double coefficient = std::abs(a.value);
  const bool witness = std::abs(a.value) > 9 && coefficient > kOpdWitnessMin;
  detail += "; OPD witness |A| = " + num(coefficient) + " (d loss / d ln P_S(y)), " +
            "max logit component " + num(g.grad_logits.cwiseAbs().maxCoeff());
  return {within && witness, detail};
}

// 4 -------------------------------------------------------------------------
Verdict blackhole() {
  int ok = 0;
  std::string detail;
  const auto t0 = std::chrono::steady_clock::now();
  for (int s = 1; s <= kSeeds; ++s) {
    const BlackHoleScenario b = make_blackhole(16, static_cast<std::uint64_t>(s));
    ObjectiveConfig aopd;
    aopd.k_support = 16;
    ObjectiveConfig opd = aopd;
    opd.objective = Objective::opd;
    const double pa = escape_experiment(b, aopd, kEscapeSteps, kEscapeLr, s).back();
    const double po = escape_experiment(b, opd, kEscapeSteps, kEscapeLr, s).back();
    ok += pa > kEscapeAopdMin && po < kEscapeOpdMax;
    detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(s) +
              " AOPD " + num(pa, "%.3f") + " OPD " + num(po, "%.2e");
  }
  return {ok == kSeeds, "final P_S(v*): " + detail + " (" + num(seconds_since(t0), "%.2f") + " s)"};
}

// 5 -------------------------------------------------------------------------
Verdict heavy_tail() {
  int ok = 0;
  std::string detail;
  for (int s = 1; s <= kSeeds; ++s) {
    const TrainConfig c = weak_default(Objective::aopd, s);
    const PolicyTable teacher = build_teacher(c);
    const PolicyTable student = build_student(c, teacher);
    const int prompts = static_cast<int>((kHeavyTailTokens + c.horizon - 1) / c.horizon);
    const auto batch =
        rollout_student(student, teacher,
                        make_prompt_set(prompts, c.prompt_length, c.vocab, c.seeds.rollout),
                        c.horizon, c.objective.mask_rule(), derive_seed(c.seeds.rollout, 1));
    std::vector<double> adv;
    for (const auto& t : batch) for (const auto& r : t.records) adv.push_back(r.advantage);
    std::sort(adv.begin(), adv.end());
    const double p01 = adv[adv.size() / 100];
    const double p99 = adv[adv.size() * 99 / 100];
    ok += std::abs(p01) > std::abs(p99);
    detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(s) + " p1 " +
              num(p01, "%.2f") + " p99 " + num(p99, "%.2f");
  }
  return {ok >= kMajority, std::to_string(ok) + "/" + std::to_string(kSeeds) + " seeds, " +
                               std::to_string(kHeavyTailTokens) + "+ tokens each: " + detail};
}

// 6 -------------------------------------------------------------------------
// Instances with |A| < 1e-6 (a quarter exactly 0, the rest log-uniform in
// [1e-12, 1e-6)) whose support-normalized rows differ by TV >= 1e-3.
struct ZeroAdvInstance {
  Vector<double> pt;
  Vector<double> zs;
  int token = 0;
  double advantage = 0.0;
  SupportSet support;
  double tv = 0.0;
};

ZeroAdvInstance make_zero_adv_instance(std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 2.0);
  for (;;) {
    const int vocab = std::uniform_int_distribution<int>(2, 16)(rng);
    Vector<double> zt(vocab), q(vocab);
    for (int v = 0; v < vocab; ++v) zt[v] = n(rng);
    for (int v = 0; v < vocab; ++v) q[v] = n(rng);
    ZeroAdvInstance x;
    x.pt = softmax(zt);
    x.token = std::uniform_int_distribution<int>(0, vocab - 1)(rng);
    x.support = topk_support(x.pt, std::uniform_int_distribution<int>(1, vocab)(rng));
    double target = 0.0;
    if (u(rng) >= 0.25) {
      target = std::pow(10.0, -12.0 + 6.0 * u(rng)) * (u(rng) < 0.5 ? -1.0 : 1.0);
    }
    const double lambda = std::pow(10.0, -4.0 * u(rng));
    Vector<double> ps = (1 - lambda) * x.pt + lambda * softmax(q);
    const double py = x.pt[x.token] * std::exp(-target);
    if (!(py < 1.0)) continue;
    const double rest = 1.0 - ps[x.token];
    ps *= (1.0 - py) / rest;
    ps[x.token] = py;
    x.zs = ps.array().log().matrix();
    x.advantage = std::log(x.pt[x.token]) - log_softmax(x.zs)[x.token];
    if (!(std::abs(x.advantage) < kZeroAdvMax)) continue;
    const Vector<double> a = restrict_normalize(x.pt, x.support);
    const Vector<double> b = restrict_normalize(softmax(x.zs), x.support);
    x.tv = 0.5 * (a - b).cwiseAbs().sum();
    if (x.tv >= kTvMin) return x;
  }
}

Verdict zero_advantage() {
  int opd_bad = 0, guide_bad = 0;
  double opd_worst = 0.0, guide_min = 1e300;
  std::uint64_t first_bad = 0;
  bool have_bad = false;
  for (int i = 0; i < kZeroAdvInstances; ++i) {
    const std::uint64_t seed = derive_seed(0x5a9e, static_cast<std::uint64_t>(i));
    const ZeroAdvInstance x = make_zero_adv_instance(seed);
    const double opd = opd_token(x.advantage, x.token, x.zs).grad_logits.norm();
    const double guide = fkl_token(x.pt, x.zs, x.support, FklVariant::normalized).grad_logits.norm();
    opd_worst = std::max(opd_worst, opd);
    guide_min = std::min(guide_min, guide);
    const bool bad_o = !(opd < kOpdNormMax);
    const bool bad_g = !(guide > kGuidanceNormMin);
    opd_bad += bad_o;
    guide_bad += bad_g;
    if ((bad_o || bad_g) && !have_bad) {
      have_bad = true;
      first_bad = seed;
    }
  }
  std::string detail = std::to_string(kZeroAdvInstances) + " instances: OPD L2 max " +
                       num(opd_worst) + " (" + std::to_string(opd_bad) +
                       " >= 1e-6), guidance L2 min " + num(guide_min) + " (" +
                       std::to_string(guide_bad) + " <= 1e-3)";
  if (have_bad) detail += "; first violating seed " + std::to_string(first_bad);
  return {opd_bad == 0 && guide_bad == 0, detail};
}

// 7 -------------------------------------------------------------------------
Verdict training_progress() {
  const auto t0 = std::chrono::steady_clock::now();
  int reduced = 0, beats = 0;
  std::string detail;
  for (int s = 1; s <= kSeeds; ++s) {
    const TrainResult& a = run(weak_default(Objective::aopd, s));
    const TrainResult& o = run(weak_default(Objective::opd, s));
    reduced += a.final_rkl < a.initial_rkl;
    beats += a.final_rkl < o.final_rkl;
    detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(s) +
              " AOPD " + num(a.initial_rkl, "%.3f") + "->" + num(a.final_rkl, "%.3f") +
              " OPD " + num(o.final_rkl, "%.3f");
  }
  const double secs = seconds_since(t0);
  return {reduced == kSeeds && beats >= kMajority && secs < kProgressSeconds,
          "exact_rkl: " + detail + "; AOPD reduces " + std::to_string(reduced) + "/" +
              std::to_string(kSeeds) + ", AOPD < OPD " + std::to_string(beats) + "/" +
              std::to_string(kSeeds) + " (" + num(secs, "%.1f") + " s)"};
}

// 8 -------------------------------------------------------------------------
double tail_mean_entropy(const TrainResult& r) {
  const std::size_t n = r.metrics.size();
  const std::size_t from = n > kEntropyWindow ? n - kEntropyWindow : 0;
  double h = 0.0;
  for (std::size_t i = from; i < n; ++i) h += r.metrics[i].mean_entropy;
  return h / static_cast<double>(n - from);
}

Verdict entropy_ordering() {
  int ok = 0;
  std::string detail;
  for (int s = 1; s <= kSeeds; ++s) {
    const double ha = tail_mean_entropy(run(weak_default(Objective::aopd, s)));
    const double ho = tail_mean_entropy(run(weak_default(Objective::opd, s)));
    ok += ha > ho;
    detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(s) +
              " AOPD " + num(ha, "%.3f") + " OPD " + num(ho, "%.3f");
  }
  return {ok >= kMajority, "last-30-step mean entropy: " + detail + " (" + std::to_string(ok) +
                               "/" + std::to_string(kSeeds) + ")"};
}

// 9 -------------------------------------------------------------------------
Verdict reverse_kl_collapse() {
  int ok = 0;
  std::string detail;
  for (int s = 1; s <= kSeeds; ++s) {
    const TrainConfig base = weak_default(Objective::aopd, s);
    const TrainResult& r0 = run(with_beta(base, 0.0));
    const TrainResult& r1 = run(with_beta(base, 1.0));
    double peak = 0.0;
    for (const auto& m : r0.metrics) peak = std::max(peak, m.intervention_ratio);
    const double last = r0.metrics.back().intervention_ratio;
    const double h0 = r0.metrics.back().mean_entropy;
    const double h1 = r1.metrics.back().mean_entropy;
    ok += h0 < h1 && last < peak;
    detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(s) +
              " H(b=0) " + num(h0, "%.3f") + " H(b=1) " + num(h1, "%.3f") + " ratio " +
              num(last, "%.3f") + "/peak " + num(peak, "%.3f");
  }
  return {ok >= kMajority, detail + " (" + std::to_string(ok) + "/" + std::to_string(kSeeds) + ")"};
}

// 10 ------------------------------------------------------------------------
Verdict k1_consistency() {
  // Initial weak student and the same student after AOPD training.
  const TrainConfig c = weak_default(Objective::aopd, 1);
  const PolicyTable teacher = build_teacher(c);
  const PolicyTable initial = build_student(c, teacher);
  const PolicyTable& trained = run(c).student;
  bool ok = true;
  std::string detail;
  for (const auto& [name, student] :
       {std::pair<const char*, const PolicyTable*>{"initial", &initial}, {"trained", &trained}}) {
    const double exact = exact_reverse_kl(*student, teacher, ContextWeighting::student_stationary);
    const K1Estimate k1 = k1_estimate(*student, teacher, kK1Samples, 0x1c1);
    const double z = std::abs(k1.mean - exact) / k1.standard_error;
    ok = ok && z < kK1Sigmas;
    detail += (detail.empty() ? "" : "; ") + std::string(name) + ": K1 " + num(k1.mean, "%.5f") +
              " +- " + num(k1.standard_error, "%.5f") + " vs exact " + num(exact, "%.5f") +
              " (" + num(z, "%.2f") + " SE)";
  }
  return {ok, std::to_string(kK1Samples) + " samples; " + detail};
}

// 11 ------------------------------------------------------------------------
int run_cli(const std::string& args) {
  const std::string cmd = std::string(AOPD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "aopd_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  int identical = 0, total = 0;
  std::string detail;
  for (const char* objective : {"AOPD", "OPD", "SeqKD"}) {
    const fs::path cfg = root / (std::string(objective) + ".ini");
    std::ofstream(cfg) << "[objective]\nobjective = " << objective << "\n";
    const fs::path a = root / (std::string(objective) + "_a");
    const fs::path b = root / (std::string(objective) + "_b");
    const int ra = run_cli("train --config " + cfg.string() + " --out " + a.string());
    const int rb = run_cli("train --config " + cfg.string() + " --out " + b.string());
    const std::string ma = slurp(a / "metrics.csv");
    const bool same = ra == 0 && rb == 0 && !ma.empty() && ma == slurp(b / "metrics.csv");
    identical += same;
    ++total;
    detail += (detail.empty() ? "" : ", ") + std::string(objective) + (same ? " identical" : " DIFFER");
  }
  fs::remove_all(root);
  return {identical == total, "two CLI train runs per objective (default config): " + detail};
}

struct Criterion {
  int id;
  const char* title;
  std::function<Verdict()> check;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: aopd_acceptance [--criterion N]\n";
      return 2;
    }
  }
  const std::vector<Criterion> criteria{
      {1, "gradient oracle suite", gradient_suite},
      {2, "reduction identities", reductions},
      {3, "guidance boundedness", boundedness},
      {4, "black-hole escape", blackhole},
      {5, "heavy negative advantage tail", heavy_tail},
      {6, "zero-advantage stagnation", zero_advantage},
      {7, "training progress vs OPD", training_progress},
      {8, "entropy ordering", entropy_ordering},
      {9, "reverse-KL collapse diagnostic", reverse_kl_collapse},
      {10, "K1 estimator consistency", k1_consistency},
      {11, "determinism", determinism},
  };
  if (only != 0 && (only < 1 || only > static_cast<int>(criteria.size()))) {
    std::cerr << "no criterion " << only << '\n';
    return 2;
  }
  bool all = true;
  for (const Criterion& c : criteria) {
    if (only != 0 && c.id != only) continue;
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    all = all && v.pass;
    std::cout << "criterion " << c.id << ' ' << (v.pass ? "PASS" : "FAIL") << "  " << c.title
              << ": " << v.detail << std::endl;
  }
  return all ? 0 : 1;
}
