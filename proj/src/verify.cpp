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


#include "aopd/verify.hpp"

#include "aopd/oracle.hpp"
#include "aopd/random.hpp"
#include "aopd/trainer.hpp"

#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace aopd {

namespace {

constexpr double kJsdBetas[] = {0.0, 0.25, 0.5, 0.75, 0.9, 1.0};
constexpr double kAopdTaus[] = {-1.0, -0.2, 0.0, 1.0};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::uint64_t property_seed(std::uint64_t base, const std::string& name) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : name) h = (h ^ c) * 1099511628211ULL;
  return derive_seed(base, h);
}

/// Runs `check` on opts.instances seeded instances and records the outcome.
/// check returns (error, ok, detail).
struct Outcome {
  double error = 0.0;
  bool ok = true;
  std::string detail;
};

template <typename Check>
void run_property(VerifyReport& report, const std::string& category, const std::string& property,
                  std::uint64_t base_seed, int instances, Check&& check) {
  PropertyResult r{category, property, 0, 0, 0.0};
  const std::uint64_t pseed = property_seed(base_seed, property);
  for (int i = 0; i < instances; ++i) {
    const std::uint64_t seed = derive_seed(pseed, static_cast<std::uint64_t>(i));
    Outcome o;
    try {
      o = check(seed);
    } catch (const std::exception& e) {
      o = {0.0, false, std::string("exception: ") + e.what()};
    }
    ++r.checked;
    r.worst = std::max(r.worst, o.error);
    if (!o.ok) {
      ++r.failed;
      report.failures.push_back({category, property, seed, o.detail});
    }
  }
  report.properties.push_back(r);
}

struct Probs {
  Vector<double> pt;
  Vector<double> ps;
};

Probs probs(const GradientInstance& inst) {
  return {softmax(inst.z_teacher), softmax(inst.z_student)};
}

TokenRecord record_for(const GradientInstance& inst, double tau) {
  const Probs p = probs(inst);
  const Advantage a = compute_advantage(p.pt, p.ps, inst.token);
  TokenRecord rec;
  rec.token = inst.token;
  rec.logp_teacher = std::log(p.pt[inst.token]);
  rec.logp_student = std::log(p.ps[inst.token]);
  rec.advantage = a.value;
  rec.prob_gap = a.prob_gap;
  rec.mask = mask_token(a.prob_gap, tau);
  return rec;
}

template <typename TokenFn>
Outcome fd_check(const GradientInstance& inst, TokenFn&& fn, const VerifyOptions& opts) {
  const Vector<double> analytic = fn(inst.z_student).grad_logits;
  const Vector<double> numeric =
      fd_gradient([&](const Vector<double>& z) { return double(fn(z).loss); }, inst.z_student,
                  opts.fd_step);
  const double err = gradient_rel_error(analytic, numeric);
  Outcome o{err, err < opts.rel_tol, {}};
  if (!o.ok) o.detail = "relative error " + fmt(err) + " >= " + fmt(opts.rel_tol);
  return o;
}

std::string beta_name(double b) { return "beta=" + fmt(b); }
std::string tau_name(double t) { return "tau=" + fmt(t); }

}  // namespace

GradientInstance make_gradient_instance(std::uint64_t seed, double logit_scale) {
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<int> vocab_dist(2, 16);
  std::normal_distribution<double> normal(0.0, logit_scale);
  GradientInstance inst;
  const int vocab = vocab_dist(rng);
  inst.z_teacher.resize(vocab);
  inst.z_student.resize(vocab);
  for (int v = 0; v < vocab; ++v) inst.z_teacher[v] = normal(rng);
  for (int v = 0; v < vocab; ++v) inst.z_student[v] = normal(rng);
  inst.token = std::uniform_int_distribution<int>(0, vocab - 1)(rng);
  const int k = std::uniform_int_distribution<int>(1, vocab)(rng);
  inst.support = topk_support(softmax(inst.z_teacher), k);
  return inst;
}

void VerifyReport::merge(const VerifyReport& other) {
  properties.insert(properties.end(), other.properties.begin(), other.properties.end());
  failures.insert(failures.end(), other.failures.begin(), other.failures.end());
}

std::vector<PropertyResult> VerifyReport::category_counts() const {
  std::vector<PropertyResult> out;
  for (const PropertyResult& p : properties) {
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const PropertyResult& c) { return c.category == p.category; });
    if (it == out.end()) {
      out.push_back({p.category, "", 0, 0, 0.0});
      it = out.end() - 1;
    }
    it->checked += p.checked;
    it->failed += p.failed;
  }
  return out;
}

VerifyReport verify_gradients(const VerifyOptions& opts, const ObjectiveHooks& hooks) {
  VerifyReport report;
  const std::string cat = "finite_difference";
  const int n = opts.instances;

  run_property(report, cat, "opd_token", opts.seed, n, [&](std::uint64_t s) {
    const GradientInstance inst = make_gradient_instance(s);
    const TokenRecord rec = record_for(inst, 0.0);
    return fd_check(inst, [&](const Vector<double>& z) { return hooks.opd(rec.advantage, rec.token, z); },
                    opts);
  });
  for (FklVariant variant : {FklVariant::literal, FklVariant::normalized}) {
    run_property(report, cat, "fkl_token[" + to_string(variant) + "]", opts.seed, n,
                 [&](std::uint64_t s) {
                   const GradientInstance inst = make_gradient_instance(s);
                   const Vector<double> pt = softmax(inst.z_teacher);
                   return fd_check(
                       inst,
                       [&](const Vector<double>& z) {
                         return fkl_token(pt, z, inst.support, variant);
                       },
                       opts);
                 });
  }
  for (double beta : kJsdBetas) {
    run_property(report, cat, "jsd_token[" + beta_name(beta) + "]", opts.seed, n,
                 [&](std::uint64_t s) {
                   const GradientInstance inst = make_gradient_instance(s);
                   const Vector<double> pt = softmax(inst.z_teacher);
                   return fd_check(
                       inst,
                       [&](const Vector<double>& z) {
                         return jsd_token(pt, z, inst.support, beta);
                       },
                       opts);
                 });
  }
  for (double tau : kAopdTaus) {
    run_property(report, cat, "aopd_token[" + tau_name(tau) + "]", opts.seed, n,
                 [&](std::uint64_t s) {
                   const GradientInstance inst = make_gradient_instance(s);
                   const Vector<double> pt = softmax(inst.z_teacher);
                   const TokenRecord rec = record_for(inst, tau);
                   return fd_check(
                       inst,
                       [&](const Vector<double>& z) {
                         return aopd_token(rec, pt, z, inst.support, GuidanceSpec{});
                       },
                       opts);
                 });
  }
  return report;
}

namespace {

TrainConfig reduction_config(const VerifyOptions& opts, std::uint64_t seed) {
  TrainConfig c;
  c.vocab = 8;
  c.order = 1;
  c.batch_trajectories = 16;
  c.horizon = 8;
  c.steps = opts.reduction_steps;
  c.objective.k_support = 8;
  c.seeds = {derive_seed(seed, 1), derive_seed(seed, 2), derive_seed(seed, 3)};
  return c;
}

Outcome same_run(const TrainResult& a, const TrainResult& b) {
  if (a.metrics.size() != b.metrics.size()) return {1.0, false, "step counts differ"};
  for (std::size_t s = 0; s < a.metrics.size(); ++s) {
    if (a.metrics[s].loss_total != b.metrics[s].loss_total) {
      return {std::abs(a.metrics[s].loss_total - b.metrics[s].loss_total), false,
              "loss differs at step " + std::to_string(s)};
    }
  }
  if (!(a.student == b.student)) return {1.0, false, "final student logits differ"};
  return {};
}

}  // namespace

VerifyReport verify_reductions(const VerifyOptions& opts) {
  VerifyReport report;
  const std::string cat = "reduction";
  const int runs = 2;
  run_property(report, cat, "aopd[tau=-1] == opd", opts.seed, runs, [&](std::uint64_t s) {
    TrainConfig a = reduction_config(opts, s);
    a.objective.objective = Objective::aopd;
    a.objective.tau = -1.0;
    TrainConfig o = a;
    o.objective.objective = Objective::opd;
    return same_run(train(a), train(o));
  });
  run_property(report, cat, "aopd[tau=+1,beta=1] == forward-kl", opts.seed, runs,
               [&](std::uint64_t s) {
                 TrainConfig a = reduction_config(opts, s);
                 a.objective.objective = Objective::aopd;
                 a.objective.tau = 1.0;
                 a.objective.beta = 1.0;
                 TrainConfig g = a;
                 g.objective.objective = Objective::gkd;
                 return same_run(train(a), train(g));
               });
  return report;
}

VerifyReport verify_boundedness(const VerifyOptions& opts) {
  VerifyReport report;
  const std::string cat = "boundedness";
  for (FklVariant variant : {FklVariant::literal, FklVariant::normalized}) {
    run_property(report, cat, "fkl_token[" + to_string(variant) + "] in [-1,1]", opts.seed,
                 opts.instances, [&](std::uint64_t s) {
                   // Wide logit scales reach nearly one-hot rows on both sides.
                   const double scale = (s % 3 == 0) ? 25.0 : (s % 3 == 1 ? 5.0 : 1.0);
                   const GradientInstance inst = make_gradient_instance(s, scale);
                   const Vector<double> g =
                       fkl_token(softmax(inst.z_teacher), inst.z_student, inst.support, variant)
                           .grad_logits;
                   const double m = g.cwiseAbs().maxCoeff();
                   Outcome o{m, m <= 1.0, {}};
                   if (!o.ok) o.detail = "component magnitude " + fmt(m);
                   return o;
                 });
  }
  // One witness is enough to show the policy-gradient coefficient is not capped.
  run_property(report, cat, "opd coefficient unbounded (witness)", opts.seed, 1,
               [&](std::uint64_t) {
                 const double adv = std::log(1e-4) - std::log(0.9);
                 Outcome o{std::abs(adv), std::abs(adv) > 7.0, {}};
                 if (!o.ok) o.detail = "|A| = " + fmt(std::abs(adv));
                 return o;
               });
  return report;
}

VerifyReport verify_shift_invariance(const VerifyOptions& opts, const ObjectiveHooks& hooks) {
  VerifyReport report;
  const std::string cat = "shift_invariance";
  constexpr double kTol = 1e-9;

  auto check = [&](auto&& fn) {
    return [&, fn](std::uint64_t s) {
      const GradientInstance inst = make_gradient_instance(s);
      Rng rng = make_rng(s, {7});
      const double c = std::uniform_real_distribution<double>(-50.0, 50.0)(rng);
      const auto base = fn(inst, inst.z_student);
      const Vector<double> shifted_z = (inst.z_student.array() + c).matrix();
      const auto shifted = fn(inst, shifted_z);
      const double scale = std::max(1.0, std::abs(double(base.loss)));
      const double loss_err = std::abs(double(base.loss - shifted.loss)) / scale;
      const double grad_err = (base.grad_logits - shifted.grad_logits).cwiseAbs().maxCoeff();
      const double sum_err = std::abs(base.grad_logits.sum());
      const double err = std::max({loss_err, grad_err, sum_err});
      Outcome o{err, err <= kTol, {}};
      if (!o.ok) {
        o.detail = "shift " + fmt(c) + ": loss " + fmt(loss_err) + ", grad " + fmt(grad_err) +
                   ", grad sum " + fmt(sum_err);
      }
      return o;
    };
  };

  run_property(report, cat, "opd_token", opts.seed, opts.instances,
               check([&](const GradientInstance& inst, const Vector<double>& z) {
                 const TokenRecord rec = record_for(inst, 0.0);
                 return hooks.opd(rec.advantage, rec.token, z);
               }));
  for (FklVariant variant : {FklVariant::literal, FklVariant::normalized}) {
    run_property(report, cat, "fkl_token[" + to_string(variant) + "]", opts.seed,
                 opts.instances,
                 check([variant](const GradientInstance& inst, const Vector<double>& z) {
                   return fkl_token(softmax(inst.z_teacher), z, inst.support, variant);
                 }));
  }
  for (double beta : kJsdBetas) {
    run_property(report, cat, "jsd_token[" + beta_name(beta) + "]", opts.seed, opts.instances,
                 check([beta](const GradientInstance& inst, const Vector<double>& z) {
                   return jsd_token(softmax(inst.z_teacher), z, inst.support, beta);
                 }));
  }
  return report;
}

VerifyReport run_verify(const VerifyOptions& opts, const ObjectiveHooks& hooks) {
  VerifyReport report = verify_gradients(opts, hooks);
  report.merge(verify_reductions(opts));
  report.merge(verify_boundedness(opts));
  report.merge(verify_shift_invariance(opts, hooks));
  return report;
}

void print_report(std::ostream& os, const VerifyReport& report) {
  std::size_t w = 8;
  for (const auto& p : report.properties) w = std::max(w, p.property.size());
  os << std::left << std::setw(18) << "category" << std::setw(static_cast<int>(w) + 2)
     << "property" << std::right << std::setw(8) << "checked" << std::setw(8) << "failed"
     << "  worst\n";
  for (const auto& p : report.properties) {
    os << std::left << std::setw(18) << p.category << std::setw(static_cast<int>(w) + 2)
       << p.property << std::right << std::setw(8) << p.checked << std::setw(8) << p.failed
       << "  " << fmt(p.worst) << '\n';
  }
  os << '\n';
  for (const auto& c : report.category_counts()) {
    os << c.category << ": " << c.checked << " checked, " << c.failed << " failed\n";
  }
  for (const auto& f : report.failures) {
    os << "FAIL " << f.category << ' ' << f.property << " seed=" << f.instance_seed << ": "
       << f.detail << '\n';
  }
  os << (report.passed() ? "verify: PASS" : "verify: FAIL") << '\n';
}

}  // namespace aopd
