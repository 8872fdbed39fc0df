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

#include "aopd/trainer.hpp"
#include "aopd/parallel.hpp"
#include "aopd/rollout.hpp"

#include <cmath>
#include <optional>
#include <set>

namespace aopd {

void TrainConfig::validate() const {
  const auto& o = objective;
  if (!(o.tau >= -1 && o.tau <= 1)) throw ConfigError("tau", "must lie in [-1, 1]");
  if (!(o.beta >= 0 && o.beta <= 1)) throw ConfigError("beta", "must lie in [0, 1]");
  if (vocab < 2 || vocab > 256) throw ConfigError("vocab", "must lie in [2, 256]");
  if (o.k_support < 1 || o.k_support > vocab) {
    throw ConfigError("k_support", "must lie in [1, vocab]");
  }
  if (!(o.zero_eps >= 0)) throw ConfigError("zero_eps", "must be >= 0");
  if (!(lr >= 0) || !std::isfinite(lr)) throw ConfigError("lr", "must be a finite value >= 0");
  if (batch_trajectories < 1) throw ConfigError("batch_trajectories", "must be >= 1");
  if (horizon < 1) throw ConfigError("horizon", "must be >= 1");
  if (steps < 0) throw ConfigError("steps", "must be >= 0");
  if (prompt_length < 0) throw ConfigError("prompt_length", "must be >= 0");
  if (order < 1) throw ConfigError("order", "must be >= 1");
  double rows = 1;
  for (int i = 0; i < order; ++i) rows *= vocab;
  if (rows > static_cast<double>(kMaxContextRows)) {
    throw ConfigError("order", "vocab^order must not exceed 65536");
  }
  if (!(concentration > 0)) throw ConfigError("concentration", "must be > 0");
  if (!(perturb_sigma >= 0)) throw ConfigError("perturb_sigma", "must be >= 0");
  if (hist_interval < 1) throw ConfigError("hist_interval", "must be >= 1");
}

void AdvantageHistogram::add(double advantage) {
  const double f = std::floor(advantage);
  const int b = f < kMin ? kMin : (f > kMax ? kMax : static_cast<int>(f));
  ++counts[static_cast<std::size_t>(b - kMin)];
}

PolicyTable build_teacher(const TrainConfig& cfg) {
  return make_random_teacher(cfg.order, cfg.vocab, cfg.concentration, cfg.seeds.teacher);
}

PolicyTable build_student(const TrainConfig& cfg, const PolicyTable& teacher) {
  return make_weak_student(teacher, cfg.student_mode, cfg.seeds.student, cfg.perturb_sigma);
}

TrainResult train(const TrainConfig& cfg, int jobs) {
  cfg.validate();
  PolicyTable teacher = build_teacher(cfg);
  PolicyTable student = build_student(cfg, teacher);
  return train(cfg, teacher, std::move(student), jobs);
}

TrainResult train(const TrainConfig& cfg, const PolicyTable& teacher, PolicyTable student,
                  int jobs) {
  cfg.validate();
  if (teacher.vocab() != cfg.vocab || student.vocab() != cfg.vocab) {
    throw ConfigError("vocab", "does not match the supplied policies");
  }
  const ObjectiveConfig& obj = cfg.objective;
  const MaskRule mask = obj.mask_rule();
  const bool teacher_sampled = obj.teacher_sampled();

  TrainResult result{teacher, student, {}, 0.0, 0.0};
  result.initial_rkl = exact_reverse_kl(student, teacher, cfg.rkl_weighting);
  result.metrics.reserve(static_cast<std::size_t>(cfg.steps));

  for (int step = 0; step < cfg.steps; ++step) {
    const auto prompts = make_prompt_set(cfg.batch_trajectories, cfg.prompt_length, cfg.vocab,
                                         derive_seed(cfg.seeds.rollout, 2 * step));
    const std::uint64_t sample_seed = derive_seed(cfg.seeds.rollout, 2 * step + 1);
    const auto batch =
        teacher_sampled
            ? rollout_teacher(teacher, prompts, cfg.horizon, sample_seed, jobs)
            : rollout_student(student, teacher, prompts, cfg.horizon, mask, sample_seed, jobs);

    const SequenceLossGrad lg = batch_loss_grad(batch, student, teacher, obj, jobs);
    if (!std::isfinite(lg.loss)) throw TrainingAborted(step, "non-finite loss");

    StepMetrics m;
    m.step = step;
    m.loss_total = lg.loss;
    m.loss_pos = lg.loss_policy;
    m.loss_guidance = lg.loss_guidance;
    m.grad_norm = lg.grad.l2_norm();
    m.guidance_grad_norm = lg.guidance_grad.l2_norm();
    m.max_abs_guidance_component = lg.max_abs_guidance_component;
    m.tokens = lg.tokens;
    m.intervened = lg.intervened;
    m.ratio_applicable = !teacher_sampled;
    m.intervention_ratio =
        static_cast<double>(lg.intervened) / static_cast<double>(lg.tokens);
    m.exact_rkl = exact_reverse_kl(student, teacher, cfg.rkl_weighting);

    std::set<Eigen::Index> visited;
    for (const Trajectory& traj : batch) {
      for (const TokenRecord& rec : traj.records) {
        visited.insert(student.row_index(rec.ctx));
        if (!teacher_sampled) {
          m.advantages.add(rec.advantage);
          if (rec.floored) ++m.floored_tokens;
        }
      }
    }
    double h = 0.0;
    for (Eigen::Index r : visited) h += entropy(student.dist_at_row(r));
    m.visited_contexts = visited.size();
    m.mean_entropy = h / static_cast<double>(visited.size());

    try {
      student = apply_gradient(student, lg.grad, cfg.lr);
    } catch (const std::domain_error& e) {
      throw TrainingAborted(step, e.what());
    }
    result.metrics.push_back(std::move(m));
  }

  result.final_rkl = exact_reverse_kl(student, teacher, cfg.rkl_weighting);
  result.student = std::move(student);
  return result;
}

ContinualResult continual_train(const TrainConfig& config_a, const TrainConfig& config_b,
                                int jobs) {
  config_a.validate();
  config_b.validate();
  if (config_a.vocab != config_b.vocab || config_a.order != config_b.order) {
    throw ConfigError("vocab", "continual phases must share vocab and order");
  }
  const PolicyTable teacher_a = build_teacher(config_a);
  const PolicyTable teacher_b = build_teacher(config_b);
  const auto weighting = config_a.rkl_weighting;

  TrainResult phase_a = train(config_a, teacher_a, build_student(config_a, teacher_a), jobs);

  ContinualResult out{phase_a.student, std::move(phase_a.metrics), {}};
  out.retention.objective = config_b.objective.objective;
  out.retention.rkl_a_before = exact_reverse_kl(out.student, teacher_a, weighting);
  out.retention.rkl_b_before = exact_reverse_kl(out.student, teacher_b, weighting);

  TrainResult phase_b = train(config_b, teacher_b, out.student, jobs);
  for (auto& m : phase_b.metrics) out.metrics.push_back(std::move(m));
  out.student = std::move(phase_b.student);
  out.retention.rkl_a_after = exact_reverse_kl(out.student, teacher_a, weighting);
  out.retention.rkl_b_after = exact_reverse_kl(out.student, teacher_b, weighting);
  return out;
}

std::string to_string(AblationAxis a) {
  switch (a) {
    case AblationAxis::beta: return "beta";
    case AblationAxis::tau: return "tau";
    case AblationAxis::topk: return "topk";
  }
  return "?";
}

AblationAxis parse_ablation_axis(const std::string& s) {
  if (s == "beta") return AblationAxis::beta;
  if (s == "tau") return AblationAxis::tau;
  if (s == "topk") return AblationAxis::topk;
  throw std::invalid_argument("unknown ablation axis '" + s + "'");
}

TrainConfig with_axis_value(const TrainConfig& base, AblationAxis axis, double value) {
  TrainConfig c = base;
  switch (axis) {
    case AblationAxis::beta: c.objective.beta = value; break;
    case AblationAxis::tau: c.objective.tau = value; break;
    case AblationAxis::topk:
      if (value != std::floor(value)) throw ConfigError("k_support", "must be an integer");
      c.objective.k_support = static_cast<int>(value);
      break;
  }
  c.validate();
  return c;
}

std::vector<AblationRow> ablate(const TrainConfig& base, AblationAxis axis,
                                const std::vector<double>& values, int jobs) {
  if (values.empty()) throw std::invalid_argument("ablation grid is empty");
  std::vector<TrainConfig> configs;
  configs.reserve(values.size());
  for (double v : values) configs.push_back(with_axis_value(base, axis, v));

  std::vector<std::optional<TrainResult>> runs(values.size());
  parallel_for(values.size(), jobs, [&](std::size_t i) { runs[i].emplace(train(configs[i])); });

  std::vector<AblationRow> rows;
  rows.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    AblationRow row{values[i], runs[i]->final_rkl, 0.0, 0.0, std::move(*runs[i])};
    const auto& ms = row.run.metrics;
    if (!ms.empty()) {
      row.final_entropy = ms.back().mean_entropy;
      double r = 0.0;
      for (const auto& m : ms) r += m.intervention_ratio;
      row.mean_intervention_ratio = r / static_cast<double>(ms.size());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace aopd
