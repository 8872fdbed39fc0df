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

#include "aopd/objectives.hpp"
#include "aopd/parallel.hpp"

#include <optional>

namespace aopd {

std::string to_string(FklVariant v) {
  return v == FklVariant::literal ? "literal" : "normalized";
}

std::string to_string(Objective o) {
  switch (o) {
    case Objective::opd: return "OPD";
    case Objective::aopd: return "AOPD";
    case Objective::aopd_zero: return "AOPD-Zero";
    case Objective::gkd: return "GKD";
    case Objective::seqkd: return "SeqKD";
  }
  return "?";
}

FklVariant parse_fkl_variant(const std::string& s) {
  if (s == "literal") return FklVariant::literal;
  if (s == "normalized") return FklVariant::normalized;
  throw std::invalid_argument("unknown fkl variant '" + s + "'");
}

Objective parse_objective(const std::string& s) {
  if (s == "OPD") return Objective::opd;
  if (s == "AOPD") return Objective::aopd;
  if (s == "AOPD-Zero") return Objective::aopd_zero;
  if (s == "GKD") return Objective::gkd;
  if (s == "SeqKD") return Objective::seqkd;
  throw std::invalid_argument("unknown objective '" + s + "'");
}

MaskRule ObjectiveConfig::mask_rule() const {
  switch (objective) {
    case Objective::opd: return MaskRule::never();
    case Objective::aopd: return MaskRule::threshold(tau);
    case Objective::aopd_zero: return MaskRule::zero_advantage(zero_eps);
    case Objective::gkd: return MaskRule::always();
    case Objective::seqkd: return MaskRule::never();
  }
  return MaskRule::never();
}

SequenceLossGrad sequence_loss_grad(const Trajectory& traj, const PolicyTable& student,
                                    const PolicyTable& teacher, const ObjectiveConfig& cfg) {
  if (traj.records.empty()) throw std::invalid_argument("empty trajectory");
  if (student.vocab() != teacher.vocab()) throw std::invalid_argument("vocab mismatch");
  const int vocab = student.vocab();
  const double weight = 1.0 / static_cast<double>(traj.records.size());
  const bool nll = cfg.teacher_sampled();
  const bool can_guide = !nll && cfg.objective != Objective::opd;
  const GuidanceSpec spec = cfg.guidance();

  SequenceLossGrad out(vocab);
  for (const TokenRecord& rec : traj.records) {
    const Eigen::Index srow = student.row_index(rec.ctx);
    const LogitVector<double> z = student.row(srow);
    ++out.tokens;
    if (nll) {
      const auto tg = nll_token(rec.token, z);
      out.loss_policy += weight * tg.loss;
      out.grad.accumulate(srow, tg.grad_logits, weight);
    } else if (can_guide && rec.mask) {
      const ProbVector<double> pt = teacher.dist_at_row(teacher.row_index(rec.ctx));
      const SupportSet support = topk_support(pt, cfg.k_support);
      const auto tg = guidance_token(pt, z, support, spec);
      ++out.intervened;
      out.loss_guidance += weight * tg.loss;
      out.grad.accumulate(srow, tg.grad_logits, weight);
      out.guidance_grad.accumulate(srow, tg.grad_logits, weight);
      out.max_abs_guidance_component =
          std::max(out.max_abs_guidance_component, tg.grad_logits.cwiseAbs().maxCoeff());
    } else {
      const auto tg = opd_token(rec, z);
      out.loss_policy += weight * tg.loss;
      out.grad.accumulate(srow, tg.grad_logits, weight);
    }
  }
  out.loss = out.loss_policy + out.loss_guidance;
  return out;
}

SequenceLossGrad batch_loss_grad(std::span<const Trajectory> batch, const PolicyTable& student,
                                 const PolicyTable& teacher, const ObjectiveConfig& cfg,
                                 int jobs) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  std::vector<std::optional<SequenceLossGrad>> parts(batch.size());
  parallel_for(batch.size(), jobs, [&](std::size_t i) {
    parts[i].emplace(sequence_loss_grad(batch[i], student, teacher, cfg));
  });

  const double w = 1.0 / static_cast<double>(batch.size());
  SequenceLossGrad out(student.vocab());
  for (const auto& p : parts) {
    out.loss += w * p->loss;
    out.loss_policy += w * p->loss_policy;
    out.loss_guidance += w * p->loss_guidance;
    out.grad.merge(p->grad, w);
    out.guidance_grad.merge(p->guidance_grad, w);
    out.tokens += p->tokens;
    out.intervened += p->intervened;
    out.max_abs_guidance_component =
        std::max(out.max_abs_guidance_component, p->max_abs_guidance_component);
  }
  return out;
}

OpdSplit opd_loss_split(std::span<const Trajectory> batch, const PolicyTable& student) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  OpdSplit s;
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const Trajectory& traj : batch) {
    if (traj.records.empty()) throw std::invalid_argument("empty trajectory");
    const double inv_len = 1.0 / static_cast<double>(traj.records.size());
    for (const TokenRecord& rec : traj.records) {
      const double lp = log_softmax(student.row(student.row_index(rec.ctx)))[rec.token];
      const double term = w * inv_len * (-rec.advantage * lp);
      if (rec.advantage > 0) {
        s.positive += term;
      } else if (rec.advantage < 0) {
        s.negative += term;
      } else {
        s.zero += term;
      }
      s.total += term;
    }
  }
  return s;
}

}  // namespace aopd
