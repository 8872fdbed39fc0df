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

#pragma once

// Token-level distillation losses and their gradients with respect to the
// student's logit row. Every function returns dLoss/dz; an optimizer step
// moves the logits along -grad.

#include "aopd/policy.hpp"
#include "aopd/records.hpp"
#include "aopd/simplex.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace aopd {

template <typename Scalar>
struct TokenLossGrad {
  Scalar loss = 0;
  Vector<Scalar> grad_logits;
};

enum class FklVariant { literal, normalized };
enum class Objective { opd, aopd, aopd_zero, gkd, seqkd };

std::string to_string(FklVariant v);
std::string to_string(Objective o);
FklVariant parse_fkl_variant(const std::string& s);
Objective parse_objective(const std::string& s);

inline constexpr double kTeacherProbFloor = 1e-12;

struct Advantage {
  double value = 0.0;     // ln P_T(y) - ln P_S(y), nats
  double prob_gap = 0.0;  // P_T(y) - P_S(y)
};

template <typename DerivedT, typename DerivedS>
Advantage compute_advantage(const Eigen::MatrixBase<DerivedT>& p_teacher,
                            const Eigen::MatrixBase<DerivedS>& p_student, int token) {
  if (token < 0 || token >= p_student.size()) throw std::out_of_range("token outside vocab");
  const double pt = p_teacher[token];
  const double ps = p_student[token];
  if (!(ps > 0)) throw std::domain_error("student assigns zero probability to sampled token");
  if (!(pt > 0)) {
    throw std::domain_error("teacher probability is zero at token " + std::to_string(token) +
                            "; annotate with the teacher probability floor instead");
  }
  return {std::log(pt) - std::log(ps), pt - ps};
}

/// G_t: 1 iff the probability gap is at most tau.
inline bool mask_token(double prob_gap, double tau) { return prob_gap <= tau; }

/// Which positions receive divergence guidance.
struct MaskRule {
  enum class Kind { threshold, zero_advantage, never, always };
  Kind kind = Kind::threshold;
  double tau = 0.0;
  double eps = 1e-6;

  bool operator()(double advantage, double prob_gap) const {
    switch (kind) {
      case Kind::threshold: return mask_token(prob_gap, tau);
      case Kind::zero_advantage: return std::abs(advantage) <= eps;
      case Kind::never: return false;
      case Kind::always: return true;
    }
    return false;
  }

  static MaskRule threshold(double tau) { return {Kind::threshold, tau, 0.0}; }
  static MaskRule zero_advantage(double eps) { return {Kind::zero_advantage, 0.0, eps}; }
  static MaskRule never() { return {Kind::never, 0.0, 0.0}; }
  static MaskRule always() { return {Kind::always, 0.0, 0.0}; }
};

/// -A ln P_S(y); the advantage is a constant.
template <typename Derived>
auto opd_token(typename Derived::Scalar advantage, int token,
               const Eigen::MatrixBase<Derived>& z_student) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> logp = log_softmax(z_student);
  TokenLossGrad<Scalar> out;
  out.loss = -advantage * logp[token];
  out.grad_logits = advantage * logp.array().exp().matrix();
  out.grad_logits[token] -= advantage;
  return out;
}

template <typename Derived>
auto opd_token(const TokenRecord& rec, const Eigen::MatrixBase<Derived>& z_student) {
  return opd_token(typename Derived::Scalar(rec.advantage), rec.token, z_student);
}

/// Negative log-likelihood of a teacher-sampled token.
template <typename Derived>
auto nll_token(int token, const Eigen::MatrixBase<Derived>& z_student) {
  return opd_token(typename Derived::Scalar(1), token, z_student);
}

/// Forward KL guidance on a teacher support.
///   literal:    (1/K) sum_{v in S} P_T(v) (ln P_T(v) - ln P_S(v)) with the raw
///               full-vocabulary conditionals, differentiated through the full softmax.
///   normalized: KL(P~_T || P~_S) with both renormalized on S and P~_S the softmax
///               of the support logits; grad is P~_S - P~_T on S, 0 elsewhere.
template <typename DerivedT, typename DerivedZ>
auto fkl_token(const Eigen::MatrixBase<DerivedT>& p_teacher,
               const Eigen::MatrixBase<DerivedZ>& z_student, const SupportSet& support,
               FklVariant variant) {
  using Scalar = typename DerivedZ::Scalar;
  const int vocab = static_cast<int>(z_student.size());
  if (p_teacher.size() != vocab) throw std::invalid_argument("teacher/student vocab mismatch");
  if (support.k() < 1) throw std::invalid_argument("empty support");
  TokenLossGrad<Scalar> out;
  out.grad_logits = Vector<Scalar>::Zero(vocab);

  if (variant == FklVariant::literal) {
    const Vector<Scalar> logp = log_softmax(z_student);
    Scalar teacher_mass = 0;
    for (int v : support.token_ids) teacher_mass += Scalar(p_teacher[v]);
    if (!(teacher_mass > 0)) throw std::domain_error("zero teacher mass on support");
    const Scalar inv_k = Scalar(1) / Scalar(support.k());
    Scalar loss = 0;
    for (int v : support.token_ids) {
      const Scalar pt = Scalar(p_teacher[v]);
      if (pt > 0) loss += pt * (std::log(pt) - logp[v]);
      out.grad_logits[v] -= inv_k * pt;
    }
    out.loss = inv_k * loss;
    out.grad_logits += inv_k * teacher_mass * logp.array().exp().matrix();
    return out;
  }

  const Vector<Scalar> pt = restrict_normalize(p_teacher.template cast<Scalar>(), support);
  const Vector<Scalar> logps = log_softmax(gather(z_student, support));
  Scalar loss = 0;
  for (int i = 0; i < support.k(); ++i) {
    if (pt[i] > 0) loss += pt[i] * (std::log(pt[i]) - logps[i]);
  }
  out.loss = std::max<Scalar>(loss, Scalar(0));
  for (int i = 0; i < support.k(); ++i) {
    out.grad_logits[support.token_ids[i]] = std::exp(logps[i]) - pt[i];
  }
  return out;
}

/// JSD_beta between the support-normalized teacher and student rows.
/// beta = 1 delegates to the normalized forward KL; beta = 0 is the reverse KL.
template <typename DerivedT, typename DerivedZ>
auto jsd_token(const Eigen::MatrixBase<DerivedT>& p_teacher,
               const Eigen::MatrixBase<DerivedZ>& z_student, const SupportSet& support,
               typename DerivedZ::Scalar beta) {
  using Scalar = typename DerivedZ::Scalar;
  if (!(beta >= 0 && beta <= 1)) throw std::invalid_argument("jsd beta must lie in [0, 1]");
  if (beta == 1) return fkl_token(p_teacher, z_student, support, FklVariant::normalized);

  const int vocab = static_cast<int>(z_student.size());
  if (p_teacher.size() != vocab) throw std::invalid_argument("teacher/student vocab mismatch");
  const Vector<Scalar> pt = restrict_normalize(p_teacher.template cast<Scalar>(), support);
  const Vector<Scalar> logps = log_softmax(gather(z_student, support));
  const Vector<Scalar> ps = logps.array().exp().matrix();
  const Vector<Scalar> mix = jsd_mixture(pt, ps, beta);

  TokenLossGrad<Scalar> out;
  out.loss = jsd_beta(pt, ps, beta);
  // dL/dP~_S(j), up to a constant that the softmax projection removes.
  Vector<Scalar> dl_dps(support.k());
  for (int i = 0; i < support.k(); ++i) {
    if (beta == 0 && !(pt[i] > 0)) throw AbsoluteContinuityError(support.token_ids[i]);
    dl_dps[i] = (Scalar(1) - beta) * (logps[i] - std::log(mix[i])) -
                beta * (beta * pt[i] + (Scalar(1) - beta) * ps[i]) / mix[i];
  }
  const Scalar mean = ps.dot(dl_dps);
  out.grad_logits = Vector<Scalar>::Zero(vocab);
  for (int i = 0; i < support.k(); ++i) {
    out.grad_logits[support.token_ids[i]] = ps[i] * (dl_dps[i] - mean);
  }
  return out;
}

/// Divergence branch: forward KL (either variant) at beta = 1, JSD_beta otherwise.
struct GuidanceSpec {
  double beta = 1.0;
  FklVariant variant = FklVariant::normalized;
};

template <typename DerivedT, typename DerivedZ>
auto guidance_token(const Eigen::MatrixBase<DerivedT>& p_teacher,
                    const Eigen::MatrixBase<DerivedZ>& z_student, const SupportSet& support,
                    const GuidanceSpec& spec) {
  using Scalar = typename DerivedZ::Scalar;
  if (spec.beta == 1) return fkl_token(p_teacher, z_student, support, spec.variant);
  return jsd_token(p_teacher, z_student, support, Scalar(spec.beta));
}

/// Exactly one branch per token: guidance where rec.mask is set, OPD elsewhere.
template <typename DerivedT, typename DerivedZ>
auto aopd_token(const TokenRecord& rec, const Eigen::MatrixBase<DerivedT>& p_teacher,
                const Eigen::MatrixBase<DerivedZ>& z_student, const SupportSet& support,
                const GuidanceSpec& spec) {
  if (rec.mask) return guidance_token(p_teacher, z_student, support, spec);
  return opd_token(rec, z_student);
}

// ---------------------------------------------------------------------------
// Sequence and batch level.

struct ObjectiveConfig {
  Objective objective = Objective::aopd;
  double tau = 0.0;
  double beta = 1.0;
  int k_support = 16;
  FklVariant variant = FklVariant::normalized;
  double zero_eps = 1e-6;

  GuidanceSpec guidance() const { return {beta, variant}; }
  /// Mask rule implied by the objective (OPD never intervenes, GKD always does).
  MaskRule mask_rule() const;
  /// Whether the objective trains on teacher-sampled trajectories.
  bool teacher_sampled() const { return objective == Objective::seqkd; }
  bool operator==(const ObjectiveConfig&) const = default;
};

struct SequenceLossGrad {
  double loss = 0.0;
  double loss_policy = 0.0;    // OPD branch (or NLL for SeqKD)
  double loss_guidance = 0.0;  // divergence branch
  GradientTable grad;
  GradientTable guidance_grad;
  std::size_t tokens = 0;
  std::size_t intervened = 0;
  double max_abs_guidance_component = 0.0;

  explicit SequenceLossGrad(int vocab) : grad(vocab), guidance_grad(vocab) {}
};

/// Token losses and gradients averaged with weight 1/|y|; gradients are
/// accumulated onto the student rows they were computed at.
SequenceLossGrad sequence_loss_grad(const Trajectory& traj, const PolicyTable& student,
                                    const PolicyTable& teacher, const ObjectiveConfig& cfg);

/// Mean over trajectories of sequence_loss_grad. Per-trajectory work may run on
/// `jobs` threads; the merge is serial and in trajectory order.
SequenceLossGrad batch_loss_grad(std::span<const Trajectory> batch, const PolicyTable& student,
                                 const PolicyTable& teacher, const ObjectiveConfig& cfg,
                                 int jobs = 1);

/// OPD batch loss split over positive, negative and zero advantage positions.
struct OpdSplit {
  double positive = 0.0;
  double negative = 0.0;
  double zero = 0.0;
  double total = 0.0;
};

OpdSplit opd_loss_split(std::span<const Trajectory> batch, const PolicyTable& student);

}  // namespace aopd
