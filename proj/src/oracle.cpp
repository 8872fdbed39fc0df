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

#include "aopd/oracle.hpp"
#include "aopd/rollout.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <numeric>

namespace aopd {

std::string to_string(ContextWeighting w) {
  return w == ContextWeighting::uniform ? "uniform" : "student-stationary";
}

ContextWeighting parse_context_weighting(const std::string& s) {
  if (s == "uniform") return ContextWeighting::uniform;
  if (s == "student-stationary") return ContextWeighting::student_stationary;
  throw std::invalid_argument("unknown context weighting '" + s + "'");
}

namespace {

Eigen::Index window_count(int vocab, int width) {
  Eigen::Index n = 1;
  for (int i = 0; i < width; ++i) {
    n *= vocab;
    if (n > kMaxContextRows) throw std::invalid_argument("context enumeration exceeds 65536");
  }
  return n;
}

// Window index w encodes tokens oldest-first in base V; a policy of order m
// keys on the last m of them, i.e. w mod V^m.
Eigen::Index policy_row(const PolicyTable& p, Eigen::Index window) {
  return window % p.rows();
}

Vector<double> context_weights(const PolicyTable& student, int width,
                               ContextWeighting weighting) {
  const Eigen::Index n = window_count(student.vocab(), width);
  if (weighting == ContextWeighting::uniform) {
    return Vector<double>::Constant(n, 1.0 / static_cast<double>(n));
  }
  return stationary_context_distribution(student, width);
}

}  // namespace

Vector<double> stationary_context_distribution(const PolicyTable& student, int width) {
  if (width < student.order()) throw std::invalid_argument("window narrower than student order");
  const int vocab = student.vocab();
  const Eigen::Index n = window_count(vocab, width);
  if (n == 1) return Vector<double>::Ones(1);

  // Solve (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(n) * (vocab + 2));
  for (Eigen::Index w = 0; w < n; ++w) {
    const ProbVector<double> p = student.dist_at_row(policy_row(student, w));
    for (int y = 0; y < vocab; ++y) {
      const Eigen::Index next = (w * vocab + y) % n;
      if (next != n - 1) entries.emplace_back(next, w, p[y]);
    }
    if (w != n - 1) entries.emplace_back(w, w, -1.0);
    entries.emplace_back(n - 1, w, 1.0);
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(entries.begin(), entries.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw std::runtime_error("stationary solve failed");
  Vector<double> rhs = Vector<double>::Zero(n);
  rhs[n - 1] = 1.0;
  Vector<double> pi = lu.solve(rhs);
  pi = pi.cwiseMax(0.0);
  return pi / pi.sum();
}

double exact_reverse_kl(const PolicyTable& student, const PolicyTable& teacher,
                        ContextWeighting weighting) {
  if (student.vocab() != teacher.vocab()) throw std::invalid_argument("vocab mismatch");
  const int width = std::max(student.order(), teacher.order());
  const Vector<double> w = context_weights(student, width, weighting);
  double total = 0.0;
  for (Eigen::Index c = 0; c < w.size(); ++c) {
    if (w[c] == 0) continue;
    const Vector<double> ls = log_softmax(student.row(policy_row(student, c)));
    const Vector<double> lt = log_softmax(teacher.row(policy_row(teacher, c)));
    const double kl = (ls.array().exp() * (ls - lt).array()).sum();
    total += w[c] * std::max(kl, 0.0);
  }
  return total;
}

double exact_student_entropy(const PolicyTable& student, int width,
                             ContextWeighting weighting) {
  const Vector<double> w = context_weights(student, width, weighting);
  double total = 0.0;
  for (Eigen::Index c = 0; c < w.size(); ++c) {
    total += w[c] * entropy(student.dist_at_row(policy_row(student, c)));
  }
  return total;
}

K1Estimate k1_estimate(const PolicyTable& student, const PolicyTable& teacher,
                       std::size_t samples, std::uint64_t seed, std::size_t burn_in,
                       std::size_t batches) {
  if (student.vocab() != teacher.vocab()) throw std::invalid_argument("vocab mismatch");
  if (batches < 2 || samples < batches) throw std::invalid_argument("need >= 2 batches");
  const int width = std::max(student.order(), teacher.order());
  Rng rng = make_rng(seed, {0x41ULL});
  std::vector<int> history(static_cast<std::size_t>(width), kBosToken);
  const std::vector<int> empty;
  const std::size_t per_batch = samples / batches;
  std::vector<double> batch_means;
  batch_means.reserve(batches);
  double acc = 0.0;
  std::size_t in_batch = 0;
  const std::size_t total = burn_in + per_batch * batches;
  for (std::size_t i = 0; i < total; ++i) {
    const ContextKey ctx = context_window(history, empty, 0, width);
    const Vector<double> ls = log_softmax(student.row(student.row_index(ctx)));
    const int y = sample_categorical(ls.array().exp().matrix().eval(), rng);
    if (width > 0) {
      history.erase(history.begin());
      history.push_back(y);
    }
    if (i < burn_in) continue;
    acc += ls[y] - log_softmax(teacher.row(teacher.row_index(ctx)))[y];
    if (++in_batch == per_batch) {
      batch_means.push_back(acc / static_cast<double>(per_batch));
      acc = 0.0;
      in_batch = 0;
    }
  }
  const double b = static_cast<double>(batch_means.size());
  const double mean = std::accumulate(batch_means.begin(), batch_means.end(), 0.0) / b;
  double var = 0.0;
  for (double m : batch_means) var += (m - mean) * (m - mean);
  var /= (b - 1.0);
  return {mean, std::sqrt(var / b), per_batch * batches};
}

BlackHoleScenario make_blackhole(int vocab, std::uint64_t seed) {
  if (vocab < 3) throw std::invalid_argument("black-hole scenario needs vocab >= 3");
  Rng rng = make_rng(seed, {0xb1ac4ULL});
  std::uniform_int_distribution<int> pick(0, vocab - 1);
  std::gamma_distribution<double> gamma(1.0, 1.0);

  BlackHoleScenario s;
  s.essential_token = pick(rng);
  auto spread = [&](double essential_mass) {
    Vector<double> w(vocab);
    for (int v = 0; v < vocab; ++v) w[v] = v == s.essential_token ? 0.0 : 0.05 + gamma(rng);
    w *= (1.0 - essential_mass) / w.sum();
    w[s.essential_token] = essential_mass;
    return w;
  };
  s.teacher_row = spread(kBlackHoleTeacherProb);
  s.student_row = spread(kBlackHoleStudentProb);
  return s;
}

PolicyTable single_row_policy(const ProbVector<double>& row, Role role) {
  require_prob_vector(row, "policy row");
  PolicyTable p(0, static_cast<int>(row.size()), role);
  for (Eigen::Index v = 0; v < row.size(); ++v) {
    p.logits()(0, v) = std::log(std::max(row[v], kLogFloor));
  }
  return p;
}

std::vector<double> escape_experiment(const BlackHoleScenario& scenario,
                                      const ObjectiveConfig& objective, int steps, double lr,
                                      std::uint64_t seed) {
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  const PolicyTable teacher = single_row_policy(scenario.teacher_row, Role::teacher);
  PolicyTable student = single_row_policy(scenario.student_row, Role::student);
  const MaskRule mask = objective.mask_rule();
  const int v_star = scenario.essential_token;
  Rng rng = make_rng(seed, {0xe5ca9eULL});

  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(steps) + 1);
  trace.push_back(student.dist_at_row(0)[v_star]);
  for (int step = 0; step < steps; ++step) {
    Trajectory traj;
    if (objective.teacher_sampled()) {
      const int y = sample_categorical(teacher.dist_at_row(0), rng);
      TokenRecord rec;
      rec.token = y;
      traj.source = Source::teacher;
      traj.records.push_back(rec);
    } else {
      const int y = sample_categorical(student.dist_at_row(0), rng);
      traj.records.push_back(annotate_token(student, teacher, scenario.ctx, y, mask));
    }
    const auto lg = sequence_loss_grad(traj, student, teacher, objective);
    student = apply_gradient(student, lg.grad, lr);
    trace.push_back(student.dist_at_row(0)[v_star]);
  }
  return trace;
}

}  // namespace aopd
