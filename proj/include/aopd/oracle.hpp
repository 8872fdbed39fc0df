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

// Brute-force reference computations. Nothing here shares a code path with
// the analytic gradients it is used to check.

#include "aopd/objectives.hpp"
#include "aopd/policy.hpp"
#include "aopd/simplex.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace aopd {

/// Central differences (L(z + h e_v) - L(z - h e_v)) / 2h per coordinate.
template <typename LossFn>
Vector<double> fd_gradient(LossFn&& loss, const Vector<double>& z, double step = 1e-5) {
  if (!(step > 0)) throw std::invalid_argument("finite-difference step must be > 0");
  Vector<double> g(z.size());
  Vector<double> probe = z;
  for (Eigen::Index v = 0; v < z.size(); ++v) {
    probe[v] = z[v] + step;
    const double up = loss(probe);
    probe[v] = z[v] - step;
    const double down = loss(probe);
    probe[v] = z[v];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::domain_error("non-finite loss at finite-difference probe " + std::to_string(v));
    }
    g[v] = (up - down) / (2.0 * step);
  }
  return g;
}

/// max_v |a_v - b_v| / max(max|a|, max|b|, floor). The floor keeps a gradient
/// that is zero up to roundoff from reading as a large relative error.
inline double gradient_rel_error(const Vector<double>& analytic, const Vector<double>& numeric,
                                 double floor = 1e-6) {
  const double scale = std::max({analytic.cwiseAbs().maxCoeff(),
                                 numeric.cwiseAbs().maxCoeff(), floor});
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

enum class ContextWeighting { uniform, student_stationary };

std::string to_string(ContextWeighting w);
ContextWeighting parse_context_weighting(const std::string& s);

/// Stationary distribution of the order-`width` context chain driven by the
/// student, over all V^width windows. Solved as a sparse linear system.
Vector<double> stationary_context_distribution(const PolicyTable& student, int width);

/// sum_ctx w(ctx) KL(P_S(.|ctx) || P_T(.|ctx)) over every context window of
/// width max(order_S, order_T).
double exact_reverse_kl(const PolicyTable& student, const PolicyTable& teacher,
                        ContextWeighting weighting = ContextWeighting::student_stationary);

/// Same weighting, Shannon entropy of the student rows.
double exact_student_entropy(const PolicyTable& student, int width,
                             ContextWeighting weighting = ContextWeighting::student_stationary);

struct K1Estimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
};

/// Mean of ln P_S(y) - ln P_T(y) along one long student-sampled chain, with a
/// batch-means standard error.
K1Estimate k1_estimate(const PolicyTable& student, const PolicyTable& teacher,
                       std::size_t samples, std::uint64_t seed, std::size_t burn_in = 2000,
                       std::size_t batches = 100);

/// A single context where the teacher favors a token the student has all but
/// ruled out: P_S(v*) <= 1e-6, P_T(v*) >= 0.5.
struct BlackHoleScenario {
  ContextKey ctx;
  int essential_token = 0;
  ProbVector<double> teacher_row;
  ProbVector<double> student_row;
};

inline constexpr double kBlackHoleTeacherProb = 0.9;
inline constexpr double kBlackHoleStudentProb = 1e-6;

BlackHoleScenario make_blackhole(int vocab, std::uint64_t seed);

/// Order-0 policy whose single row has the given probabilities.
PolicyTable single_row_policy(const ProbVector<double>& row, Role role);

/// Trains the scenario's student row for `steps` on-policy single-token steps
/// and returns P_S(v*) before the first step and after every step.
std::vector<double> escape_experiment(const BlackHoleScenario& scenario,
                                      const ObjectiveConfig& objective, int steps, double lr,
                                      std::uint64_t seed);

}  // namespace aopd
