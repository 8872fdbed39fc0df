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

// Randomized invariant suite: analytic gradients against finite differences,
// the tau = -1 / tau = +1 reductions, guidance boundedness and logit shift
// invariance. Every failure carries the seed that regenerates its instance.

#include "aopd/objectives.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace aopd {

struct VerifyOptions {
  int instances = 1000;
  std::uint64_t seed = 20260915;
  double fd_step = 1e-5;
  double rel_tol = 1e-4;
  int reduction_steps = 20;
};

using OpdTokenFn =
    std::function<TokenLossGrad<double>(double advantage, int token, const Vector<double>& z)>;

/// Substitutable implementations, so a test can inject a broken one.
struct ObjectiveHooks {
  OpdTokenFn opd = [](double a, int y, const Vector<double>& z) { return opd_token(a, y, z); };
};

struct PropertyResult {
  std::string category;
  std::string property;
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst = 0.0;  // largest error or violation seen
};

struct PropertyFailure {
  std::string category;
  std::string property;
  std::uint64_t instance_seed = 0;
  std::string detail;
};

struct VerifyReport {
  std::vector<PropertyResult> properties;
  std::vector<PropertyFailure> failures;

  bool passed() const { return failures.empty(); }
  void merge(const VerifyReport& other);
  /// (category, checked, failed) summed over properties, in first-seen order.
  std::vector<PropertyResult> category_counts() const;
};

/// A random token-level instance. Teacher and student logits are drawn
/// independently, so every row is strictly positive.
struct GradientInstance {
  Vector<double> z_teacher;
  Vector<double> z_student;
  int token = 0;
  SupportSet support;
};

GradientInstance make_gradient_instance(std::uint64_t seed, double logit_scale = 2.0);

VerifyReport verify_gradients(const VerifyOptions& opts, const ObjectiveHooks& hooks = {});
VerifyReport verify_reductions(const VerifyOptions& opts);
VerifyReport verify_boundedness(const VerifyOptions& opts);
VerifyReport verify_shift_invariance(const VerifyOptions& opts, const ObjectiveHooks& hooks = {});

VerifyReport run_verify(const VerifyOptions& opts, const ObjectiveHooks& hooks = {});

void print_report(std::ostream& os, const VerifyReport& report);

}  // namespace aopd
