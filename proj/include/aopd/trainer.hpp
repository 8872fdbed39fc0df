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

#include "aopd/objectives.hpp"
#include "aopd/oracle.hpp"
#include "aopd/policy.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace aopd {

struct Seeds {
  std::uint64_t teacher = 1;
  std::uint64_t student = 2;
  std::uint64_t rollout = 3;
  bool operator==(const Seeds&) const = default;
};

struct TrainConfig {
  ObjectiveConfig objective;
  double lr = 128.0;
  int batch_trajectories = 64;
  int horizon = 32;
  int steps = 90;
  int prompt_length = 2;

  int vocab = 16;
  int order = 2;
  double concentration = 0.3;
  StudentMode student_mode = StudentMode::uniform_init;
  double perturb_sigma = 2.0;

  Seeds seeds;
  ContextWeighting rkl_weighting = ContextWeighting::student_stationary;
  int hist_interval = 10;

  /// Throws ConfigError naming the first offending field.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Advantage counts in 1-nat buckets [b, b+1), b in [kMin, kMax]; values
/// outside the range land in the end buckets.
struct AdvantageHistogram {
  static constexpr int kMin = -30;
  static constexpr int kMax = 5;
  std::vector<long> counts = std::vector<long>(kMax - kMin + 1, 0);

  void add(double advantage);
  int bucket_floor(std::size_t i) const { return kMin + static_cast<int>(i); }
};

struct StepMetrics {
  int step = 0;
  double loss_total = 0.0;
  double loss_pos = 0.0;
  double loss_guidance = 0.0;
  double grad_norm = 0.0;
  double guidance_grad_norm = 0.0;
  double max_abs_guidance_component = 0.0;
  double mean_entropy = 0.0;
  bool ratio_applicable = true;
  double intervention_ratio = 0.0;
  double exact_rkl = 0.0;
  std::size_t tokens = 0;
  std::size_t intervened = 0;
  std::size_t visited_contexts = 0;
  std::size_t floored_tokens = 0;
  AdvantageHistogram advantages;
};

struct TrainResult {
  PolicyTable teacher;
  PolicyTable student;
  std::vector<StepMetrics> metrics;
  double initial_rkl = 0.0;
  double final_rkl = 0.0;
};

/// Raised when a step produces a non-finite loss or gradient.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(int step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

PolicyTable build_teacher(const TrainConfig& cfg);
PolicyTable build_student(const TrainConfig& cfg, const PolicyTable& teacher);

/// Metrics for step s describe the snapshot the step's rollouts came from;
/// final_rkl is measured on the returned student.
TrainResult train(const TrainConfig& cfg, int jobs = 1);
TrainResult train(const TrainConfig& cfg, const PolicyTable& teacher, PolicyTable student,
                  int jobs = 1);

struct RetentionReport {
  Objective objective = Objective::aopd;
  double rkl_a_before = 0.0;
  double rkl_a_after = 0.0;
  double rkl_b_before = 0.0;
  double rkl_b_after = 0.0;
  double drop() const { return rkl_a_after - rkl_a_before; }
};

struct ContinualResult {
  PolicyTable student;
  std::vector<StepMetrics> metrics;  // phase A steps then phase B steps
  RetentionReport retention;
};

/// Phase A on config_a's teacher, then phase B on config_b's teacher starting
/// from the phase-A student. The student is built from config_a.
ContinualResult continual_train(const TrainConfig& config_a, const TrainConfig& config_b,
                                int jobs = 1);

enum class AblationAxis { beta, tau, topk };
std::string to_string(AblationAxis a);
AblationAxis parse_ablation_axis(const std::string& s);

/// Copy of `base` with the axis set to `value`; throws ConfigError if illegal.
TrainConfig with_axis_value(const TrainConfig& base, AblationAxis axis, double value);

struct AblationRow {
  double value = 0.0;
  double final_rkl = 0.0;
  double final_entropy = 0.0;
  double mean_intervention_ratio = 0.0;
  TrainResult run;
};

/// One full run per value, all sharing the base seeds. Every value is
/// validated before the first run starts.
std::vector<AblationRow> ablate(const TrainConfig& base, AblationAxis axis,
                                const std::vector<double>& values, int jobs = 1);

}  // namespace aopd
