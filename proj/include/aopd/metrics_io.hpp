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

#include "aopd/trainer.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace aopd {

inline constexpr const char* kMetricsHeader =
    "step,objective,tau,beta,k,loss_total,loss_pos,loss_guidance,grad_norm,entropy,"
    "intervention_ratio,exact_rkl";

/// One row per step; intervention_ratio is left empty when not applicable (SeqKD).
void write_metrics_csv(std::ostream& os, const TrainConfig& cfg,
                       std::span<const StepMetrics> metrics);

/// step,bucket,count rows for every step that is a multiple of `interval`.
/// bucket is the lower edge of a 1-nat advantage bin.
void write_advantage_hist_csv(std::ostream& os, std::span<const StepMetrics> metrics,
                              int interval);

/// value,final_exact_rkl,final_entropy,mean_intervention_ratio
void write_ablation_csv(std::ostream& os, AblationAxis axis, std::span<const AblationRow> rows);

/// step,p_essential
void write_trace_csv(std::ostream& os, std::span<const double> trace);

/// Renders any CSV with a header row as an aligned text table.
void render_csv_table(std::istream& csv, std::ostream& os);

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace aopd
