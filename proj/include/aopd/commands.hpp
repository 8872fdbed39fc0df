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

// Run-directory level operations behind the command-line front end.

#include "aopd/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace aopd {

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitConfig = 2, kExitVerify = 3 };

/// Creates `dir` (and parents). Throws if `dir` already exists.
void create_run_dir(const std::filesystem::path& dir);

/// Writes manifest.ini, runs training, then metrics.csv, advantage_hist.csv
/// and final_policy.txt, and closes the manifest.
TrainResult run_train(const TrainConfig& cfg, const std::filesystem::path& run_dir, int jobs = 1);

/// One run directory per value under run_dir plus comparison.csv.
std::vector<AblationRow> run_ablate(const TrainConfig& base, AblationAxis axis,
                                    const std::vector<double>& values,
                                    const std::filesystem::path& run_dir, int jobs = 1);

struct BlackHoleSummary {
  std::vector<double> aopd_trace;
  std::vector<double> opd_trace;
};

/// Escape traces for AOPD (tau = 0, beta = 1, K = V) and OPD on the same
/// scenario; writes aopd_trace.csv and opd_trace.csv when run_dir is non-empty.
BlackHoleSummary run_blackhole(int vocab, int steps, double lr, std::uint64_t seed,
                               const std::filesystem::path& run_dir = {});

}  // namespace aopd
