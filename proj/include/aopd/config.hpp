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

// key = value run configuration, one [section] per module:
//
//   [objective]  objective (required), tau, beta, k_support, fkl_variant, zero_eps
//   [train]      lr, batch_trajectories, horizon, steps, prompt_length,
//                hist_interval, rkl_weighting
//   [policy]     vocab, order, concentration, student_mode, perturb_sigma
//   [seeds]      teacher, student, rollout
//
// Omitted keys take the TrainConfig defaults, except k_support which defaults
// to min(32, vocab).

#include "aopd/trainer.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace aopd {

inline constexpr const char* kArtifactVersion = "0.3.0";

TrainConfig parse_config(std::istream& is);
TrainConfig load_config(const std::filesystem::path& path);
void write_config(std::ostream& os, const TrainConfig& cfg);
std::string config_to_string(const TrainConfig& cfg);

struct RunManifest {
  TrainConfig config;
  std::string version = kArtifactVersion;
  std::string start_time;
  std::filesystem::path run_dir;
};

/// Writes manifest.ini (config snapshot plus a [run] section) into run_dir.
void write_manifest(const RunManifest& manifest);
/// Appends a [completion] section with the end time.
void append_manifest_completion(const std::filesystem::path& run_dir,
                                const std::string& end_time);
/// Reads the config snapshot back out of a manifest.
TrainConfig read_manifest_config(const std::filesystem::path& run_dir);

std::string utc_timestamp();

}  // namespace aopd
