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
#include "aopd/policy.hpp"
#include "aopd/records.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace aopd {

/// Seeded uniform-random prompts with ids 0..count-1.
std::vector<Prompt> make_prompt_set(int count, int length, int vocab, std::uint64_t seed);

/// Annotates one student-sampled token against both policies.
TokenRecord annotate_token(const PolicyTable& student, const PolicyTable& teacher,
                           const ContextKey& ctx, int token, const MaskRule& mask);

/// Samples `horizon` tokens per prompt from the student and annotates every
/// position. Each prompt uses its own stream derived from (seed, prompt id),
/// so the result does not depend on `jobs`.
std::vector<Trajectory> rollout_student(const PolicyTable& student, const PolicyTable& teacher,
                                        std::span<const Prompt> prompts, int horizon,
                                        const MaskRule& mask, std::uint64_t seed,
                                        int jobs = 1);

inline std::vector<Trajectory> rollout_student(const PolicyTable& student,
                                               const PolicyTable& teacher,
                                               std::span<const Prompt> prompts, int horizon,
                                               double tau, std::uint64_t seed, int jobs = 1) {
  return rollout_student(student, teacher, prompts, horizon, MaskRule::threshold(tau), seed,
                         jobs);
}

/// Teacher-sampled trajectories for SeqKD. Records carry the teacher
/// log-probability; advantage, gap and student log-probability are 0.
std::vector<Trajectory> rollout_teacher(const PolicyTable& teacher,
                                        std::span<const Prompt> prompts, int horizon,
                                        std::uint64_t seed, int jobs = 1);

/// One line per record: prompt_id,t,ctx,y,logp_T,logp_S,A,gap,G
/// (ctx tokens space-separated, oldest first).
void write_trajectories(std::ostream& os, std::span<const Trajectory> trajectories);

}  // namespace aopd
