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

#include "aopd/policy.hpp"

#include <vector>

namespace aopd {

/// Per-position annotation of a generated token. advantage and prob_gap are
/// constants with respect to the student parameters.
struct TokenRecord {
  ContextKey ctx;
  int token = 0;
  double logp_teacher = 0.0;  // ln P_T(y_t | c_t), floored at ln 1e-12
  double logp_student = 0.0;  // ln P_S(y_t | c_t)
  double advantage = 0.0;     // logp_teacher - logp_student
  double prob_gap = 0.0;      // P_T(y_t | c_t) - P_S(y_t | c_t)
  bool mask = false;          // guidance replaces the policy gradient here
  bool floored = false;       // the teacher probability floor fired
};

struct Prompt {
  std::vector<int> tokens;
  int id = 0;
  bool operator==(const Prompt&) const = default;
};

enum class Source { student, teacher };

struct Trajectory {
  Prompt prompt;
  std::vector<int> tokens;
  std::vector<TokenRecord> records;
  Source source = Source::student;
};

}  // namespace aopd
