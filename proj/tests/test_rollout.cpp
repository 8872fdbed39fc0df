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


#include "aopd/rollout.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace aopd {
namespace {

TEST(Prompts, Examples) {
  const auto empty = make_prompt_set(3, 0, 8, 1);
  for (const auto& p : empty) EXPECT_TRUE(p.tokens.empty());
  EXPECT_EQ(make_prompt_set(5, 3, 8, 2), make_prompt_set(5, 3, 8, 2));
  const auto many = make_prompt_set(512, 2, 8, 3);
  std::set<int> ids;
  for (const auto& p : many) ids.insert(p.id);
  EXPECT_EQ(ids.size(), 512u);
  EXPECT_EQ(*ids.begin(), 0);
  EXPECT_EQ(*ids.rbegin(), 511);
  EXPECT_THROW(make_prompt_set(0, 1, 8, 1), std::invalid_argument);
}

TEST(Prompts, EmptyPromptGivesBosContexts) {
  const PolicyTable t = make_random_teacher(2, 5, 0.5, 1);
  const auto batch = rollout_student(t, t, make_prompt_set(1, 0, 5, 1), 1, 0.0, 2);
  EXPECT_EQ(batch[0].records[0].ctx.tokens, (std::vector<int>{kBosToken, kBosToken}));
}

TEST(RolloutStudent, IdenticalPoliciesGiveZeroAdvantage) {
  const PolicyTable t = make_random_teacher(2, 6, 0.5, 4);
  PolicyTable s = t;
  const auto batch = rollout_student(s, t, make_prompt_set(8, 2, 6, 5), 16, 0.0, 6);
  for (const auto& traj : batch) {
    for (const auto& r : traj.records) {
      EXPECT_EQ(r.advantage, 0.0);
      EXPECT_EQ(r.prob_gap, 0.0);
      EXPECT_TRUE(r.mask);
    }
  }
}

TEST(RolloutStudent, ShapeAndDeterminism) {
  const PolicyTable t = make_random_teacher(1, 4, 0.5, 4);
  const PolicyTable s(1, 4, Role::student);
  const auto one = rollout_student(s, t, make_prompt_set(1, 1, 4, 5), 1, 0.0, 6);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].records.size(), 1u);

  const auto prompts = make_prompt_set(6, 2, 4, 7);
  const auto a = rollout_student(s, t, prompts, 10, 0.0, 8, 1);
  const auto b = rollout_student(s, t, prompts, 10, 0.0, 8, 3);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].tokens, b[i].tokens);
  EXPECT_THROW(rollout_student(s, t, prompts, 0, 0.0, 8), std::invalid_argument);
}

TEST(RolloutStudent, AnnotationsAreConsistent) {
  const PolicyTable t = make_random_teacher(2, 8, 0.3, 4);
  const PolicyTable s = make_weak_student(t, StudentMode::perturbed, 3, 1.0);
  const auto batch = rollout_student(s, t, make_prompt_set(4, 2, 8, 5), 12, 0.0, 6);
  for (const auto& traj : batch) {
    for (const auto& r : traj.records) {
      const double pt = conditional_dist(t, r.ctx)[r.token];
      const double ps = conditional_dist(s, r.ctx)[r.token];
      EXPECT_NEAR(r.logp_student, std::log(ps), 1e-12);
      EXPECT_NEAR(r.prob_gap, pt - ps, 1e-14);
      EXPECT_DOUBLE_EQ(r.advantage, r.logp_teacher - r.logp_student);
      EXPECT_EQ(r.mask, r.prob_gap <= 0.0);
    }
  }
}

TEST(RolloutStudent, TeacherFloorIsFlagged) {
  PolicyTable t(0, 2, Role::teacher);
  t.logits().row(0) << 0.0, -40.0;  // P_T(1) ~ 4e-18
  PolicyTable s(0, 2, Role::student);
  const TokenRecord r = annotate_token(s, t, ContextKey{}, 1, MaskRule::threshold(0.0));
  EXPECT_TRUE(r.floored);
  EXPECT_DOUBLE_EQ(r.logp_teacher, std::log(kTeacherProbFloor));
  EXPECT_TRUE(std::isfinite(r.advantage));
}

TEST(RolloutTeacher, OneHotIsDeterministic) {
  PolicyTable t(1, 3, Role::teacher);
  for (Eigen::Index r = 0; r < 3; ++r) {
    t.logits().row(r).setConstant(-1e3);
    t.logits()(r, (r + 1) % 3) = 0.0;
  }
  const auto batch = rollout_teacher(t, make_prompt_set(2, 1, 3, 1), 6, 9);
  for (const auto& traj : batch) {
    int prev = traj.prompt.tokens.back();
    for (int y : traj.tokens) {
      EXPECT_EQ(y, (prev + 1) % 3);
      prev = y;
    }
    EXPECT_EQ(traj.source, Source::teacher);
  }
}

TEST(RolloutTeacher, MatchesStudentStreamWhenPoliciesAgree) {
  // Two-sample frequency test on token counts, 3 sigma per token.
  const PolicyTable t = make_random_teacher(1, 5, 1.0, 21);
  const auto prompts = make_prompt_set(100, 1, 5, 22);
  const auto a = rollout_teacher(t, prompts, 100, 23);
  const auto b = rollout_student(t, t, prompts, 100, 0.0, 24);
  std::vector<double> ca(5, 0), cb(5, 0);
  double n = 0;
  for (const auto& tr : a) for (int y : tr.tokens) ca[y] += 1, n += 1;
  for (const auto& tr : b) for (int y : tr.tokens) cb[y] += 1;
  for (int v = 0; v < 5; ++v) {
    const double p = (ca[v] + cb[v]) / (2 * n);
    const double sigma = std::sqrt(2 * n * p * (1 - p));
    EXPECT_LT(std::abs(ca[v] - cb[v]), 3 * sigma) << "token " << v;
  }
}

TEST(RolloutStudent, NegativeAdvantageTailIsLonger) {
  const PolicyTable t = make_random_teacher(2, 16, 0.3, 31);
  const PolicyTable s(2, 16, Role::student);
  const auto batch = rollout_student(s, t, make_prompt_set(320, 2, 16, 32), 32, 0.0, 33);
  std::vector<double> adv;
  for (const auto& tr : batch) for (const auto& r : tr.records) adv.push_back(r.advantage);
  ASSERT_GE(adv.size(), 10000u);
  std::sort(adv.begin(), adv.end());
  const double p01 = adv[adv.size() / 100];
  const double p99 = adv[adv.size() * 99 / 100];
  EXPECT_GT(-p01, p99);
}

TEST(Trajectories, CsvHeader) {
  const PolicyTable t = make_random_teacher(1, 3, 1.0, 1);
  const auto batch = rollout_student(t, t, make_prompt_set(1, 1, 3, 1), 2, 0.0, 1);
  std::ostringstream os;
  write_trajectories(os, batch);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "prompt_id,t,ctx,y,logp_T,logp_S,A,gap,G");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 3);
}

}  // namespace
}  // namespace aopd
