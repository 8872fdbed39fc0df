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


#include "aopd/verify.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace aopd {
namespace {

VerifyOptions quick() {
  VerifyOptions o;
  o.instances = 100;
  o.reduction_steps = 5;
  return o;
}

TEST(Verify, CleanBuildPasses) {
  const VerifyReport r = run_verify(quick());
  EXPECT_TRUE(r.passed());
  const auto counts = r.category_counts();
  ASSERT_EQ(counts.size(), 4u);
  EXPECT_EQ(counts[0].category, "finite_difference");
  EXPECT_EQ(counts[0].checked, 1300u);
  EXPECT_EQ(counts[1].category, "reduction");
  EXPECT_EQ(counts[2].category, "boundedness");
  EXPECT_EQ(counts[3].category, "shift_invariance");
}

TEST(Verify, SignFlipInOpdGradientIsCaught) {
  ObjectiveHooks broken;
  broken.opd = [](double a, int y, const Vector<double>& z) {
    auto g = opd_token(a, y, z);
    g.grad_logits = -g.grad_logits;
    return g;
  };
  const VerifyReport r = verify_gradients(quick(), broken);
  ASSERT_FALSE(r.passed());
  for (const auto& f : r.failures) EXPECT_EQ(f.property, "opd_token");

  // The reported seed regenerates a failing instance.
  const GradientInstance inst = make_gradient_instance(r.failures.front().instance_seed);
  EXPECT_GE(inst.z_student.size(), 2);

  std::ostringstream os;
  print_report(os, r);
  EXPECT_NE(os.str().find("FAIL finite_difference opd_token seed="), std::string::npos);
  EXPECT_NE(os.str().find("finite_difference: 1300 checked"), std::string::npos);
}

TEST(Verify, InstancesAreSeedDeterministic) {
  const GradientInstance a = make_gradient_instance(77);
  const GradientInstance b = make_gradient_instance(77);
  EXPECT_EQ(a.z_student, b.z_student);
  EXPECT_EQ(a.support, b.support);
  EXPECT_EQ(a.token, b.token);
}

}  // namespace
}  // namespace aopd
