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


#include "aopd/simplex.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace aopd {
namespace {

using test::vec;

TEST(Softmax, Examples) {
  EXPECT_TRUE(softmax(vec({0, 0})).isApprox(vec({0.5, 0.5}), 1e-15));
  EXPECT_TRUE(softmax(vec({std::log(3.0), 0})).isApprox(vec({0.75, 0.25}), 1e-15));
  for (double c : {-700.0, -3.0, 0.0, 12.5, 800.0}) {
    EXPECT_TRUE(softmax(vec({c, c, c, c})).isApprox(vec({0.25, 0.25, 0.25, 0.25}), 1e-15));
  }
}

TEST(Softmax, ExtremeLogitsStayOnSimplex) {
  const Vector<double> p = softmax(vec({1000, -1000, 0, 999}));
  EXPECT_TRUE(is_prob_vector(p));
  EXPECT_GT(p[0], p[3]);
}

TEST(Softmax, Temperature) {
  const Vector<double> z = vec({1, 2, 3});
  EXPECT_TRUE(softmax(z, 2.0).isApprox(softmax(Vector<double>(z / 2.0)), 1e-15));
  EXPECT_THROW(softmax(z, 0.0), std::invalid_argument);
}

TEST(Softmax, RejectsNonFinite) {
  EXPECT_THROW(softmax(vec({0, std::numeric_limits<double>::infinity()})),
               std::invalid_argument);
  EXPECT_THROW(softmax(vec({0, std::nan("")})), std::invalid_argument);
}

TEST(LogSoftmax, MatchesLogOfSoftmax) {
  const Vector<double> z = vec({0.3, -2, 5, 1});
  const Vector<double> a = log_softmax(z);
  const Vector<double> b = softmax(z).array().log().matrix();
  EXPECT_TRUE(a.isApprox(b, 1e-14));
}

TEST(Entropy, Examples) {
  EXPECT_EQ(entropy(vec({0, 1, 0})), 0.0);
  EXPECT_NEAR(entropy(vec({0.25, 0.25, 0.25, 0.25})), 1.3862943611198906, 1e-15);
  EXPECT_NEAR(entropy(vec({0.5, 0.5, 0, 0})), 0.6931471805599453, 1e-15);
}

TEST(KlDivergence, Examples) {
  const Vector<double> p = vec({0.75, 0.25});
  const Vector<double> q = vec({0.5, 0.5});
  EXPECT_EQ(kl_divergence(p, p), 0.0);
  EXPECT_NEAR(kl_divergence(p, q), 0.13081203594113696, 1e-15);
  EXPECT_NEAR(kl_divergence(q, p), 0.14384103622589046, 1e-15);
}

TEST(KlDivergence, AbsoluteContinuityNamesToken) {
  try {
    kl_divergence(vec({0.5, 0.25, 0.25}), vec({0.5, 0.5, 0.0}));
    FAIL() << "expected AbsoluteContinuityError";
  } catch (const AbsoluteContinuityError& e) {
    EXPECT_EQ(e.token(), 2);
  }
  // q may vanish where p does.
  EXPECT_NO_THROW(kl_divergence(vec({1.0, 0.0}), vec({1.0, 0.0})));
}

TEST(JsdBeta, Endpoints) {
  const Vector<double> t = vec({0.7, 0.3});
  const Vector<double> s = vec({0.5, 0.5});
  EXPECT_EQ(jsd_beta(t, s, 1.0), kl_divergence(t, s));
  EXPECT_EQ(jsd_beta(t, s, 0.0), kl_divergence(s, t));
  for (double b : {0.0, 0.25, 0.5, 0.75, 0.9, 1.0}) EXPECT_EQ(jsd_beta(t, t, b), 0.0);
  EXPECT_THROW(jsd_beta(t, s, 1.5), std::invalid_argument);
  EXPECT_THROW(jsd_beta(t, s, -0.1), std::invalid_argument);
}

TEST(JsdBeta, InteriorValues) {
  // Reference values evaluated at 40 digits.
  const Vector<double> t = vec({0.7, 0.3});
  const Vector<double> s = vec({0.5, 0.5});
  EXPECT_NEAR(jsd_beta(t, s, 0.25), 0.036774098941572453, 1e-15);
  EXPECT_NEAR(jsd_beta(t, s, 0.5), 0.021005925701837050, 1e-15);
  EXPECT_NEAR(jsd_beta(t, s, 0.75), 0.036636722486216931, 1e-15);
  EXPECT_NEAR(jsd_beta(t, s, 0.9), 0.060447543956797022, 1e-15);
}

TEST(JsdBeta, ContinuousAtEndpoints) {
  const Vector<double> t = vec({0.6, 0.3, 0.1});
  const Vector<double> s = vec({0.2, 0.2, 0.6});
  EXPECT_NEAR(jsd_beta(t, s, 1e-7), jsd_beta(t, s, 0.0), 1e-5);
  EXPECT_NEAR(jsd_beta(t, s, 1 - 1e-7), jsd_beta(t, s, 1.0), 1e-5);
}

TEST(TopK, Examples) {
  EXPECT_EQ(topk_support(vec({0.4, 0.3, 0.2, 0.1}), 2).token_ids, (std::vector<int>{0, 1}));
  EXPECT_EQ(topk_support(vec({0.4, 0.3, 0.3, 0.0}), 2).token_ids, (std::vector<int>{0, 1}));
  EXPECT_EQ(topk_support(vec({0.1, 0.2, 0.3, 0.4}), 4).token_ids,
            (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(topk_support(vec({0.1, 0.2, 0.3, 0.4}), 2).token_ids, (std::vector<int>{2, 3}));
  EXPECT_THROW(topk_support(vec({0.5, 0.5}), 0), std::out_of_range);
  EXPECT_THROW(topk_support(vec({0.5, 0.5}), 3), std::out_of_range);
}

TEST(RestrictNormalize, Examples) {
  const Vector<double> p = vec({0.4, 0.3, 0.2, 0.1});
  EXPECT_TRUE(restrict_normalize(p, SupportSet{{0, 1}}).isApprox(vec({4.0 / 7, 3.0 / 7}), 1e-15));
  EXPECT_TRUE(restrict_normalize(p, SupportSet{{0, 1, 2, 3}}).isApprox(p, 1e-15));
  EXPECT_THROW(restrict_normalize(vec({0, 0, 1}), SupportSet{{0, 1}}), std::domain_error);
}

}  // namespace
}  // namespace aopd
