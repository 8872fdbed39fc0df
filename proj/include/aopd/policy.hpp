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

#include "aopd/random.hpp"
#include "aopd/simplex.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace aopd {

inline constexpr int kBosToken = 0;
inline constexpr Eigen::Index kMaxContextRows = 65536;

enum class Role { teacher, student };
enum class StudentMode { uniform_init, lower_order, perturbed };

std::string to_string(Role r);
std::string to_string(StudentMode m);
Role parse_role(const std::string& s);
StudentMode parse_student_mode(const std::string& s);

/// Trailing window of (prompt ++ generated prefix), oldest token first.
/// A policy of order m keys on the last m entries, so one window can serve
/// policies of different orders.
struct ContextKey {
  std::vector<int> tokens;
  bool operator==(const ContextKey&) const = default;
};

/// Last `width` tokens of prompt ++ generated[0, t), left-padded with BOS.
ContextKey context_window(std::span<const int> prompt, std::span<const int> generated,
                          int t, int width);

/// Order-m tabular softmax policy: one logit row per context of m tokens.
class PolicyTable {
 public:
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  PolicyTable(int order, int vocab, Role role, std::uint64_t seed = 0);

  int order() const noexcept { return order_; }
  int vocab() const noexcept { return vocab_; }
  Role role() const noexcept { return role_; }
  std::uint64_t seed() const noexcept { return seed_; }
  Eigen::Index rows() const noexcept { return logits_.rows(); }

  Matrix& logits() noexcept { return logits_; }
  const Matrix& logits() const noexcept { return logits_; }
  LogitVector<double> row(Eigen::Index r) const { return logits_.row(r).transpose(); }

  Eigen::Index row_index(const ContextKey& ctx) const;
  ContextKey context_of_row(Eigen::Index r) const;

  ProbVector<double> dist_at_row(Eigen::Index r) const { return softmax(row(r)); }

  bool operator==(const PolicyTable& o) const;

 private:
  int order_;
  int vocab_;
  Role role_;
  std::uint64_t seed_;
  Matrix logits_;
};

ProbVector<double> conditional_dist(const PolicyTable& policy, const ContextKey& ctx);

int sample_token(const PolicyTable& policy, const ContextKey& ctx, Rng& rng);

/// Sparse per-row accumulation of dLoss/dz. Ordered by row so merging is
/// deterministic.
class GradientTable {
 public:
  explicit GradientTable(int vocab) : vocab_(vocab) {}

  int vocab() const noexcept { return vocab_; }
  const std::map<Eigen::Index, Vector<double>>& rows() const noexcept { return rows_; }
  std::size_t visited() const noexcept { return rows_.size(); }

  void accumulate(Eigen::Index row, const Vector<double>& grad, double weight = 1.0);
  void merge(const GradientTable& other, double weight = 1.0);
  void scale(double factor);
  double l2_norm() const;
  double max_abs() const;

 private:
  int vocab_;
  std::map<Eigen::Index, Vector<double>> rows_;
};

/// logits[row] -= lr * grads[row] for visited rows.
PolicyTable apply_gradient(const PolicyTable& policy, const GradientTable& grads, double lr);

/// Rows drawn from a symmetric Dirichlet(concentration), stored as log-probabilities.
PolicyTable make_random_teacher(int order, int vocab, double concentration,
                                std::uint64_t seed);

/// uniform_init: zero logits at the teacher's order.
/// lower_order: order m-1 table; each row starts at the mean teacher distribution
///   over the V teacher contexts it aggregates.
/// perturbed: teacher logits plus N(0, sigma^2) noise.
PolicyTable make_weak_student(const PolicyTable& teacher, StudentMode mode,
                              std::uint64_t seed, double sigma = 2.0);

void write_policy(std::ostream& os, const PolicyTable& policy);
PolicyTable read_policy(std::istream& is);

}  // namespace aopd
