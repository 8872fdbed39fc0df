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

#include "aopd/policy.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace aopd {

std::string to_string(Role r) { return r == Role::teacher ? "teacher" : "student"; }

std::string to_string(StudentMode m) {
  switch (m) {
    case StudentMode::uniform_init: return "uniform-init";
    case StudentMode::lower_order: return "lower-order";
    case StudentMode::perturbed: return "perturbed";
  }
  return "?";
}

Role parse_role(const std::string& s) {
  if (s == "teacher") return Role::teacher;
  if (s == "student") return Role::student;
  throw std::invalid_argument("unknown role '" + s + "'");
}

StudentMode parse_student_mode(const std::string& s) {
  if (s == "uniform-init") return StudentMode::uniform_init;
  if (s == "lower-order") return StudentMode::lower_order;
  if (s == "perturbed") return StudentMode::perturbed;
  throw std::invalid_argument("unknown student mode '" + s + "'");
}

ContextKey context_window(std::span<const int> prompt, std::span<const int> generated,
                          int t, int width) {
  ContextKey ctx{std::vector<int>(static_cast<std::size_t>(width), kBosToken)};
  const long history = static_cast<long>(prompt.size()) + t;
  for (int i = 0; i < width; ++i) {
    const long pos = history - width + i;
    if (pos < 0) continue;
    ctx.tokens[i] = pos < static_cast<long>(prompt.size())
                        ? prompt[pos]
                        : generated[pos - static_cast<long>(prompt.size())];
  }
  return ctx;
}

namespace {

Eigen::Index checked_rows(int order, int vocab) {
  if (order < 0) throw std::invalid_argument("policy order must be >= 0");
  if (vocab < 2) throw std::invalid_argument("policy vocab must be >= 2");
  Eigen::Index rows = 1;
  for (int i = 0; i < order; ++i) {
    rows *= vocab;
    if (rows > kMaxContextRows) {
      throw std::invalid_argument("policy with V^m > 65536 contexts is not supported");
    }
  }
  return rows;
}

}  // namespace

PolicyTable::PolicyTable(int order, int vocab, Role role, std::uint64_t seed)
    : order_(order),
      vocab_(vocab),
      role_(role),
      seed_(seed),
      logits_(Matrix::Zero(checked_rows(order, vocab), vocab)) {}

Eigen::Index PolicyTable::row_index(const ContextKey& ctx) const {
  Eigen::Index idx = 0;
  const int n = static_cast<int>(ctx.tokens.size());
  for (int i = 0; i < order_; ++i) {
    const int pos = n - order_ + i;
    const int tok = pos < 0 ? kBosToken : ctx.tokens[pos];
    if (tok < 0 || tok >= vocab_) {
      throw std::out_of_range("context token " + std::to_string(tok) + " outside vocab");
    }
    idx = idx * vocab_ + tok;
  }
  return idx;
}

ContextKey PolicyTable::context_of_row(Eigen::Index r) const {
  ContextKey ctx{std::vector<int>(static_cast<std::size_t>(order_), 0)};
  for (int i = order_ - 1; i >= 0; --i) {
    ctx.tokens[i] = static_cast<int>(r % vocab_);
    r /= vocab_;
  }
  return ctx;
}

bool PolicyTable::operator==(const PolicyTable& o) const {
  return order_ == o.order_ && vocab_ == o.vocab_ && role_ == o.role_ &&
         seed_ == o.seed_ && logits_ == o.logits_;
}

ProbVector<double> conditional_dist(const PolicyTable& policy, const ContextKey& ctx) {
  return policy.dist_at_row(policy.row_index(ctx));
}

int sample_token(const PolicyTable& policy, const ContextKey& ctx, Rng& rng) {
  return sample_categorical(conditional_dist(policy, ctx), rng);
}

void GradientTable::accumulate(Eigen::Index row, const Vector<double>& grad, double weight) {
  if (grad.size() != vocab_) throw std::invalid_argument("gradient row has wrong length");
  auto [it, inserted] = rows_.try_emplace(row, Vector<double>::Zero(vocab_));
  it->second += weight * grad;
}

void GradientTable::merge(const GradientTable& other, double weight) {
  if (other.vocab_ != vocab_) throw std::invalid_argument("gradient table vocab mismatch");
  for (const auto& [row, g] : other.rows_) accumulate(row, g, weight);
}

void GradientTable::scale(double factor) {
  for (auto& [row, g] : rows_) g *= factor;
}

double GradientTable::l2_norm() const {
  double s = 0.0;
  for (const auto& [row, g] : rows_) s += g.squaredNorm();
  return std::sqrt(s);
}

double GradientTable::max_abs() const {
  double m = 0.0;
  for (const auto& [row, g] : rows_) m = std::max(m, g.cwiseAbs().maxCoeff());
  return m;
}

PolicyTable apply_gradient(const PolicyTable& policy, const GradientTable& grads, double lr) {
  if (!(lr >= 0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be >= 0");
  if (grads.vocab() != policy.vocab()) throw std::invalid_argument("gradient vocab mismatch");
  PolicyTable out = policy;
  for (const auto& [row, g] : grads.rows()) {
    if (row < 0 || row >= policy.rows()) throw std::out_of_range("gradient row out of range");
    if (!all_finite(g)) {
      std::ostringstream msg;
      msg << "non-finite gradient at context [";
      const auto ctx = policy.context_of_row(row);
      for (std::size_t i = 0; i < ctx.tokens.size(); ++i) msg << (i ? " " : "") << ctx.tokens[i];
      msg << "]";
      throw std::domain_error(msg.str());
    }
    out.logits().row(row) -= lr * g.transpose();
  }
  return out;
}

PolicyTable make_random_teacher(int order, int vocab, double concentration,
                                std::uint64_t seed) {
  if (order < 1) throw std::invalid_argument("teacher order must be >= 1");
  if (!(concentration > 0)) throw std::invalid_argument("concentration must be > 0");
  PolicyTable t(order, vocab, Role::teacher, seed);
  Rng rng = make_rng(seed, {0x7eac4e2ULL});
  std::gamma_distribution<double> gamma(concentration, 1.0);
  Vector<double> w(vocab);
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    for (int v = 0; v < vocab; ++v) w[v] = gamma(rng);
    double total = w.sum();
    if (!(total > 0)) {
      w.setOnes();
      total = vocab;
    }
    for (int v = 0; v < vocab; ++v) {
      t.logits()(r, v) = std::log(std::max(w[v] / total, kLogFloor));
    }
  }
  return t;
}

PolicyTable make_weak_student(const PolicyTable& teacher, StudentMode mode,
                              std::uint64_t seed, double sigma) {
  const int vocab = teacher.vocab();
  switch (mode) {
    case StudentMode::uniform_init:
      return PolicyTable(teacher.order(), vocab, Role::student, seed);
    case StudentMode::lower_order: {
      if (teacher.order() < 1) {
        throw std::invalid_argument("lower-order student needs a teacher of order >= 1");
      }
      PolicyTable s(teacher.order() - 1, vocab, Role::student, seed);
      // Teacher rows r and r' share a student row iff r % rows(s) == r' % rows(s).
      PolicyTable::Matrix mean = PolicyTable::Matrix::Zero(s.rows(), vocab);
      for (Eigen::Index r = 0; r < teacher.rows(); ++r) {
        mean.row(r % s.rows()) += teacher.dist_at_row(r).transpose();
      }
      for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const double total = mean.row(r).sum();
        for (int v = 0; v < vocab; ++v) {
          s.logits()(r, v) = std::log(std::max(mean(r, v) / total, kLogFloor));
        }
      }
      return s;
    }
    case StudentMode::perturbed: {
      if (!(sigma >= 0)) throw std::invalid_argument("perturbation sigma must be >= 0");
      PolicyTable s(teacher.order(), vocab, Role::student, seed);
      s.logits() = teacher.logits();
      if (sigma > 0) {
        Rng rng = make_rng(seed, {0x9e27ULL});
        std::normal_distribution<double> noise(0.0, sigma);
        for (Eigen::Index r = 0; r < s.rows(); ++r) {
          for (int v = 0; v < vocab; ++v) s.logits()(r, v) += noise(rng);
        }
      }
      return s;
    }
  }
  throw std::invalid_argument("unknown student mode");
}

namespace {
constexpr const char* kPolicyMagic = "aopd-policy-v1";
}

void write_policy(std::ostream& os, const PolicyTable& policy) {
  os << kPolicyMagic << '\n'
     << "order " << policy.order() << '\n'
     << "vocab " << policy.vocab() << '\n'
     << "role " << to_string(policy.role()) << '\n'
     << "seed " << policy.seed() << '\n';
  char buf[40];
  for (Eigen::Index r = 0; r < policy.rows(); ++r) {
    for (int v = 0; v < policy.vocab(); ++v) {
      std::snprintf(buf, sizeof buf, "%.17g", policy.logits()(r, v));
      os << (v ? " " : "") << buf;
    }
    os << '\n';
  }
}

PolicyTable read_policy(std::istream& is) {
  std::string magic, key, role;
  int order = 0, vocab = 0;
  std::uint64_t seed = 0;
  if (!(is >> magic) || magic != kPolicyMagic) throw std::runtime_error("bad policy header");
  auto expect = [&](const char* name) {
    if (!(is >> key) || key != name) {
      throw std::runtime_error(std::string("policy header missing '") + name + "'");
    }
  };
  expect("order");
  is >> order;
  expect("vocab");
  is >> vocab;
  expect("role");
  is >> role;
  expect("seed");
  is >> seed;
  if (!is) throw std::runtime_error("malformed policy header");
  PolicyTable p(order, vocab, parse_role(role), seed);
  std::string tok;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    for (int v = 0; v < vocab; ++v) {
      if (!(is >> tok)) throw std::runtime_error("truncated policy body");
      p.logits()(r, v) = std::strtod(tok.c_str(), nullptr);
    }
  }
  return p;
}

}  // namespace aopd
