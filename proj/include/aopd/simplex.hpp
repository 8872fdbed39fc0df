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

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace aopd {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Unconstrained scores on the natural-log scale, one per vocabulary entry.
template <typename Scalar>
using LogitVector = Vector<Scalar>;

/// Non-negative entries summing to one.
template <typename Scalar>
using ProbVector = Vector<Scalar>;

/// Raised when KL(p || q) is undefined because q vanishes where p has mass.
class AbsoluteContinuityError : public std::domain_error {
 public:
  explicit AbsoluteContinuityError(int token)
      : std::domain_error("absolute continuity violated at token " +
                          std::to_string(token)),
        token_(token) {}
  int token() const noexcept { return token_; }

 private:
  int token_;
};

/// Token ids of a teacher support, kept sorted ascending.
struct SupportSet {
  std::vector<int> token_ids;

  int k() const noexcept { return static_cast<int>(token_ids.size()); }
  bool contains(int token) const {
    return std::binary_search(token_ids.begin(), token_ids.end(), token);
  }
  bool operator==(const SupportSet&) const = default;
};

inline constexpr double kProbSumTolerance = 1e-9;
inline constexpr double kLogFloor = 1e-300;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.array().isFinite().all();
}

template <typename Derived>
bool is_prob_vector(const Eigen::MatrixBase<Derived>& p,
                    double tol = kProbSumTolerance) {
  if (p.size() == 0 || !all_finite(p)) return false;
  if ((p.array() < 0).any()) return false;
  return std::abs(static_cast<double>(p.sum()) - 1.0) <= tol;
}

template <typename Derived>
void require_prob_vector(const Eigen::MatrixBase<Derived>& p, const char* what) {
  if (!is_prob_vector(p)) {
    throw std::invalid_argument(std::string(what) + " is not a probability vector");
  }
}

template <typename Derived>
auto softmax(const Eigen::MatrixBase<Derived>& z,
             typename Derived::Scalar temperature = 1) {
  using Scalar = typename Derived::Scalar;
  if (!(temperature > 0)) throw std::invalid_argument("softmax temperature must be > 0");
  if (z.size() == 0) throw std::invalid_argument("softmax of empty vector");
  if (!all_finite(z)) throw std::invalid_argument("softmax of non-finite logits");
  Vector<Scalar> e = ((z.array() - z.maxCoeff()) / temperature).exp().matrix();
  return Vector<Scalar>(e / e.sum());
}

template <typename Derived>
auto log_sum_exp(const Eigen::MatrixBase<Derived>& z) {
  const auto m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

/// ln softmax(z), computed without forming probabilities; never -inf for finite z.
template <typename Derived>
auto log_softmax(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  if (!all_finite(z)) throw std::invalid_argument("log_softmax of non-finite logits");
  return Vector<Scalar>(z.array() - log_sum_exp(z));
}

/// Shannon entropy in nats, with 0 ln 0 = 0.
template <typename Derived>
auto entropy(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  Scalar h = 0;
  for (Eigen::Index v = 0; v < p.size(); ++v) {
    if (p[v] > 0) h -= p[v] * std::log(p[v]);
  }
  return h;
}

template <typename DerivedP, typename DerivedQ>
auto kl_divergence(const Eigen::MatrixBase<DerivedP>& p,
                   const Eigen::MatrixBase<DerivedQ>& q) {
  using Scalar = typename DerivedP::Scalar;
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence size mismatch");
  Scalar kl = 0;
  for (Eigen::Index v = 0; v < p.size(); ++v) {
    if (p[v] <= 0) continue;
    if (q[v] <= 0) throw AbsoluteContinuityError(static_cast<int>(v));
    const Scalar qv = std::max<Scalar>(q[v], Scalar(kLogFloor));
    const Scalar pv = std::max<Scalar>(p[v], Scalar(kLogFloor));
    kl += p[v] * (std::log(pv) - std::log(qv));
  }
  // Rounding can leave a tiny negative residue when p and q nearly agree.
  return std::max<Scalar>(kl, Scalar(0));
}

/// Mixture used by the interpolated divergence: (1 - beta) teacher + beta student.
template <typename DerivedT, typename DerivedS>
auto jsd_mixture(const Eigen::MatrixBase<DerivedT>& p_teacher,
                 const Eigen::MatrixBase<DerivedS>& p_student,
                 typename DerivedT::Scalar beta) {
  using Scalar = typename DerivedT::Scalar;
  return Vector<Scalar>((Scalar(1) - beta) * p_teacher + beta * p_student);
}

/// beta KL(P_T || P_M) + (1 - beta) KL(P_S || P_M) with the mixture above.
/// beta = 1 is forward KL(P_T || P_S), beta = 0 is reverse KL(P_S || P_T).
template <typename DerivedT, typename DerivedS>
auto jsd_beta(const Eigen::MatrixBase<DerivedT>& p_teacher,
              const Eigen::MatrixBase<DerivedS>& p_student,
              typename DerivedT::Scalar beta) {
  using Scalar = typename DerivedT::Scalar;
  if (!(beta >= 0 && beta <= 1)) throw std::invalid_argument("jsd beta must lie in [0, 1]");
  if (p_teacher.size() != p_student.size()) {
    throw std::invalid_argument("jsd_beta size mismatch");
  }
  if (beta == 1) return Scalar(kl_divergence(p_teacher, p_student));
  if (beta == 0) return Scalar(kl_divergence(p_student, p_teacher));
  const Vector<Scalar> m = jsd_mixture(p_teacher, p_student, beta);
  return Scalar(beta * kl_divergence(p_teacher, m) +
                (Scalar(1) - beta) * kl_divergence(p_student, m));
}

/// The k tokens of highest teacher probability; ties go to the lower id.
template <typename Derived>
SupportSet topk_support(const Eigen::MatrixBase<Derived>& p_teacher, int k) {
  const int vocab = static_cast<int>(p_teacher.size());
  if (k < 1 || k > vocab) {
    throw std::out_of_range("top-k size " + std::to_string(k) + " outside [1, " +
                            std::to_string(vocab) + "]");
  }
  std::vector<int> order(vocab);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return p_teacher[a] > p_teacher[b]; });
  SupportSet s{std::vector<int>(order.begin(), order.begin() + k)};
  std::sort(s.token_ids.begin(), s.token_ids.end());
  return s;
}

template <typename Derived>
auto gather(const Eigen::MatrixBase<Derived>& v, const SupportSet& s) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> out(s.k());
  for (int i = 0; i < s.k(); ++i) out[i] = v[s.token_ids[i]];
  return out;
}

/// p restricted to s and renormalized; entry i belongs to s.token_ids[i].
template <typename Derived>
auto restrict_normalize(const Eigen::MatrixBase<Derived>& p, const SupportSet& s) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> r = gather(p, s);
  const Scalar mass = r.sum();
  if (!(mass > 0)) throw std::domain_error("zero probability mass on support");
  return Vector<Scalar>(r / mass);
}

}  // namespace aopd
