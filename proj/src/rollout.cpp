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
#include "aopd/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace aopd {

std::vector<Prompt> make_prompt_set(int count, int length, int vocab, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("prompt count must be >= 1");
  if (length < 0) throw std::invalid_argument("prompt length must be >= 0");
  Rng rng = make_rng(seed, {0x9a0397ULL});
  std::uniform_int_distribution<int> tok(0, vocab - 1);
  std::vector<Prompt> prompts(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    prompts[i].id = i;
    prompts[i].tokens.resize(static_cast<std::size_t>(length));
    for (auto& t : prompts[i].tokens) t = tok(rng);
  }
  return prompts;
}

TokenRecord annotate_token(const PolicyTable& student, const PolicyTable& teacher,
                           const ContextKey& ctx, int token, const MaskRule& mask) {
  const LogitVector<double> zt = teacher.row(teacher.row_index(ctx));
  const LogitVector<double> zs = student.row(student.row_index(ctx));
  const double raw_logp_t = log_softmax(zt)[token];
  const double logp_s = log_softmax(zs)[token];
  static const double kLogFloorT = std::log(kTeacherProbFloor);

  TokenRecord rec;
  rec.ctx = ctx;
  rec.token = token;
  rec.floored = raw_logp_t < kLogFloorT;
  rec.logp_teacher = rec.floored ? kLogFloorT : raw_logp_t;
  rec.logp_student = logp_s;
  rec.advantage = rec.logp_teacher - rec.logp_student;
  rec.prob_gap = std::exp(raw_logp_t) - std::exp(logp_s);
  rec.mask = mask(rec.advantage, rec.prob_gap);
  return rec;
}

namespace {

void check_compatible(const PolicyTable& a, const PolicyTable& b) {
  if (a.vocab() != b.vocab()) throw std::invalid_argument("policies must share the vocabulary");
}

template <typename Emit>
std::vector<Trajectory> generate(const PolicyTable& sampler, std::span<const Prompt> prompts,
                                 int horizon, int window, Source source, std::uint64_t seed,
                                 int jobs, Emit&& emit) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  std::vector<Trajectory> out(prompts.size());
  parallel_for(prompts.size(), jobs, [&](std::size_t i) {
    const Prompt& prompt = prompts[i];
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(prompt.id)});
    Trajectory traj;
    traj.prompt = prompt;
    traj.source = source;
    traj.tokens.reserve(static_cast<std::size_t>(horizon));
    traj.records.reserve(static_cast<std::size_t>(horizon));
    for (int t = 0; t < horizon; ++t) {
      ContextKey ctx = context_window(prompt.tokens, traj.tokens, t, window);
      const int y = sample_categorical(sampler.dist_at_row(sampler.row_index(ctx)), rng);
      traj.records.push_back(emit(std::move(ctx), y));
      traj.tokens.push_back(y);
    }
    out[i] = std::move(traj);
  });
  return out;
}

}  // namespace

std::vector<Trajectory> rollout_student(const PolicyTable& student, const PolicyTable& teacher,
                                        std::span<const Prompt> prompts, int horizon,
                                        const MaskRule& mask, std::uint64_t seed, int jobs) {
  check_compatible(student, teacher);
  const int window = std::max(student.order(), teacher.order());
  return generate(student, prompts, horizon, window, Source::student, seed, jobs,
                  [&](ContextKey ctx, int y) {
                    return annotate_token(student, teacher, ctx, y, mask);
                  });
}

std::vector<Trajectory> rollout_teacher(const PolicyTable& teacher,
                                        std::span<const Prompt> prompts, int horizon,
                                        std::uint64_t seed, int jobs) {
  return generate(teacher, prompts, horizon, teacher.order(), Source::teacher, seed, jobs,
                  [&](ContextKey ctx, int y) {
                    TokenRecord rec;
                    rec.logp_teacher = log_softmax(teacher.row(teacher.row_index(ctx)))[y];
                    rec.ctx = std::move(ctx);
                    rec.token = y;
                    return rec;
                  });
}

void write_trajectories(std::ostream& os, std::span<const Trajectory> trajectories) {
  os << "prompt_id,t,ctx,y,logp_T,logp_S,A,gap,G\n";
  char buf[256];
  for (const Trajectory& traj : trajectories) {
    for (std::size_t t = 0; t < traj.records.size(); ++t) {
      const TokenRecord& r = traj.records[t];
      os << traj.prompt.id << ',' << t << ',';
      for (std::size_t i = 0; i < r.ctx.tokens.size(); ++i) {
        os << (i ? " " : "") << r.ctx.tokens[i];
      }
      std::snprintf(buf, sizeof buf, ",%d,%.17g,%.17g,%.17g,%.17g,%d\n", r.token,
                    r.logp_teacher, r.logp_student, r.advantage, r.prob_gap, r.mask ? 1 : 0);
      os << buf;
    }
  }
}

}  // namespace aopd
