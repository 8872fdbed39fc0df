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


#include "aopd/commands.hpp"

#include "aopd/config.hpp"
#include "aopd/metrics_io.hpp"
#include "aopd/oracle.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace aopd {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

void write_run_outputs(const TrainConfig& cfg, const TrainResult& r, const fs::path& dir) {
  {
    auto out = open_out(dir / "metrics.csv");
    write_metrics_csv(out, cfg, r.metrics);
  }
  {
    auto out = open_out(dir / "advantage_hist.csv");
    write_advantage_hist_csv(out, r.metrics, cfg.hist_interval);
  }
  {
    auto out = open_out(dir / "final_policy.txt");
    write_policy(out, r.student);
  }
}

std::string value_dir_name(AblationAxis axis, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s=%g", to_string(axis).c_str(), v);
  return buf;
}

}  // namespace

void create_run_dir(const fs::path& dir) {
  if (fs::exists(dir)) {
    throw std::runtime_error("run directory " + dir.string() + " already exists");
  }
  fs::create_directories(dir);
}

TrainResult run_train(const TrainConfig& cfg, const fs::path& run_dir, int jobs) {
  cfg.validate();
  create_run_dir(run_dir);
  write_manifest({cfg, kArtifactVersion, utc_timestamp(), run_dir});
  TrainResult r = train(cfg, jobs);
  write_run_outputs(cfg, r, run_dir);
  append_manifest_completion(run_dir, utc_timestamp());
  return r;
}

std::vector<AblationRow> run_ablate(const TrainConfig& base, AblationAxis axis,
                                    const std::vector<double>& values, const fs::path& run_dir,
                                    int jobs) {
  // Reject the whole grid before touching the filesystem.
  for (double v : values) with_axis_value(base, axis, v);
  create_run_dir(run_dir);
  std::vector<AblationRow> rows = ablate(base, axis, values, jobs);
  for (const AblationRow& row : rows) {
    const TrainConfig cfg = with_axis_value(base, axis, row.value);
    const fs::path sub = run_dir / value_dir_name(axis, row.value);
    create_run_dir(sub);
    write_manifest({cfg, kArtifactVersion, utc_timestamp(), sub});
    write_run_outputs(cfg, row.run, sub);
    append_manifest_completion(sub, utc_timestamp());
  }
  auto out = open_out(run_dir / "comparison.csv");
  write_ablation_csv(out, axis, rows);
  return rows;
}

BlackHoleSummary run_blackhole(int vocab, int steps, double lr, std::uint64_t seed,
                               const fs::path& run_dir) {
  const BlackHoleScenario scenario = make_blackhole(vocab, seed);
  ObjectiveConfig aopd;
  aopd.objective = Objective::aopd;
  aopd.k_support = vocab;
  ObjectiveConfig opd = aopd;
  opd.objective = Objective::opd;

  BlackHoleSummary s;
  s.aopd_trace = escape_experiment(scenario, aopd, steps, lr, seed);
  s.opd_trace = escape_experiment(scenario, opd, steps, lr, seed);
  if (!run_dir.empty()) {
    create_run_dir(run_dir);
    auto a = open_out(run_dir / "aopd_trace.csv");
    write_trace_csv(a, s.aopd_trace);
    auto o = open_out(run_dir / "opd_trace.csv");
    write_trace_csv(o, s.opd_trace);
  }
  return s;
}

}  // namespace aopd
