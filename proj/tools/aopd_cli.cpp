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


// aopd: train, ablate, blackhole, verify, report.

#include "aopd/commands.hpp"
#include "aopd/config.hpp"
#include "aopd/metrics_io.hpp"
#include "aopd/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace aopd;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 1;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* cfg = cmd->add_option("--config", c.config, "run configuration file");
  if (needs_config) cfg->required();
  cmd->add_option("--seed", c.seed, "override seeds: teacher=N, student=N+1, rollout=N+2");
  cmd->add_option("--out", c.out, "output directory (must not exist)")->required();
  cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

TrainConfig load(const Common& c) {
  TrainConfig cfg = load_config(c.config);
  if (c.seed) {
    cfg.seeds = {*c.seed, *c.seed + 1, *c.seed + 2};
    cfg.validate();
  }
  return cfg;
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("values", "not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("values", "empty list");
  return out;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive on-policy distillation lab on tabular policies"};
  app.require_subcommand(1);

  Common train_opts;
  auto* train_cmd = app.add_subcommand("train", "train one student and write a run directory");
  add_common(train_cmd, train_opts, true);

  Common ablate_opts;
  std::string axis_name;
  std::string values_str;
  auto* ablate_cmd = app.add_subcommand("ablate", "one sub-run per value along an axis");
  add_common(ablate_cmd, ablate_opts, true);
  ablate_cmd->add_option("--axis", axis_name, "beta, tau or topk")
      ->required()
      ->check(CLI::IsMember({"beta", "tau", "topk"}));
  ablate_cmd->add_option("--values", values_str, "comma separated values")->required();

  int bh_vocab = 16;
  int bh_steps = 200;
  double bh_lr = 0.5;
  std::uint64_t bh_seed = 1;
  std::string bh_out;
  auto* bh_cmd = app.add_subcommand("blackhole", "escape traces for AOPD and OPD");
  bh_cmd->add_option("--vocab", bh_vocab, "vocabulary size")->check(CLI::Range(3, 1 << 20));
  bh_cmd->add_option("--steps", bh_steps, "training steps")->check(CLI::NonNegativeNumber);
  bh_cmd->add_option("--lr", bh_lr, "learning rate")->check(CLI::NonNegativeNumber);
  bh_cmd->add_option("--seed", bh_seed, "scenario and sampling seed");
  bh_cmd->add_option("--out", bh_out, "directory for the trace CSVs (must not exist)");

  VerifyOptions vopts;
  auto* verify_cmd = app.add_subcommand("verify", "run the invariant suite");
  verify_cmd->add_option("--seed", vopts.seed, "base seed for instances");
  verify_cmd->add_option("--instances", vopts.instances, "instances per property")
      ->check(CLI::PositiveNumber);

  std::string metrics_path;
  auto* report_cmd = app.add_subcommand("report", "render a metrics CSV as a text table");
  report_cmd->add_option("metrics", metrics_path, "metrics.csv or a run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train_cmd) {
      const TrainConfig cfg = load(train_opts);
      const TrainResult r = run_train(cfg, train_opts.out, train_opts.jobs);
      std::cout << "run " << train_opts.out << ": " << r.metrics.size() << " steps, exact_rkl "
                << g17(r.initial_rkl) << " -> " << g17(r.final_rkl) << '\n';
    } else if (*ablate_cmd) {
      const TrainConfig base = load(ablate_opts);
      const AblationAxis axis = parse_ablation_axis(axis_name);
      const auto rows =
          run_ablate(base, axis, parse_values(values_str), ablate_opts.out, ablate_opts.jobs);
      std::ifstream csv(std::filesystem::path(ablate_opts.out) / "comparison.csv");
      render_csv_table(csv, std::cout);
    } else if (*bh_cmd) {
      const BlackHoleSummary s = run_blackhole(bh_vocab, bh_steps, bh_lr, bh_seed, bh_out);
      std::cout << "blackhole V=" << bh_vocab << " steps=" << bh_steps << " lr=" << g17(bh_lr)
                << ": AOPD final P_S(v*) = " << g17(s.aopd_trace.back())
                << ", OPD final P_S(v*) = " << g17(s.opd_trace.back()) << '\n';
    } else if (*verify_cmd) {
      const VerifyReport report = run_verify(vopts);
      print_report(std::cout, report);
      return report.passed() ? kExitOk : kExitVerify;
    } else if (*report_cmd) {
      std::filesystem::path p = metrics_path;
      if (std::filesystem::is_directory(p)) p /= "metrics.csv";
      std::ifstream csv(p);
      if (!csv) throw std::runtime_error("cannot open " + p.string());
      render_csv_table(csv, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
