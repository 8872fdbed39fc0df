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

#include "aopd/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace aopd {

namespace pt = boost::property_tree;

namespace {

const std::set<std::string> kObjectiveKeys{"objective", "tau",         "beta",
                                           "k_support", "fkl_variant", "zero_eps"};
const std::set<std::string> kTrainKeys{"lr",           "batch_trajectories", "horizon",
                                       "steps",        "prompt_length",      "hist_interval",
                                       "rkl_weighting"};
const std::set<std::string> kPolicyKeys{"vocab", "order", "concentration", "student_mode",
                                        "perturb_sigma"};
const std::set<std::string> kSeedKeys{"teacher", "student", "rollout"};
const std::set<std::string> kManifestOnly{"run", "completion"};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + s + "'");
  }
}

long long to_integer(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected an integer, got '" + s + "'");
  }
}

std::uint64_t to_seed(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    if (!s.empty() && s[0] == '-') throw std::invalid_argument(s);
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a non-negative integer seed, got '" + s + "'");
  }
}

template <typename Parse>
auto parse_enum(const std::string& key, const std::string& s, Parse parse) {
  try {
    return parse(s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
}

TrainConfig from_tree(const pt::ptree& tree, bool allow_manifest_sections) {
  for (const auto& [section, body] : tree) {
    const std::set<std::string>* keys = nullptr;
    if (section == "objective") keys = &kObjectiveKeys;
    if (section == "train") keys = &kTrainKeys;
    if (section == "policy") keys = &kPolicyKeys;
    if (section == "seeds") keys = &kSeedKeys;
    if (!keys) {
      if (allow_manifest_sections && kManifestOnly.count(section)) continue;
      throw ConfigError(section, "unknown section");
    }
    for (const auto& [key, value] : body) {
      if (!keys->count(key)) throw ConfigError(key, "unknown key in [" + section + "]");
    }
  }

  auto get = [&](const char* section, const char* key) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(
            std::string(section) + "/" + key, '/'))) {
      return *v;
    }
    return std::nullopt;
  };

  TrainConfig c;
  const auto objective = get("objective", "objective");
  if (!objective) throw ConfigError("objective", "missing required key 'objective'");
  c.objective.objective = parse_enum("objective", *objective, parse_objective);
  if (auto v = get("objective", "tau")) c.objective.tau = to_double("tau", *v);
  if (auto v = get("objective", "beta")) c.objective.beta = to_double("beta", *v);
  if (auto v = get("objective", "fkl_variant")) {
    c.objective.variant = parse_enum("fkl_variant", *v, parse_fkl_variant);
  }
  if (auto v = get("objective", "zero_eps")) c.objective.zero_eps = to_double("zero_eps", *v);

  if (auto v = get("train", "lr")) c.lr = to_double("lr", *v);
  if (auto v = get("train", "batch_trajectories")) {
    c.batch_trajectories = static_cast<int>(to_integer("batch_trajectories", *v));
  }
  if (auto v = get("train", "horizon")) c.horizon = static_cast<int>(to_integer("horizon", *v));
  if (auto v = get("train", "steps")) c.steps = static_cast<int>(to_integer("steps", *v));
  if (auto v = get("train", "prompt_length")) {
    c.prompt_length = static_cast<int>(to_integer("prompt_length", *v));
  }
  if (auto v = get("train", "hist_interval")) {
    c.hist_interval = static_cast<int>(to_integer("hist_interval", *v));
  }
  if (auto v = get("train", "rkl_weighting")) {
    c.rkl_weighting = parse_enum("rkl_weighting", *v, parse_context_weighting);
  }

  if (auto v = get("policy", "vocab")) c.vocab = static_cast<int>(to_integer("vocab", *v));
  if (auto v = get("policy", "order")) c.order = static_cast<int>(to_integer("order", *v));
  if (auto v = get("policy", "concentration")) {
    c.concentration = to_double("concentration", *v);
  }
  if (auto v = get("policy", "student_mode")) {
    c.student_mode = parse_enum("student_mode", *v, parse_student_mode);
  }
  if (auto v = get("policy", "perturb_sigma")) {
    c.perturb_sigma = to_double("perturb_sigma", *v);
  }

  c.objective.k_support = std::min(32, c.vocab);
  if (auto v = get("objective", "k_support")) {
    c.objective.k_support = static_cast<int>(to_integer("k_support", *v));
  }

  if (auto v = get("seeds", "teacher")) c.seeds.teacher = to_seed("teacher", *v);
  if (auto v = get("seeds", "student")) c.seeds.student = to_seed("student", *v);
  if (auto v = get("seeds", "rollout")) c.seeds.rollout = to_seed("rollout", *v);

  c.validate();
  return c;
}

pt::ptree read_ini(std::istream& is) {
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config", e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  return tree;
}

}  // namespace

TrainConfig parse_config(std::istream& is) { return from_tree(read_ini(is), false); }

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  return parse_config(in);
}

void write_config(std::ostream& os, const TrainConfig& c) {
  os << "[objective]\n"
     << "objective = " << to_string(c.objective.objective) << '\n'
     << "tau = " << fmt_double(c.objective.tau) << '\n'
     << "beta = " << fmt_double(c.objective.beta) << '\n'
     << "k_support = " << c.objective.k_support << '\n'
     << "fkl_variant = " << to_string(c.objective.variant) << '\n'
     << "zero_eps = " << fmt_double(c.objective.zero_eps) << '\n'
     << "\n[train]\n"
     << "lr = " << fmt_double(c.lr) << '\n'
     << "batch_trajectories = " << c.batch_trajectories << '\n'
     << "horizon = " << c.horizon << '\n'
     << "steps = " << c.steps << '\n'
     << "prompt_length = " << c.prompt_length << '\n'
     << "hist_interval = " << c.hist_interval << '\n'
     << "rkl_weighting = " << to_string(c.rkl_weighting) << '\n'
     << "\n[policy]\n"
     << "vocab = " << c.vocab << '\n'
     << "order = " << c.order << '\n'
     << "concentration = " << fmt_double(c.concentration) << '\n'
     << "student_mode = " << to_string(c.student_mode) << '\n'
     << "perturb_sigma = " << fmt_double(c.perturb_sigma) << '\n'
     << "\n[seeds]\n"
     << "teacher = " << c.seeds.teacher << '\n'
     << "student = " << c.seeds.student << '\n'
     << "rollout = " << c.seeds.rollout << '\n';
}

std::string config_to_string(const TrainConfig& cfg) {
  std::ostringstream os;
  write_config(os, cfg);
  return os.str();
}

void write_manifest(const RunManifest& m) {
  std::ofstream out(m.run_dir / "manifest.ini");
  if (!out) throw std::runtime_error("cannot write manifest in " + m.run_dir.string());
  write_config(out, m.config);
  out << "\n[run]\n"
      << "version = " << m.version << '\n'
      << "start_time = " << m.start_time << '\n'
      << "run_dir = " << m.run_dir.string() << '\n'
      << "metrics = metrics.csv\n"
      << "advantage_hist = advantage_hist.csv\n"
      << "final_policy = final_policy.txt\n";
}

void append_manifest_completion(const std::filesystem::path& run_dir,
                                const std::string& end_time) {
  std::ofstream out(run_dir / "manifest.ini", std::ios::app);
  if (!out) throw std::runtime_error("cannot append to manifest in " + run_dir.string());
  out << "\n[completion]\nend_time = " << end_time << '\n';
}

TrainConfig read_manifest_config(const std::filesystem::path& run_dir) {
  std::ifstream in(run_dir / "manifest.ini");
  if (!in) throw ConfigError("manifest", "cannot open manifest in " + run_dir.string());
  return from_tree(read_ini(in), true);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace aopd
