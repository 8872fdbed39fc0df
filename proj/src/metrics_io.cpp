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

#include "aopd/metrics_io.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace aopd {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_metrics_csv(std::ostream& os, const TrainConfig& cfg,
                       std::span<const StepMetrics> metrics) {
  os << kMetricsHeader << '\n';
  const std::string prefix = to_string(cfg.objective.objective) + ',' +
                             num(cfg.objective.tau) + ',' + num(cfg.objective.beta) + ',' +
                             std::to_string(cfg.objective.k_support) + ',';
  for (const StepMetrics& m : metrics) {
    os << m.step << ',' << prefix << num(m.loss_total) << ',' << num(m.loss_pos) << ','
       << num(m.loss_guidance) << ',' << num(m.grad_norm) << ',' << num(m.mean_entropy) << ','
       << (m.ratio_applicable ? num(m.intervention_ratio) : std::string()) << ','
       << num(m.exact_rkl) << '\n';
  }
}

void write_advantage_hist_csv(std::ostream& os, std::span<const StepMetrics> metrics,
                              int interval) {
  if (interval < 1) throw std::invalid_argument("histogram interval must be >= 1");
  os << "step,bucket,count\n";
  for (const StepMetrics& m : metrics) {
    if (m.step % interval != 0) continue;
    for (std::size_t i = 0; i < m.advantages.counts.size(); ++i) {
      os << m.step << ',' << m.advantages.bucket_floor(i) << ',' << m.advantages.counts[i]
         << '\n';
    }
  }
}

void write_ablation_csv(std::ostream& os, AblationAxis axis, std::span<const AblationRow> rows) {
  os << to_string(axis) << ",final_exact_rkl,final_entropy,mean_intervention_ratio\n";
  for (const AblationRow& r : rows) {
    os << num(r.value) << ',' << num(r.final_rkl) << ',' << num(r.final_entropy) << ','
       << num(r.mean_intervention_ratio) << '\n';
  }
}

void write_trace_csv(std::ostream& os, std::span<const double> trace) {
  os << "step,p_essential\n";
  for (std::size_t i = 0; i < trace.size(); ++i) os << i << ',' << num(trace[i]) << '\n';
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

void render_csv_table(std::istream& csv, std::ostream& os) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (!rows.empty()) {
      for (auto& c : cells) {
        // Shorten full-precision numbers for display.
        char* end = nullptr;
        const double v = std::strtod(c.c_str(), &end);
        if (!c.empty() && end && *end == '\0' && c.find_first_of(".eE") != std::string::npos) {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.6g", v);
          c = buf;
        }
      }
    }
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw std::runtime_error("empty CSV");
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    const auto& r = rows[ri];
    for (std::size_t i = 0; i < r.size(); ++i) {
      os << (i ? "  " : "") << std::setw(static_cast<int>(width[i])) << r[i];
    }
    os << '\n';
    if (ri == 0) {
      std::size_t total = 0;
      for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i ? 2 : 0);
      os << std::string(total, '-') << '\n';
    }
  }
}

}  // namespace aopd
