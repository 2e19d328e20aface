// Copyright 2026 The crnn-asr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// The sweep/ablation harness: trains families of configurations under an
// identical protocol and reports per-configuration CFV and WER as CSV.
// Every experiment is a pure function of (config, corpus, seed); reruns
// produce byte-identical files.

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "crnn/model.hpp"
#include "crnn/train.hpp"

namespace crnn {

// ---------------------------------------------------------------------------
// Spearman rank correlation with average ranks for ties; empty when either
// column is constant (correlation undefined).

inline std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

inline std::optional<double> spearman(const std::vector<double>& x,
                                      const std::vector<double>& y) {
  if (x.size() != y.size())
    throw ContractError("spearman: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  const std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
  double mean_x = 0, mean_y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_x += rx[i];
    mean_y += ry[i];
  }
  mean_x /= n;
  mean_y /= n;
  double cov = 0, var_x = 0, var_y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (rx[i] - mean_x) * (ry[i] - mean_y);
    var_x += (rx[i] - mean_x) * (rx[i] - mean_x);
    var_y += (ry[i] - mean_y) * (ry[i] - mean_y);
  }
  if (var_x == 0.0 || var_y == 0.0) return std::nullopt;  // constant column
  return cov / std::sqrt(var_x * var_y);
}

// ---------------------------------------------------------------------------
// One trained-and-scored configuration.

struct RunSummary {
  CrnnConfig config;
  TrainSchedule schedule;
  std::uint64_t seed = 0;
  std::int64_t param_count = 0;
  double cfv_at_end = 0.0;  // validation CFV after the final epoch
  double final_wer = 0.0;   // greedy decoding on the test split
  double final_cer = 0.0;
  TrainHistory history;
};

inline RunSummary train_and_score(const CrnnConfig& config,
                                  const PreparedData& data,
                                  const TrainSchedule& schedule,
                                  std::uint64_t seed, bool verbose = false) {
  RunSummary summary;
  summary.config = config;
  summary.schedule = schedule;
  summary.seed = seed;

  TrainResult result = run_training(config, data, schedule, seed, verbose);
  summary.param_count = result.model.parameter_count();
  summary.cfv_at_end = result.history.epochs.back().val_cfv;
  summary.history = std::move(result.history);

  const EvalScores scores =
      evaluate_model(result.model, data.test_features, data.test_texts);
  summary.final_wer = scores.wer;
  summary.final_cer = scores.cer;
  return summary;
}

// ---------------------------------------------------------------------------
// CSV output. Full configuration fingerprint on every row; reruns are
// byte-identical, so no timestamps and no wall-clock columns.

inline std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string summary_csv_header() {
  return "filters,kernel,stride,padding,cel_activation,use_cel,gru_layers,"
         "gru_hidden,dropout,lr,momentum,clip_norm,batch_size,epochs,seed,"
         "param_count,cfv_at_end,final_wer,final_cer";
}

inline std::string summary_csv_row(const RunSummary& s) {
  std::string row;
  row += std::to_string(s.config.filters) + ',';
  row += std::to_string(s.config.kernel) + ',';
  row += std::to_string(s.config.stride) + ',';
  row += to_string(s.config.padding) + ',';
  row += to_string(s.config.cel_activation) + ',';
  row += std::string(s.config.use_cel ? "true" : "false") + ',';
  row += std::to_string(s.config.gru_layers) + ',';
  row += std::to_string(s.config.gru_hidden) + ',';
  row += csv_double(s.config.dropout) + ',';
  row += csv_double(s.schedule.learning_rate) + ',';
  row += csv_double(s.schedule.momentum) + ',';
  row += csv_double(s.schedule.clip_norm) + ',';
  row += std::to_string(s.schedule.batch_size) + ',';
  row += std::to_string(s.schedule.epochs) + ',';
  row += std::to_string(s.seed) + ',';
  row += std::to_string(s.param_count) + ',';
  row += csv_double(s.cfv_at_end) + ',';
  row += csv_double(s.final_wer) + ',';
  row += csv_double(s.final_cer);
  return row;
}

inline void write_summary_csv(const std::string& path,
                              const std::vector<RunSummary>& rows) {
  std::filesystem::create_directories(
      std::filesystem::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << summary_csv_header() << "\n";
  for (const auto& row : rows) out << summary_csv_row(row) << "\n";
}

inline void write_history_csv(const std::string& path,
                              const TrainHistory& history) {
  std::filesystem::create_directories(
      std::filesystem::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "epoch,train_loss,val_cfv\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << csv_double(e.train_loss) << ','
        << csv_double(e.val_cfv) << "\n";
  }
}

// A gnuplot script for whichever experiment CSVs are present in out_dir.
inline void write_gnuplot_script(const std::string& out_dir) {
  std::ofstream out(out_dir + "/plots.gp");
  if (!out) throw DataError("cannot write " + out_dir + "/plots.gp");
  out << "set datafile separator ','\n"
         "set key autotitle columnhead\n"
         "set terminal pngcairo size 900,600\n"
         "\n"
         "set output 'filters_vs_cfv.png'\n"
         "set logscale x 10\n"
         "set xlabel 'Number of filters'\n"
         "set ylabel 'validation CFV after final epoch'\n"
         "plot 'sweep_filters.csv' using 1:17 with linespoints\n"
         "\n"
         "set output 'cfv_vs_wer.png'\n"
         "unset logscale\n"
         "set xlabel 'validation CFV'\n"
         "set ylabel 'final WER'\n"
         "plot 'cfv_wer.csv' using 1:2 with points pointtype 7\n";
}

// ---------------------------------------------------------------------------
// Harness operations. Every operation trains with an identical protocol,
// varying exactly one knob, and returns its rows in the order trained.

struct SweepOutcome {
  std::vector<RunSummary> rows;
  std::optional<double> spearman_filters_vs_cfv;
};

inline SweepOutcome run_filter_sweep(const std::vector<int>& filter_counts,
                                     const CrnnConfig& base,
                                     const PreparedData& data,
                                     const TrainSchedule& schedule,
                                     std::uint64_t seed,
                                     const std::string& out_dir,
                                     bool verbose = false) {
  if (filter_counts.empty())
    throw ConfigError("filter sweep: need at least one filter count");
  SweepOutcome outcome;
  for (int filters : filter_counts) {
    CrnnConfig config = base;
    config.use_cel = true;
    config.filters = filters;
    if (verbose) std::fprintf(stderr, "[sweep] filters=%d\n", filters);
    outcome.rows.push_back(
        train_and_score(config, data, schedule, seed, verbose));
  }
  if (filter_counts.size() >= 2) {
    std::vector<double> n_values, cfv_values;
    for (const auto& row : outcome.rows) {
      n_values.push_back(static_cast<double>(row.config.filters));
      cfv_values.push_back(row.cfv_at_end);
    }
    outcome.spearman_filters_vs_cfv = spearman(n_values, cfv_values);
  }
  write_summary_csv(out_dir + "/sweep_filters.csv", outcome.rows);
  return outcome;
}

struct KernelCompareOutcome {
  std::vector<RunSummary> kernel_rows;      // varying kernel at fixed filters
  std::vector<RunSummary> reference_rows;   // filters {10, 100} at base kernel
  double kernel_cfv_spread = 0.0;           // max - min CFV across kernels
  double filter_cfv_spread = 0.0;           // |CFV(N=10) - CFV(N=100)|
};

inline KernelCompareOutcome run_kernel_compare(
    const std::vector<int>& kernels, int fixed_filters, const CrnnConfig& base,
    const PreparedData& data, const TrainSchedule& schedule,
    std::uint64_t seed, const std::string& out_dir, bool verbose = false) {
  if (kernels.size() < 1)
    throw ConfigError("kernel compare: need at least one kernel");
  KernelCompareOutcome outcome;
  for (int kernel : kernels) {
    CrnnConfig config = base;
    config.use_cel = true;
    config.filters = fixed_filters;
    config.kernel = kernel;
    if (verbose) std::fprintf(stderr, "[kernel] K=%d\n", kernel);
    outcome.kernel_rows.push_back(
        train_and_score(config, data, schedule, seed, verbose));
  }
  for (int filters : {10, 100}) {
    CrnnConfig config = base;
    config.use_cel = true;
    config.filters = filters;
    if (verbose) std::fprintf(stderr, "[kernel] reference N=%d\n", filters);
    outcome.reference_rows.push_back(
        train_and_score(config, data, schedule, seed, verbose));
  }

  double lo = outcome.kernel_rows.front().cfv_at_end, hi = lo;
  for (const auto& row : outcome.kernel_rows) {
    lo = std::min(lo, row.cfv_at_end);
    hi = std::max(hi, row.cfv_at_end);
  }
  outcome.kernel_cfv_spread = hi - lo;
  outcome.filter_cfv_spread = std::abs(outcome.reference_rows[0].cfv_at_end -
                                       outcome.reference_rows[1].cfv_at_end);

  std::vector<RunSummary> all = outcome.kernel_rows;
  all.insert(all.end(), outcome.reference_rows.begin(),
             outcome.reference_rows.end());
  write_summary_csv(out_dir + "/kernel_compare.csv", all);
  return outcome;
}

struct PaddingCompareOutcome {
  RunSummary valid_run;
  RunSummary same_run;
  double max_epoch_cfv_gap = 0.0;
};

inline PaddingCompareOutcome run_padding_compare(
    const CrnnConfig& base, const PreparedData& data,
    const TrainSchedule& schedule, std::uint64_t seed,
    const std::string& out_dir, bool verbose = false) {
  PaddingCompareOutcome outcome;
  CrnnConfig valid_cfg = base;
  valid_cfg.use_cel = true;
  valid_cfg.padding = Padding::kValid;
  CrnnConfig same_cfg = valid_cfg;
  same_cfg.padding = Padding::kSame;

  outcome.valid_run = train_and_score(valid_cfg, data, schedule, seed, verbose);
  outcome.same_run = train_and_score(same_cfg, data, schedule, seed, verbose);

  const auto& a = outcome.valid_run.history.epochs;
  const auto& b = outcome.same_run.history.epochs;
  for (std::size_t e = 0; e < a.size() && e < b.size(); ++e)
    outcome.max_epoch_cfv_gap = std::max(
        outcome.max_epoch_cfv_gap, std::abs(a[e].val_cfv - b[e].val_cfv));

  write_summary_csv(out_dir + "/padding_compare.csv",
                    {outcome.valid_run, outcome.same_run});
  write_history_csv(out_dir + "/padding_valid_history.csv",
                    outcome.valid_run.history);
  write_history_csv(out_dir + "/padding_same_history.csv",
                    outcome.same_run.history);
  return outcome;
}

struct AblationOutcome {
  RunSummary with_cel;
  RunSummary without_cel;
};

// Identical data, seeds and schedule; the baseline simply has no conv
// layer, so the GRU stack consumes every spectrogram frame directly.
inline AblationOutcome run_cel_ablation(const CrnnConfig& base,
                                        const PreparedData& data,
                                        const TrainSchedule& schedule,
                                        std::uint64_t seed,
                                        const std::string& out_dir,
                                        bool verbose = false) {
  CrnnConfig with_cfg = base;
  with_cfg.use_cel = true;
  CrnnConfig without_cfg = base;
  without_cfg.use_cel = false;

  AblationOutcome outcome;
  if (verbose) std::fprintf(stderr, "[ablate] with CEL\n");
  outcome.with_cel = train_and_score(with_cfg, data, schedule, seed, verbose);
  if (verbose) std::fprintf(stderr, "[ablate] without CEL\n");
  outcome.without_cel =
      train_and_score(without_cfg, data, schedule, seed, verbose);

  write_summary_csv(out_dir + "/cel_ablation.csv",
                    {outcome.with_cel, outcome.without_cel});
  write_history_csv(out_dir + "/cel_history.csv",
                    outcome.with_cel.history);
  write_history_csv(out_dir + "/no_cel_history.csv",
                    outcome.without_cel.history);
  return outcome;
}

struct DropoutCompareOutcome {
  std::vector<RunSummary> rows;  // one per rate, in argument order
};

inline DropoutCompareOutcome run_dropout_compare(
    const std::vector<double>& rates, const CrnnConfig& base,
    const PreparedData& data, const TrainSchedule& schedule,
    std::uint64_t seed, const std::string& out_dir, bool verbose = false) {
  if (rates.empty()) throw ConfigError("dropout compare: need rates");
  DropoutCompareOutcome outcome;
  for (double rate : rates) {
    CrnnConfig config = base;
    config.dropout = rate;
    config.validate();  // surfaces rate >= 1 before any training
    if (verbose) std::fprintf(stderr, "[dropout] rate=%g\n", rate);
    outcome.rows.push_back(
        train_and_score(config, data, schedule, seed, verbose));
  }
  write_summary_csv(out_dir + "/dropout_compare.csv", outcome.rows);
  return outcome;
}

struct CorrelationOutcome {
  std::optional<double> coefficient;
  int pairs = 0;
};

// Spearman between validation CFV and final WER across completed runs;
// the pre-screening rule this measures needs enough points to rank.
inline CorrelationOutcome run_cfv_wer_correlation(
    const std::vector<RunSummary>& rows, const std::string& out_dir) {
  if (rows.size() < 5)
    throw DataError("correlation: need at least 5 (CFV, WER) pairs, got " +
                    std::to_string(rows.size()));
  std::vector<double> cfv, wer;
  for (const auto& row : rows) {
    cfv.push_back(row.cfv_at_end);
    wer.push_back(row.final_wer);
  }
  CorrelationOutcome outcome;
  outcome.pairs = static_cast<int>(rows.size());
  outcome.coefficient = spearman(cfv, wer);

  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir + "/cfv_wer.csv");
  if (!out) throw DataError("cannot write " + out_dir + "/cfv_wer.csv");
  out << "cfv_at_end,final_wer,filters,use_cel\n";
  for (const auto& row : rows) {
    out << csv_double(row.cfv_at_end) << ',' << csv_double(row.final_wer)
        << ',' << row.config.filters << ','
        << (row.config.use_cel ? "true" : "false") << "\n";
  }
  return outcome;
}

}  // namespace crnn
