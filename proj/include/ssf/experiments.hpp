#pragma once

// Study harnesses: ablation over architecture variants, noise robustness,
// lookback sweeps, and wall-clock efficiency, all emitting a common report
// row format (CSV + aligned text table). Every row carries the resolved
// config fingerprint so it can be regenerated from config + seed alone.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "train.hpp"

namespace ssf {

struct ReportRow {
  std::string variant;
  int64_t horizon = 0;
  int64_t lookback = 0;
  uint64_t seed = 0;
  double mse = 0.0;
  double mae = 0.0;
  double ms_per_iter = 0.0;  // 0 when the study does not time iterations
  std::string config_hash;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::vector<std::string> notes;  // protocol lines for the text render
};

inline constexpr const char* kReportCsvHeader =
    "variant,horizon,lookback,seed,mse,mae,ms_per_iter,config_hash";

inline std::string render_report_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << std::setprecision(17) << kReportCsvHeader << '\n';
  for (const auto& r : report.rows)
    out << r.variant << ',' << r.horizon << ',' << r.lookback << ','
        << r.seed << ',' << r.mse << ',' << r.mae << ',' << r.ms_per_iter
        << ',' << r.config_hash << '\n';
  return out.str();
}

// Aligned text table. When `pct_vs_first` is set, two extra columns show
// the percent change of mse/mae against the first row (robustness framing:
// 100·(m − m₀)/m₀).
inline std::string render_report_table(const ExperimentReport& report,
                                       bool pct_vs_first = false) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head = {"variant", "horizon", "lookback", "seed",
                                   "mse",     "mae",     "ms/iter"};
  if (pct_vs_first) {
    head.push_back("mse_change%");
    head.push_back("mae_change%");
  }
  head.push_back("config");
  cells.push_back(head);

  auto fmt = [](double v, int prec) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
  };
  const double mse0 = report.rows.empty() ? 0.0 : report.rows.front().mse;
  const double mae0 = report.rows.empty() ? 0.0 : report.rows.front().mae;
  for (const auto& r : report.rows) {
    std::vector<std::string> row = {r.variant,
                                    std::to_string(r.horizon),
                                    std::to_string(r.lookback),
                                    std::to_string(r.seed),
                                    fmt(r.mse, 6),
                                    fmt(r.mae, 6),
                                    fmt(r.ms_per_iter, 3)};
    if (pct_vs_first) {
      row.push_back(mse0 == 0.0 ? "-" : fmt(100.0 * (r.mse - mse0) / mse0, 2));
      row.push_back(mae0 == 0.0 ? "-" : fmt(100.0 * (r.mae - mae0) / mae0, 2));
    }
    row.push_back(r.config_hash);
    cells.push_back(row);
  }

  std::vector<size_t> width(head.size(), 0);
  for (const auto& row : cells)
    for (size_t c = 0; c < row.size(); ++c)
      width[c] = std::max(width[c], row[c].size());

  std::ostringstream out;
  for (const auto& note : report.notes) out << "# " << note << '\n';
  for (size_t i = 0; i < cells.size(); ++i) {
    for (size_t c = 0; c < cells[i].size(); ++c) {
      out << std::left << std::setw(static_cast<int>(width[c])) << cells[i][c];
      if (c + 1 < cells[i].size()) out << "  ";
    }
    out << '\n';
    if (i == 0) {
      size_t total = 0;
      for (size_t c = 0; c < width.size(); ++c)
        total += width[c] + (c + 1 < width.size() ? 2 : 0);
      out << std::string(total, '-') << '\n';
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Variants

inline const std::vector<std::string>& ablation_variant_names() {
  static const std::vector<std::string> names = {
      "baseline",       "no_fft_laplace", "no_tcn",
      "no_fft_laplace_and_tcn",           "self_attention",
      "no_attention",   "minimal"};
  return names;
}

// Maps a variant name to sub-module toggles. "no_fft_laplace_and_tcn"
// keeps the forward branch as its single fusing linear map; "minimal" is
// the backward scan plus the refinement stage only.
inline ModelConfig apply_variant(ModelConfig cfg, const std::string& variant) {
  if (variant == "baseline") return cfg;
  if (variant == "no_fft_laplace") {
    cfg.enable_fft_laplace = false;
    return cfg;
  }
  if (variant == "no_tcn") {
    cfg.enable_tcn = false;
    return cfg;
  }
  if (variant == "no_fft_laplace_and_tcn") {
    cfg.enable_fft_laplace = false;
    cfg.enable_tcn = false;
    return cfg;
  }
  if (variant == "self_attention") {
    cfg.attention = AttentionMode::kSelfAttention;
    return cfg;
  }
  if (variant == "no_attention") {
    cfg.attention = AttentionMode::kNone;
    return cfg;
  }
  if (variant == "minimal") {
    cfg.enable_forward = false;
    cfg.attention = AttentionMode::kNone;
    return cfg;
  }
  throw ConfigError("experiments: unknown ablation variant '" + variant + "'");
}

// ---------------------------------------------------------------------------
// Shared data plumbing

struct DataSplits {
  WindowBatch train;
  WindowBatch val;   // may hold zero windows when the segment is too short
  WindowBatch test;
  bool has_val = false;
  ColumnStats stats;  // train-segment stats (identity if not standardizing)
};

// Chronological split + optional train-stat standardization + windowing.
// Train and test segments must fit at least one (L, P) window; a too-short
// validation segment downgrades to training without early stopping.
inline DataSplits prepare_splits(const RunConfig& cfg,
                                 const SeriesTable& table) {
  auto segments = split_chronological(table, cfg.train_frac, cfg.val_frac,
                                      cfg.test_frac);
  DataSplits out;
  if (cfg.standardize) {
    out.stats = compute_column_stats(segments[0]);
    for (auto& seg : segments) seg = apply_column_stats(seg, out.stats);
  }
  const int64_t L = cfg.model.lookback;
  const int64_t P = cfg.model.horizon;
  const int64_t need = L + P;
  if (segments[0].rows() < need)
    throw DataError("prepare_splits: train segment has " +
                    std::to_string(segments[0].rows()) + " rows but lookback " +
                    std::to_string(L) + " + horizon " + std::to_string(P) +
                    " needs at least " + std::to_string(need));
  if (segments[2].rows() < need)
    throw DataError("prepare_splits: test segment has " +
                    std::to_string(segments[2].rows()) + " rows but lookback " +
                    std::to_string(L) + " + horizon " + std::to_string(P) +
                    " needs at least " + std::to_string(need));
  out.train = make_windows(segments[0], L, P, cfg.stride)[0];
  out.test = make_windows(segments[2], L, P, cfg.stride)[0];
  if (segments[1].rows() >= need) {
    out.val = make_windows(segments[1], L, P, cfg.stride)[0];
    out.has_val = true;
  }
  return out;
}

// Trains one model from cfg on the prepared splits and evaluates on test.
// Returns the row plus wall ms per optimizer step measured over the run.
inline ReportRow train_and_score(const RunConfig& cfg, const DataSplits& data,
                                 const std::string& variant) {
  Forecaster<double> model(cfg.model);
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult tr =
      train(model, data.train, data.has_val ? &data.val : nullptr, cfg.train);
  const auto t1 = std::chrono::steady_clock::now();
  const double wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  const Metrics test = evaluate(model, data.test, cfg.train.batch_size);
  ReportRow row;
  row.variant = variant;
  row.horizon = cfg.model.horizon;
  row.lookback = cfg.model.lookback;
  row.seed = cfg.model.seed;
  row.mse = test.mse;
  row.mae = test.mae;
  row.ms_per_iter = tr.steps > 0 ? wall_ms / static_cast<double>(tr.steps) : 0.0;
  row.config_hash = config_hash_hex(cfg);
  return row;
}

// ---------------------------------------------------------------------------
// Studies

// Per-variant aggregation with the paired delta against the baseline mean.
struct VariantSummary {
  std::string variant;
  int64_t runs = 0;
  double mse_mean = 0.0, mse_std = 0.0;
  double mae_mean = 0.0, mae_std = 0.0;
  double mse_delta_pct_vs_baseline = 0.0;
};

inline std::vector<VariantSummary> summarize_by_variant(
    const ExperimentReport& report,
    const std::string& baseline = "baseline") {
  std::vector<VariantSummary> out;
  auto find = [&](const std::string& v) -> VariantSummary* {
    for (auto& s : out)
      if (s.variant == v) return &s;
    return nullptr;
  };
  for (const auto& r : report.rows) {
    VariantSummary* s = find(r.variant);
    if (!s) {
      out.push_back({r.variant, 0, 0, 0, 0, 0, 0});
      s = &out.back();
    }
    ++s->runs;
    s->mse_mean += r.mse;
    s->mae_mean += r.mae;
  }
  for (auto& s : out) {
    s.mse_mean /= static_cast<double>(s.runs);
    s.mae_mean /= static_cast<double>(s.runs);
  }
  for (auto& s : out) {
    double vmse = 0.0, vmae = 0.0;
    for (const auto& r : report.rows) {
      if (r.variant != s.variant) continue;
      vmse += (r.mse - s.mse_mean) * (r.mse - s.mse_mean);
      vmae += (r.mae - s.mae_mean) * (r.mae - s.mae_mean);
    }
    s.mse_std = std::sqrt(vmse / static_cast<double>(s.runs));
    s.mae_std = std::sqrt(vmae / static_cast<double>(s.runs));
  }
  const VariantSummary* base = nullptr;
  for (const auto& s : out)
    if (s.variant == baseline) base = &s;
  if (base && base->mse_mean != 0.0)
    for (auto& s : out)
      s.mse_delta_pct_vs_baseline =
          100.0 * (s.mse_mean - base->mse_mean) / base->mse_mean;
  return out;
}

inline std::string render_variant_summary(
    const std::vector<VariantSummary>& summary) {
  std::ostringstream out;
  out << std::left << std::setw(24) << "variant" << std::right
      << std::setw(12) << "runs" << std::setw(14) << "mse_mean"
      << std::setw(12) << "mse_std" << std::setw(14) << "mae_mean"
      << std::setw(12) << "mae_std" << std::setw(16) << "d_mse%_vs_base"
      << '\n';
  out << std::string(104, '-') << '\n';
  out << std::fixed;
  for (const auto& s : summary)
    out << std::left << std::setw(24) << s.variant << std::right
        << std::setw(12) << s.runs << std::setw(14) << std::setprecision(6)
        << s.mse_mean << std::setw(12) << s.mse_std << std::setw(14)
        << s.mae_mean << std::setw(12) << s.mae_std << std::setw(16)
        << std::setprecision(2) << s.mse_delta_pct_vs_baseline << '\n';
  return out.str();
}

// Trains and evaluates every (variant, seed) pair on identical splits.
inline ExperimentReport run_ablation(const RunConfig& base_cfg,
                                     const SeriesTable& table,
                                     const std::vector<std::string>& variants,
                                     const std::vector<uint64_t>& seeds) {
  if (variants.empty())
    throw ConfigError("run_ablation: variant list is empty");
  for (const auto& v : variants) apply_variant(base_cfg.model, v);  // validate
  const DataSplits data = prepare_splits(base_cfg, table);
  ExperimentReport report;
  report.notes.push_back(
      "ablation: identical chronological splits and seeds across variants");
  for (const auto& variant : variants) {
    for (uint64_t seed : seeds) {
      RunConfig cfg = base_cfg;
      cfg.model = apply_variant(cfg.model, variant);
      cfg.model.seed = seed;
      cfg.train.seed = seed;
      report.rows.push_back(train_and_score(cfg, data, variant));
    }
  }
  return report;
}

// Evaluates a trained model under input noise of increasing strength. Noise
// is injected into the (already standardized) test inputs only; targets are
// untouched. The std=0 row is the clean evaluation.
inline ExperimentReport run_robustness(const Forecaster<double>& model,
                                       const WindowBatch& test_data,
                                       const RunConfig& cfg,
                                       const std::vector<double>& stds,
                                       uint64_t seed) {
  ExperimentReport report;
  report.notes.push_back(
      "robustness: gaussian noise on standardized test inputs only; "
      "targets clean; percent change vs the std=0 row");
  const std::string hash = config_hash_hex(cfg);
  for (double s : stds) {
    const WindowBatch noisy = inject_noise(test_data, s, seed);
    const Metrics m = evaluate(model, noisy, cfg.train.batch_size);
    ReportRow row;
    std::ostringstream label;
    label << "noise_std=" << s;
    row.variant = label.str();
    row.horizon = cfg.model.horizon;
    row.lookback = cfg.model.lookback;
    row.seed = seed;
    row.mse = m.mse;
    row.mae = m.mae;
    row.config_hash = hash;
    report.rows.push_back(row);
  }
  return report;
}

// Trains one model per (lookback, seed). All lookbacks are validated
// against the split sizes before any training starts.
inline ExperimentReport run_lookback(const RunConfig& base_cfg,
                                     const SeriesTable& table,
                                     const std::vector<int64_t>& lookbacks,
                                     const std::vector<uint64_t>& seeds) {
  if (lookbacks.empty())
    throw ConfigError("run_lookback: lookback list is empty");
  for (int64_t L : lookbacks) {
    RunConfig cfg = base_cfg;
    cfg.model.lookback = L;
    prepare_splits(cfg, table);  // throws before any training if too short
  }
  ExperimentReport report;
  report.notes.push_back("lookback sweep: one trained model per (L, seed)");
  for (int64_t L : lookbacks) {
    RunConfig cfg = base_cfg;
    cfg.model.lookback = L;
    const DataSplits data = prepare_splits(cfg, table);
    for (uint64_t seed : seeds) {
      cfg.model.seed = seed;
      cfg.train.seed = seed;
      std::ostringstream label;
      label << "lookback=" << L;
      report.rows.push_back(train_and_score(cfg, data, label.str()));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Efficiency

// Scaled-dot-product attention across the L time steps themselves (one
// head, no projections): the quadratic-in-L reference curve.
inline double attention_over_time_reference_ms(int64_t length, int64_t width,
                                               uint64_t seed) {
  NoGradGuard frozen;
  CounterRng rng(seed, "bench.reference");
  std::vector<double> vals(static_cast<size_t>(length * width));
  for (auto& v : vals) v = rng.uniform(-1.0, 1.0);
  const auto x = Tensor<double>::from_data({1, length, width}, std::move(vals));
  double best = 1e300;
  for (int rep = 0; rep < 3; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto scores =
        mul_scalar(matmul(x, transpose_last2(x)),
                   1.0 / std::sqrt(static_cast<double>(width)));
    const auto out = matmul(softmax(scores, -1), x);
    (void)out;
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best,
                    std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

inline double model_forward_ms(const ModelConfig& cfg, uint64_t seed) {
  NoGradGuard frozen;
  Forecaster<double> model(cfg);
  CounterRng rng(seed, "bench.forward");
  std::vector<double> vals(
      static_cast<size_t>(cfg.lookback * cfg.variates));
  for (auto& v : vals) v = rng.uniform(-1.0, 1.0);
  const auto x =
      Tensor<double>::from_data({1, cfg.lookback, cfg.variates}, std::move(vals));
  model.forecast(x);  // warm-up
  double best = 1e300;
  for (int rep = 0; rep < 3; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    model.forecast(x);
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best,
                    std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

// Least-squares slope of log(ms) against log(L).
inline double log_log_slope(const std::vector<int64_t>& lengths,
                            const std::vector<double>& ms) {
  const size_t n = lengths.size();
  double sx = 0, sy = 0;
  std::vector<double> xs(n), ys(n);
  for (size_t i = 0; i < n; ++i) {
    xs[i] = std::log(static_cast<double>(lengths[i]));
    ys[i] = std::log(ms[i]);
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / static_cast<double>(n);
  const double my = sy / static_cast<double>(n);
  double num = 0, den = 0;
  for (size_t i = 0; i < n; ++i) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += (xs[i] - mx) * (xs[i] - mx);
  }
  return num / den;
}

struct EfficiencyResult {
  ExperimentReport report;
  double model_slope = 0.0;
  double reference_slope = 0.0;
  double latency_ratio = 0.0;  // model t(L_max) / t(L_min)
  double train_ms_mean = 0.0;
  double train_ms_std = 0.0;
};

// Forward latency sweep over the lookback grid (model vs the quadratic
// attention-over-time reference) plus mean/std wall ms per full optimizer
// step on a small fixed batch (warmup iterations discarded).
inline EfficiencyResult run_efficiency(
    const RunConfig& base_cfg,
    const std::vector<int64_t>& lookbacks = {96, 192, 384, 768},
    int64_t train_iters = 100, int64_t warmup = 10) {
  EfficiencyResult result;
  result.report.notes.push_back(
      "efficiency: forward latency best-of-3 per L; reference is "
      "single-head attention across the L time steps; train timing is "
      "mean/std over optimizer steps after warmup");
  const std::string hash = config_hash_hex(base_cfg);

  std::vector<double> model_ms, ref_ms;
  for (int64_t L : lookbacks) {
    ModelConfig cfg = base_cfg.model;
    cfg.lookback = L;
    const double fwd = model_forward_ms(cfg, base_cfg.model.seed);
    const double ref =
        attention_over_time_reference_ms(L, 32, base_cfg.model.seed);
    model_ms.push_back(fwd);
    ref_ms.push_back(ref);
    ReportRow mrow;
    mrow.variant = "model_forward";
    mrow.horizon = base_cfg.model.horizon;
    mrow.lookback = L;
    mrow.seed = base_cfg.model.seed;
    mrow.ms_per_iter = fwd;
    mrow.config_hash = hash;
    result.report.rows.push_back(mrow);
    ReportRow rrow = mrow;
    rrow.variant = "attention_over_time_reference";
    rrow.ms_per_iter = ref;
    result.report.rows.push_back(rrow);
  }
  result.model_slope = log_log_slope(lookbacks, model_ms);
  result.reference_slope = log_log_slope(lookbacks, ref_ms);
  result.latency_ratio = model_ms.back() / model_ms.front();

  // Full optimizer-step timing at the base lookback on synthetic windows.
  if (train_iters > 0) {
    RunConfig cfg = base_cfg;
    const int64_t rows =
        cfg.model.lookback + cfg.model.horizon + cfg.train.batch_size;
    const auto table = synth_damped_sinusoids(cfg.model.variates, rows,
                                              cfg.model.seed, 0.05);
    const auto batch =
        make_windows(table, cfg.model.lookback, cfg.model.horizon)[0];
    Forecaster<double> model(cfg.model);
    ParamList<double> params;
    model.collect(params);
    Adam<double> opt(params, AdamConfig{cfg.train.lr, cfg.train.beta1,
                                        cfg.train.beta2, cfg.train.adam_eps,
                                        cfg.train.clip_norm});
    // Keep at least one timed sample when the warmup would swallow the
    // whole budget (short --iters runs).
    const int64_t warm = std::min(warmup, train_iters - 1);
    std::vector<double> samples;
    for (int64_t it = 0; it < train_iters; ++it) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto pred =
          model.forecast(batch.inputs, &batch.window_start_indices);
      const auto diff = sub(pred, batch.targets);
      const auto loss = mean_all(mul(diff, diff));
      opt.zero_grad();
      Tape<double>::active().backward(loss);
      opt.step();
      const auto t1 = std::chrono::steady_clock::now();
      if (it >= warm)
        samples.push_back(
            std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    result.train_ms_mean = mean;
    result.train_ms_std = std::sqrt(var / static_cast<double>(samples.size()));
    ReportRow trow;
    trow.variant = "train_step";
    trow.horizon = base_cfg.model.horizon;
    trow.lookback = base_cfg.model.lookback;
    trow.seed = base_cfg.model.seed;
    trow.ms_per_iter = mean;
    trow.config_hash = hash;
    result.report.rows.push_back(trow);
  }
  return result;
}

}  // namespace ssf
