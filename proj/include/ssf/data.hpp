#pragma once

// Dataset plumbing: CSV ingestion, chronological splitting, sliding-window
// batching, a seeded synthetic generator (damped sinusoids with recurring
// transients, trend, and optional noise), and test-time noise injection.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <utility>

#include "rng.hpp"
#include "tensor.hpp"

namespace ssf {

struct SeriesTable {
  std::vector<std::string> timestamps;  // optional, empty when absent
  Tensor<double> values;                // [N_total, V]
  std::vector<std::string> variate_names;
  std::string sampling_interval;
  // Absolute index of row 0 in the originating table. Slices carry it so
  // window start indices (and the calendar features derived from them)
  // stay chronologically aligned after a chronological split.
  int64_t row_origin = 0;

  int64_t rows() const { return values.defined() ? values.dim(0) : 0; }
  int64_t variates() const { return values.defined() ? values.dim(1) : 0; }
};

struct WindowBatch {
  Tensor<double> inputs;   // [B, L, V]
  Tensor<double> targets;  // [B, P, V]; row 0 follows the last input row
  std::vector<int64_t> window_start_indices;
};

namespace detail {

inline bool parse_double(const std::string& cell, double& out) {
  const char* b = cell.data();
  const char* e = b + cell.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\t' || e[-1] == '\r')) --e;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e && b < e;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace detail

// Parses a comma-separated UTF-8 file with one header row. The first column
// is treated as a timestamp when its first data cell does not parse as a
// number. value_columns optionally restricts which header names are kept
// (default: every non-timestamp column).
inline SeriesTable load_csv(const std::string& path,
                            const std::vector<std::string>& value_columns = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("load_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw DataError("load_csv: '" + path + "' is empty (no header row)");
  const auto header = detail::split_csv_line(line);

  std::vector<std::vector<std::string>> raw_rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    raw_rows.push_back(detail::split_csv_line(line));
  }
  if (raw_rows.empty())
    throw DataError("load_csv: '" + path + "' has a header but no data rows");

  double probe;
  const bool has_timestamp = !detail::parse_double(raw_rows[0][0], probe);
  const size_t first_value_col = has_timestamp ? 1 : 0;
  if (header.size() <= first_value_col)
    throw DataError("load_csv: '" + path + "' has no value columns");

  std::vector<size_t> keep;
  std::vector<std::string> names;
  for (size_t c = first_value_col; c < header.size(); ++c) {
    if (!value_columns.empty() &&
        std::find(value_columns.begin(), value_columns.end(), header[c]) ==
            value_columns.end())
      continue;
    keep.push_back(c);
    names.push_back(header[c]);
  }
  for (const auto& want : value_columns)
    if (std::find(names.begin(), names.end(), want) == names.end())
      throw DataError("load_csv: requested column '" + want +
                      "' not found in '" + path + "'");

  SeriesTable table;
  table.variate_names = names;
  const int64_t n = static_cast<int64_t>(raw_rows.size());
  const int64_t v = static_cast<int64_t>(keep.size());
  std::vector<double> vals(static_cast<size_t>(n * v));
  for (int64_t r = 0; r < n; ++r) {
    const auto& cells = raw_rows[static_cast<size_t>(r)];
    if (cells.size() != header.size())
      throw DataError("load_csv: row " + std::to_string(r + 2) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    if (has_timestamp) table.timestamps.push_back(cells[0]);
    for (int64_t c = 0; c < v; ++c) {
      const auto& cell = cells[keep[static_cast<size_t>(c)]];
      double x;
      if (!detail::parse_double(cell, x))
        throw DataError("load_csv: row " + std::to_string(r + 2) +
                        ", column '" + names[static_cast<size_t>(c)] +
                        "': cannot parse '" + cell + "' as a number");
      if (!std::isfinite(x))
        throw DataError("load_csv: row " + std::to_string(r + 2) +
                        ", column '" + names[static_cast<size_t>(c)] +
                        "': non-finite value rejected");
      vals[static_cast<size_t>(r * v + c)] = x;
    }
  }
  table.values = Tensor<double>::from_data({n, v}, std::move(vals));
  return table;
}

inline void save_csv(const SeriesTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("save_csv: cannot open '" + path + "' for writing");
  const bool ts = !table.timestamps.empty();
  if (ts) out << "date";
  for (size_t c = 0; c < table.variate_names.size(); ++c)
    out << (ts || c ? "," : "") << table.variate_names[c];
  out << "\n";
  out.precision(17);
  const int64_t v = table.variates();
  for (int64_t r = 0; r < table.rows(); ++r) {
    if (ts) out << table.timestamps[static_cast<size_t>(r)];
    for (int64_t c = 0; c < v; ++c)
      out << (ts || c ? "," : "")
          << table.values.values()[static_cast<size_t>(r * v + c)];
    out << "\n";
  }
  if (!out) throw DataError("save_csv: write to '" + path + "' failed");
}

inline SeriesTable slice_rows(const SeriesTable& table, int64_t start,
                              int64_t count) {
  SeriesTable out;
  out.variate_names = table.variate_names;
  out.sampling_interval = table.sampling_interval;
  out.row_origin = table.row_origin + start;
  const int64_t v = table.variates();
  if (!table.timestamps.empty())
    out.timestamps.assign(
        table.timestamps.begin() + static_cast<size_t>(start),
        table.timestamps.begin() + static_cast<size_t>(start + count));
  std::vector<double> vals(
      table.values.values().begin() + static_cast<size_t>(start * v),
      table.values.values().begin() + static_cast<size_t>((start + count) * v));
  out.values = Tensor<double>::from_data({count, v}, std::move(vals));
  return out;
}

// Contiguous chronological train/val/test segments. Row counts are
// floor(N * fraction) for train and val; the remainder goes to test.
// min_rows (typically L + P) guards each segment's usability.
inline std::array<SeriesTable, 3> split_chronological(
    const SeriesTable& table, double train_frac, double val_frac,
    double test_frac, int64_t min_rows = 0) {
  if (train_frac <= 0 || val_frac <= 0 || test_frac <= 0)
    throw ConfigError("split: fractions must be positive");
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw ConfigError("split: fractions must sum to 1");
  const int64_t n = table.rows();
  const int64_t n_train = static_cast<int64_t>(std::floor(n * train_frac));
  const int64_t n_val = static_cast<int64_t>(std::floor(n * val_frac));
  const int64_t n_test = n - n_train - n_val;
  for (int64_t seg : {n_train, n_val, n_test})
    if (seg < std::max<int64_t>(min_rows, 1))
      throw DataError("split: segment of " + std::to_string(seg) +
                      " rows is shorter than the required " +
                      std::to_string(std::max<int64_t>(min_rows, 1)));
  return {slice_rows(table, 0, n_train),
          slice_rows(table, n_train, n_val),
          slice_rows(table, n_train + n_val, n_test)};
}

inline std::vector<int64_t> window_starts(int64_t n_total, int64_t lookback,
                                          int64_t horizon,
                                          int64_t stride = 1) {
  if (lookback < 1 || horizon < 1 || stride < 1)
    throw ConfigError("windows: lookback/horizon/stride must be >= 1");
  if (n_total < lookback + horizon)
    throw DataError("windows: table has " + std::to_string(n_total) +
                    " rows but lookback + horizon requires at least " +
                    std::to_string(lookback + horizon));
  std::vector<int64_t> starts;
  for (int64_t s = 0; s + lookback + horizon <= n_total; s += stride)
    starts.push_back(s);
  return starts;
}

// Materializes the windows that begin at the given rows. Inputs take rows
// [s, s+L); targets take rows [s+L, s+L+P) — strictly later, so no window
// ever leaks target information into its input.
inline WindowBatch gather_windows(const SeriesTable& table,
                                  const std::vector<int64_t>& starts,
                                  int64_t lookback, int64_t horizon) {
  const int64_t b = static_cast<int64_t>(starts.size());
  const int64_t v = table.variates();
  std::vector<double> in(static_cast<size_t>(b * lookback * v));
  std::vector<double> tg(static_cast<size_t>(b * horizon * v));
  const auto& src = table.values.values();
  for (int64_t i = 0; i < b; ++i) {
    const int64_t s = starts[static_cast<size_t>(i)];
    std::copy(src.begin() + static_cast<size_t>(s * v),
              src.begin() + static_cast<size_t>((s + lookback) * v),
              in.begin() + static_cast<size_t>(i * lookback * v));
    std::copy(src.begin() + static_cast<size_t>((s + lookback) * v),
              src.begin() + static_cast<size_t>((s + lookback + horizon) * v),
              tg.begin() + static_cast<size_t>(i * horizon * v));
  }
  std::vector<int64_t> absolute = starts;
  for (auto& s : absolute) s += table.row_origin;
  return {Tensor<double>::from_data({b, lookback, v}, std::move(in)),
          Tensor<double>::from_data({b, horizon, v}, std::move(tg)),
          std::move(absolute)};
}

// All windows at the given stride, chunked into batches of batch_size
// (0 = a single batch holding everything).
inline std::vector<WindowBatch> make_windows(const SeriesTable& table,
                                             int64_t lookback, int64_t horizon,
                                             int64_t stride = 1,
                                             int64_t batch_size = 0) {
  auto starts = window_starts(table.rows(), lookback, horizon, stride);
  if (batch_size <= 0) batch_size = static_cast<int64_t>(starts.size());
  std::vector<WindowBatch> batches;
  for (size_t i = 0; i < starts.size(); i += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(starts.size(), i + static_cast<size_t>(batch_size));
    batches.push_back(gather_windows(
        table, std::vector<int64_t>(starts.begin() + i, starts.begin() + end),
        lookback, horizon));
  }
  return batches;
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

struct SynthComponent {
  double amplitude;    // a in [0.5, 2]
  int64_t period;      // p in [12, 96] steps, integer
  double damping;      // lambda in [0, 3]
  int64_t transient;   // T in [96, 384] steps, integer
  double phase;        // phi in [0, 2*pi)
};

struct SynthVariateParams {
  std::array<SynthComponent, 3> components;  // sorted by amplitude, desc
  double trend;                              // per-step slope in [-1e-3, 1e-3]
};

struct SynthOptions {
  bool damping = true;  // false zeroes every lambda
  bool trend = true;    // false zeroes every slope
};

// The generator contract, reproducible bit-for-bit from the seed: variate v
// draws from the counter stream "synth.var<v>" in the order (a, p, lambda,
// T, phi) three times, then the trend slope; components are then sorted by
// amplitude (descending, stable) so component 0 is the dominant one. Noise
// draws come from the separate stream "synth.noise" in row-major order.
inline SynthVariateParams synth_variate_params(int64_t variate, uint64_t seed,
                                               const SynthOptions& opts = {}) {
  CounterRng rng(seed, "synth.var" + std::to_string(variate));
  SynthVariateParams p{};
  for (auto& c : p.components) {
    c.amplitude = rng.uniform(0.5, 2.0);
    c.period = rng.uniform_int(12, 96);
    c.damping = rng.uniform(0.0, 3.0);
    c.transient = rng.uniform_int(96, 384);
    c.phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  }
  p.trend = rng.uniform(-0.001, 0.001);
  std::stable_sort(p.components.begin(), p.components.end(),
                   [](const SynthComponent& x, const SynthComponent& y) {
                     return x.amplitude > y.amplitude;
                   });
  if (!opts.damping)
    for (auto& c : p.components) c.damping = 0.0;
  if (!opts.trend) p.trend = 0.0;
  return p;
}

inline SeriesTable synth_damped_sinusoids(int64_t variates, int64_t n_total,
                                          uint64_t seed, double noise_std,
                                          const SynthOptions& opts = {}) {
  if (variates < 1 || n_total < 1)
    throw ConfigError("synth: variates and n_total must be >= 1");
  SeriesTable table;
  table.sampling_interval = "1 step (synthetic)";
  std::vector<double> vals(static_cast<size_t>(n_total * variates), 0.0);
  constexpr double kTau = 2.0 * 3.14159265358979323846;
  for (int64_t v = 0; v < variates; ++v) {
    table.variate_names.push_back("v" + std::to_string(v + 1));
    const auto p = synth_variate_params(v, seed, opts);
    for (int64_t t = 0; t < n_total; ++t) {
      double x = p.trend * static_cast<double>(t);
      for (const auto& c : p.components) {
        const double frac =
            static_cast<double>(t % c.transient) / static_cast<double>(c.transient);
        x += c.amplitude * std::exp(-c.damping * frac) *
             std::cos(kTau * static_cast<double>(t) /
                          static_cast<double>(c.period) +
                      c.phase);
      }
      vals[static_cast<size_t>(t * variates + v)] = x;
    }
  }
  if (noise_std > 0.0) {
    CounterRng rng(seed, "synth.noise");
    for (auto& x : vals) x += rng.gaussian() * noise_std;
  }
  table.values = Tensor<double>::from_data({n_total, variates}, std::move(vals));
  return table;
}

// ---------------------------------------------------------------------------
// Noise injection and global standardization
// ---------------------------------------------------------------------------

// Gaussian noise on the inputs only; targets pass through untouched.
// std = 0 returns the batch bit-identically.
inline WindowBatch inject_noise(const WindowBatch& batch, double std_dev,
                                uint64_t seed) {
  if (std_dev < 0) throw ConfigError("inject_noise: std must be >= 0");
  if (std_dev == 0.0) return batch;
  CounterRng rng(seed, "noise.inputs");
  auto vals = batch.inputs.values();
  for (auto& x : vals) x += rng.gaussian() * std_dev;
  return {Tensor<double>::from_data(batch.inputs.shape(), std::move(vals)),
          batch.targets, batch.window_start_indices};
}

struct ColumnStats {
  std::vector<double> mean;  // per variate
  std::vector<double> std;   // per variate, clamped away from zero
};

inline ColumnStats compute_column_stats(const SeriesTable& table) {
  const int64_t n = table.rows(), v = table.variates();
  ColumnStats s{std::vector<double>(static_cast<size_t>(v), 0.0),
                std::vector<double>(static_cast<size_t>(v), 0.0)};
  for (int64_t c = 0; c < v; ++c) {
    double m = 0.0;
    for (int64_t r = 0; r < n; ++r)
      m += table.values.values()[static_cast<size_t>(r * v + c)];
    m /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t r = 0; r < n; ++r) {
      const double d = table.values.values()[static_cast<size_t>(r * v + c)] - m;
      var += d * d;
    }
    var /= static_cast<double>(n);
    s.mean[static_cast<size_t>(c)] = m;
    s.std[static_cast<size_t>(c)] = std::max(std::sqrt(var), 1e-8);
  }
  return s;
}

inline SeriesTable apply_column_stats(const SeriesTable& table,
                                      const ColumnStats& stats) {
  SeriesTable out = table;
  const int64_t n = table.rows(), v = table.variates();
  if (static_cast<int64_t>(stats.mean.size()) != v)
    throw ConfigError("standardize: stats cover " +
                      std::to_string(stats.mean.size()) + " variates, table has " +
                      std::to_string(v));
  auto vals = table.values.values();
  for (int64_t r = 0; r < n; ++r)
    for (int64_t c = 0; c < v; ++c) {
      auto& x = vals[static_cast<size_t>(r * v + c)];
      x = (x - stats.mean[static_cast<size_t>(c)]) /
          stats.std[static_cast<size_t>(c)];
    }
  out.values = Tensor<double>::from_data({n, v}, std::move(vals));
  return out;
}

}  // namespace ssf
