#pragma once

// Training and evaluation: MSE/MAE metrics, a seeded mini-batch Adam loop
// with early stopping on validation MSE, and best-weights restoration.
// Everything is deterministic given the seed — batch order comes from a
// counter-based shuffle stream, and the optimizer walks parameters in
// collection order.

#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "data.hpp"
#include "model.hpp"
#include "optim.hpp"

namespace ssf {

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
};

// Full-tensor reductions over [B, P, V] prediction/target pairs.
template <class T>
Metrics compute_metrics(const Tensor<T>& pred, const Tensor<T>& truth) {
  if (pred.shape() != truth.shape())
    throw ShapeError("compute_metrics: shape mismatch " +
                     shape_str(pred.shape()) + " vs " +
                     shape_str(truth.shape()));
  const auto& p = pred.values();
  const auto& t = truth.values();
  double se = 0.0, ae = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
    se += d * d;
    ae += std::abs(d);
  }
  const double n = static_cast<double>(p.size());
  return {se / n, ae / n};
}

struct EpochStats {
  int64_t epoch = 0;  // 1-based
  Metrics train;
  Metrics val;
};

struct TrainResult {
  std::vector<EpochStats> history;
  int64_t best_epoch = 0;  // epoch whose weights the model ends up with
  Metrics best_val;
  int64_t steps = 0;  // optimizer steps taken
};

namespace detail {

// Copies the selected windows out of a [N, ...] batch tensor. Rows are
// contiguous in row-major order, so each window is one block copy.
template <class T>
Tensor<T> take_windows(const Tensor<T>& all, const std::vector<int64_t>& idx) {
  Shape shape = all.shape();
  int64_t row = 1;
  for (size_t d = 1; d < shape.size(); ++d) row *= shape[d];
  shape[0] = static_cast<int64_t>(idx.size());
  std::vector<T> out(static_cast<size_t>(row * shape[0]));
  const auto& src = all.values();
  for (size_t i = 0; i < idx.size(); ++i)
    std::copy_n(src.begin() + idx[i] * row, row, out.begin() + i * row);
  return Tensor<T>::from_data(shape, std::move(out));
}

inline std::vector<int64_t> take_starts(const std::vector<int64_t>& starts,
                                        const std::vector<int64_t>& idx) {
  std::vector<int64_t> out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i)
    out[i] = starts[static_cast<size_t>(idx[i])];
  return out;
}

}  // namespace detail

// Frozen-weights evaluation over all windows in `data`, in mini-batches.
// Accumulates element-weighted sums so the result equals the metrics of one
// giant concatenated batch.
inline Metrics evaluate(const Forecaster<double>& model,
                        const WindowBatch& data, int64_t batch_size = 32) {
  const int64_t n = data.inputs.dim(0);
  if (n == 0) throw DataError("evaluate: no windows to evaluate");
  if (batch_size < 1) throw ConfigError("evaluate: batch_size must be >= 1");
  NoGradGuard frozen;
  double se = 0.0, ae = 0.0, count = 0.0;
  for (int64_t at = 0; at < n; at += batch_size) {
    const int64_t take = std::min(batch_size, n - at);
    std::vector<int64_t> idx(static_cast<size_t>(take));
    for (int64_t i = 0; i < take; ++i) idx[static_cast<size_t>(i)] = at + i;
    const auto x = detail::take_windows(data.inputs, idx);
    const auto y = detail::take_windows(data.targets, idx);
    const auto starts = detail::take_starts(data.window_start_indices, idx);
    const auto pred = model.forecast(x, &starts);
    const Metrics m = compute_metrics(pred, y);
    const double w = static_cast<double>(pred.numel());
    se += m.mse * w;
    ae += m.mae * w;
    count += w;
  }
  return {se / count, ae / count};
}

// Adam training loop. Per-epoch window order comes from a Fisher-Yates
// shuffle driven by the stream "train.shuffle.epoch<e>", so two runs with
// the same seed produce identical histories. Training metrics are the
// element-weighted average of the mini-batch losses as encountered (weights
// move between batches); validation metrics use frozen weights after the
// epoch. Early stopping watches validation MSE with the configured
// patience, and the best-validation weights are restored at the end; with
// no validation set (val_data == nullptr) every epoch runs and the final
// weights stand. A non-finite loss aborts with the offending optimizer
// step in the error.
inline TrainResult train(Forecaster<double>& model,
                         const WindowBatch& train_data,
                         const WindowBatch* val_data,
                         const TrainConfig& cfg) {
  if (cfg.lr < 0.0) throw ConfigError("train: lr must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (cfg.max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  const int64_t n = train_data.inputs.dim(0);
  if (n == 0) throw DataError("train: no training windows");
  const bool have_val = val_data != nullptr && val_data->inputs.dim(0) > 0;

  ParamList<double> params;
  model.collect(params);
  Adam<double> opt(params, AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps,
                                 cfg.clip_norm});

  auto snapshot = [&]() {
    std::vector<std::vector<double>> snap;
    snap.reserve(params.size());
    for (auto* p : params) snap.push_back(p->value.values());
    return snap;
  };
  auto restore = [&](const std::vector<std::vector<double>>& snap) {
    for (size_t i = 0; i < params.size(); ++i)
      params[i]->value.mutable_values() = snap[i];
  };

  TrainResult result;
  std::vector<std::vector<double>> best = snapshot();
  double best_val_mse = std::numeric_limits<double>::infinity();
  int64_t wait = 0;

  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

  for (int64_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    CounterRng shuffle(cfg.seed,
                       "train.shuffle.epoch" + std::to_string(epoch));
    for (int64_t i = n - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(shuffle.uniform_int(0, i))]);

    double se = 0.0, ae = 0.0, count = 0.0;
    for (int64_t at = 0; at < n; at += cfg.batch_size) {
      const int64_t take = std::min<int64_t>(cfg.batch_size, n - at);
      const std::vector<int64_t> idx(order.begin() + at,
                                     order.begin() + at + take);
      const auto x = detail::take_windows(train_data.inputs, idx);
      const auto y = detail::take_windows(train_data.targets, idx);
      const auto starts =
          detail::take_starts(train_data.window_start_indices, idx);
      try {
        const auto pred = model.forecast(x, &starts);
        const auto diff = sub(pred, y);
        const auto loss = mean_all(mul(diff, diff));
        const Metrics m = compute_metrics(pred, y);
        const double w = static_cast<double>(pred.numel());
        se += m.mse * w;
        ae += m.mae * w;
        count += w;
        opt.zero_grad();
        Tape<double>::active().backward(loss);
      } catch (const NumericError& e) {
        Tape<double>::active().clear();
        throw NumericError("train: diverged at optimizer step " +
                           std::to_string(opt.iterations() + 1) + ": " +
                           e.what());
      }
      opt.step();
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train = {se / count, ae / count};
    if (have_val) stats.val = evaluate(model, *val_data, cfg.batch_size);
    result.history.push_back(stats);

    if (have_val) {
      if (stats.val.mse < best_val_mse) {
        best_val_mse = stats.val.mse;
        best = snapshot();
        result.best_epoch = epoch;
        result.best_val = stats.val;
        wait = 0;
      } else if (++wait > cfg.patience) {
        break;
      }
    } else {
      best = snapshot();
      result.best_epoch = epoch;
    }
  }

  restore(best);
  result.steps = opt.iterations();
  if (!have_val && !result.history.empty())
    result.best_val = result.history.back().train;
  return result;
}

// Renders per-epoch history as CSV (no wall-clock columns, so the file is
// bit-stable across runs with the same seed).
inline std::string render_history_csv(const std::vector<EpochStats>& history,
                                      bool have_val) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "epoch,train_mse,train_mae,val_mse,val_mae\n";
  for (const auto& e : history) {
    out << e.epoch << ',' << e.train.mse << ',' << e.train.mae << ',';
    if (have_val)
      out << e.val.mse << ',' << e.val.mae;
    else
      out << ',';
    out << '\n';
  }
  return out.str();
}

}  // namespace ssf
