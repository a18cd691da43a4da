// Command-line entry point binding data, model, and study harnesses into
// reproducible runs. Every config-bearing command writes the fully resolved
// configuration (after --set overrides) next to its outputs, and run logs
// carry no wall-clock values so repeated runs with one seed produce
// byte-identical artifacts (timing lives in the bench outputs).
//
// Exit codes: 0 success; 1 usage error (help to stderr); 2 data/config
// error; 3 numeric failure (non-finite values during compute).

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ssf/checkpoint.hpp"
#include "ssf/experiments.hpp"

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw ssf::DataError("cannot write '" + path.string() + "'");
  out << content;
}

fs::path ensure_out_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec)
    throw ssf::DataError("cannot create output directory '" + dir +
                         "': " + ec.message());
  return p;
}

ssf::RunConfig resolve_config(const std::string& config_path,
                              const std::vector<std::string>& sets) {
  ssf::RunConfig cfg;
  if (!config_path.empty()) cfg = ssf::load_config_file(config_path);
  for (const auto& kv : sets) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw ssf::ConfigError("--set expects key=value, got '" + kv + "'");
    ssf::apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

ssf::SeriesTable load_table(const std::string& data_path,
                            const ssf::ModelConfig& cfg) {
  if (data_path.empty())
    throw ssf::ConfigError("--data is required for this command");
  ssf::SeriesTable table = ssf::load_csv(data_path);
  if (table.variates() != cfg.variates)
    throw ssf::ConfigError("data: '" + data_path + "' has " +
                           std::to_string(table.variates()) +
                           " variates but the config says " +
                           std::to_string(cfg.variates) +
                           " (set variates=" +
                           std::to_string(table.variates()) + ")");
  return table;
}

void load_model_weights(ssf::Forecaster<double>& model,
                        const std::string& ckpt_path) {
  ssf::ParamList<double> params;
  model.collect(params);
  ssf::load_into(params, ssf::load_checkpoint(ckpt_path));
}

// ---------------------------------------------------------------------------

int cmd_synth(int64_t rows, int64_t variates, uint64_t seed, double noise,
              const std::string& out_file) {
  const auto table = ssf::synth_damped_sinusoids(variates, rows, seed, noise);
  ssf::save_csv(table, out_file);
  std::cout << "wrote " << out_file << " (" << rows << " rows, " << variates
            << " variates, seed " << seed << ", noise_std " << noise << ")\n";
  return 0;
}

int cmd_train(const ssf::RunConfig& cfg, const std::string& data_path,
              const std::string& out_dir) {
  const fs::path out = ensure_out_dir(out_dir);
  const auto table = load_table(data_path, cfg.model);
  const auto splits = ssf::prepare_splits(cfg, table);

  ssf::Forecaster<double> model(cfg.model);
  const auto result =
      ssf::train(model, splits.train, splits.has_val ? &splits.val : nullptr,
                 cfg.train);
  const auto test = ssf::evaluate(model, splits.test, cfg.train.batch_size);

  write_text(out / "config.resolved.txt", ssf::render_config(cfg));
  ssf::ParamList<double> params;
  model.collect(params);
  const fs::path ckpt = out / "model.ckpt";
  ssf::save_checkpoint(ckpt.string(), params);
  const std::string ckpt_hash = ssf::file_hash_hex(ckpt.string());
  write_text(out / "history.csv",
             ssf::render_history_csv(result.history, splits.has_val));

  ssf::ExperimentReport report;
  ssf::ReportRow row;
  row.variant = "test";
  row.horizon = cfg.model.horizon;
  row.lookback = cfg.model.lookback;
  row.seed = cfg.model.seed;
  row.mse = test.mse;
  row.mae = test.mae;
  row.ms_per_iter = 0.0;  // timing is bench's job; keep this file seed-stable
  row.config_hash = ssf::config_hash_hex(cfg);
  report.rows.push_back(row);
  write_text(out / "result.csv", ssf::render_report_csv(report));

  std::ostringstream log;
  log << std::setprecision(17);
  log << "command: train\n";
  log << "data: " << data_path << " rows=" << table.rows()
      << " variates=" << table.variates() << "\n";
  log << "config_hash: " << row.config_hash << "\n";
  log << "windows: train=" << splits.train.inputs.dim(0)
      << " val=" << (splits.has_val ? splits.val.inputs.dim(0) : 0)
      << " test=" << splits.test.inputs.dim(0) << "\n";
  for (const auto& e : result.history) {
    log << "epoch " << e.epoch << " train_mse=" << e.train.mse
        << " train_mae=" << e.train.mae;
    if (splits.has_val)
      log << " val_mse=" << e.val.mse << " val_mae=" << e.val.mae;
    log << "\n";
  }
  log << "best_epoch: " << result.best_epoch << "\n";
  log << "optimizer_steps: " << result.steps << "\n";
  log << "test_mse=" << test.mse << " test_mae=" << test.mae << "\n";
  log << "checkpoint: model.ckpt hash=" << ckpt_hash << "\n";
  write_text(out / "run.log", log.str());

  std::cout << "trained " << result.history.size() << " epochs (best "
            << result.best_epoch << "); test mse=" << test.mse
            << " mae=" << test.mae << "\n"
            << "checkpoint hash " << ckpt_hash << "\n"
            << "outputs in " << out.string() << "\n";
  return 0;
}

int cmd_predict(const ssf::RunConfig& cfg, const std::string& data_path,
                const std::string& ckpt_path, const std::string& out_dir) {
  const fs::path out = ensure_out_dir(out_dir);
  const auto table = load_table(data_path, cfg.model);
  const int64_t L = cfg.model.lookback;
  const int64_t V = cfg.model.variates;
  if (table.rows() < L)
    throw ssf::DataError("predict: input '" + data_path + "' has " +
                         std::to_string(table.rows()) +
                         " rows; the model requires at least " +
                         std::to_string(L) + " (its lookback length)");

  ssf::Forecaster<double> model(cfg.model);
  load_model_weights(model, ckpt_path);

  std::vector<int64_t> starts;
  for (int64_t s = 0; s + L <= table.rows(); s += cfg.stride)
    starts.push_back(s + table.row_origin);

  std::ostringstream csv;
  csv << std::setprecision(17) << "step";
  for (int64_t v = 1; v <= V; ++v) csv << ",variate_" << v;
  csv << "\n";

  ssf::NoGradGuard frozen;
  const auto& src = table.values.values();
  const int64_t bs = cfg.train.batch_size;
  for (size_t at = 0; at < starts.size();
       at += static_cast<size_t>(bs)) {
    const size_t take =
        std::min(static_cast<size_t>(bs), starts.size() - at);
    std::vector<double> in(take * static_cast<size_t>(L * V));
    std::vector<int64_t> batch_starts(starts.begin() + at,
                                      starts.begin() + at + take);
    for (size_t i = 0; i < take; ++i) {
      const int64_t s = batch_starts[i] - table.row_origin;
      std::copy(src.begin() + static_cast<size_t>(s * V),
                src.begin() + static_cast<size_t>((s + L) * V),
                in.begin() + i * static_cast<size_t>(L * V));
    }
    const auto x = ssf::Tensor<double>::from_data(
        {static_cast<int64_t>(take), L, V}, std::move(in));
    const auto pred = model.forecast(x, &batch_starts);
    const auto& pv = pred.values();
    for (size_t w = 0; w < take; ++w)
      for (int64_t p = 0; p < cfg.model.horizon; ++p) {
        csv << (p + 1);
        for (int64_t v = 0; v < V; ++v)
          csv << ','
              << pv[w * static_cast<size_t>(cfg.model.horizon * V) +
                    static_cast<size_t>(p * V + v)];
        csv << "\n";
      }
  }

  write_text(out / "config.resolved.txt", ssf::render_config(cfg));
  write_text(out / "predictions.csv", csv.str());
  std::ostringstream log;
  log << "command: predict\n"
      << "data: " << data_path << " rows=" << table.rows() << "\n"
      << "checkpoint: " << ckpt_path << "\n"
      << "windows: " << starts.size() << " (stride " << cfg.stride << ")\n"
      << "horizon rows per window: " << cfg.model.horizon << "\n";
  write_text(out / "run.log", log.str());
  std::cout << "predicted " << starts.size() << " window(s) x "
            << cfg.model.horizon << " steps -> "
            << (out / "predictions.csv").string() << "\n";
  return 0;
}

int cmd_evaluate(const ssf::RunConfig& cfg, const std::string& data_path,
                 const std::string& ckpt_path, const std::string& out_dir) {
  const fs::path out = ensure_out_dir(out_dir);
  const auto table = load_table(data_path, cfg.model);
  const auto splits = ssf::prepare_splits(cfg, table);

  ssf::Forecaster<double> model(cfg.model);
  load_model_weights(model, ckpt_path);
  const auto test = ssf::evaluate(model, splits.test, cfg.train.batch_size);

  write_text(out / "config.resolved.txt", ssf::render_config(cfg));
  ssf::ExperimentReport report;
  ssf::ReportRow row;
  row.variant = "test";
  row.horizon = cfg.model.horizon;
  row.lookback = cfg.model.lookback;
  row.seed = cfg.model.seed;
  row.mse = test.mse;
  row.mae = test.mae;
  row.config_hash = ssf::config_hash_hex(cfg);
  report.rows.push_back(row);
  write_text(out / "result.csv", ssf::render_report_csv(report));
  std::ostringstream log;
  log << std::setprecision(17) << "command: evaluate\n"
      << "data: " << data_path << "\n"
      << "checkpoint: " << ckpt_path << "\n"
      << "windows: test=" << splits.test.inputs.dim(0) << "\n"
      << "test_mse=" << test.mse << " test_mae=" << test.mae << "\n";
  write_text(out / "run.log", log.str());
  std::cout << std::setprecision(17) << "test mse=" << test.mse
            << " mae=" << test.mae << "\n";
  return 0;
}

int cmd_ablate(const ssf::RunConfig& cfg, const std::string& data_path,
               const std::string& out_dir,
               std::vector<std::string> variants,
               const std::vector<uint64_t>& seeds) {
  const fs::path out = ensure_out_dir(out_dir);
  const auto table = load_table(data_path, cfg.model);
  if (variants.empty()) variants = ssf::ablation_variant_names();
  const auto report = ssf::run_ablation(cfg, table, variants, seeds);

  write_text(out / "config.resolved.txt", ssf::render_config(cfg));
  write_text(out / "result.csv", ssf::render_report_csv(report));
  const auto summary = ssf::summarize_by_variant(report);
  const std::string text = ssf::render_report_table(report) + "\n" +
                           ssf::render_variant_summary(summary);
  write_text(out / "result.txt", text);
  std::cout << text;
  return 0;
}

int cmd_robustness(const ssf::RunConfig& cfg, const std::string& data_path,
                   const std::string& ckpt_path, const std::string& out_dir,
                   const std::vector<double>& stds, uint64_t noise_seed) {
  const fs::path out = ensure_out_dir(out_dir);
  const auto table = load_table(data_path, cfg.model);
  const auto splits = ssf::prepare_splits(cfg, table);
  ssf::Forecaster<double> model(cfg.model);
  load_model_weights(model, ckpt_path);

  const auto report =
      ssf::run_robustness(model, splits.test, cfg, stds, noise_seed);
  write_text(out / "config.resolved.txt", ssf::render_config(cfg));
  write_text(out / "result.csv", ssf::render_report_csv(report));
  const std::string text = ssf::render_report_table(report, true);
  write_text(out / "result.txt", text);
  std::cout << text;
  return 0;
}

int cmd_lookback(const ssf::RunConfig& cfg, const std::string& data_path,
                 const std::string& out_dir,
                 const std::vector<int64_t>& lookbacks,
                 const std::vector<uint64_t>& seeds) {
  const fs::path out = ensure_out_dir(out_dir);
  const auto table = load_table(data_path, cfg.model);
  const auto report = ssf::run_lookback(cfg, table, lookbacks, seeds);
  write_text(out / "config.resolved.txt", ssf::render_config(cfg));
  write_text(out / "result.csv", ssf::render_report_csv(report));
  const std::string text = ssf::render_report_table(report);
  write_text(out / "result.txt", text);
  std::cout << text;
  return 0;
}

int cmd_bench(const ssf::RunConfig& cfg, const std::string& out_dir,
              const std::vector<int64_t>& lengths, int64_t iters) {
  const fs::path out = ensure_out_dir(out_dir);
  const auto eff = ssf::run_efficiency(cfg, lengths, iters);
  write_text(out / "config.resolved.txt", ssf::render_config(cfg));
  write_text(out / "result.csv", ssf::render_report_csv(eff.report));

  std::ostringstream text;
  text << ssf::render_report_table(eff.report) << "\n"
       << std::fixed << std::setprecision(3)
       << "model forward log-log slope vs L:      " << eff.model_slope << "\n"
       << "attention-over-time reference slope:   " << eff.reference_slope
       << "\n"
       << "forward latency ratio t(max)/t(min):   " << eff.latency_ratio
       << "\n"
       << "train ms/iter (after warmup): mean=" << eff.train_ms_mean
       << " std=" << eff.train_ms_std << "\n";
  write_text(out / "bench.txt", text.str());
  std::cout << text.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Multivariate time-series forecasting engine: spectral "
      "reconstruction + causal convolution + backward selective scan with "
      "spatial-temporal attention."};
  app.require_subcommand(1);

  // Options shared by the config-bearing subcommands.
  struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::string data;
    std::string out = "run_out";
    std::string ckpt;
  };

  auto add_common = [](CLI::App* sub, Common& c, bool needs_data,
                       bool needs_ckpt) {
    sub->add_option("-c,--config", c.config,
                    "Path to a key=value config file");
    sub->add_option("--set", c.sets,
                    "Override a config key, e.g. --set seed=1 (repeatable)")
        ->take_all();
    if (needs_data)
      sub->add_option("--data", c.data, "Input CSV path")->required();
    if (needs_ckpt)
      sub->add_option("--ckpt", c.ckpt, "Checkpoint file to load")
          ->required();
    sub->add_option("-o,--out", c.out, "Output directory");
  };

  // synth
  auto* synth = app.add_subcommand(
      "synth", "Generate a synthetic damped-sinusoid CSV dataset");
  int64_t synth_rows = 2000, synth_variates = 7;
  uint64_t synth_seed = 1;
  double synth_noise = 0.1;
  std::string synth_out = "synthetic.csv";
  synth->add_option("--rows", synth_rows, "Number of rows");
  synth->add_option("--variates", synth_variates, "Number of variates");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--noise", synth_noise, "Additive gaussian noise std");
  synth->add_option("-o,--out", synth_out, "Output CSV path");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a forecaster");
  Common train_c;
  add_common(train_cmd, train_c, true, false);

  // predict
  auto* predict_cmd = app.add_subcommand(
      "predict", "Forecast from a trained checkpoint over a CSV of inputs");
  Common predict_c;
  add_common(predict_cmd, predict_c, true, true);

  // evaluate
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "Evaluate a checkpoint on the test split of a CSV");
  Common eval_c;
  add_common(eval_cmd, eval_c, true, true);

  // ablate
  auto* ablate_cmd = app.add_subcommand(
      "ablate", "Train and score architecture variants over a seed grid");
  Common ablate_c;
  add_common(ablate_cmd, ablate_c, true, false);
  std::vector<std::string> ablate_variants;
  std::vector<uint64_t> ablate_seeds = {1, 2, 3};
  ablate_cmd
      ->add_option("--variants", ablate_variants,
                   "Variant names (default: all)")
      ->delimiter(',');
  ablate_cmd->add_option("--seeds", ablate_seeds, "Seed grid")
      ->delimiter(',');

  // robustness
  auto* robust_cmd = app.add_subcommand(
      "robustness", "Evaluate a checkpoint under input noise of rising std");
  Common robust_c;
  add_common(robust_cmd, robust_c, true, true);
  std::vector<double> robust_stds = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  uint64_t robust_seed = 1;
  robust_cmd->add_option("--stds", robust_stds, "Noise std grid")
      ->delimiter(',');
  robust_cmd->add_option("--noise-seed", robust_seed, "Noise stream seed");

  // lookback
  auto* lookback_cmd = app.add_subcommand(
      "lookback", "Train one model per lookback length and compare");
  Common lookback_c;
  add_common(lookback_cmd, lookback_c, true, false);
  std::vector<int64_t> lookback_grid = {48, 96, 192, 336, 720};
  std::vector<uint64_t> lookback_seeds = {1};
  lookback_cmd->add_option("--lookbacks", lookback_grid, "Lookback grid")
      ->delimiter(',');
  lookback_cmd->add_option("--seeds", lookback_seeds, "Seed grid")
      ->delimiter(',');

  // bench
  auto* bench_cmd = app.add_subcommand(
      "bench", "Measure forward-latency scaling and training throughput");
  Common bench_c;
  add_common(bench_cmd, bench_c, false, false);
  std::vector<int64_t> bench_lengths = {96, 192, 384, 768};
  int64_t bench_iters = 100;
  bench_cmd->add_option("--lengths", bench_lengths, "Lookback grid to time")
      ->delimiter(',');
  bench_cmd->add_option("--iters", bench_iters,
                        "Optimizer steps to time (first 10 are warmup)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp")
      return app.exit(e);  // help to stdout, exit 0
    std::cerr << "usage error: " << e.what() << "\n\n";
    std::cerr << app.help() << std::flush;
    return 1;
  }

  try {
    if (app.got_subcommand(synth))
      return cmd_synth(synth_rows, synth_variates, synth_seed, synth_noise,
                       synth_out);
    if (app.got_subcommand(train_cmd))
      return cmd_train(resolve_config(train_c.config, train_c.sets),
                       train_c.data, train_c.out);
    if (app.got_subcommand(predict_cmd))
      return cmd_predict(resolve_config(predict_c.config, predict_c.sets),
                         predict_c.data, predict_c.ckpt, predict_c.out);
    if (app.got_subcommand(eval_cmd))
      return cmd_evaluate(resolve_config(eval_c.config, eval_c.sets),
                          eval_c.data, eval_c.ckpt, eval_c.out);
    if (app.got_subcommand(ablate_cmd))
      return cmd_ablate(resolve_config(ablate_c.config, ablate_c.sets),
                        ablate_c.data, ablate_c.out, ablate_variants,
                        ablate_seeds);
    if (app.got_subcommand(robust_cmd))
      return cmd_robustness(resolve_config(robust_c.config, robust_c.sets),
                            robust_c.data, robust_c.ckpt, robust_c.out,
                            robust_stds, robust_seed);
    if (app.got_subcommand(lookback_cmd))
      return cmd_lookback(resolve_config(lookback_c.config, lookback_c.sets),
                          lookback_c.data, lookback_c.out, lookback_grid,
                          lookback_seeds);
    if (app.got_subcommand(bench_cmd))
      return cmd_bench(resolve_config(bench_c.config, bench_c.sets),
                       bench_c.out, bench_lengths, bench_iters);
    std::cerr << "usage error: no subcommand\n" << app.help() << std::flush;
    return 1;
  } catch (const ssf::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const ssf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ssf::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const ssf::ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
