// Serialization and configuration: bit-exact checkpoint round trips, strict
// shape/name checking on restore, stable file hashing, and the flat
// key=value config schema with its resolved-dump fingerprint.

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "ssf/checkpoint.hpp"
#include "ssf/config.hpp"
#include "ssf/model.hpp"

namespace {

using ssf::ConfigError;
using ssf::DataError;
using ssf::RunConfig;
using ssf::Tensor;

struct TempPath {
  std::string path;
  explicit TempPath(const std::string& name) : path("/tmp/" + name) {}
  ~TempPath() { std::remove(path.c_str()); }
};

ssf::ModelConfig tiny_config() {
  ssf::ModelConfig cfg;
  cfg.lookback = 8;
  cfg.horizon = 4;
  cfg.variates = 2;
  cfg.d_model = 8;
  cfg.layers = 1;
  cfg.tcn_layers = 1;
  cfg.tcn_kernel = 3;
  cfg.ssm_state = 2;
  cfg.ssm_conv_kernel = 2;
  cfg.e_dim = 4;
  cfg.harmonics = 3;
  cfg.d_ff = 8;
  cfg.seed = 123;
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

TEST(Checkpoint, RoundTripIsBitExact) {
  ssf::Forecaster<double> model(tiny_config());
  ssf::ParamList<double> params;
  model.collect(params);
  ASSERT_FALSE(params.empty());

  std::vector<std::vector<double>> original;
  for (const auto* p : params) original.push_back(p->value.values());

  TempPath file("ssf_ckpt_roundtrip.bin");
  ssf::save_checkpoint(file.path, params);

  // Scramble every parameter, then restore from disk.
  for (auto* p : params)
    for (auto& v : p->value.mutable_values()) v = -7.25;
  ssf::load_into(params, ssf::load_checkpoint(file.path));

  for (size_t i = 0; i < params.size(); ++i) {
    const auto& got = params[i]->value.values();
    ASSERT_EQ(got.size(), original[i].size()) << params[i]->name;
    for (size_t j = 0; j < got.size(); ++j)
      ASSERT_EQ(got[j], original[i][j]) << params[i]->name << "[" << j << "]";
  }
}

TEST(Checkpoint, ManifestIsHumanReadable) {
  ssf::Forecaster<double> model(tiny_config());
  ssf::ParamList<double> params;
  model.collect(params);
  TempPath file("ssf_ckpt_manifest.bin");
  ssf::save_checkpoint(file.path, params);

  std::ifstream in(file.path, std::ios::binary);
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(line, ssf::kCheckpointMagic);
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(line, "tensors " + std::to_string(params.size()));

  // One manifest row per tensor, f64 typed, then the payload marker.
  for (size_t i = 0; i < params.size(); ++i) {
    ASSERT_TRUE(std::getline(in, line));
    EXPECT_NE(line.find(params[i]->name), std::string::npos) << line;
    EXPECT_NE(line.find(" f64 "), std::string::npos) << line;
  }
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(line, "payload");
}

TEST(Checkpoint, HashIsStableAcrossIdenticalSaves) {
  ssf::Forecaster<double> model(tiny_config());
  ssf::ParamList<double> params;
  model.collect(params);
  TempPath a("ssf_ckpt_hash_a.bin");
  TempPath b("ssf_ckpt_hash_b.bin");
  ssf::save_checkpoint(a.path, params);
  ssf::save_checkpoint(b.path, params);

  const std::string ha = ssf::file_hash_hex(a.path);
  EXPECT_EQ(ha.size(), 16u);
  EXPECT_EQ(ha, ssf::file_hash_hex(b.path));

  // A one-ulp nudge in one parameter must change the file hash.
  params[0]->value.mutable_values()[0] += 1e-13;
  TempPath c("ssf_ckpt_hash_c.bin");
  ssf::save_checkpoint(c.path, params);
  EXPECT_NE(ha, ssf::file_hash_hex(c.path));
}

TEST(Checkpoint, LoadIntoRejectsMissingParameter) {
  ssf::Forecaster<double> model(tiny_config());
  ssf::ParamList<double> params;
  model.collect(params);
  TempPath file("ssf_ckpt_missing.bin");
  ssf::save_checkpoint(file.path, params);

  ssf::Param<double> extra{"not.in.file", Tensor<double>::zeros({3})};
  params.push_back(&extra);
  EXPECT_THROW(ssf::load_into(params, ssf::load_checkpoint(file.path)),
               DataError);
}

TEST(Checkpoint, LoadIntoRejectsShapeMismatch) {
  ssf::Param<double> p{"w", Tensor<double>::zeros({2, 3})};
  ssf::ParamList<double> params{&p};
  TempPath file("ssf_ckpt_shape.bin");
  ssf::save_checkpoint(file.path, params);

  ssf::Param<double> q{"w", Tensor<double>::zeros({3, 2})};
  ssf::ParamList<double> wrong{&q};
  EXPECT_THROW(ssf::load_into(wrong, ssf::load_checkpoint(file.path)),
               DataError);
}

TEST(Checkpoint, LoadIntoRejectsExtraStoredTensors) {
  ssf::Param<double> p{"w", Tensor<double>::zeros({2})};
  ssf::Param<double> q{"b", Tensor<double>::zeros({2})};
  ssf::ParamList<double> both{&p, &q};
  TempPath file("ssf_ckpt_extra.bin");
  ssf::save_checkpoint(file.path, both);

  ssf::ParamList<double> only{&p};
  EXPECT_THROW(ssf::load_into(only, ssf::load_checkpoint(file.path)),
               DataError);
}

TEST(Checkpoint, RejectsTruncatedPayload) {
  ssf::Param<double> p{"w", Tensor<double>::full({16}, 1.5)};
  ssf::ParamList<double> params{&p};
  TempPath file("ssf_ckpt_trunc.bin");
  ssf::save_checkpoint(file.path, params);

  const std::string bytes = read_file(file.path);
  std::ofstream out(file.path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 24));
  out.close();
  EXPECT_THROW(ssf::load_checkpoint(file.path), DataError);
}

TEST(Checkpoint, RejectsForeignFiles) {
  TempPath file("ssf_ckpt_foreign.bin");
  std::ofstream(file.path) << "this is not a checkpoint\n1 2 3\n";
  EXPECT_THROW(ssf::load_checkpoint(file.path), DataError);
  EXPECT_THROW(ssf::load_checkpoint("/tmp/ssf_no_such_file.bin"), DataError);
}

TEST(Config, DefaultsRenderAndReparseToTheSameText) {
  const RunConfig defaults;
  const std::string text = ssf::render_config(defaults);
  const RunConfig reparsed = ssf::parse_config_text(text);
  EXPECT_EQ(ssf::render_config(reparsed), text);
  EXPECT_EQ(ssf::config_hash_hex(reparsed), ssf::config_hash_hex(defaults));
}

TEST(Config, ParseAppliesEveryFieldKind) {
  const std::string text =
      "# architecture\n"
      "lookback = 48\n"
      "horizon = 24\n"
      "variates = 3\n"
      "d_model = 16\n"
      "attention = self\n"
      "enable_tcn = false\n"
      "zoh_b = 1\n"
      "\n"
      "lr = 0.005  # recipe\n"
      "batch_size = 8\n"
      "train_frac = 0.6\n"
      "stride = 4\n"
      "standardize = false\n";
  const RunConfig cfg = ssf::parse_config_text(text);
  EXPECT_EQ(cfg.model.lookback, 48);
  EXPECT_EQ(cfg.model.horizon, 24);
  EXPECT_EQ(cfg.model.variates, 3);
  EXPECT_EQ(cfg.model.d_model, 16);
  EXPECT_EQ(cfg.model.attention, ssf::AttentionMode::kSelfAttention);
  EXPECT_FALSE(cfg.model.enable_tcn);
  EXPECT_TRUE(cfg.model.zoh_b);
  EXPECT_DOUBLE_EQ(cfg.train.lr, 0.005);
  EXPECT_EQ(cfg.train.batch_size, 8);
  EXPECT_DOUBLE_EQ(cfg.train_frac, 0.6);
  EXPECT_EQ(cfg.stride, 4);
  EXPECT_FALSE(cfg.standardize);
  // Untouched keys keep their defaults.
  EXPECT_EQ(cfg.model.layers, ssf::ModelConfig{}.layers);
}

TEST(Config, SeedKeyDrivesModelAndTrainingStreams) {
  const RunConfig cfg = ssf::parse_config_text("seed = 7\n");
  EXPECT_EQ(cfg.model.seed, 7u);
  EXPECT_EQ(cfg.train.seed, 7u);
}

TEST(Config, RejectsUnknownAndDuplicateKeys) {
  try {
    ssf::parse_config_text("loookback = 48\n");
    FAIL() << "unknown key accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("loookback"), std::string::npos);
  }
  EXPECT_THROW(ssf::parse_config_text("lr = 0.1\nlr = 0.2\n"), ConfigError);
}

TEST(Config, RejectsMalformedValues) {
  EXPECT_THROW(ssf::parse_config_text("lookback = twelve\n"), ConfigError);
  EXPECT_THROW(ssf::parse_config_text("standardize = maybe\n"), ConfigError);
  EXPECT_THROW(ssf::parse_config_text("attention = fancy\n"), ConfigError);
  EXPECT_THROW(ssf::parse_config_text("lr = \n"), ConfigError);
  EXPECT_THROW(ssf::parse_config_text("just a line\n"), ConfigError);
}

TEST(Config, OverridesWinOverFileValues) {
  RunConfig cfg = ssf::parse_config_text("lr = 0.5\nlookback = 96\n");
  ssf::apply_config_entry(cfg, "lr", "0.25");
  ssf::apply_config_entry(cfg, "horizon", "192");
  EXPECT_DOUBLE_EQ(cfg.train.lr, 0.25);
  EXPECT_EQ(cfg.model.lookback, 96);
  EXPECT_EQ(cfg.model.horizon, 192);
}

TEST(Config, LoadsFromFileAndRejectsMissingFile) {
  TempPath file("ssf_config_load.txt");
  std::ofstream(file.path) << "d_model = 32\nharmonics = 8\n";
  const RunConfig cfg = ssf::load_config_file(file.path);
  EXPECT_EQ(cfg.model.d_model, 32);
  EXPECT_EQ(cfg.model.harmonics, 8);
  EXPECT_THROW(ssf::load_config_file("/tmp/ssf_no_such_config.txt"),
               ConfigError);
}

TEST(Config, RenderIsSortedAndComplete) {
  const std::string text = ssf::render_config(RunConfig{});
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> keys;
  while (std::getline(in, line)) {
    const size_t eq = line.find(" = ");
    ASSERT_NE(eq, std::string::npos) << line;
    keys.push_back(line.substr(0, eq));
  }
  ASSERT_TRUE(std::is_sorted(keys.begin(), keys.end()));
  // Spot-check that all schema families made it into the dump.
  for (const char* k : {"lookback", "attention", "lr", "train_frac",
                        "standardize", "seed", "enable_backward"})
    EXPECT_NE(std::find(keys.begin(), keys.end(), k), keys.end()) << k;
}

TEST(Config, HashSeparatesDifferentConfigs) {
  RunConfig a;
  RunConfig b;
  b.model.horizon = 192;
  const std::string ha = ssf::config_hash_hex(a);
  EXPECT_EQ(ha.size(), 16u);
  EXPECT_NE(ha, ssf::config_hash_hex(b));
  b.model.horizon = a.model.horizon;
  EXPECT_EQ(ha, ssf::config_hash_hex(b));
}

}  // namespace
