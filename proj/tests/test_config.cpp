#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "pcagan/config.hpp"
#include "pcagan/errors.hpp"

using namespace pcagan;
using nlohmann::json;

TEST(Config, DefaultsResolve) {
  TrainConfig c;
  c.validate();
  EXPECT_EQ(c.k(), c.d);
  EXPECT_EQ(c.pca_samples(), 10 * c.d);
  EXPECT_EQ(c.eval_epoch(), c.e_evec + 25);
  EXPECT_EQ(c.z_dim(), c.d);
  EXPECT_EQ(c.monitor_p(), c.p_rc);
  EXPECT_EQ(c.eval_samples(), 10 * c.d);
  EXPECT_NEAR(c.initial_beta_sd(), 1.0 / (2.0 * std::sqrt(3.0)), 1e-15);
  c.K = 3;
  c.p_pca = 0;
  EXPECT_EQ(c.pca_samples(), 30);
  c.mode = Mode::kRcGan;
  EXPECT_EQ(c.effective_beta_pca(), 0.0);
}

TEST(Config, JsonRoundTripAndHash) {
  TrainConfig c = profile("desk");
  c.K = 4;
  c.mode = Mode::kRcGan;
  c.eigen_scale = EigenScale::kLiteral;
  c.mask = MaskConvention::kOneBasedEven;
  c.beta_sd_init = 0.125;
  const json j = to_json(c);
  const TrainConfig back = config_from_json(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(config_hash(back), config_hash(c));
  c.seed += 1;
  EXPECT_NE(config_hash(back), config_hash(c));
  EXPECT_EQ(hex64(0xabcull), "0000000000000abc");
}

TEST(Config, PartialDocumentsKeepBase) {
  const TrainConfig base = profile("desk");
  const TrainConfig c = config_from_json(json::parse(R"({"pca": {"M": 7}})"), base);
  EXPECT_EQ(c.M, 7);
  EXPECT_EQ(c.epochs, base.epochs);
  EXPECT_EQ(c.e_evec, base.e_evec);
}

TEST(Config, RejectsUnknownKeysAndWrongTypes) {
  EXPECT_THROW(config_from_json(json::parse(R"({"pca": {"MM": 7}})")), InvalidArgument);
  EXPECT_THROW(config_from_json(json::parse(R"({"optimizer": {}})")), InvalidArgument);
  EXPECT_THROW(config_from_json(json::parse(R"({"pca": {"M": "often"}})")), InvalidArgument);
  EXPECT_THROW(config_from_json(json::parse(R"({"train": {"mode": "vae"}})")), InvalidArgument);
  EXPECT_THROW(config_from_json(json::parse(R"([1, 2])")), InvalidArgument);
}

TEST(Config, Overrides) {
  const TrainConfig c = apply_overrides(profile("desk"), {"pca.M=50", "train.mode=rcGAN", "optim.lr=2e-4"});
  EXPECT_EQ(c.M, 50);
  EXPECT_EQ(c.mode, Mode::kRcGan);
  EXPECT_DOUBLE_EQ(c.lr, 2e-4);
  EXPECT_THROW(apply_overrides(TrainConfig{}, {"M=50"}), InvalidArgument);
  EXPECT_THROW(apply_overrides(TrainConfig{}, {"pca.M"}), InvalidArgument);
  EXPECT_THROW(apply_overrides(TrainConfig{}, {"pca.M.x=1"}), InvalidArgument);
}

TEST(Config, ValidationNamesTheProblem) {
  const auto fails = [](auto mutate, const std::string& needle) {
    TrainConfig c = profile("desk");
    mutate(c);
    try {
      c.validate();
      ADD_FAILURE() << "expected a validation error mentioning " << needle;
    } catch (const InvalidArgument& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  fails([](TrainConfig& c) { c.K = c.d + 1; }, "pca.K");
  fails([](TrainConfig& c) { c.K = 3, c.p_pca = 3; }, "pca.P_pca");
  fails([](TrainConfig& c) { c.M = 0; }, "pca.M");
  fails([](TrainConfig& c) { c.p_rc = 1; }, "P_rc");
  fails([](TrainConfig& c) { c.e_evec = 5, c.e_eval = 4; }, "pca.E_eval");
  fails([](TrainConfig& c) { c.batch_size = c.n_train + 1; }, "batch_size");
  fails([](TrainConfig& c) { c.d_max = 35; }, "d_max");
  fails([](TrainConfig& c) { c.noise_var = 0.0; }, "noise_var");
  fails([](TrainConfig& c) { c.sd_band = 1.0; }, "sd.band");
}

TEST(Config, Profiles) {
  const TrainConfig desk = profile("desk");
  EXPECT_EQ(desk.d, 10);
  EXPECT_EQ(desk.d_max, 40);
  EXPECT_EQ(desk.epochs, 40);
  EXPECT_EQ(desk.n_train, 10000);
  EXPECT_EQ(desk.n_val, 2000);
  EXPECT_EQ(desk.n_test, 1000);
  EXPECT_LT(desk.e_evec, desk.eval_epoch());
  EXPECT_LT(desk.eval_epoch(), desk.epochs);
  const TrainConfig full = profile("full");
  EXPECT_EQ(full.d, 100);
  EXPECT_EQ(full.epochs, 100);
  EXPECT_EQ(full.e_evec, 10);
  EXPECT_EQ(full.eval_epoch(), 35);
  EXPECT_EQ(full.M, 100);
  EXPECT_EQ(full.p_rc, 2);
  EXPECT_DOUBLE_EQ(full.beta_adv, 1e-5);
  EXPECT_DOUBLE_EQ(full.beta_pca, 1e-2);
  EXPECT_THROW(profile("huge"), InvalidArgument);
}

TEST(Config, LoadFile) {
  const auto path = std::filesystem::temp_directory_path() / "pcagan_config_test.json";
  {
    std::ofstream out(path);
    out << R"({"train": {"epochs": 3}})";
  }
  EXPECT_EQ(load_config_file(path.string(), profile("desk")).epochs, 3);
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  EXPECT_THROW(load_config_file(path.string(), TrainConfig{}), InvalidArgument);
  std::filesystem::remove(path);
  EXPECT_THROW(load_config_file(path.string(), TrainConfig{}), InvalidArgument);
}

TEST(Mode, Names) {
  EXPECT_EQ(to_string(Mode::kPcaGan), "pcaGAN");
  EXPECT_EQ(to_string(Mode::kRcGan), "rcGAN");
  EXPECT_EQ(mode_from_string("rcGAN"), Mode::kRcGan);
  EXPECT_THROW(mode_from_string("gan"), InvalidArgument);
}
