#include "pcagan/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "pcagan/errors.hpp"

namespace pcagan {

using nlohmann::json;

std::string to_string(Mode m) { return m == Mode::kPcaGan ? "pcaGAN" : "rcGAN"; }

Mode mode_from_string(const std::string& s) {
  if (s == "pcaGAN" || s == "pcagan") return Mode::kPcaGan;
  if (s == "rcGAN" || s == "rcgan") return Mode::kRcGan;
  throw InvalidArgument("unknown mode '" + s + "' (expected pcaGAN or rcGAN)");
}

namespace {

std::string mask_name(MaskConvention m) {
  return m == MaskConvention::kZeroBasedEven ? "zero_based_even" : "one_based_even";
}

MaskConvention mask_from(const std::string& s) {
  if (s == "zero_based_even") return MaskConvention::kZeroBasedEven;
  if (s == "one_based_even") return MaskConvention::kOneBasedEven;
  throw InvalidArgument("unknown mask convention '" + s + "'");
}

std::string scale_name(EigenScale s) { return s == EigenScale::kPerSample ? "per_sample" : "literal"; }

EigenScale scale_from(const std::string& s) {
  if (s == "per_sample") return EigenScale::kPerSample;
  if (s == "literal") return EigenScale::kLiteral;
  throw InvalidArgument("unknown eigenvalue scale '" + s + "'");
}

// Reads j[section][key] into `out` if present, with a type check.
template <typename T>
void read(const json& j, const char* section, const char* key, T& out) {
  if (!j.contains(section)) return;
  const json& s = j.at(section);
  if (!s.contains(key)) return;
  const json& v = s.at(key);
  try {
    if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
        throw InvalidArgument("");
      out = v.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw InvalidArgument("");
      out = v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw InvalidArgument("");
      out = v.get<T>();
    } else {
      out = v.get<T>();
    }
  } catch (const std::exception&) {
    throw InvalidArgument(std::string("config key ") + section + "." + key + " has the wrong type: " + v.dump());
  }
}

const json& schema_template() {
  static const json t = to_json(TrainConfig{});
  return t;
}

void reject_unknown(const json& j) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  const json& t = schema_template();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!t.contains(it.key())) throw InvalidArgument("unknown config section '" + it.key() + "'");
    if (!it->is_object()) throw InvalidArgument("config section '" + it.key() + "' must be an object");
    for (auto kt = it->begin(); kt != it->end(); ++kt)
      if (!t.at(it.key()).contains(kt.key()))
        throw InvalidArgument("unknown config key '" + it.key() + "." + kt.key() + "'");
  }
}

}  // namespace

double TrainConfig::initial_beta_sd() const {
  return beta_sd_init > 0.0 ? beta_sd_init : SdController<double>::gaussian_balance(p_rc);
}

void TrainConfig::validate() const {
  require(d >= 1, "problem.d must be positive");
  require(d_max >= 10 && d_max % 10 == 0, "problem.d_max must be a positive multiple of 10");
  require(noise_var > 0.0, "problem.noise_var must be positive");
  require(code_dim >= 0, "problem.code_dim must be nonnegative");
  require(n_train >= 1 && n_val >= 1 && n_test >= 1, "data split sizes must be positive");
  require(p_rc >= 2, "rc.P_rc must be at least 2");
  require(beta_adv >= 0.0 && beta_pca >= 0.0 && gp_weight >= 0.0, "loss weights must be nonnegative");
  require(n_disc >= 0, "adv.n_disc must be nonnegative");
  require(K >= 0 && k() <= d, "pca.K must lie in [1, d] (0 means d)");
  require(p_pca >= 0 && pca_samples() >= k() + 1, "pca.P_pca must be at least K+1");
  require(M >= 1, "pca.M must be positive");
  require(e_evec >= 0, "pca.E_evec must be nonnegative");
  require(eval_epoch() >= e_evec, "pca.E_eval must be at least pca.E_evec");
  require(beta_sd_init >= 0.0, "sd.beta_init must be nonnegative");
  require(sd_band >= 0.0 && sd_band < 1.0, "sd.band must lie in [0, 1)");
  require(sd_monitor_p == 0 || sd_monitor_p >= 2, "sd.monitor_P must be at least 2");
  require(sd_monitor_pairs >= 1, "sd.monitor_pairs must be positive");
  require(lr > 0.0 && adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0,
          "optimizer settings out of range");
  require(epochs >= 0, "train.epochs must be nonnegative");
  require(batch_size >= 1 && batch_size <= n_train, "train.batch_size must lie in [1, data.train]");
  require(val_ys >= 1 && val_ys <= n_val, "eval.val_ys must lie in [1, data.val]");
  require(test_ys >= 1 && test_ys <= n_test, "eval.test_ys must lie in [1, data.test]");
  require(samples_per_dim >= 1 && eval_samples() >= 2, "eval.samples_per_dim too small");
  require(divergence_factor > 1.0 && divergence_patience >= 1, "divergence guard settings out of range");
}

json to_json(const TrainConfig& c) {
  return json{
      {"problem",
       {{"d", c.d},
        {"d_max", c.d_max},
        {"prior_seed", c.prior_seed},
        {"noise_var", c.noise_var},
        {"mask", mask_name(c.mask)},
        {"code_dim", c.code_dim}}},
      {"data", {{"train", c.n_train}, {"val", c.n_val}, {"test", c.n_test}, {"seed", c.data_seed}}},
      {"adv", {{"beta_adv", c.beta_adv}, {"gp_weight", c.gp_weight}, {"n_disc", c.n_disc}}},
      {"rc", {{"P_rc", c.p_rc}}},
      {"pca",
       {{"K", c.K},
        {"P_pca", c.p_pca},
        {"M", c.M},
        {"E_evec", c.e_evec},
        {"E_eval", c.e_eval},
        {"beta_pca", c.beta_pca},
        {"eigen_scale", scale_name(c.eigen_scale)}}},
      {"sd",
       {{"beta_init", c.beta_sd_init},
        {"gain", c.sd_gain},
        {"band", c.sd_band},
        {"monitor_P", c.sd_monitor_p},
        {"monitor_pairs", c.sd_monitor_pairs}}},
      {"optim", {{"lr", c.lr}, {"beta1", c.adam_beta1}, {"beta2", c.adam_beta2}, {"eps", c.adam_eps}}},
      {"train",
       {{"mode", to_string(c.mode)}, {"epochs", c.epochs}, {"batch_size", c.batch_size}, {"seed", c.seed}}},
      {"eval",
       {{"val_ys", c.val_ys},
        {"samples_per_dim", c.samples_per_dim},
        {"test_ys", c.test_ys},
        {"divergence_factor", c.divergence_factor},
        {"divergence_patience", c.divergence_patience}}},
  };
}

TrainConfig config_from_json(const json& j, const TrainConfig& base) {
  reject_unknown(j);
  TrainConfig c = base;
  read(j, "problem", "d", c.d);
  read(j, "problem", "d_max", c.d_max);
  read(j, "problem", "prior_seed", c.prior_seed);
  read(j, "problem", "noise_var", c.noise_var);
  std::string s;
  if (j.contains("problem") && j["problem"].contains("mask")) {
    read(j, "problem", "mask", s);
    c.mask = mask_from(s);
  }
  read(j, "problem", "code_dim", c.code_dim);
  read(j, "data", "train", c.n_train);
  read(j, "data", "val", c.n_val);
  read(j, "data", "test", c.n_test);
  read(j, "data", "seed", c.data_seed);
  read(j, "adv", "beta_adv", c.beta_adv);
  read(j, "adv", "gp_weight", c.gp_weight);
  read(j, "adv", "n_disc", c.n_disc);
  read(j, "rc", "P_rc", c.p_rc);
  read(j, "pca", "K", c.K);
  read(j, "pca", "P_pca", c.p_pca);
  read(j, "pca", "M", c.M);
  read(j, "pca", "E_evec", c.e_evec);
  read(j, "pca", "E_eval", c.e_eval);
  read(j, "pca", "beta_pca", c.beta_pca);
  if (j.contains("pca") && j["pca"].contains("eigen_scale")) {
    read(j, "pca", "eigen_scale", s);
    c.eigen_scale = scale_from(s);
  }
  read(j, "sd", "beta_init", c.beta_sd_init);
  read(j, "sd", "gain", c.sd_gain);
  read(j, "sd", "band", c.sd_band);
  read(j, "sd", "monitor_P", c.sd_monitor_p);
  read(j, "sd", "monitor_pairs", c.sd_monitor_pairs);
  read(j, "optim", "lr", c.lr);
  read(j, "optim", "beta1", c.adam_beta1);
  read(j, "optim", "beta2", c.adam_beta2);
  read(j, "optim", "eps", c.adam_eps);
  if (j.contains("train") && j["train"].contains("mode")) {
    read(j, "train", "mode", s);
    c.mode = mode_from_string(s);
  }
  read(j, "train", "epochs", c.epochs);
  read(j, "train", "batch_size", c.batch_size);
  read(j, "train", "seed", c.seed);
  read(j, "eval", "val_ys", c.val_ys);
  read(j, "eval", "samples_per_dim", c.samples_per_dim);
  read(j, "eval", "test_ys", c.test_ys);
  read(j, "eval", "divergence_factor", c.divergence_factor);
  read(j, "eval", "divergence_patience", c.divergence_patience);
  return c;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw InvalidArgument("override must look like section.key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  const auto dot = path.find('.');
  if (dot == std::string::npos || path.find('.', dot + 1) != std::string::npos)
    throw InvalidArgument("override key must be section.key: " + path);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  doc[path.substr(0, dot)][path.substr(dot + 1)] = value;
}

TrainConfig apply_overrides(const TrainConfig& base, const std::vector<std::string>& assignments) {
  json doc = json::object();
  for (const auto& a : assignments) apply_override(doc, a);
  return config_from_json(doc, base);
}

std::uint64_t config_hash(const TrainConfig& c) {
  const std::string text = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

TrainConfig profile(const std::string& name) {
  TrainConfig c;
  if (name == "full") {
    c.d = 100;
    c.d_max = 100;
    return c;
  }
  if (name == "desk") {
    c.d = 10;
    c.d_max = 40;
    c.n_train = 10000;
    c.n_val = 2000;
    c.n_test = 1000;
    c.epochs = 40;
    // The 100-epoch schedule (10, then +25) shrunk to the 40-epoch budget.
    c.e_evec = 4;
    c.e_eval = 14;
    return c;
  }
  throw InvalidArgument("unknown profile '" + name + "' (expected desk or full)");
}

TrainConfig load_config_file(const std::string& path, const TrainConfig& base) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read config file " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw InvalidArgument("config file is not valid JSON: " + path);
  return config_from_json(j, base);
}

}  // namespace pcagan
