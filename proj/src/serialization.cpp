#include "pcagan/serialization.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pcagan/errors.hpp"

namespace pcagan {

using nlohmann::json;

namespace {

void check_version(const json& j, int expected, const char* what) {
  if (!j.contains("format_version") || !j["format_version"].is_number_integer())
    throw VersionMismatch(std::string(what) + " document has no format_version");
  const int v = j["format_version"].get<int>();
  if (v != expected)
    throw VersionMismatch(std::string(what) + " format_version " + std::to_string(v) + ", expected " +
                          std::to_string(expected));
}

}  // namespace

json matrix_to_json(const Mat<double>& m) {
  json data = json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Mat<double> matrix_from_json(const json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const json& data = j.at("data");
  require(rows >= 0 && cols >= 0 && data.is_array() && static_cast<Index>(data.size()) == rows * cols,
          "matrix document has inconsistent shape");
  Mat<double> m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index k = 0; k < cols; ++k) m(i, k) = data[static_cast<std::size_t>(i * cols + k)].get<double>();
  return m;
}

json prior_to_json(const GaussianPrior<double>& p) {
  return {{"format_version", kModelFormatVersion},
          {"kind", "gaussian_prior"},
          {"dim", p.dim()},
          {"mean", matrix_to_json(p.mean)},
          {"eigvals", matrix_to_json(p.eigvals)},
          {"eigvecs", matrix_to_json(p.eigvecs)}};
}

GaussianPrior<double> prior_from_json(const json& j) {
  check_version(j, kModelFormatVersion, "prior");
  GaussianPrior<double> p;
  p.mean = matrix_from_json(j.at("mean"));
  p.eigvals = matrix_from_json(j.at("eigvals"));
  p.eigvecs = matrix_from_json(j.at("eigvecs"));
  p.validate();
  return p;
}

json measurement_to_json(const MeasurementModel<double>& mm) {
  json mask = json::array();
  for (Index i = 0; i < mm.dim(); ++i) mask.push_back(mm.mask(i) ? 1 : 0);
  return {{"format_version", kModelFormatVersion},
          {"kind", "masked_noisy_measurement"},
          {"dim", mm.dim()},
          {"mask", mask},
          {"noise_var", mm.noise_var}};
}

MeasurementModel<double> measurement_from_json(const json& j) {
  check_version(j, kModelFormatVersion, "measurement model");
  MeasurementModel<double> mm;
  const json& mask = j.at("mask");
  mm.mask.resize(static_cast<Index>(mask.size()));
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const int v = mask[i].get<int>();
    require(v == 0 || v == 1, "mask entries must be 0 or 1");
    mm.mask(static_cast<Index>(i)) = v == 1;
  }
  mm.noise_var = j.at("noise_var").get<double>();
  mm.validate();
  return mm;
}

json params_to_json(const ParamVector<double>& p) {
  json layout = json::array();
  for (const auto& s : p.layout())
    layout.push_back({{"name", s.name}, {"offset", s.offset}, {"rows", s.rows}, {"cols", s.cols}});
  return {{"layout", layout}, {"values", std::vector<double>(p.values().data(), p.values().data() + p.size())}};
}

void params_from_json(const json& j, ParamVector<double>& p) {
  const json& layout = j.at("layout");
  require(layout.size() == p.layout().size(), "checkpoint parameter layout differs");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Slice s{layout[i].at("name").get<std::string>(), layout[i].at("offset").get<Index>(),
                  layout[i].at("rows").get<Index>(), layout[i].at("cols").get<Index>()};
    require(s == p.layout()[i], "checkpoint parameter slice '" + s.name + "' differs");
  }
  const auto values = j.at("values").get<std::vector<double>>();
  require(static_cast<Index>(values.size()) == p.size(), "checkpoint parameter length differs");
  p.assign(Eigen::Map<const Vec<double>>(values.data(), p.size()));
}

json adam_to_json(const AdamState<double>& s) {
  const auto vec = [](const Vec<double>& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"first_moment", vec(s.first_moment)},
          {"second_moment", vec(s.second_moment)},
          {"step_count", s.step_count},
          {"lr", s.lr},
          {"beta1", s.beta1},
          {"beta2", s.beta2},
          {"eps", s.eps}};
}

AdamState<double> adam_from_json(const json& j) {
  const auto vec = [](const json& a) {
    const auto v = a.get<std::vector<double>>();
    return Vec<double>(Eigen::Map<const Vec<double>>(v.data(), static_cast<Index>(v.size())));
  };
  AdamState<double> s;
  s.first_moment = vec(j.at("first_moment"));
  s.second_moment = vec(j.at("second_moment"));
  require(s.first_moment.size() == s.second_moment.size(), "Adam moment lengths differ");
  s.step_count = j.at("step_count").get<long>();
  s.lr = j.at("lr").get<double>();
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.eps = j.at("eps").get<double>();
  return s;
}

json checkpoint_to_json(const Checkpoint& c) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(c.config_hash));
  return {{"format_version", kCheckpointFormatVersion},
          {"config_hash", hash},
          {"epoch", c.epoch},
          {"beta_sd", c.beta_sd},
          {"dim", c.gen.dim()},
          {"code_dim", c.gen.code_dim()},
          {"generator", params_to_json(c.gen.params())},
          {"discriminator", params_to_json(c.dsc.params())},
          {"generator_adam", adam_to_json(c.gen_opt)},
          {"discriminator_adam", adam_to_json(c.disc_opt)}};
}

Checkpoint checkpoint_from_json(const json& j) {
  check_version(j, kCheckpointFormatVersion, "checkpoint");
  Checkpoint c;
  c.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
  c.epoch = j.at("epoch").get<Index>();
  c.beta_sd = j.at("beta_sd").get<double>();
  const Index d = j.at("dim").get<Index>();
  c.gen = AffineGenerator<double>(d, j.at("code_dim").get<Index>());
  c.dsc = LinearDiscriminator<double>(d);
  params_from_json(j.at("generator"), c.gen.params());
  params_from_json(j.at("discriminator"), c.dsc.params());
  c.gen_opt = adam_from_json(j.at("generator_adam"));
  c.disc_opt = adam_from_json(j.at("discriminator_adam"));
  return c;
}

void write_json_file(const std::string& path, const json& j) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, target);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError(path + " is not valid JSON");
  return j;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) { write_json_file(path, checkpoint_to_json(c)); }

Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_json(read_json_file(path)); }

}  // namespace pcagan
