#pragma once

// Versioned JSON documents: priors, measurement models and training
// checkpoints. Matrices are stored row-major as {"rows", "cols", "data"}.

#include <cstdint>
#include <string>

#include <json.hpp>

#include "pcagan/gaussian_world.hpp"
#include "pcagan/netcore.hpp"

namespace pcagan {

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kCheckpointFormatVersion = 1;

nlohmann::json matrix_to_json(const Mat<double>& m);
Mat<double> matrix_from_json(const nlohmann::json& j);

nlohmann::json prior_to_json(const GaussianPrior<double>& p);
GaussianPrior<double> prior_from_json(const nlohmann::json& j);
nlohmann::json measurement_to_json(const MeasurementModel<double>& mm);
MeasurementModel<double> measurement_from_json(const nlohmann::json& j);

nlohmann::json params_to_json(const ParamVector<double>& p);
/// Restores values into `p`; the stored layout must equal p's layout.
void params_from_json(const nlohmann::json& j, ParamVector<double>& p);

nlohmann::json adam_to_json(const AdamState<double>& s);
AdamState<double> adam_from_json(const nlohmann::json& j);

struct Checkpoint {
  std::uint64_t config_hash = 0;
  Index epoch = 0;
  double beta_sd = 0.0;
  AffineGenerator<double> gen;
  LinearDiscriminator<double> dsc;
  AdamState<double> gen_opt;
  AdamState<double> disc_opt;
};

nlohmann::json checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void write_json_file(const std::string& path, const nlohmann::json& j);
/// Throws DataError when the file is missing or not JSON.
nlohmann::json read_json_file(const std::string& path);

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pcagan
