#ifndef HAIN_CHECKPOINT_HPP
#define HAIN_CHECKPOINT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hain/data.hpp"
#include "hain/model.hpp"
#include "hain/prototypes.hpp"
#include "hain/training.hpp"

namespace hain {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to reload a trained model: a human-auditable JSON
/// header line followed by a little-endian float64 payload whose length
/// and FNV-1a checksum the header pins.
struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  HainParams params;  // carries the HainConfig
  std::vector<std::size_t> group_sizes;
  std::optional<Standardization> standardization;
  std::optional<SelectionState> selection;
  std::optional<PrototypeSet> prototypes;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  std::uint64_t training_seed = 0;
  std::optional<TrainConfig> train_config;
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::ordered_json config_to_json(const HainConfig& cfg);
HainConfig config_from_json(const nlohmann::json& j);

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json synthetic_spec_to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

nlohmann::ordered_json selection_to_json(const SelectionState& sel);

}  // namespace hain

#endif  // HAIN_CHECKPOINT_HPP
