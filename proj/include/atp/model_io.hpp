#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "atp/model.hpp"

namespace atp {

inline constexpr int kModelFormatVersion = 1;

/// {"format", "version", "meta": {dims, chain, fingerprint, final_unit_kl},
///  "encoder": [layers], "decoder": [layers]}; weights are row-major arrays.
nlohmann::json model_to_json(const AtpModel& model);
AtpModel model_from_json(const nlohmann::json& j);

void save_model(const std::filesystem::path& path, const AtpModel& model);

/// Throws IoError on malformed or truncated files and DimensionError when
/// `expected_chain` is given and does not match the stored chain.
AtpModel load_model(const std::filesystem::path& path,
                    const std::optional<KinematicChain>& expected_chain = std::nullopt);

}  // namespace atp
