#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/serialize.h>

namespace neckface {

inline constexpr int kCheckpointFormatVersion = 1;

/// Self-describing container: a JSON "meta" record next to named tensor payloads.
/// `kind` distinguishes facemap and detector checkpoints so one cannot be loaded as the other.
void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const nlohmann::json& meta,
                     const std::function<void(torch::serialize::OutputArchive&)>& write_payload);

struct CheckpointReader {
  nlohmann::json meta;
  torch::serialize::InputArchive archive;
};

/// Throws IoError on a missing or foreign file, DataError when `kind` does not match.
CheckpointReader open_checkpoint(const std::filesystem::path& path, const std::string& kind);

}  // namespace neckface
