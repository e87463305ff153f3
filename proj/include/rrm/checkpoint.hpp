#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>

#include <json.hpp>

#include "rrm/gnn.hpp"

namespace rrm {

inline constexpr const char* kCheckpointFormat = "rrm-gnn-checkpoint";
inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// JSON record: format tag, version, hyperparameter block, every array with its
// declared shape, and a free-form metadata object. Doubles are written with
// shortest round-trip formatting, so save/load is bit-exact.
nlohmann::json checkpoint_to_json(const GnnParams& params, const nlohmann::json& metadata = nlohmann::json::object());
GnnParams checkpoint_from_json(const nlohmann::json& record);

void save_checkpoint(const GnnParams& params, const std::filesystem::path& path,
                     const nlohmann::json& metadata = nlohmann::json::object());

// Throws CheckpointError on unreadable/truncated files, format or version
// mismatch, inconsistent shapes, or when `expected` is given and differs.
GnnParams load_checkpoint(const std::filesystem::path& path, const std::optional<GnnHyper>& expected = std::nullopt);
nlohmann::json load_checkpoint_metadata(const std::filesystem::path& path);

}  // namespace rrm
