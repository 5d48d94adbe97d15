#pragma once

// Versioned little-endian checkpoint of named parameter tensors with a JSON
// config header. Layout in docs/formats.md.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmt/mae.hpp"
#include "mmt/mbt.hpp"
#include "mmt/params.hpp"

namespace mmt {

enum class CheckpointStage : std::uint8_t { Pretrain = 0, Finetune = 1 };
const char* stage_name(CheckpointStage s);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  CheckpointStage stage = CheckpointStage::Finetune;
  TokenizerConfig tokenizer;
  ModelConfig model;
  std::optional<MaeConfig> mae;  // pretrain only
  ParameterSet encoder;
  ParameterSet decoder;  // empty unless stage == Pretrain
  nlohmann::json meta = nlohmann::json::object();  // model kind, seed, training settings

  MbtModel to_model() const { return MbtModel(tokenizer, model, encoder); }
};

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(std::vector<unsigned char> bytes, const std::string& origin = "");

// Both return the git-style content hash of the written file.
std::string save_finetune_checkpoint(const MbtModel& model, const std::filesystem::path& path,
                                     const nlohmann::json& meta = nlohmann::json::object());
std::string save_pretrain_checkpoint(const MbtModel& encoder, const ParameterSet& decoder, const MaeConfig& mae,
                                     const std::filesystem::path& path,
                                     const nlohmann::json& meta = nlohmann::json::object());
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
// FileError when missing, CheckpointError when malformed or of another version.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// SHA-1 of "blob <size>\0" + bytes, as `git hash-object` prints it.
std::string git_blob_hash(std::span<const unsigned char> bytes);
std::string file_content_hash(const std::filesystem::path& path);

}  // namespace mmt
