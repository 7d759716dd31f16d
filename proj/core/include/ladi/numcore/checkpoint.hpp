#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ladi/numcore/optim.hpp"
#include "ladi/numcore/params.hpp"

namespace ladi::numcore {

// Binary container shared by checkpoints and trajectory dumps:
//   8-byte magic | u32 version | u64 header length | header (JSON text)
//   | u64 payload count | payload as little-endian IEEE-754 float64.
struct Container {
  std::string magic;  // exactly 8 characters
  nlohmann::json header;
  std::vector<double> payload;
};

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path,
                         const std::string& expected_magic);

std::string encode_container(const Container& c);
Container decode_container(const std::string& bytes,
                           const std::string& expected_magic);

inline constexpr const char* kCheckpointMagic = "LADICKPT";

struct CheckpointEntry {
  std::string name;
  nlohmann::json meta;  // model shape description (MLP widths etc.)
  ParamVector params;
  AdamState adam;

  bool operator==(const CheckpointEntry&) const = default;
};

struct Checkpoint {
  std::uint64_t seed = 0;
  nlohmann::json info;  // free-form run metadata
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry& entry(const std::string& name) const;
  bool has(const std::string& name) const;

  bool operator==(const Checkpoint&) const = default;
};

Container to_container(const Checkpoint& ckpt);
Checkpoint from_container(const Container& c);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Header only, for inspection tools.
nlohmann::json read_checkpoint_header(const std::filesystem::path& path);

}  // namespace ladi::numcore
