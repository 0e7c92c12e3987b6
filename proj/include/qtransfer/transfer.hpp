#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qtransfer/agent.hpp"
#include "qtransfer/qnetwork.hpp"
#include "qtransfer/tensor.hpp"

namespace qtransfer {

// Checkpoint file layout, all integers little-endian:
//
//   "DQNC"            4 bytes magic
//   version           u32 (currently 1)
//   env_name          u32 byte length + UTF-8 bytes
//   action_count      u32
//   global_step       u64
//   config_hash       u64
//   entry_count       u32
//   entry_count times:
//     name            u32 byte length + UTF-8 bytes
//     rank            u32
//     dims            rank x u32
//     data            product(dims) x f32 (IEEE 754, little-endian)
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMetadata {
  std::string env_name;
  std::uint32_t action_count = 0;
  std::uint64_t global_step = 0;
  std::uint64_t config_hash = 0;

  bool operator==(const CheckpointMetadata&) const = default;
};

struct NamedTensor {
  std::string name;
  Tensor value;

  bool operator==(const NamedTensor&) const = default;
};

struct Checkpoint {
  CheckpointMetadata metadata;
  std::vector<NamedTensor> entries;

  // Throws ConfigError when absent.
  const Tensor& get(std::string_view name) const;
  bool has(std::string_view name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const QNetwork& net,
                                            const CheckpointMetadata& metadata);
// Throws CheckpointError (with the failing byte offset) on bad magic,
// unsupported version, truncation or trailing bytes.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

// Writes to a temporary sibling and renames, so readers never observe a
// half-written file. Throws IoError.
void save_checkpoint(const QNetwork& net, const std::filesystem::path& path,
                     const CheckpointMetadata& metadata);
// Throws IoError when the file cannot be read, CheckpointError when it is
// malformed.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// FNV-1a over the file bytes.
std::uint64_t file_hash(const std::filesystem::path& path);

// Reconstructs the network described by the checkpoint's shapes. Encoders
// follow the standard kernel/stride pattern (8/4, 4/2, 3/1) on 84x84 input;
// a checkpoint without conv entries yields a head-only network. Throws
// ConfigError when names or shapes are not a valid parameter set.
QNetwork network_from_checkpoint(const Checkpoint& checkpoint);

// Adapts the output layer to `new_actions` rows: shared rows are copied,
// surplus rows dropped, missing rows drawn uniformly from +-1/sqrt(fan_in)
// with an Rng seeded by `seed` (biases zero).
std::pair<Tensor, Tensor> resize_output_layer(const Tensor& weights,
                                              const Tensor& bias,
                                              std::size_t new_actions,
                                              std::uint64_t seed);

enum class TransferMode {
  kWithinFrozenNewHead,     // encoder frozen, head re-initialized
  kCrossFrozenHeadInit,     // encoder frozen, head copied, output resized
  kCrossFrozenHeadScratch,  // encoder frozen, head re-initialized
  kEndToEnd,                // everything copied and trainable
};

// Accepts the upper-case names (WITHIN_FROZEN_NEW_HEAD, ...). Throws
// ConfigError otherwise.
TransferMode parse_transfer_mode(std::string_view text);
std::string to_string(TransferMode mode);

// Assembles a policy network for `target` from the checkpoint:
//
//   mode                        encoder            head1        head2
//   WITHIN_FROZEN_NEW_HEAD      copied, frozen     fresh        fresh
//   CROSS_FROZEN_HEAD_INIT      copied, frozen     copied       copied+resized
//   CROSS_FROZEN_HEAD_SCRATCH   copied, frozen     fresh        fresh
//   END_TO_END                  copied             copied       copied+resized
//
// "fresh" parameters equal those of QNetwork::initialized(target, seed);
// resized rows come from resize_output_layer(..., seed).
//
// Throws ConfigError when encoder or hidden shapes differ from `target`, or
// when WITHIN_FROZEN_NEW_HEAD is asked to change the action count.
QNetwork build_transfer_network(const Checkpoint& checkpoint,
                                const QNetworkSpec& target, TransferMode mode,
                                std::uint64_t seed);

// build_transfer_network wrapped in a fresh agent (target net = copy,
// optimizer state starts empty).
DqnAgent build_transfer_agent(const Checkpoint& checkpoint,
                              const QNetworkSpec& target, TransferMode mode,
                              std::uint64_t seed, const AgentConfig& config,
                              const PreprocessConfig& preprocess = {});

}  // namespace qtransfer
