#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qtransfer {

// Invalid configuration, shape mismatch or incompatible artifacts.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failures. Exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf detected in a tensor, loss or gradient. Exit code 4.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Environment contract violations (bad action, step after done).
class EnvError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Replay buffer holds fewer transitions than the requested batch.
class InsufficientSamples : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed checkpoint file. `offset` is the byte position where decoding
// failed.
class CheckpointError : public ConfigError {
 public:
  CheckpointError(const std::string& what, std::uint64_t offset)
      : ConfigError(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace qtransfer
