#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace snncraft {

// Error taxonomy shared by every module. The CLI maps these onto process
// exit codes (config 2, dependency 3, data format 4, everything else 1).

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DependencyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed file content; carries the byte offset where parsing gave up.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& msg, std::uint64_t byte_offset)
      : std::runtime_error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}

  std::uint64_t byte_offset() const { return byte_offset_; }

 private:
  std::uint64_t byte_offset_;
};

}  // namespace snncraft
