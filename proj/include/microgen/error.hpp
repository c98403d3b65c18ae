#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace microgen {

// Thrown for contract violations on inputs (bad phase id, shape mismatch, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when a file does not parse. Carries the offending path and byte offset.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::string path, std::uint64_t offset, const std::string& what)
      : std::runtime_error(path + " @ byte " + std::to_string(offset) + ": " + what),
        path_(std::move(path)),
        offset_(offset) {}

  const std::string& path() const noexcept { return path_; }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::string path_;
  std::uint64_t offset_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace microgen
