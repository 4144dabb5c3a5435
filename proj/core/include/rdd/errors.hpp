#pragma once

#include <stdexcept>
#include <string>

namespace rdd {

/// Precondition violated by the caller (bad arguments, inconsistent config).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A rollback was requested for a window that already starts at the prompt.
class RollbackAtOrigin : public UsageError {
 public:
  using UsageError::UsageError;
};

/// The cache has no entry for a block the denoiser needs as prefix context.
class CacheMiss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A decode exceeded its step cap. Indicates a broken invariant.
class Runaway : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File or directory could not be read or written.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace rdd
