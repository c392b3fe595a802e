#pragma once

#include <stdexcept>
#include <string>

namespace segrefine {

/// A dataset or image file exists but its content violates the expected format.
class DataFormatError : public std::runtime_error {
 public:
  DataFormatError(const std::string& item, const std::string& reason)
      : std::runtime_error(item + ": " + reason), item_(item) {}
  const std::string& item() const { return item_; }

 private:
  std::string item_;
};

/// A file could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace segrefine
