#pragma once

#include <stdexcept>
#include <string>

namespace tracklink {

/// Malformed on-disk data: bad label line, bad blob header, bad JSONL.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tracklink
