#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace idsr {

enum class Errc {
  invalid_argument,
  dimension_mismatch,
  shape_mismatch,
  missing_file,
  unsupported_format,
  corrupt_data,
  bad_magic,
  version_mismatch,
  truncated,
  rank_deficient,
  numeric_failure,
  io_failure,
};

std::string_view to_string(Errc code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI) can branch on the category instead of the text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

inline void require(bool condition, Errc code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace idsr
