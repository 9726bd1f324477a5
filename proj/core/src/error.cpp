#include "idsr/error.hpp"

namespace idsr {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::missing_file: return "missing file";
    case Errc::unsupported_format: return "unsupported format";
    case Errc::corrupt_data: return "corrupt data";
    case Errc::bad_magic: return "bad magic";
    case Errc::version_mismatch: return "version mismatch";
    case Errc::truncated: return "truncated file";
    case Errc::rank_deficient: return "rank-deficient basis";
    case Errc::numeric_failure: return "numeric failure";
    case Errc::io_failure: return "i/o failure";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace idsr
