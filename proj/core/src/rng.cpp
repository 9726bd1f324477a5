#include "idsr/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "idsr/error.hpp"

namespace idsr {

std::uint64_t Rng::below(std::uint64_t n) {
  require(n > 0, Errc::invalid_argument, "Rng::below needs n > 0");
  // rejection keeps the draw unbiased
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

int Rng::uniform_int(int lo, int hi_inclusive) {
  require(hi_inclusive >= lo, Errc::invalid_argument, "empty integer range");
  return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi_inclusive - lo) + 1));
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  require(!is.fail(), Errc::corrupt_data, "unreadable RNG state");
}

}  // namespace idsr
