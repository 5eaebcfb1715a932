#include "barygen/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace barygen {

namespace {

// splitmix64 finalizer; scrambles raw seeds so that nearby seeds do not
// produce correlated engine states.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

std::uint64_t SeededRng::next_raw() {
  ++draws_;
  return engine_();
}

double SeededRng::uniform() {
  return static_cast<double>(next_raw() >> 11) * 0x1.0p-53;
}

double SeededRng::normal() {
  // u1 in (0, 1] so the log is finite.
  const double u1 = (static_cast<double>(next_raw() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t SeededRng::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("SeededRng::index: n must be >= 1");
  const auto wide = static_cast<unsigned __int128>(next_raw()) *
                    static_cast<unsigned __int128>(n);
  return static_cast<std::size_t>(wide >> 64);
}

SeededRng SeededRng::derive(std::uint64_t stream) const {
  return SeededRng(mix64(seed_ ^ mix64(stream + 0x632be59bd9b4e019ull)));
}

SeededRng SeededRng::derive(std::uint64_t a, std::uint64_t b) const {
  return derive(a).derive(b);
}

}  // namespace barygen
