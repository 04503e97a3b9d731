#include "milcheck/randgen.hpp"

#include <cmath>
#include <limits>

#include "milcheck/errors.hpp"

namespace milcheck {

namespace {
__extension__ typedef unsigned __int128 u128;
}  // namespace

SeedStream::SeedStream(std::uint64_t root_seed, std::uint64_t stream_id) noexcept
    : root_seed_(root_seed),
      stream_id_(stream_id),
      key_(mix64(root_seed ^ mix64(stream_id + golden_gamma))) {}

std::uint64_t SeedStream::next_u64() noexcept {
  ++counter_;
  return mix64(key_ + counter_ * golden_gamma);
}

double SeedStream::next_unit() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::int64_t SeedStream::next_uniform_int(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) {
    throw ArgumentError("next_uniform_int: lo > hi");
  }
  const std::uint64_t span =
      static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo);
  if (span == std::numeric_limits<std::uint64_t>::max()) {
    return static_cast<std::int64_t>(next_u64());
  }
  const std::uint64_t range = span + 1;
  // Lemire's multiply-shift with rejection of the biased low zone.
  u128 m =
      static_cast<u128>(next_u64()) * static_cast<u128>(range);
  auto low = static_cast<std::uint64_t>(m);
  if (low < range) {
    const std::uint64_t threshold = (0 - range) % range;
    while (low < threshold) {
      m = static_cast<u128>(next_u64()) * static_cast<u128>(range);
      low = static_cast<std::uint64_t>(m);
    }
  }
  return lo + static_cast<std::int64_t>(static_cast<std::uint64_t>(m >> 64));
}

Eigen::VectorXd SeedStream::next_gaussian_vector(double mean, double variance,
                                                 int dim) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw ArgumentError("next_gaussian_vector: variance must be positive");
  }
  if (dim < 1) {
    throw ArgumentError("next_gaussian_vector: dim must be >= 1");
  }
  const double sd = std::sqrt(variance);
  Eigen::VectorXd out(dim);
  for (int i = 0; i < dim; i += 2) {
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
      u = 2.0 * next_unit() - 1.0;
      v = 2.0 * next_unit() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    out[i] = mean + sd * u * f;
    if (i + 1 < dim) {
      out[i + 1] = mean + sd * v * f;
    }
  }
  return out;
}

}  // namespace milcheck
