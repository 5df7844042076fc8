#include "thermodepth/common.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace thermodepth {

ErrorCategory category_of(Errc code) {
  switch (code) {
    case Errc::kConfig:
    case Errc::kConfigHashMismatch:
    case Errc::kCensusMismatch:
      return ErrorCategory::kConfig;
    case Errc::kMissingIndex:
    case Errc::kMissingFile:
    case Errc::kShapeMismatch:
    case Errc::kNonMonotoneTimestamps:
    case Errc::kMalformedData:
    case Errc::kContentHashMismatch:
    case Errc::kMissingTensor:
    case Errc::kUnexpectedTensor:
    case Errc::kTensorShapeMismatch:
    case Errc::kIo:
      return ErrorCategory::kData;
    case Errc::kNonFiniteState:
    case Errc::kNonFiniteLoss:
    case Errc::kDegenerateReservoir:
      return ErrorCategory::kNumerical;
    default:
      return ErrorCategory::kUsage;
  }
}

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kInvalidArgument: return "invalid_argument";
    case Errc::kDoubleNormalization: return "double_normalization";
    case Errc::kZeroSizeFrame: return "zero_size_frame";
    case Errc::kNormalizedInput: return "normalized_input";
    case Errc::kReceptiveField: return "receptive_field";
    case Errc::kIndivisibleSize: return "indivisible_size";
    case Errc::kSizeMismatch: return "size_mismatch";
    case Errc::kNonFiniteState: return "non_finite_state";
    case Errc::kDegenerateReservoir: return "degenerate_reservoir";
    case Errc::kNonFiniteLoss: return "non_finite_loss";
    case Errc::kMissingIndex: return "missing_index";
    case Errc::kMissingFile: return "missing_file";
    case Errc::kShapeMismatch: return "shape_mismatch";
    case Errc::kNonMonotoneTimestamps: return "non_monotone_timestamps";
    case Errc::kMalformedData: return "malformed_data";
    case Errc::kContentHashMismatch: return "content_hash_mismatch";
    case Errc::kConfigHashMismatch: return "config_hash_mismatch";
    case Errc::kMissingTensor: return "missing_tensor";
    case Errc::kUnexpectedTensor: return "unexpected_tensor";
    case Errc::kTensorShapeMismatch: return "tensor_shape_mismatch";
    case Errc::kCensusMismatch: return "census_mismatch";
    case Errc::kConfig: return "config";
    case Errc::kIo: return "io";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  return fnv1a64(bytes.data(), bytes.size(), seed);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Rng::Rng(std::uint64_t seed, std::string_view stream)
    : Rng(splitmix64(seed ^ fnv1a64(stream))) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo + 1);
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return lo + static_cast<int>(r % span);
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double mag = std::sqrt(-2.0 * std::log(u1));
  spare_ = mag * std::sin(2.0 * std::numbers::pi * u2);
  have_spare_ = true;
  return mag * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::substream(std::string_view name) const { return Rng(seed_, name); }

}  // namespace thermodepth
