#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace thermodepth {

/// Error codes. Each maps onto one of the coarse categories the CLI turns
/// into exit codes.
enum class Errc {
  kInvalidArgument,
  kDoubleNormalization,
  kZeroSizeFrame,
  kNormalizedInput,
  kReceptiveField,
  kIndivisibleSize,
  kSizeMismatch,
  kNonFiniteState,
  kDegenerateReservoir,
  kNonFiniteLoss,
  // dataset layout
  kMissingIndex,
  kMissingFile,
  kShapeMismatch,
  kNonMonotoneTimestamps,
  kMalformedData,
  // checkpoint container
  kContentHashMismatch,
  kConfigHashMismatch,
  kMissingTensor,
  kUnexpectedTensor,
  kTensorShapeMismatch,
  kCensusMismatch,
  // run configuration
  kConfig,
  kIo,
};

enum class ErrorCategory { kConfig, kData, kNumerical, kUsage };

ErrorCategory category_of(Errc code);
std::string_view errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  Errc code_;
};

/// Dense row-major 2-D grid, x fastest.
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& operator()(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool same_shape(int w, int h) const { return width == w && height == h; }
  template <typename U>
  bool same_shape(const Grid<U>& o) const {
    return width == o.width && height == o.height;
  }

  bool operator==(const Grid&) const = default;
};

using Image8 = Grid<std::uint8_t>;

struct Rgb8 {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb8&) const = default;
};
using ImageRgb = Grid<Rgb8>;

// 64-bit FNV-1a. Stable across platforms, used for config and content hashes.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

std::uint64_t splitmix64(std::uint64_t x);

/// Seeded generator with named sub-streams. Built on mt19937_64 whose output
/// sequence is fixed by the standard; distributions are implemented here so
/// results do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  Rng(std::uint64_t seed, std::string_view stream);

  std::uint64_t next_u64();
  double uniform();                    // [0, 1)
  double uniform(double lo, double hi);
  int uniform_int(int lo, int hi);     // inclusive
  double normal();
  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  Rng substream(std::string_view name) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace thermodepth
