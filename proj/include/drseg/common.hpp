#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace drseg {

/// Base class for all library errors. Subclasses identify which contract
/// was violated so callers (and the CLI) can map them to diagnostics.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration value (bad model knobs, tile grid larger than the
/// image, unknown backbone identifier, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A call-site precondition does not hold (shape mismatch, values out of
/// range, non-binary mask, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or codec failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint was produced under different model or preprocessing
/// settings than the ones requested.
class ConfigMismatchError : public Error {
 public:
  using Error::Error;
};

/// Deterministic 64-bit generator with pinned output mappings.
///
/// std::uniform_real_distribution and friends are implementation-defined,
/// which would make manifests and augmented files differ across standard
/// libraries. This wrapper fixes the bit-level mapping from raw engine
/// output to doubles so seeds reproduce byte-identical artifacts anywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  /// splitmix64 step.
  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // Rejection sampling keeps the distribution exact for any n.
    const std::uint64_t limit = n * ((~0ULL) / n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  bool bernoulli(double p) { return next_double() < p; }

  /// Standard normal via Box-Muller (pinned algorithm, no libc variance).
  double next_normal();

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Stable seed derivation for named substreams (per-sample augmentation
/// seeds, per-epoch shuffles). Combines with splitmix-style mixing.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t base, const std::string& stream);

}  // namespace drseg
