#pragma once

// Counter-based random numbers. Every path owns the streams addressed by
// (seed, stream id, path index, purpose), so results do not depend on how
// paths are scheduled across threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace zeroavoid {

/// Philox4x32-10 block function.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

enum class Purpose : std::uint32_t { increments = 0, detection = 1, clock = 2 };

/// Sequential draws from one (seed, stream, path, purpose) address.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint32_t stream, std::uint32_t path, Purpose purpose)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream),
        path_(path),
        purpose_(static_cast<std::uint32_t>(purpose)) {}

  std::uint32_t next_u32() {
    if (used_ == 4) refill();
    return buffer_[used_++];
  }

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t a = next_u32() >> 5;
    const std::uint64_t b = next_u32() >> 6;
    return (static_cast<double>((a << 26) | b) + 0.5) * 0x1.0p-53;
  }

  double exponential() { return -std::log(uniform()); }

  /// Standard normal by the Box-Muller transform; the second variate is kept.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

  std::uint64_t blocks_used() const { return block_; }

 private:
  void refill() {
    buffer_ = Philox4x32::block({block_, path_, stream_, purpose_}, key_);
    ++block_;
    used_ = 0;
  }

  Philox4x32::Key key_;
  std::uint32_t stream_;
  std::uint32_t path_;
  std::uint32_t purpose_;
  std::uint32_t block_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Standard strictly stable variate with E exp(i l X) = exp(-|l|^a (1 - i b sgn(l) tan(pi a/2))),
/// alpha != 1, by the Chambers-Mallows-Stuck method.
class StableSampler {
 public:
  StableSampler(double alpha, double beta) : alpha_(alpha) {
    const double t = beta * std::tan(std::numbers::pi * alpha / 2.0);
    shift_ = std::atan(t) / alpha;
    scale_ = std::pow(1.0 + t * t, 1.0 / (2.0 * alpha));
  }

  double operator()(RandomStream& rng) const {
    const double v = std::numbers::pi * (rng.uniform() - 0.5);
    const double w = rng.exponential();
    const double av = alpha_ * (v + shift_);
    return scale_ * std::sin(av) / std::pow(std::cos(v), 1.0 / alpha_) *
           std::pow(std::cos(v - av) / w, (1.0 - alpha_) / alpha_);
  }

 private:
  double alpha_;
  double shift_;
  double scale_;
};

}  // namespace zeroavoid
