#pragma once

// Physical layer of simultaneous transmission and air computation: bit
// decomposition, BPSK, pre-equalized superposition over an AWGN channel,
// nearest-point PAM detection and weighted-sum demodulation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stac/error.hpp"

namespace stac {

/// Every exact sum handled by the library stays strictly below 2^62.
inline constexpr int kMaxExactBits = 62;

/// Largest fan-in for which the receive constellation is enumerated.
inline constexpr std::size_t kMaxConstellationNodes = 24;

/// A nonnegative source digit of a fixed bit width.
class Digit {
 public:
  Digit(std::int64_t value, int width) : value_(value), width_(width) {
    if (width < 1 || width >= kMaxExactBits) {
      throw ArgumentError("digit width must be in [1, 61], got " + std::to_string(width));
    }
    if (value < 0 || value >= (std::int64_t{1} << width)) {
      throw ArgumentError("digit value " + std::to_string(value) + " does not fit in " +
                          std::to_string(width) + " bits");
    }
  }

  std::int64_t value() const noexcept { return value_; }
  int width() const noexcept { return width_; }

  friend bool operator==(const Digit&, const Digit&) = default;

 private:
  std::int64_t value_;
  int width_;
};

/// LSB-first binary decomposition, exactly `width` entries.
inline std::vector<int> digit_to_bits(const Digit& d) {
  std::vector<int> bits(static_cast<std::size_t>(d.width()));
  for (int l = 0; l < d.width(); ++l) bits[static_cast<std::size_t>(l)] = static_cast<int>((d.value() >> l) & 1);
  return bits;
}

/// bit 0 -> +1, bit 1 -> -1.
constexpr int bpsk_map(int bit) noexcept { return 1 - 2 * bit; }
constexpr int bpsk_unmap(int symbol) noexcept { return (1 - symbol) / 2; }

/// Positive integer combining weights together with the permutation that
/// visits them in nondecreasing order.
class WeightAssignment {
 public:
  WeightAssignment() = default;

  explicit WeightAssignment(std::vector<std::int64_t> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) throw ArgumentError("weight assignment needs at least one node");
    std::int64_t total = 0;
    for (std::int64_t w : weights_) {
      if (w < 1) throw ArgumentError("weights must be positive integers, got " + std::to_string(w));
      if (__builtin_add_overflow(total, w, &total) || total >= (std::int64_t{1} << kMaxExactBits)) {
        throw CapacityError("sum of weights exceeds the exact-integer range");
      }
    }
    total_ = total;
    order_.resize(weights_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [this](std::size_t a, std::size_t b) { return weights_[a] < weights_[b]; });
  }

  static WeightAssignment equal(std::size_t k) {
    return WeightAssignment(std::vector<std::int64_t>(k, 1));
  }

  std::size_t size() const noexcept { return weights_.size(); }
  std::int64_t operator[](std::size_t i) const { return weights_[i]; }
  std::span<const std::int64_t> weights() const noexcept { return weights_; }
  /// order()[j] is the node holding the j-th smallest weight.
  std::span<const std::size_t> order() const noexcept { return order_; }
  std::int64_t total() const noexcept { return total_; }

  friend bool operator==(const WeightAssignment& a, const WeightAssignment& b) {
    return a.weights_ == b.weights_;
  }

 private:
  std::vector<std::int64_t> weights_;
  std::vector<std::size_t> order_;
  std::int64_t total_ = 0;
};

/// Throws CapacityError unless (sum of weights) * 2^bits < 2^62.
inline void check_overflow(const WeightAssignment& w, int bits) {
  if (bits < 0 || bits >= kMaxExactBits) throw CapacityError("bit width out of range");
  std::int64_t scaled = 0;
  if (__builtin_mul_overflow(w.total(), std::int64_t{1} << bits, &scaled) ||
      scaled >= (std::int64_t{1} << kMaxExactBits)) {
    throw CapacityError("weighted sum of " + std::to_string(bits) +
                        "-bit digits exceeds the exact-integer range");
  }
}

/// One row of the connection information: real amplitude gain, carrier
/// phase rotation (radians) and propagation delay (symbol durations).
struct ChannelState {
  double gain = 1.0;
  double phase = 0.0;
  double delay = 0.0;

  friend bool operator==(const ChannelState&, const ChannelState&) = default;
};

struct TransmitParams {
  double power = 0.0;
  double pre_phase = 0.0;
  double tx_time = 0.0;

  friend bool operator==(const TransmitParams&, const TransmitParams&) = default;
};

/// Residual impairments. Only noise_std is nonzero by default.
struct ImpairmentModel {
  double phase_jitter_std = 0.0;
  double timing_offset_std = 0.0;
  double noise_std = 0.0;

  void validate() const {
    if (!(phase_jitter_std >= 0.0) || !(timing_offset_std >= 0.0) || !(noise_std >= 0.0)) {
      throw ArgumentError("impairment standard deviations must be nonnegative");
    }
  }
};

/// Pre-equalizing transmit parameters: power (w/h)^2, phase equal to the
/// channel phase, transmission advanced by the propagation delay.
inline TransmitParams pre_equalize(const ChannelState& ch, std::int64_t weight, double reference_time) {
  if (!(ch.gain > 0.0)) throw ArgumentError("channel gain must be positive");
  const double amplitude = static_cast<double>(weight) / ch.gain;
  return TransmitParams{amplitude * amplitude, ch.phase, reference_time - ch.delay};
}

namespace detail {

template <class Urbg>
double gaussian(Urbg& rng, double stddev) {
  if (stddev == 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, stddev)(rng);
}

}  // namespace detail

/// Linear amplitude loss for a residual timing error, in symbol durations.
inline double timing_loss(double offset) noexcept { return std::max(0.0, 1.0 - std::abs(offset)); }

/// Received complex baseband sample of K simultaneous transmissions.
///
/// y = sum_i a(dt_i) h_i sqrt(P_i) exp(j(phase_i - pre_phase_i + dphase_i)) d_i + n
///
/// dphase_i and dt_i are drawn from `impair`. When `reference_time` is
/// given, dt_i also includes the deterministic arrival misalignment
/// tx_time_i + delay_i - reference_time. Noise is complex with per-dimension
/// standard deviation impair.noise_std. Random draws happen in a fixed order
/// (per node: phase, timing; then real noise, imaginary noise) and are
/// skipped for zero standard deviations.
template <class Urbg>
std::complex<double> superpose_passband(std::span<const int> symbols, std::span<const ChannelState> channels,
                                        std::span<const TransmitParams> params, const ImpairmentModel& impair,
                                        Urbg& rng, std::optional<double> reference_time = std::nullopt) {
  if (symbols.size() != channels.size() || symbols.size() != params.size()) {
    throw ArgumentError("superpose_passband: symbols, channels and params must have equal length");
  }
  impair.validate();
  double re = 0.0;
  double im = 0.0;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (!(params[i].power >= 0.0)) throw ArgumentError("transmit power must be nonnegative");
    const double dphase = detail::gaussian(rng, impair.phase_jitter_std);
    double dt = detail::gaussian(rng, impair.timing_offset_std);
    if (reference_time) dt += params[i].tx_time + channels[i].delay - *reference_time;
    const double amplitude = timing_loss(dt) * channels[i].gain * std::sqrt(params[i].power);
    const double rotation = channels[i].phase - params[i].pre_phase + dphase;
    const double s = static_cast<double>(symbols[i]);
    re += amplitude * std::cos(rotation) * s;
    im += amplitude * std::sin(rotation) * s;
  }
  re += detail::gaussian(rng, impair.noise_std);
  im += detail::gaussian(rng, impair.noise_std);
  return {re, im};
}

/// Sorted receive alphabet sum_i w_i d_i, d_i in {-1,+1}.
struct Constellation {
  std::vector<std::int64_t> points;
  /// Number of sign vectors producing each point; sums to 2^K.
  std::vector<std::uint64_t> multiplicity;
  std::size_t nodes = 0;

  std::vector<std::int64_t> gaps() const {
    std::vector<std::int64_t> g;
    for (std::size_t i = 1; i < points.size(); ++i) g.push_back(points[i] - points[i - 1]);
    return g;
  }

  std::size_t size() const noexcept { return points.size(); }
};

inline Constellation build_constellation(const WeightAssignment& w) {
  if (w.size() == 0) throw ArgumentError("constellation needs at least one node");
  if (w.size() > kMaxConstellationNodes) {
    throw CapacityError("constellation enumeration is limited to " + std::to_string(kMaxConstellationNodes) +
                        " nodes, got " + std::to_string(w.size()));
  }
  // Adding one node at a time convolves the point distribution with {-w, +w}.
  std::map<std::int64_t, std::uint64_t> counts{{0, 1}};
  for (std::int64_t weight : w.weights()) {
    std::map<std::int64_t, std::uint64_t> next;
    for (const auto& [point, count] : counts) {
      next[point - weight] += count;
      next[point + weight] += count;
    }
    counts = std::move(next);
  }
  Constellation c;
  c.nodes = w.size();
  c.points.reserve(counts.size());
  c.multiplicity.reserve(counts.size());
  for (const auto& [point, count] : counts) {
    c.points.push_back(point);
    c.multiplicity.push_back(count);
  }
  return c;
}

/// Nearest constellation point to y; exact ties go to the smaller point.
inline std::int64_t detect_nearest(double y, const Constellation& c) {
  if (c.points.empty()) throw ArgumentError("detect_nearest: empty constellation");
  const auto& p = c.points;
  auto it = std::lower_bound(p.begin(), p.end(), y,
                             [](std::int64_t point, double v) { return static_cast<double>(point) < v; });
  if (it == p.begin()) return p.front();
  if (it == p.end()) return p.back();
  const std::int64_t hi = *it;
  const std::int64_t lo = *std::prev(it);
  return (y - static_cast<double>(lo) <= static_cast<double>(hi) - y) ? lo : hi;
}

/// Maps a detected point back to sum_i w_i s_i(l) = (sum_i w_i - point) / 2.
inline std::int64_t demod_bit_sum(std::int64_t point, const WeightAssignment& w) {
  const std::int64_t diff = w.total() - point;
  if (diff % 2 != 0 || diff < 0 || diff > 2 * w.total()) {
    throw DetectionError("point " + std::to_string(point) + " is not reachable with total weight " +
                         std::to_string(w.total()));
  }
  return diff / 2;
}

/// sum_l 2^l bit_sums[l].
inline std::int64_t reconstruct_weighted_digit(std::span<const std::int64_t> bit_sums) {
  if (bit_sums.size() >= static_cast<std::size_t>(kMaxExactBits)) throw CapacityError("too many bit slots");
  std::int64_t value = 0;
  for (std::size_t l = 0; l < bit_sums.size(); ++l) {
    std::int64_t term = 0;
    if (__builtin_mul_overflow(bit_sums[l], std::int64_t{1} << l, &term) ||
        __builtin_add_overflow(value, term, &value)) {
      throw CapacityError("reconstructed digit exceeds the exact-integer range");
    }
  }
  return value;
}

/// Latest arrival delay; the default common reception instant.
inline double default_reference_time(std::span<const ChannelState> channels) {
  double t0 = 0.0;
  for (const auto& ch : channels) t0 = std::max(t0, ch.delay);
  return t0;
}

/// Runs L symbol slots end to end (modulate, superpose, detect, demodulate)
/// and returns the receiver's estimate of sum_i w_i s_i.
template <class Urbg>
std::int64_t stac_round_trip(std::span<const Digit> digits, const WeightAssignment& w,
                             std::span<const ChannelState> channels, const ImpairmentModel& impair, Urbg& rng) {
  const std::size_t k = digits.size();
  if (k == 0 || w.size() != k || channels.size() != k) {
    throw ArgumentError("stac_round_trip: digits, weights and channels must have equal nonzero length");
  }
  const int width = digits.front().width();
  for (const auto& d : digits) {
    if (d.width() != width) throw ArgumentError("stac_round_trip: all digits must share one bit width");
  }
  check_overflow(w, width);

  const double t0 = default_reference_time(channels);
  std::vector<TransmitParams> params;
  params.reserve(k);
  for (std::size_t i = 0; i < k; ++i) params.push_back(pre_equalize(channels[i], w[i], t0));

  const Constellation constellation = build_constellation(w);
  std::vector<std::vector<int>> bits;
  bits.reserve(k);
  for (const auto& d : digits) bits.push_back(digit_to_bits(d));

  std::vector<std::int64_t> bit_sums(static_cast<std::size_t>(width));
  std::vector<int> symbols(k);
  for (std::size_t l = 0; l < bit_sums.size(); ++l) {
    for (std::size_t i = 0; i < k; ++i) symbols[i] = bpsk_map(bits[i][l]);
    const auto y = superpose_passband(std::span<const int>(symbols), channels, std::span<const TransmitParams>(params),
                                      impair, rng);
    bit_sums[l] = demod_bit_sum(detect_nearest(y.real(), constellation), w);
  }
  return reconstruct_weighted_digit(bit_sums);
}

}  // namespace stac
