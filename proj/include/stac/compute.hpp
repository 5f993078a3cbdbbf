#pragma once

// Digit-level computations carried out on top of the air sum: the weighted
// sum reference, network-coded recovery and pseudo-coefficient extraction.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stac/error.hpp"
#include "stac/phy.hpp"

namespace stac {

/// Field size parameter: digits live in [0, 2^q).
class FieldSpec {
 public:
  explicit FieldSpec(int q) : q_(q) {
    if (q < 1 || q >= kMaxExactBits) throw ArgumentError("field bit width q must be in [1, 61]");
  }
  int q() const noexcept { return q_; }
  std::int64_t modulus() const noexcept { return std::int64_t{1} << q_; }

 private:
  int q_;
};

/// sum_i w_i s_i computed directly. Reference for every physical-layer path.
inline std::int64_t weighted_sum_oracle(std::span<const std::int64_t> digits, const WeightAssignment& w) {
  if (digits.size() != w.size()) throw ArgumentError("weighted_sum_oracle: length mismatch");
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (digits[i] < 0) throw ArgumentError("digits must be nonnegative");
    std::int64_t term = 0;
    if (__builtin_mul_overflow(w[i], digits[i], &term) || __builtin_add_overflow(sum, term, &sum) ||
        sum >= (std::int64_t{1} << kMaxExactBits)) {
      throw CapacityError("weighted sum exceeds the exact-integer range");
    }
  }
  return sum;
}

/// (sum_i w_i s_i) mod 2^q.
inline std::int64_t network_coded_recovery(std::span<const std::int64_t> digits, const WeightAssignment& w,
                                           const FieldSpec& field) {
  if (digits.size() != w.size()) throw ArgumentError("network_coded_recovery: length mismatch");
  // Unsigned wraparound is reduction mod 2^64, a multiple of 2^q, so the
  // residue of the full sum is preserved without an exact-range limit.
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (digits[i] < 0 || digits[i] >= field.modulus()) {
      throw ArgumentError("digit " + std::to_string(digits[i]) + " outside the field [0, 2^" +
                          std::to_string(field.q()) + ")");
    }
    sum += static_cast<std::uint64_t>(w[i]) * static_cast<std::uint64_t>(digits[i]);
  }
  return static_cast<std::int64_t>(sum % static_cast<std::uint64_t>(field.modulus()));
}

/// w_i = 2^{q(i-1)}, i = 1..K.
inline WeightAssignment pseudo_coefficients(std::size_t k, int q) {
  if (k == 0) throw ArgumentError("pseudo_coefficients: K must be positive");
  if (q < 1) throw ArgumentError("pseudo_coefficients: q must be positive");
  // Encoded sums reach 2^{qK} - 1.
  if (static_cast<long long>(q) * static_cast<long long>(k) >= kMaxExactBits) {
    throw CapacityError("pseudo coefficients 2^{q(K-1)} with q=" + std::to_string(q) + ", K=" +
                        std::to_string(k) + " exceed the exact-integer range");
  }
  std::vector<std::int64_t> w(k);
  for (std::size_t i = 0; i < k; ++i) w[i] = std::int64_t{1} << (static_cast<std::int64_t>(q) * static_cast<std::int64_t>(i));
  return WeightAssignment(std::move(w));
}

/// Splits s0 = sum_i 2^{q(i-1)} s_i back into (s_1, ..., s_K).
inline std::vector<std::int64_t> extract_source_digits(std::int64_t s0, std::size_t k, int q) {
  if (k == 0 || q < 1) throw ArgumentError("extract_source_digits: K and q must be positive");
  if (static_cast<long long>(q) * static_cast<long long>(k) >= kMaxExactBits) {
    throw CapacityError("extract_source_digits: qK exceeds the exact-integer range");
  }
  const std::int64_t modulus = std::int64_t{1} << q;
  if (s0 < 0 || s0 >= (std::int64_t{1} << (static_cast<std::int64_t>(q) * static_cast<std::int64_t>(k)))) {
    throw ArgumentError("extract_source_digits: s0 = " + std::to_string(s0) + " outside [0, 2^{qK})");
  }
  std::vector<std::int64_t> digits;
  digits.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::int64_t digit = s0 % modulus;
    digits.push_back(digit);
    s0 = (s0 - digit) / modulus;
  }
  return digits;
}

}  // namespace stac
