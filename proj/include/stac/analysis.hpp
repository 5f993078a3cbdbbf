#pragma once

// Symbol error rates, transmit energy and the grouping tradeoff.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "stac/error.hpp"
#include "stac/phy.hpp"

namespace stac {

namespace detail {

inline void check_sigma(double sigma) {
  if (!(sigma >= 0.0) || std::isinf(sigma)) throw ArgumentError("noise standard deviation must be finite and >= 0");
}

}  // namespace detail

/// Error probability of one side of a decision region whose neighbour sits
/// `gap` away: 1/2 erfc(gap / (2 sqrt(2) sigma)).
inline double side_error(double gap, double sigma) {
  detail::check_sigma(sigma);
  return 0.5 * std::erfc(gap / (2.0 * std::sqrt(2.0) * sigma));
}

/// Point-to-point BPSK error probability at unit received amplitude.
inline double bpsk_error(double sigma) { return side_error(2.0, sigma); }

/// (1 - 2^-K) erfc(1 / (sqrt(2) sigma)); exact when every adjacent gap is 2.
inline double ser_stac_bound(std::size_t k, double sigma) {
  if (k == 0) throw ArgumentError("ser_stac_bound: K must be positive");
  detail::check_sigma(sigma);
  return (1.0 - std::ldexp(1.0, -static_cast<int>(std::min<std::size_t>(k, 2000)))) *
         std::erfc(1.0 / (std::sqrt(2.0) * sigma));
}

/// Nearest-point SER of an arbitrary constellation with equiprobable sign
/// vectors: every gap g contributes (m_left + m_right) / 2^K side errors.
inline double ser_stac_exact(const Constellation& c, double sigma) {
  detail::check_sigma(sigma);
  if (c.points.empty()) throw ArgumentError("ser_stac_exact: empty constellation");
  std::map<std::int64_t, std::uint64_t> weight_per_gap;
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    weight_per_gap[c.points[i] - c.points[i - 1]] += c.multiplicity[i - 1] + c.multiplicity[i];
  }
  const double patterns = std::ldexp(1.0, static_cast<int>(c.nodes));
  double ser = 0.0;
  for (const auto& [gap, weight] : weight_per_gap) {
    ser += (static_cast<double>(weight) / patterns) * side_error(static_cast<double>(gap), sigma);
  }
  return ser;
}

/// Largest detection error probability of any single constellation point,
/// counting both neighbours.
inline double worst_point_error(const Constellation& c, double sigma) {
  const auto gaps = c.gaps();
  double worst = 0.0;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    double e = 0.0;
    if (i > 0) e += side_error(static_cast<double>(gaps[i - 1]), sigma);
    if (i < gaps.size()) e += side_error(static_cast<double>(gaps[i]), sigma);
    worst = std::max(worst, e);
  }
  return worst;
}

/// 1/2 - 1/2 (1 - erfc(1 / (sqrt(2) sigma)))^K, evaluated without cancellation.
inline double ser_sep_bound(std::size_t k, double sigma) {
  if (k == 0) throw ArgumentError("ser_sep_bound: K must be positive");
  detail::check_sigma(sigma);
  const double e = std::erfc(1.0 / (std::sqrt(2.0) * sigma));
  return -0.5 * std::expm1(static_cast<double>(k) * std::log1p(-e));
}

/// Largest K accepted by ser_sep_exact.
inline constexpr std::size_t kMaxSepExactNodes = 12;

/// Probability that independently detected BPSK symbols (flip probability
/// bpsk_error(sigma)) change the weighted sum. Node i contributes 0 with
/// probability 1-p and +-w_i with probability p/2 each, independent of the
/// others, so the sum change is a convolution of three-point laws.
inline double ser_sep_exact(const WeightAssignment& w, double sigma) {
  if (w.size() > kMaxSepExactNodes) {
    throw CapacityError("ser_sep_exact is limited to " + std::to_string(kMaxSepExactNodes) + " nodes");
  }
  const double p = bpsk_error(sigma);
  std::map<std::int64_t, double> law{{0, 1.0}};
  for (std::int64_t weight : w.weights()) {
    std::map<std::int64_t, double> next;
    for (const auto& [shift, prob] : law) {
      next[shift] += prob * (1.0 - p);
      next[shift - weight] += prob * 0.5 * p;
      next[shift + weight] += prob * 0.5 * p;
    }
    law = std::move(next);
  }
  double wrong = 0.0;
  for (const auto& [shift, prob] : law) {
    if (shift != 0) wrong += prob;
  }
  return wrong;
}

/// Monte-Carlo symbol error estimate.
struct SerEstimate {
  double value = 0.0;
  std::uint64_t errors = 0;
  std::uint64_t trials = 0;
  /// 1.96 sqrt(value (1 - value) / trials)
  double half_width95 = 0.0;

  static SerEstimate from_counts(std::uint64_t errors, std::uint64_t trials) {
    SerEstimate e;
    e.errors = errors;
    e.trials = trials;
    e.value = trials == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(trials);
    e.half_width95 = trials == 0 ? 0.0 : 1.96 * std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(trials));
    return e;
  }

  /// |value - target| <= widths * half_width95
  bool consistent_with(double target, double widths = 3.0) const {
    return std::abs(value - target) <= widths * half_width95;
  }
};

/// Trials are split into fixed-size chunks, each with its own generator
/// seeded from (seed, chunk index). Results do not depend on `threads`.
inline constexpr std::uint64_t kTrialChunk = 1u << 14;

inline std::mt19937_64 chunk_stream(std::uint64_t seed, std::uint64_t chunk) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chunk), static_cast<std::uint32_t>(chunk >> 32)};
  return std::mt19937_64(seq);
}

/// Runs `count_errors(rng, n)` over every chunk and sums the results.
template <class ChunkFn>
std::uint64_t run_chunked(std::uint64_t trials, std::uint64_t seed, unsigned threads, ChunkFn&& count_errors) {
  const std::uint64_t chunks = (trials + kTrialChunk - 1) / kTrialChunk;
  std::vector<std::uint64_t> per_chunk(chunks, 0);
  auto work = [&](std::uint64_t c) {
    auto rng = chunk_stream(seed, c);
    const std::uint64_t n = std::min(kTrialChunk, trials - c * kTrialChunk);
    per_chunk[c] = count_errors(rng, n);
  };
  threads = std::max(1u, threads);
  if (threads == 1 || chunks <= 1) {
    for (std::uint64_t c = 0; c < chunks; ++c) work(c);
  } else {
    std::atomic<std::uint64_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < std::min<std::uint64_t>(threads, chunks); ++t) {
      pool.emplace_back([&] {
        for (std::uint64_t c = next++; c < chunks; c = next++) work(c);
      });
    }
  }
  return std::accumulate(per_chunk.begin(), per_chunk.end(), std::uint64_t{0});
}

namespace detail {

inline void check_mc_inputs(const WeightAssignment& w, std::span<const ChannelState> channels, std::uint64_t trials) {
  if (trials == 0) throw ArgumentError("Monte-Carlo needs at least one trial");
  if (channels.size() != w.size()) throw ArgumentError("one channel per weighted node is required");
  if (w.size() > 63) throw CapacityError("Monte-Carlo bit draws support at most 63 nodes");
}

}  // namespace detail

/// Empirical SER of the full STAC pipeline: random bits, pre-equalized
/// superposition, nearest-point detection against sum_i w_i d_i.
inline SerEstimate monte_carlo_ser_stac(const WeightAssignment& w, std::span<const ChannelState> channels, double sigma,
                                        std::uint64_t trials, std::uint64_t seed, unsigned threads = 1) {
  detail::check_mc_inputs(w, channels, trials);
  detail::check_sigma(sigma);
  const std::size_t k = w.size();
  const Constellation constellation = build_constellation(w);
  const double t0 = default_reference_time(channels);
  std::vector<TransmitParams> params;
  for (std::size_t i = 0; i < k; ++i) params.push_back(pre_equalize(channels[i], w[i], t0));
  const ImpairmentModel impair{0.0, 0.0, sigma};

  const std::uint64_t errors = run_chunked(trials, seed, threads, [&](std::mt19937_64& rng, std::uint64_t n) {
    std::vector<int> symbols(k);
    std::uint64_t errs = 0;
    for (std::uint64_t t = 0; t < n; ++t) {
      const std::uint64_t bits = rng();
      std::int64_t truth = 0;
      for (std::size_t i = 0; i < k; ++i) {
        symbols[i] = bpsk_map(static_cast<int>((bits >> i) & 1));
        truth += w[i] * symbols[i];
      }
      const auto y = superpose_passband(std::span<const int>(symbols), channels,
                                        std::span<const TransmitParams>(params), impair, rng);
      if (detect_nearest(y.real(), constellation) != truth) ++errs;
    }
    return errs;
  });
  return SerEstimate::from_counts(errors, trials);
}

/// Empirical SER of the separate strategy: each node sends its BPSK symbol
/// alone at power 1/h_i^2, the receiver detects each sign and forms the
/// weighted sum digitally.
inline SerEstimate monte_carlo_ser_sep(const WeightAssignment& w, std::span<const ChannelState> channels, double sigma,
                                       std::uint64_t trials, std::uint64_t seed, unsigned threads = 1) {
  detail::check_mc_inputs(w, channels, trials);
  detail::check_sigma(sigma);
  const std::size_t k = w.size();
  const Constellation bpsk = build_constellation(WeightAssignment::equal(1));
  std::vector<TransmitParams> params;
  for (std::size_t i = 0; i < k; ++i) params.push_back(pre_equalize(channels[i], 1, channels[i].delay));
  const ImpairmentModel impair{0.0, 0.0, sigma};

  const std::uint64_t errors = run_chunked(trials, seed, threads, [&](std::mt19937_64& rng, std::uint64_t n) {
    std::uint64_t errs = 0;
    for (std::uint64_t t = 0; t < n; ++t) {
      const std::uint64_t bits = rng();
      std::int64_t truth = 0;
      std::int64_t detected = 0;
      for (std::size_t i = 0; i < k; ++i) {
        const int symbol = bpsk_map(static_cast<int>((bits >> i) & 1));
        const auto y = superpose_passband(std::span<const int>(&symbol, 1), channels.subspan(i, 1),
                                          std::span<const TransmitParams>(&params[i], 1), impair, rng);
        truth += w[i] * symbol;
        detected += w[i] * detect_nearest(y.real(), bpsk);
      }
      if (detected != truth) ++errs;
    }
    return errs;
  });
  return SerEstimate::from_counts(errors, trials);
}

enum class AllocationOrder {
  /// Largest weight to the strongest channel; minimizes sum (w_i/h_i)^2.
  kMinimizeEnergy,
  /// Largest weight to the weakest channel.
  kLiteral,
};

/// Assigns the pseudo coefficients 2^{q(j-1)} to nodes by channel gain.
/// Equal gains keep node order.
inline WeightAssignment allocate_weights(std::span<const double> gains, int q = 1,
                                         AllocationOrder order = AllocationOrder::kMinimizeEnergy) {
  const std::size_t k = gains.size();
  if (k == 0) throw ArgumentError("allocate_weights: no gains");
  if (q < 1) throw ArgumentError("allocate_weights: q must be positive");
  if (static_cast<long long>(q) * static_cast<long long>(k) >= kMaxExactBits) {
    throw CapacityError("allocate_weights: 2^{q(K-1)} exceeds the exact-integer range");
  }
  for (double h : gains) {
    if (!(h > 0.0) || std::isinf(h)) throw ArgumentError("channel gains must be positive and finite");
  }
  std::vector<std::size_t> rank(k);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  if (order == AllocationOrder::kMinimizeEnergy) {
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return gains[a] < gains[b]; });
  } else {
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return gains[a] > gains[b]; });
  }
  std::vector<std::int64_t> weights(k);
  for (std::size_t j = 0; j < k; ++j) weights[rank[j]] = std::int64_t{1} << (static_cast<std::int64_t>(q) * static_cast<std::int64_t>(j));
  return WeightAssignment(std::move(weights));
}

/// Total STAC transmit energy in unit time: sum_i (w_i / h_i)^2.
inline double energy_stac(std::span<const double> gains, const WeightAssignment& w) {
  if (gains.size() != w.size()) throw ArgumentError("energy_stac: one gain per weight is required");
  double e = 0.0;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    if (!(gains[i] > 0.0)) throw ArgumentError("channel gains must be positive");
    const double a = static_cast<double>(w[i]) / gains[i];
    e += a * a;
  }
  return e;
}

/// Separate-strategy energy at matched bandwidth: every node sends its bit
/// in 1/K of the time at the power that keeps receive gaps at 2,
/// (1/K) sum_i sum_j (2^{q(j-1)} / h_i)^2.
inline double energy_sep(std::span<const double> gains, int q = 1) {
  const std::size_t k = gains.size();
  if (k == 0) throw ArgumentError("energy_sep: no gains");
  if (q < 1 || static_cast<long long>(q) * static_cast<long long>(k) >= kMaxExactBits) {
    throw CapacityError("energy_sep: 2^{q(K-1)} exceeds the exact-integer range");
  }
  double weight_energy = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double w = std::ldexp(1.0, q * static_cast<int>(j));
    weight_energy += w * w;
  }
  double e = 0.0;
  for (double h : gains) {
    if (!(h > 0.0)) throw ArgumentError("channel gains must be positive");
    e += weight_energy / (h * h);
  }
  return e / static_cast<double>(k);
}

struct EnergyReport {
  double e_stac = 0.0;
  double e_sep = 0.0;
  /// e_sep / e_stac
  double ratio = 0.0;
};

inline EnergyReport compare_energy(std::span<const double> gains, int q = 1,
                                   AllocationOrder order = AllocationOrder::kMinimizeEnergy) {
  EnergyReport r;
  r.e_stac = energy_stac(gains, allocate_weights(gains, q, order));
  r.e_sep = energy_sep(gains, q);
  r.ratio = r.e_sep / r.e_stac;
  return r;
}

// ---------------------------------------------------------------------------
// Grouping

/// Largest K accepted by grouping_search (Bell(10) = 115975 partitions).
inline constexpr std::size_t kMaxGroupingNodes = 10;

/// One partition of the nodes into time-multiplexed STAC groups.
struct PartitionEval {
  /// labels[i] is the group of node i; groups are numbered in order of
  /// first appearance.
  std::vector<std::uint8_t> labels;
  /// One slot per group in every bit round.
  std::size_t slots = 0;
  /// Sum of the per-group minimum STAC energies.
  double energy = 0.0;
  std::vector<double> group_ser;
  /// 1 - prod(1 - group_ser): probability that some group errs in a round.
  double ser_any = 0.0;

  std::vector<std::vector<std::size_t>> groups() const {
    std::vector<std::vector<std::size_t>> g(slots);
    for (std::size_t i = 0; i < labels.size(); ++i) g[labels[i]].push_back(i);
    return g;
  }
};

struct GroupingResult {
  std::vector<PartitionEval> partitions;
  /// Indices into `partitions` of the (slots, energy) Pareto frontier,
  /// ordered by increasing slots.
  std::vector<std::size_t> frontier;
  /// Minimum-energy partition; ties go to fewer slots, then enumeration order.
  std::size_t best = 0;
};

/// Evaluates every partition of the nodes into at most `max_groups` groups.
/// Each group runs STAC with pseudo coefficients allocated by gain.
inline GroupingResult grouping_search(std::span<const double> gains, std::size_t max_groups, double sigma) {
  const std::size_t k = gains.size();
  if (k == 0) throw ArgumentError("grouping_search: no gains");
  if (k > kMaxGroupingNodes) {
    throw CapacityError("grouping_search enumerates partitions of at most " + std::to_string(kMaxGroupingNodes) +
                        " nodes, got " + std::to_string(k));
  }
  if (max_groups == 0) throw ArgumentError("grouping_search: at least one group is required");
  max_groups = std::min(max_groups, k);
  detail::check_sigma(sigma);

  // With weights 2^{j-1} the constellation depends only on the group size.
  std::vector<double> ser_by_size(k + 1, 0.0);
  for (std::size_t n = 1; n <= k; ++n) {
    std::vector<std::int64_t> w(n);
    for (std::size_t j = 0; j < n; ++j) w[j] = std::int64_t{1} << j;
    ser_by_size[n] = ser_stac_exact(build_constellation(WeightAssignment(std::move(w))), sigma);
  }

  GroupingResult result;
  // Restricted growth strings: labels[0] = 0, labels[i] <= 1 + max(labels[0..i)).
  std::vector<std::uint8_t> labels(k, 0);
  std::vector<std::uint8_t> prefix_max(k, 0);
  std::vector<double> group_gains;
  while (true) {
    PartitionEval eval;
    eval.labels = labels;
    eval.slots = static_cast<std::size_t>(prefix_max[k - 1]) + 1;
    double survive = 1.0;
    for (const auto& members : eval.groups()) {
      group_gains.clear();
      for (std::size_t i : members) group_gains.push_back(gains[i]);
      eval.energy += energy_stac(group_gains, allocate_weights(group_gains));
      const double ser = ser_by_size[members.size()];
      eval.group_ser.push_back(ser);
      survive *= 1.0 - ser;
    }
    eval.ser_any = 1.0 - survive;
    result.partitions.push_back(std::move(eval));

    // Advance to the next restricted growth string with at most max_groups labels.
    std::size_t i = k;
    while (i-- > 1) {
      const std::uint8_t limit = static_cast<std::uint8_t>(
          std::min<std::size_t>(static_cast<std::size_t>(prefix_max[i - 1]) + 1, max_groups - 1));
      if (labels[i] < limit) {
        ++labels[i];
        prefix_max[i] = std::max(prefix_max[i - 1], labels[i]);
        for (std::size_t r = i + 1; r < k; ++r) {
          labels[r] = 0;
          prefix_max[r] = prefix_max[i];
        }
        break;
      }
    }
    if (i == 0) break;
  }

  const auto& parts = result.partitions;
  std::vector<std::size_t> order(parts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (parts[a].slots != parts[b].slots) return parts[a].slots < parts[b].slots;
    return parts[a].energy < parts[b].energy;
  });
  double frontier_energy = std::numeric_limits<double>::infinity();
  for (std::size_t idx : order) {
    if (parts[idx].energy < frontier_energy) {
      result.frontier.push_back(idx);
      frontier_energy = parts[idx].energy;
    }
  }
  // The frontier's last entry has the least energy and, among those, the fewest slots.
  result.best = result.frontier.back();
  return result;
}

}  // namespace stac
