#pragma once

// Many-to-one sessions over a relay tree: store-and-forward with
// point-to-point TDMA against compute-and-forward with STAC at every hop.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stac/analysis.hpp"
#include "stac/compute.hpp"
#include "stac/control_plane.hpp"
#include "stac/error.hpp"
#include "stac/phy.hpp"

namespace stac {

enum class NodeRole { kSource, kRelay, kDestination };

struct TreeNode {
  NodeId id;
  NodeRole role = NodeRole::kSource;
  /// Next hop toward the destination; empty only for the destination.
  std::optional<NodeId> parent;
  /// Channel of the link to `parent`.
  ChannelState uplink;
};

/// Relay tree of one many-to-one session.
class RelayTree {
 public:
  explicit RelayTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
    std::map<NodeId, const TreeNode*> by_id;
    for (const auto& n : nodes_) {
      if (!by_id.emplace(n.id, &n).second) throw ArgumentError("duplicate tree node '" + n.id.name + "'");
    }
    std::map<NodeId, std::size_t> child_count;
    for (const auto& n : nodes_) {
      if (n.role == NodeRole::kDestination) {
        if (destination_) throw ArgumentError("tree has more than one destination");
        if (n.parent) throw ArgumentError("destination '" + n.id.name + "' cannot have a parent");
        destination_ = n.id;
        continue;
      }
      if (!n.parent) throw ArgumentError("node '" + n.id.name + "' has no parent");
      auto it = by_id.find(*n.parent);
      if (it == by_id.end()) throw ArgumentError("parent '" + n.parent->name + "' of '" + n.id.name + "' is unknown");
      if (it->second->role == NodeRole::kSource) {
        throw ArgumentError("source '" + n.parent->name + "' cannot relay for '" + n.id.name + "'");
      }
      if (!(n.uplink.gain > 0.0) || !(n.uplink.delay >= 0.0)) {
        throw ArgumentError("link from '" + n.id.name + "' needs a positive gain and nonnegative delay");
      }
      ++child_count[*n.parent];
      if (n.role == NodeRole::kSource) sources_.push_back(n.id);
    }
    if (!destination_) throw ArgumentError("tree has no destination");
    if (sources_.empty()) throw ArgumentError("tree has no sources");
    for (const auto& n : nodes_) {
      if (n.role == NodeRole::kRelay && child_count[n.id] == 0) {
        throw ArgumentError("relay '" + n.id.name + "' has no children");
      }
      // Walking parents must reach the destination within |nodes| steps.
      const TreeNode* cur = &n;
      for (std::size_t steps = 0; cur->parent; ++steps) {
        if (steps > nodes_.size()) throw ArgumentError("cycle through '" + n.id.name + "'");
        cur = by_id.at(*cur->parent);
      }
    }
  }

  /// Star: sources s1..sK sending straight to destination "d".
  static RelayTree star(std::span<const ChannelState> uplinks) {
    std::vector<TreeNode> nodes{{NodeId{"d"}, NodeRole::kDestination, std::nullopt, {}}};
    for (std::size_t i = 0; i < uplinks.size(); ++i) {
      nodes.push_back({NodeId{"s" + std::to_string(i + 1)}, NodeRole::kSource, NodeId{"d"}, uplinks[i]});
    }
    return RelayTree(std::move(nodes));
  }

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  /// Sources in declaration order; digits and weights follow this order.
  const std::vector<NodeId>& sources() const noexcept { return sources_; }
  const NodeId& destination() const noexcept { return *destination_; }

  ConnectionInfoTable connection_table() const {
    ConnectionInfoTable table;
    std::map<NodeId, std::vector<Link>> outgoing;
    for (const auto& n : nodes_) {
      if (n.parent) outgoing[n.id].push_back(Link{LinkKey{n.id, *n.parent}, ConnectionRow{n.uplink, {}}});
    }
    for (const auto& n : nodes_) table.register_node(n.id, outgoing[n.id]);
    return table;
  }

  RoutingTable routing() const {
    RoutingTable routing;
    for (const auto& n : nodes_) {
      if (n.parent) routing.set_next_hop(n.id, *n.parent);
    }
    return routing;
  }

  SessionPlan plan(const WeightAssignment& weights) const {
    return plan_m2o_session(sources_, *destination_, weights, connection_table(), routing());
  }

 private:
  std::vector<TreeNode> nodes_;
  std::vector<NodeId> sources_;
  std::optional<NodeId> destination_;
};

struct SessionMetrics {
  std::size_t total_slots = 0;
  double total_energy = 0.0;
  bool result_correct = false;
  std::int64_t value = 0;
  std::int64_t expected = 0;
  /// Analytic per-symbol error probability of every hop, in plan order.
  std::vector<double> per_hop_ser;
  /// Union bound on the probability that the hop makes any detection error.
  std::vector<double> per_hop_bound;
};

namespace detail {

inline void check_session_digits(const RelayTree& tree, std::span<const Digit> digits, const WeightAssignment& w) {
  if (digits.size() != tree.sources().size() || w.size() != digits.size()) {
    throw ArgumentError("one digit and one weight per source are required");
  }
  for (const auto& d : digits) {
    if (d.width() != digits.front().width()) throw ArgumentError("all source digits must share one width");
  }
}

inline std::vector<std::int64_t> digit_values(std::span<const Digit> digits) {
  std::vector<std::int64_t> v;
  for (const auto& d : digits) v.push_back(d.value());
  return v;
}

inline int bits_for(std::int64_t max_value) {
  return std::max(1, static_cast<int>(std::bit_width(static_cast<std::uint64_t>(max_value))));
}

}  // namespace detail

/// Store-and-forward: every hop is point-to-point TDMA at unit receive
/// amplitude, relays buffer and forward every decoded digit, and the
/// destination computes the weighted sum. In pseudo mode each transmitted
/// bit is charged the bandwidth-matched energy sum_j (2^{j-1}/h)^2 / K_u.
template <class Urbg>
SessionMetrics run_saf(const RelayTree& tree, std::span<const Digit> digits, const WeightAssignment& weights,
                       double sigma, Urbg& rng, bool pseudo = false) {
  detail::check_session_digits(tree, digits, weights);
  detail::check_sigma(sigma);
  const int width = digits.front().width();
  const SessionPlan plan = tree.plan(weights);
  const Constellation bpsk = build_constellation(WeightAssignment::equal(1));
  const ImpairmentModel impair{0.0, 0.0, sigma};
  const double p = bpsk_error(sigma);

  std::map<NodeId, std::vector<std::pair<std::size_t, std::int64_t>>> held;
  for (std::size_t i = 0; i < digits.size(); ++i) held[tree.sources()[i]].emplace_back(i, digits[i].value());

  SessionMetrics m;
  for (const auto& unit : plan.units) {
    const std::size_t fan_in = unit.transmitters.size();
    double pseudo_scale = 0.0;
    for (std::size_t j = 0; j < fan_in; ++j) pseudo_scale += std::ldexp(1.0, 2 * static_cast<int>(j));
    pseudo_scale /= static_cast<double>(fan_in);

    std::size_t hop_bits = 0;
    auto& inbox = held[unit.receiver];
    for (std::size_t t = 0; t < fan_in; ++t) {
      const ChannelState& ch = unit.channels[t];
      const TransmitParams unit_amplitude = pre_equalize(ch, 1, ch.delay);
      const double bit_energy = pseudo ? pseudo_scale / (ch.gain * ch.gain) : unit_amplitude.power;
      for (const auto& [source, value] : held[unit.transmitters[t]]) {
        std::int64_t decoded = 0;
        for (int l = 0; l < width; ++l) {
          const int symbol = bpsk_map(static_cast<int>((value >> l) & 1));
          const auto y = superpose_passband(std::span<const int>(&symbol, 1), std::span<const ChannelState>(&ch, 1),
                                            std::span<const TransmitParams>(&unit_amplitude, 1), impair, rng);
          decoded |= static_cast<std::int64_t>(bpsk_unmap(static_cast<int>(detect_nearest(y.real(), bpsk)))) << l;
        }
        inbox.emplace_back(source, decoded);
        hop_bits += static_cast<std::size_t>(width);
        m.total_energy += bit_energy * width;
      }
    }
    m.total_slots += hop_bits;
    m.per_hop_ser.push_back(p);
    m.per_hop_bound.push_back(std::min(1.0, static_cast<double>(hop_bits) * p));
  }

  std::vector<std::int64_t> received(digits.size(), 0);
  for (const auto& [source, value] : held[plan.destination]) received[source] = value;
  m.value = weighted_sum_oracle(received, weights);
  m.expected = weighted_sum_oracle(detail::digit_values(digits), weights);
  m.result_correct = m.value == m.expected;
  return m;
}

/// Compute-and-forward: every hop is one STAC round per bit of its widest
/// input; the receiver decodes the weighted partial sum and relays
/// re-encode it with enough bits for its largest possible value.
///
/// Direct mode superposes with the session weights (1 for relays). Pseudo
/// mode superposes with gain-allocated coefficients 2^{j-1}, separates
/// every transmitter's bit from the sum and applies the weights digitally.
template <class Urbg>
SessionMetrics run_caf_stac(const RelayTree& tree, std::span<const Digit> digits, const WeightAssignment& weights,
                            double sigma, Urbg& rng, bool pseudo = false) {
  detail::check_session_digits(tree, digits, weights);
  detail::check_sigma(sigma);
  const int width = digits.front().width();
  const SessionPlan plan = tree.plan(weights);
  const ConnectionInfoTable table = tree.connection_table();
  const ImpairmentModel impair{0.0, 0.0, sigma};

  std::map<NodeId, std::int64_t> value;
  std::map<NodeId, std::int64_t> max_value;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    value[tree.sources()[i]] = digits[i].value();
    max_value[tree.sources()[i]] = (std::int64_t{1} << width) - 1;
  }

  SessionMetrics m;
  for (const auto& unit : plan.units) {
    const std::size_t fan_in = unit.transmitters.size();
    std::vector<std::int64_t> inputs;
    std::vector<std::int64_t> input_max;
    int rounds = 1;
    for (const auto& tx : unit.transmitters) {
      inputs.push_back(value.at(tx));
      input_max.push_back(max_value.at(tx));
      rounds = std::max(rounds, detail::bits_for(max_value.at(tx)));
    }
    const std::int64_t receiver_max = weighted_sum_oracle(input_max, unit.weights);

    WeightAssignment air_weights = unit.weights;
    std::vector<TransmitParams> params = unit.params;
    if (pseudo) {
      std::vector<double> gains;
      for (const auto& ch : unit.channels) gains.push_back(ch.gain);
      air_weights = allocate_weights(gains);
      params = compute_session_params(SessionRequest{unit.transmitters, unit.receiver, air_weights, std::nullopt},
                                      table);
    } else {
      check_overflow(air_weights, rounds);
    }
    const Constellation constellation = build_constellation(air_weights);

    std::vector<std::int64_t> bit_sums(static_cast<std::size_t>(rounds));
    std::vector<std::int64_t> recovered(fan_in, 0);
    std::vector<int> symbols(fan_in);
    for (int l = 0; l < rounds; ++l) {
      for (std::size_t t = 0; t < fan_in; ++t) symbols[t] = bpsk_map(static_cast<int>((inputs[t] >> l) & 1));
      const auto y = superpose_passband(std::span<const int>(symbols), std::span<const ChannelState>(unit.channels),
                                        std::span<const TransmitParams>(params), impair, rng);
      const std::int64_t bit_sum = demod_bit_sum(detect_nearest(y.real(), constellation), air_weights);
      if (pseudo) {
        // air_weights[t] = 2^{rank(t)}; the rank-ordered bits are the base-2 digits of bit_sum.
        const auto bits = extract_source_digits(bit_sum, fan_in, 1);
        const auto order = air_weights.order();
        for (std::size_t j = 0; j < fan_in; ++j) recovered[order[j]] |= bits[j] << l;
      } else {
        bit_sums[static_cast<std::size_t>(l)] = bit_sum;
      }
    }
    std::int64_t received = pseudo ? weighted_sum_oracle(recovered, unit.weights) : reconstruct_weighted_digit(bit_sums);
    received = std::clamp<std::int64_t>(received, 0, receiver_max);
    value[unit.receiver] = received;
    max_value[unit.receiver] = receiver_max;

    double round_energy = 0.0;
    for (const auto& tp : params) round_energy += tp.power;
    m.total_energy += round_energy * rounds;
    m.total_slots += static_cast<std::size_t>(rounds);
    m.per_hop_ser.push_back(ser_stac_exact(constellation, sigma));
    m.per_hop_bound.push_back(std::min(1.0, rounds * worst_point_error(constellation, sigma)));
  }

  m.value = value.at(plan.destination);
  m.expected = weighted_sum_oracle(detail::digit_values(digits), weights);
  m.result_correct = m.value == m.expected;
  return m;
}

inline SessionMetrics run_saf(const RelayTree& tree, std::span<const Digit> digits, const WeightAssignment& weights,
                              double sigma, std::uint64_t seed, bool pseudo = false) {
  auto rng = chunk_stream(seed, 0);
  return run_saf(tree, digits, weights, sigma, rng, pseudo);
}

inline SessionMetrics run_caf_stac(const RelayTree& tree, std::span<const Digit> digits,
                                   const WeightAssignment& weights, double sigma, std::uint64_t seed,
                                   bool pseudo = false) {
  auto rng = chunk_stream(seed, 0);
  return run_caf_stac(tree, digits, weights, sigma, rng, pseudo);
}

struct StrategySummary {
  /// Slots and energy do not depend on the data, only on the tree.
  std::size_t slots = 0;
  double energy = 0.0;
  SerEstimate error_rate;
  /// Sum of the per-hop union bounds.
  double union_bound = 0.0;
};

struct StrategyComparison {
  StrategySummary saf;
  StrategySummary caf;
  /// saf.slots / caf.slots
  double slot_ratio = 0.0;
  /// saf.energy / caf.energy
  double energy_ratio = 0.0;
};

struct ComparisonOptions {
  int width = 1;
  std::uint64_t trials = 1000;
  double sigma = 0.0;
  std::uint64_t seed = 1;
  bool pseudo = false;
  unsigned threads = 1;
};

namespace detail {

template <class Urbg>
std::vector<Digit> random_digits(Urbg& rng, std::size_t count, int width) {
  std::vector<Digit> digits;
  digits.reserve(count);
  for (std::size_t i = 0; i < count; ++i) digits.emplace_back(static_cast<std::int64_t>(rng() >> (64 - width)), width);
  return digits;
}

}  // namespace detail

/// Runs both strategies over `trials` uniformly drawn digit vectors.
inline StrategyComparison compare_strategies(const RelayTree& tree, const WeightAssignment& weights,
                                             const ComparisonOptions& opt) {
  if (opt.trials == 0) throw ArgumentError("compare_strategies needs at least one trial");
  if (opt.width < 1 || opt.width >= kMaxExactBits) throw ArgumentError("digit width out of range");
  const std::size_t k = tree.sources().size();

  StrategyComparison report;
  auto summarize = [&](StrategySummary& s, auto&& run, std::uint64_t stream_seed) {
    auto probe_rng = chunk_stream(stream_seed, ~std::uint64_t{0});
    const auto probe_digits = detail::random_digits(probe_rng, k, opt.width);
    const SessionMetrics probe = run(std::span<const Digit>(probe_digits), probe_rng);
    s.slots = probe.total_slots;
    s.energy = probe.total_energy;
    for (double b : probe.per_hop_bound) s.union_bound += b;
    const std::uint64_t errors = run_chunked(opt.trials, stream_seed, opt.threads, [&](std::mt19937_64& rng, std::uint64_t n) {
      std::uint64_t errs = 0;
      for (std::uint64_t t = 0; t < n; ++t) {
        const auto d = detail::random_digits(rng, k, opt.width);
        if (!run(std::span<const Digit>(d), rng).result_correct) ++errs;
      }
      return errs;
    });
    s.error_rate = SerEstimate::from_counts(errors, opt.trials);
  };
  summarize(
      report.saf,
      [&](std::span<const Digit> d, std::mt19937_64& rng) { return run_saf(tree, d, weights, opt.sigma, rng, opt.pseudo); },
      opt.seed);
  summarize(
      report.caf,
      [&](std::span<const Digit> d, std::mt19937_64& rng) {
        return run_caf_stac(tree, d, weights, opt.sigma, rng, opt.pseudo);
      },
      opt.seed ^ 0x9e3779b97f4a7c15ULL);
  report.slot_ratio = static_cast<double>(report.saf.slots) / static_cast<double>(report.caf.slots);
  report.energy_ratio = report.saf.energy / report.caf.energy;
  return report;
}

}  // namespace stac
