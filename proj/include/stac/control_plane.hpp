#pragma once

// Network-server model: connection information, routing and scheduling
// tables plus the per-session transmit parameters it distributes over the
// wired control network. Synchronization is taken as ideal.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "stac/error.hpp"
#include "stac/phy.hpp"

namespace stac {

struct NodeId {
  std::string name;

  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

/// Directed link from -> to as seen by the network server.
struct LinkKey {
  NodeId from;
  NodeId to;

  friend auto operator<=>(const LinkKey&, const LinkKey&) = default;
};

struct ConnectionRow {
  ChannelState channel;
  /// Beamforming steering vector, stored but never interpreted.
  std::vector<std::uint8_t> steering;

  friend bool operator==(const ConnectionRow&, const ConnectionRow&) = default;
};

struct Link {
  LinkKey key;
  ConnectionRow row;
};

class ConnectionInfoTable {
 public:
  /// Adds `id` and its links. Every link must touch `id`; its other end
  /// need not be registered yet.
  void register_node(const NodeId& id, const std::vector<Link>& links) {
    if (nodes_.contains(id)) throw ConflictError("node '" + id.name + "' is already registered");
    std::map<LinkKey, ConnectionRow> staged;
    for (const auto& link : links) {
      const auto& [from, to] = link.key;
      if (from != id && to != id) {
        throw ArgumentError("link " + from.name + "->" + to.name + " does not touch node '" + id.name + "'");
      }
      if (from == to) throw ArgumentError("self link on node '" + id.name + "'");
      if (!(link.row.channel.gain > 0.0)) {
        throw ArgumentError("link " + from.name + "->" + to.name + " has nonpositive gain");
      }
      if (!(link.row.channel.delay >= 0.0)) {
        throw ArgumentError("link " + from.name + "->" + to.name + " has negative delay");
      }
      if (rows_.contains(link.key) || !staged.emplace(link.key, link.row).second) {
        throw ConflictError("duplicate row for link " + from.name + "->" + to.name);
      }
    }
    nodes_.insert(id);
    rows_.merge(staged);
  }

  /// Removes `id` and every row that touches it.
  void deregister_node(const NodeId& id) {
    if (nodes_.erase(id) == 0) throw ConfigurationError("node '" + id.name + "' is not registered");
    std::erase_if(rows_, [&](const auto& entry) { return entry.first.from == id || entry.first.to == id; });
  }

  bool contains(const NodeId& id) const { return nodes_.contains(id); }

  const ConnectionRow* find(const NodeId& from, const NodeId& to) const {
    auto it = rows_.find(LinkKey{from, to});
    return it == rows_.end() ? nullptr : &it->second;
  }

  const std::set<NodeId>& nodes() const noexcept { return nodes_; }
  const std::map<LinkKey, ConnectionRow>& rows() const noexcept { return rows_; }

  friend bool operator==(const ConnectionInfoTable&, const ConnectionInfoTable&) = default;

 private:
  std::set<NodeId> nodes_;
  std::map<LinkKey, ConnectionRow> rows_;
};

/// Next hop toward the destination for every forwarding node.
class RoutingTable {
 public:
  void set_next_hop(const NodeId& node, const NodeId& next) {
    if (node == next) throw RoutingError("node '" + node.name + "' routes to itself");
    next_hop_[node] = next;
  }

  std::optional<NodeId> next_hop(const NodeId& node) const {
    auto it = next_hop_.find(node);
    if (it == next_hop_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const RoutingTable&, const RoutingTable&) = default;

 private:
  std::map<NodeId, NodeId> next_hop_;
};

/// One multiple-access transmission: the participants send simultaneously
/// to the destination with the given weights.
struct SessionRequest {
  std::vector<NodeId> participants;
  NodeId destination;
  WeightAssignment weights;
  /// Common arrival instant; defaults to the latest participant delay.
  std::optional<double> reference_time;
};

struct ScheduleEntry {
  SessionRequest request;
  std::size_t slot = 0;
  double reference_time = 0.0;
};

class ScheduleTable {
 public:
  void add(const std::string& session_id, ScheduleEntry entry) {
    if (!entries_.emplace(session_id, std::move(entry)).second) {
      throw ConflictError("session '" + session_id + "' is already scheduled");
    }
  }

  void remove(const std::string& session_id) {
    if (entries_.erase(session_id) == 0) throw ConfigurationError("session '" + session_id + "' is not scheduled");
  }

  const ScheduleEntry* find(const std::string& session_id) const {
    auto it = entries_.find(session_id);
    return it == entries_.end() ? nullptr : &it->second;
  }

  const std::map<std::string, ScheduleEntry>& entries() const noexcept { return entries_; }

 private:
  std::map<std::string, ScheduleEntry> entries_;
};

namespace detail {

inline void validate_participants(const SessionRequest& s) {
  if (s.participants.empty()) throw ScheduleError("session has no participants");
  if (s.weights.size() != s.participants.size()) throw ScheduleError("one weight per participant is required");
  std::set<NodeId> seen;
  for (const auto& p : s.participants) {
    if (p == s.destination) throw ScheduleError("destination '" + p.name + "' cannot also transmit");
    if (!seen.insert(p).second) throw ScheduleError("participant '" + p.name + "' listed twice");
  }
}

}  // namespace detail

/// Channel rows participant -> destination, in participant order.
inline std::vector<ChannelState> session_channels(const SessionRequest& s, const ConnectionInfoTable& table) {
  std::vector<ChannelState> channels;
  channels.reserve(s.participants.size());
  for (const auto& p : s.participants) {
    const ConnectionRow* row = table.find(p, s.destination);
    if (row == nullptr) {
      throw ConfigurationError("no connection row for " + p.name + "->" + s.destination.name);
    }
    channels.push_back(row->channel);
  }
  return channels;
}

/// Reference time actually used for the session.
inline double session_reference_time(const SessionRequest& s, const ConnectionInfoTable& table) {
  const auto channels = session_channels(s, table);
  const double latest = default_reference_time(channels);
  if (!s.reference_time) return latest;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (*s.reference_time < channels[i].delay) {
      throw ScheduleError("reference time precedes the propagation delay of '" + s.participants[i].name + "'");
    }
  }
  return *s.reference_time;
}

/// Per-participant power (w/h)^2, phase equal to the channel phase and
/// transmit time t0 - delay.
inline std::vector<TransmitParams> compute_session_params(const SessionRequest& s, const ConnectionInfoTable& table) {
  detail::validate_participants(s);
  const auto channels = session_channels(s, table);
  const double t0 = session_reference_time(s, table);
  std::vector<TransmitParams> params;
  params.reserve(channels.size());
  for (std::size_t i = 0; i < channels.size(); ++i) params.push_back(pre_equalize(channels[i], s.weights[i], t0));
  return params;
}

/// One hop of a many-to-one session.
struct MultipleAccessUnit {
  NodeId receiver;
  std::vector<NodeId> transmitters;
  /// Per-transmitter weight: the source weight, or 1 for a relay forwarding
  /// its partial sum.
  WeightAssignment weights;
  std::vector<ChannelState> channels;
  std::vector<TransmitParams> params;
  double reference_time = 0.0;
  /// Hop distance from the receiver to the destination.
  std::size_t depth = 0;
  std::size_t slot = 0;

  SessionRequest request() const { return SessionRequest{transmitters, receiver, weights, reference_time}; }
};

struct SessionPlan {
  NodeId destination;
  std::vector<NodeId> sources;
  /// Topological order: every unit precedes the unit its receiver feeds.
  std::vector<MultipleAccessUnit> units;
};

/// Follows the routing table from every source to the destination and
/// builds one multiple-access unit per receiving node.
inline SessionPlan plan_m2o_session(const std::vector<NodeId>& sources, const NodeId& destination,
                                    const WeightAssignment& weights, const ConnectionInfoTable& table,
                                    const RoutingTable& routing) {
  if (sources.empty()) throw ArgumentError("session has no sources");
  if (weights.size() != sources.size()) throw ArgumentError("one weight per source is required");
  const std::set<NodeId> source_set(sources.begin(), sources.end());
  if (source_set.size() != sources.size()) throw ArgumentError("duplicate source");
  if (source_set.contains(destination)) throw ArgumentError("destination cannot be a source");

  // Receiver -> transmitters in first-seen order; depth of every node on a path.
  std::vector<NodeId> receivers;
  std::map<NodeId, std::vector<NodeId>> children;
  std::map<NodeId, std::size_t> hops;
  std::map<NodeId, std::int64_t> weight_of;
  for (std::size_t i = 0; i < sources.size(); ++i) weight_of[sources[i]] = weights[i];

  for (const auto& source : sources) {
    std::vector<NodeId> path{source};
    std::set<NodeId> on_path{source};
    while (path.back() != destination) {
      const auto next = routing.next_hop(path.back());
      if (!next) throw RoutingError("no route from '" + path.back().name + "' toward '" + destination.name + "'");
      if (!on_path.insert(*next).second) throw RoutingError("routing loop through '" + next->name + "'");
      path.push_back(*next);
    }
    for (std::size_t h = 0; h + 1 < path.size(); ++h) {
      const NodeId& tx = path[h];
      const NodeId& rx = path[h + 1];
      if (h > 0 && source_set.contains(tx)) {
        throw RoutingError("source '" + tx.name + "' would have to relay other sources");
      }
      auto [it, fresh] = children.try_emplace(rx);
      if (fresh) receivers.push_back(rx);
      if (std::find(it->second.begin(), it->second.end(), tx) == it->second.end()) it->second.push_back(tx);
    }
    for (std::size_t h = 0; h < path.size(); ++h) hops[path[h]] = path.size() - 1 - h;
  }

  SessionPlan plan;
  plan.destination = destination;
  plan.sources = sources;
  for (const auto& rx : receivers) {
    MultipleAccessUnit unit;
    unit.receiver = rx;
    unit.transmitters = children[rx];
    std::vector<std::int64_t> w;
    for (const auto& tx : unit.transmitters) w.push_back(source_set.contains(tx) ? weight_of[tx] : 1);
    unit.weights = WeightAssignment(std::move(w));
    unit.depth = hops[rx];
    plan.units.push_back(std::move(unit));
  }
  std::stable_sort(plan.units.begin(), plan.units.end(),
                   [](const auto& a, const auto& b) { return a.depth > b.depth; });
  std::size_t slot = 0;
  for (std::size_t u = 0; u < plan.units.size(); ++u) {
    if (u > 0 && plan.units[u].depth != plan.units[u - 1].depth) ++slot;
    auto& unit = plan.units[u];
    unit.slot = slot;
    const SessionRequest request{unit.transmitters, unit.receiver, unit.weights, std::nullopt};
    unit.channels = session_channels(request, table);
    unit.reference_time = session_reference_time(request, table);
    unit.params = compute_session_params(request, table);
  }
  return plan;
}

/// Single owner of the server tables. Readers take snapshots.
class NetworkServer {
 public:
  void register_node(const NodeId& id, const std::vector<Link>& links) { connections_.register_node(id, links); }
  void deregister_node(const NodeId& id) { connections_.deregister_node(id); }
  void set_route(const NodeId& node, const NodeId& next) { routing_.set_next_hop(node, next); }

  /// Validates the session against the connection table and records it.
  ScheduleEntry schedule(const std::string& session_id, const SessionRequest& request, std::size_t slot) {
    compute_session_params(request, connections_);
    ScheduleEntry entry{request, slot, session_reference_time(request, connections_)};
    schedules_.add(session_id, entry);
    return entry;
  }

  std::vector<TransmitParams> params_for(const std::string& session_id) const {
    const ScheduleEntry* entry = schedules_.find(session_id);
    if (entry == nullptr) throw ConfigurationError("session '" + session_id + "' is not scheduled");
    return compute_session_params(entry->request, connections_);
  }

  SessionPlan plan(const std::vector<NodeId>& sources, const NodeId& destination,
                   const WeightAssignment& weights) const {
    return plan_m2o_session(sources, destination, weights, connections_, routing_);
  }

  ConnectionInfoTable connection_snapshot() const { return connections_; }
  RoutingTable routing_snapshot() const { return routing_; }
  const ScheduleTable& schedules() const noexcept { return schedules_; }

 private:
  ConnectionInfoTable connections_;
  RoutingTable routing_;
  ScheduleTable schedules_;
};

}  // namespace stac
