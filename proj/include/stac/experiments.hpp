#pragma once

// Batch experiments driven by a JSON scenario file. Each runner returns the
// CSV text (and for some kinds a human-readable summary); nothing here
// touches the filesystem.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stac/analysis.hpp"
#include "stac/compute.hpp"
#include "stac/error.hpp"
#include "stac/phy.hpp"
#include "stac/session.hpp"

namespace stac::experiments {

using Json = nlohmann::json;

/// Invalid scenario: names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : Error("config field '" + field + "': " + message), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class Kind { kSerSweep, kEnergyCompare, kSessionSim, kExtractDemo, kGrouping };

inline const char* kind_name(Kind k) {
  switch (k) {
    case Kind::kSerSweep: return "ser-sweep";
    case Kind::kEnergyCompare: return "energy-compare";
    case Kind::kSessionSim: return "session-sim";
    case Kind::kExtractDemo: return "extract-demo";
    case Kind::kGrouping: return "grouping";
  }
  return "";
}

inline std::optional<Kind> parse_kind(const std::string& name) {
  for (Kind k : {Kind::kSerSweep, Kind::kEnergyCompare, Kind::kSessionSim, Kind::kExtractDemo, Kind::kGrouping}) {
    if (name == kind_name(k)) return k;
  }
  return std::nullopt;
}

struct RunOptions {
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
};

struct Output {
  std::string csv;
  std::string summary;
};

/// %.12g; '.' decimal separator, no grouping.
inline std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}


/// Independent stream seed for one labelled sub-experiment.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (label + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace detail {

inline const Json* field(const Json& cfg, const std::string& name) {
  auto it = cfg.find(name);
  return it == cfg.end() ? nullptr : &*it;
}

inline double get_real(const Json& v, const std::string& name) {
  if (!v.is_number()) throw ConfigError(name, "expected a number");
  return v.get<double>();
}

inline std::int64_t get_int(const Json& v, const std::string& name) {
  if (!v.is_number_integer()) throw ConfigError(name, "expected an integer");
  return v.get<std::int64_t>();
}

inline std::uint64_t get_u64(const Json& v, const std::string& name) {
  if (!v.is_number_unsigned()) throw ConfigError(name, "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

inline std::int64_t int_or(const Json& cfg, const std::string& name, std::int64_t fallback) {
  const Json* v = field(cfg, name);
  return v ? get_int(*v, name) : fallback;
}

inline double real_or(const Json& cfg, const std::string& name, double fallback) {
  const Json* v = field(cfg, name);
  return v ? get_real(*v, name) : fallback;
}

inline const Json& require(const Json& cfg, const std::string& name) {
  const Json* v = field(cfg, name);
  if (!v) throw ConfigError(name, "missing");
  return *v;
}

/// A scalar or a list of scalars.
template <class T, class Get>
std::vector<T> scalar_list(const Json& v, const std::string& name, Get get) {
  std::vector<T> out;
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get(v[i], name + "[" + std::to_string(i) + "]"));
  } else {
    out.push_back(get(v, name));
  }
  if (out.empty()) throw ConfigError(name, "list is empty");
  return out;
}

inline std::vector<double> real_list(const Json& v, const std::string& name) {
  return scalar_list<double>(v, name, get_real);
}

inline std::uint64_t seed_of(const Json& cfg, const RunOptions& opt) {
  if (opt.seed) return *opt.seed;
  const Json* v = field(cfg, "seed");
  return v ? get_u64(*v, "seed") : 1;
}

inline std::uint64_t trials_of(const Json& cfg, std::uint64_t fallback) {
  const Json* v = field(cfg, "trials");
  return v ? get_u64(*v, "trials") : fallback;
}

inline double sigma_value(const Json& v, const std::string& name) {
  const double s = get_real(v, name);
  if (!(s >= 0.0)) throw ConfigError(name, "noise standard deviation must be >= 0");
  return s;
}

inline std::vector<double> positive_gains(const Json& v, const std::string& name) {
  if (!v.is_array() || v.empty()) throw ConfigError(name, "expected a nonempty list of gains");
  std::vector<double> g;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string item = name + "[" + std::to_string(i) + "]";
    const double h = get_real(v[i], item);
    if (!(h > 0.0)) throw ConfigError(item, "gain must be positive");
    g.push_back(h);
  }
  return g;
}

inline std::vector<double> log_uniform(std::mt19937_64& rng, std::size_t k, double lo, double hi) {
  std::vector<double> g(k);
  for (auto& h : g) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    h = lo * std::pow(hi / lo, u);
  }
  return g;
}

/// "gains": "unit" | [h...] | {"generator": "log-uniform", "min": a, "max": b}
inline std::vector<double> gains_for(const Json& cfg, std::size_t k, std::uint64_t seed) {
  const Json* v = field(cfg, "gains");
  if (!v || (v->is_string() && v->get<std::string>() == "unit")) return std::vector<double>(k, 1.0);
  if (v->is_array()) {
    auto g = positive_gains(*v, "gains");
    if (g.size() != k) throw ConfigError("gains", "expected " + std::to_string(k) + " gains");
    return g;
  }
  if (v->is_object()) {
    const std::string gen = require(*v, "generator").is_string() ? (*v)["generator"].get<std::string>() : "";
    if (gen != "log-uniform") throw ConfigError("gains.generator", "only 'log-uniform' is supported");
    const double lo = real_or(*v, "min", 0.1);
    const double hi = real_or(*v, "max", 10.0);
    if (!(lo > 0.0) || !(hi >= lo)) throw ConfigError("gains", "need 0 < min <= max");
    auto rng = chunk_stream(seed, k);
    return log_uniform(rng, k, lo, hi);
  }
  throw ConfigError("gains", "expected \"unit\", a list or a generator object");
}

inline std::vector<ChannelState> unit_phase_channels(const std::vector<double>& gains) {
  std::vector<ChannelState> ch;
  for (double h : gains) ch.push_back(ChannelState{h, 0.0, 0.0});
  return ch;
}

/// "weights": "equal" | "pseudo" | [w...]
inline WeightAssignment weights_for(const Json& cfg, std::size_t k) {
  const Json* v = field(cfg, "weights");
  if (!v || (v->is_string() && v->get<std::string>() == "equal")) return WeightAssignment::equal(k);
  if (v->is_string() && v->get<std::string>() == "pseudo") return pseudo_coefficients(k, 1);
  if (v->is_array()) {
    std::vector<std::int64_t> w;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string item = "weights[" + std::to_string(i) + "]";
      const std::int64_t x = get_int((*v)[i], item);
      if (x < 1) throw ConfigError(item, "weights must be positive integers");
      w.push_back(x);
    }
    if (w.size() != k) throw ConfigError("weights", "expected " + std::to_string(k) + " weights");
    return WeightAssignment(std::move(w));
  }
  throw ConfigError("weights", "expected \"equal\", \"pseudo\" or a list of integers");
}

inline std::string join_reals(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + fmt_real(v[i]);
  return s;
}

inline void check_kind(const Json& cfg, Kind kind) {
  if (!cfg.is_object()) throw ConfigError("<root>", "scenario must be a JSON object");
  const Json* v = field(cfg, "experiment");
  if (!v) return;
  if (!v->is_string() || v->get<std::string>() != kind_name(kind)) {
    throw ConfigError("experiment", std::string("scenario is not a '") + kind_name(kind) + "' experiment");
  }
}

}  // namespace detail

/// One row per (K, sigma), ascending:
/// K,sigma,ser_stac_bound,ser_stac_exact,ser_stac_mc,mc_ci,ser_sep_bound,ser_sep_exact,ser_sep_mc
inline Output run_ser_sweep(const Json& cfg, const RunOptions& opt = {}) {
  using namespace detail;
  check_kind(cfg, Kind::kSerSweep);
  const std::uint64_t seed = seed_of(cfg, opt);
  const std::uint64_t trials = trials_of(cfg, 0);

  std::vector<std::int64_t> ks;
  const Json* wfield = field(cfg, "weights");
  if (wfield && wfield->is_array()) {
    ks.push_back(static_cast<std::int64_t>(wfield->size()));
  } else {
    ks = scalar_list<std::int64_t>(require(cfg, "K"), "K", get_int);
  }
  for (auto k : ks) {
    if (k < 1 || static_cast<std::size_t>(k) > kMaxConstellationNodes) {
      throw ConfigError("K", "K must be in [1, " + std::to_string(kMaxConstellationNodes) + "]");
    }
  }
  auto sigmas = scalar_list<double>(require(cfg, "sigma"), "sigma", sigma_value);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  std::sort(sigmas.begin(), sigmas.end());
  sigmas.erase(std::unique(sigmas.begin(), sigmas.end()), sigmas.end());

  std::ostringstream csv;
  csv << "K,sigma,ser_stac_bound,ser_stac_exact,ser_stac_mc,mc_ci,ser_sep_bound,ser_sep_exact,ser_sep_mc\n";
  for (std::int64_t k64 : ks) {
    const auto k = static_cast<std::size_t>(k64);
    const WeightAssignment w = weights_for(cfg, k);
    const auto channels = unit_phase_channels(gains_for(cfg, k, derive_seed(seed, k)));
    const Constellation c = build_constellation(w);
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
      const double sigma = sigmas[si];
      csv << k << ',' << fmt_real(sigma) << ',' << fmt_real(ser_stac_bound(k, sigma)) << ','
          << fmt_real(ser_stac_exact(c, sigma)) << ',';
      const std::uint64_t row_seed = derive_seed(seed, (k64 << 20) + si);
      if (trials > 0) {
        const auto mc = monte_carlo_ser_stac(w, channels, sigma, trials, row_seed, opt.threads);
        csv << fmt_real(mc.value) << ',' << fmt_real(mc.half_width95) << ',';
      } else {
        csv << ",,";
      }
      csv << fmt_real(ser_sep_bound(k, sigma)) << ',';
      if (k <= kMaxSepExactNodes) csv << fmt_real(ser_sep_exact(w, sigma));
      csv << ',';
      if (trials > 0) {
        csv << fmt_real(monte_carlo_ser_sep(w, channels, sigma, trials, derive_seed(row_seed, 1), opt.threads).value);
      }
      csv << '\n';
    }
  }
  return {csv.str(), {}};
}

/// One row per gain vector: gains,E_stac,E_sep,ratio
inline Output run_energy_compare(const Json& cfg, const RunOptions& opt = {}) {
  using namespace detail;
  check_kind(cfg, Kind::kEnergyCompare);
  const int q = static_cast<int>(int_or(cfg, "q", 1));
  if (q < 1) throw ConfigError("q", "must be positive");
  AllocationOrder order = AllocationOrder::kMinimizeEnergy;
  if (const Json* o = field(cfg, "order")) {
    if (*o == "literal") {
      order = AllocationOrder::kLiteral;
    } else if (*o != "minimize") {
      throw ConfigError("order", "expected \"minimize\" or \"literal\"");
    }
  }

  std::vector<std::vector<double>> vectors;
  if (const Json* g = field(cfg, "gains")) {
    if (!g->is_array()) throw ConfigError("gains", "expected a list of gain lists");
    for (std::size_t i = 0; i < g->size(); ++i) vectors.push_back(positive_gains((*g)[i], "gains[" + std::to_string(i) + "]"));
  }
  if (const Json* r = field(cfg, "random")) {
    if (!r->is_object()) throw ConfigError("random", "expected an object");
    const std::uint64_t count = get_u64(require(*r, "count"), "random.count");
    const auto k_range = scalar_list<std::int64_t>(require(*r, "K"), "random.K", get_int);
    const std::int64_t k_lo = k_range.front();
    const std::int64_t k_hi = k_range.back();
    if (k_lo < 1 || k_hi < k_lo) throw ConfigError("random.K", "need 1 <= K_min <= K_max");
    const double lo = real_or(*r, "min", 0.1);
    const double hi = real_or(*r, "max", 10.0);
    if (!(lo > 0.0) || !(hi >= lo)) throw ConfigError("random", "need 0 < min <= max");
    auto rng = chunk_stream(seed_of(cfg, opt), 0);
    for (std::uint64_t i = 0; i < count; ++i) {
      const auto span = static_cast<std::uint64_t>(k_hi - k_lo + 1);
      const auto k = static_cast<std::size_t>(k_lo) + static_cast<std::size_t>(rng() % span);
      vectors.push_back(log_uniform(rng, k, lo, hi));
    }
  }
  if (vectors.empty()) throw ConfigError("gains", "no gain vectors given (use 'gains' or 'random')");

  std::ostringstream csv;
  csv << "gains,E_stac,E_sep,ratio\n";
  for (const auto& g : vectors) {
    const EnergyReport r = compare_energy(g, q, order);
    csv << join_reals(g) << ',' << fmt_real(r.e_stac) << ',' << fmt_real(r.e_sep) << ',' << fmt_real(r.ratio) << '\n';
  }
  return {csv.str(), {}};
}

/// "tree": [{"id", "role": source|relay|destination, "parent", "gain", "phase", "delay"}]
inline RelayTree parse_tree(const Json& v) {
  using namespace detail;
  if (!v.is_array() || v.empty()) throw ConfigError("tree", "expected a nonempty list of nodes");
  std::vector<TreeNode> nodes;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string at = "tree[" + std::to_string(i) + "]";
    const Json& n = v[i];
    if (!n.is_object()) throw ConfigError(at, "expected an object");
    TreeNode node;
    const Json& id = require(n, "id");
    if (!id.is_string()) throw ConfigError(at + ".id", "expected a string");
    node.id = NodeId{id.get<std::string>()};
    const Json& role = require(n, "role");
    if (role == "source") {
      node.role = NodeRole::kSource;
    } else if (role == "relay") {
      node.role = NodeRole::kRelay;
    } else if (role == "destination") {
      node.role = NodeRole::kDestination;
    } else {
      throw ConfigError(at + ".role", "expected source, relay or destination");
    }
    if (const Json* p = field(n, "parent")) {
      if (!p->is_string()) throw ConfigError(at + ".parent", "expected a string");
      node.parent = NodeId{p->get<std::string>()};
    }
    node.uplink.gain = real_or(n, "gain", 1.0);
    node.uplink.phase = real_or(n, "phase", 0.0);
    node.uplink.delay = real_or(n, "delay", 0.0);
    nodes.push_back(std::move(node));
  }
  try {
    return RelayTree(std::move(nodes));
  } catch (const ArgumentError& e) {
    throw ConfigError("tree", e.what());
  }
}

/// CSV: strategy,slots,energy,error_rate,ci95,union_bound,trials
inline Output run_session_sim(const Json& cfg, const RunOptions& opt = {}) {
  using namespace detail;
  check_kind(cfg, Kind::kSessionSim);
  const RelayTree tree = parse_tree(require(cfg, "tree"));
  ComparisonOptions c;
  c.width = static_cast<int>(int_or(cfg, "L", 1));
  if (c.width < 1 || c.width >= kMaxExactBits) throw ConfigError("L", "digit width must be in [1, 61]");
  c.trials = trials_of(cfg, 1000);
  if (c.trials == 0) throw ConfigError("trials", "must be positive");
  c.sigma = field(cfg, "sigma") ? sigma_value(cfg["sigma"], "sigma") : 0.0;
  c.seed = seed_of(cfg, opt);
  c.threads = opt.threads;
  if (const Json* mode = field(cfg, "mode")) {
    if (*mode == "pseudo") {
      c.pseudo = true;
    } else if (*mode != "direct") {
      throw ConfigError("mode", "expected \"direct\" or \"pseudo\"");
    }
  }
  const WeightAssignment w = weights_for(cfg, tree.sources().size());
  const StrategyComparison r = compare_strategies(tree, w, c);

  std::ostringstream csv;
  csv << "strategy,slots,energy,error_rate,ci95,union_bound,trials\n";
  for (const auto& [name, s] : {std::pair{"saf", &r.saf}, std::pair{"caf_stac", &r.caf}}) {
    csv << name << ',' << s->slots << ',' << fmt_real(s->energy) << ',' << fmt_real(s->error_rate.value) << ','
        << fmt_real(s->error_rate.half_width95) << ',' << fmt_real(s->union_bound) << ',' << s->error_rate.trials
        << '\n';
  }
  std::ostringstream sum;
  sum << "sources: " << tree.sources().size() << ", mode: " << (c.pseudo ? "pseudo" : "direct")
      << ", L: " << c.width << ", sigma: " << fmt_real(c.sigma) << '\n'
      << "slots  SAF " << r.saf.slots << "  CAF/STAC " << r.caf.slots << "  ratio " << fmt_real(r.slot_ratio) << '\n'
      << "energy SAF " << fmt_real(r.saf.energy) << "  CAF/STAC " << fmt_real(r.caf.energy) << "  ratio "
      << fmt_real(r.energy_ratio) << '\n'
      << "end-to-end error  SAF " << fmt_real(r.saf.error_rate.value) << "  CAF/STAC "
      << fmt_real(r.caf.error_rate.value) << '\n';
  return {csv.str(), sum.str()};
}

/// Text report of encode -> STAC channel -> extract for configured digits.
inline Output run_extract_demo(const Json& cfg, const RunOptions& opt = {}) {
  using namespace detail;
  check_kind(cfg, Kind::kExtractDemo);
  const int q = static_cast<int>(get_int(require(cfg, "q"), "q"));
  if (q < 1) throw ConfigError("q", "must be positive");
  const Json& dv = require(cfg, "digits");
  if (!dv.is_array() || dv.empty()) throw ConfigError("digits", "expected a nonempty list");
  std::vector<std::int64_t> digits;
  for (std::size_t i = 0; i < dv.size(); ++i) {
    const std::string item = "digits[" + std::to_string(i) + "]";
    const std::int64_t d = get_int(dv[i], item);
    if (d < 0 || (q < kMaxExactBits && d >= (std::int64_t{1} << q))) {
      throw ConfigError(item, "digit outside [0, 2^q)");
    }
    digits.push_back(d);
  }
  const std::size_t k = digits.size();
  const WeightAssignment w = pseudo_coefficients(k, q);
  const double sigma = field(cfg, "sigma") ? sigma_value(cfg["sigma"], "sigma") : 0.0;
  const std::uint64_t seed = seed_of(cfg, opt);
  const auto channels = unit_phase_channels(gains_for(cfg, k, seed));

  std::vector<Digit> tx;
  for (auto d : digits) tx.emplace_back(d, q);
  const std::int64_t encoded = weighted_sum_oracle(digits, w);
  auto rng = chunk_stream(seed, 0);
  const std::int64_t received =
      stac_round_trip(std::span<const Digit>(tx), w, channels, ImpairmentModel{0.0, 0.0, sigma}, rng);
  const auto extracted = extract_source_digits(received, k, q);

  std::ostringstream out;
  auto list = [&](const auto& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
    return s;
  };
  out << "digits:       " << list(digits) << '\n'
      << "q:            " << q << '\n'
      << "coefficients: " << list(std::vector<std::int64_t>(w.weights().begin(), w.weights().end())) << '\n'
      << "sigma:        " << fmt_real(sigma) << '\n'
      << "encoded s0:   " << encoded << '\n'
      << "received s0:  " << received << '\n'
      << "extracted:    " << list(extracted) << '\n'
      << "round trip:   " << (extracted == digits ? "ok" : "MISMATCH") << '\n';
  return {out.str(), {}};
}

/// CSV: slots,energy,ser_any,partition,pareto,best
/// One row per group count: the least-energy partition with that many groups.
inline Output run_grouping(const Json& cfg, const RunOptions& = {}) {
  using namespace detail;
  check_kind(cfg, Kind::kGrouping);
  const auto gains = positive_gains(require(cfg, "gains"), "gains");
  if (gains.size() > kMaxGroupingNodes) {
    throw CapacityError("grouping supports at most " + std::to_string(kMaxGroupingNodes) + " nodes");
  }
  const std::int64_t m = int_or(cfg, "max_groups", static_cast<std::int64_t>(gains.size()));
  if (m < 1) throw ConfigError("max_groups", "must be positive");
  const double sigma = field(cfg, "sigma") ? sigma_value(cfg["sigma"], "sigma") : 1.0;
  const GroupingResult r = grouping_search(gains, static_cast<std::size_t>(m), sigma);

  std::vector<std::optional<std::size_t>> best_per_slots(gains.size() + 1);
  for (std::size_t i = 0; i < r.partitions.size(); ++i) {
    auto& slot = best_per_slots[r.partitions[i].slots];
    if (!slot || r.partitions[i].energy < r.partitions[*slot].energy) slot = i;
  }
  std::ostringstream csv;
  csv << "slots,energy,ser_any,partition,pareto,best\n";
  for (const auto& idx : best_per_slots) {
    if (!idx) continue;
    const auto& p = r.partitions[*idx];
    std::string part;
    for (const auto& g : p.groups()) {
      part += '{';
      for (std::size_t j = 0; j < g.size(); ++j) part += (j ? " " : "") + std::to_string(g[j] + 1);
      part += '}';
    }
    const bool pareto = std::find(r.frontier.begin(), r.frontier.end(), *idx) != r.frontier.end();
    csv << p.slots << ',' << fmt_real(p.energy) << ',' << fmt_real(p.ser_any) << ',' << part << ','
        << (pareto ? 1 : 0) << ',' << (*idx == r.best ? 1 : 0) << '\n';
  }
  return {csv.str(), {}};
}

inline Output run(Kind kind, const Json& cfg, const RunOptions& opt = {}) {
  switch (kind) {
    case Kind::kSerSweep: return run_ser_sweep(cfg, opt);
    case Kind::kEnergyCompare: return run_energy_compare(cfg, opt);
    case Kind::kSessionSim: return run_session_sim(cfg, opt);
    case Kind::kExtractDemo: return run_extract_demo(cfg, opt);
    case Kind::kGrouping: return run_grouping(cfg, opt);
  }
  throw ArgumentError("unknown experiment kind");
}

}  // namespace stac::experiments
