#pragma once

// Vertex reinforced random walk on Z (or on a segment with reflection) with
// local times, optional per-site trackers and checkpointed run records.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vrrw/compensated_sum.hpp"
#include "vrrw/rng.hpp"
#include "vrrw/weights.hpp"

namespace vrrw {

struct Bounds {
  std::int64_t left = 0;
  std::int64_t right = 0;
  bool contains(std::int64_t x) const { return x >= left && x <= right; }
  bool operator==(const Bounds&) const = default;
};

class InitialConfig {
 public:
  /// z_0(0) = 1, all other sites 0.
  static InitialConfig c0();
  /// Arbitrary finite configuration; negative entries are a ConfigError.
  static InitialConfig custom(const std::map<std::int64_t, std::int64_t>& z0, std::int64_t start = 0);

  std::uint64_t at(std::int64_t x) const;
  std::int64_t start() const { return start_; }
  const std::map<std::int64_t, std::uint64_t>& entries() const { return z0_; }

  nlohmann::json to_json() const;
  static InitialConfig from_json(const nlohmann::json& j);
  bool operator==(const InitialConfig&) const = default;

 private:
  std::map<std::int64_t, std::uint64_t> z0_;  // nonzero entries only
  std::int64_t start_ = 0;
};

/// Checks the four constraints of C_{N,eta,beta}. Returns the first violated
/// one as text, or an empty string.
std::string violated_CNEtaBeta(const WeightModel& m, const InitialConfig& c, std::uint64_t N, double eta,
                               double beta);

/// z_0(0) = z_0(-1) = N, z_0(-2) = max{m : W(m) <= W(N) - eta},
/// z_0(-3) = max{m : W(m) <= W(N)/2 - beta}. InfeasibleError names the
/// constraint that cannot be met.
InitialConfig build_CNEtaBeta(const WeightModel& m, std::uint64_t N, double eta, double beta);

/// Frozen lookup of w(n) and W(n) = S1[n] for integer n < size, shared
/// read-only across walks; larger n fall back to the weight formula.
class WeightCache {
 public:
  WeightCache(const WeightModel& m, std::uint64_t size);
  double w(std::uint64_t n) const { return n < w_.size() ? w_[n] : spec_(n); }
  /// W(n), exact from the prefix table.
  double W(std::uint64_t n) const;
  std::uint64_t size() const { return w_.size(); }
  const WeightSpec& spec() const { return spec_; }

 private:
  WeightSpec spec_;
  std::vector<double> w_;
  std::vector<double> s1_;
};

struct TrackerOptions {
  bool enabled = false;
  // Sites tracked: every site in [lo, hi].
  std::int64_t lo = INT64_MIN;
  std::int64_t hi = INT64_MAX;
};

struct WalkOptions {
  std::optional<Bounds> bounds;
  TrackerOptions trackers;
  // Largest local-time array (sites) before the run is cut short.
  std::uint64_t max_range = std::uint64_t{1} << 26;
};

struct Snapshot {
  std::uint64_t n = 0;
  std::int64_t position = 0;
  // Local times Z_n(x) for x = lo, lo+1, ... over the visited range.
  std::int64_t lo = 0;
  std::vector<std::uint64_t> Z;
  // Tracker values for tracked sites x = t_lo, t_lo+1, ...
  bool has_trackers = false;
  std::int64_t t_lo = 0;
  std::vector<double> Y_plus, Y_minus, h;
  std::vector<std::uint64_t> N_right, N_left;  // N(x, x+1), N(x, x-1)
  std::optional<double> U;
  // Inserted to open a tail-support window rather than requested.
  bool window = false;

  std::uint64_t Z_at(std::int64_t x) const;
  bool tracked(std::int64_t x) const;
  double M(std::int64_t x) const;
  nlohmann::json to_json() const;
  static Snapshot from_json(const nlohmann::json& j);
};

class Walk {
 public:
  Walk(std::shared_ptr<const WeightCache> cache, const InitialConfig& config, const WalkOptions& opts,
       SplitStream rng);

  std::int64_t position() const { return pos_; }
  std::uint64_t n() const { return n_; }
  std::uint64_t Z(std::int64_t x) const;
  const InitialConfig& config() const { return config_; }
  const std::optional<Bounds>& bounds() const { return opts_.bounds; }
  const WeightCache& cache() const { return *cache_; }
  /// Left-jump probability from the current position.
  double p_left() const;
  bool truncated() const { return truncated_; }
  /// Largest |N(x, x+1) - N(x+1, x)| seen over tracked adjacent pairs.
  std::uint64_t max_crossing_imbalance() const { return max_imbalance_; }

  void step() { advance(1); }
  /// Up to k steps; stops early only when the range cap is hit.
  void advance(std::uint64_t k);

  bool tracked(std::int64_t x) const;
  double Y_plus(std::int64_t x) const;
  double Y_minus(std::int64_t x) const;
  double M(std::int64_t x) const { return Y_plus(x) - Y_minus(x); }
  double h(std::int64_t x) const;
  std::uint64_t N_right(std::int64_t x) const;
  std::uint64_t N_left(std::int64_t x) const;

  Snapshot snapshot() const;

 private:
  template <bool Track>
  void advance_impl(std::uint64_t k);
  bool grow();
  std::size_t idx(std::int64_t x) const { return static_cast<std::size_t>(x - lo_); }
  double site_weight(std::int64_t x, std::uint64_t z) const;

  std::shared_ptr<const WeightCache> cache_;
  InitialConfig config_;
  WalkOptions opts_;
  SplitStream rng_;
  std::int64_t pos_ = 0;
  std::uint64_t n_ = 0;
  // Dense arrays over [lo_, lo_ + size); the walk never stands on either end
  // cell, so both neighbours always exist.
  std::int64_t lo_ = 0;
  std::vector<std::uint64_t> z_;
  std::vector<double> wz_;  // w(Z(x)), or 0 outside the reflecting bounds
  std::vector<CompensatedSum> yp_, ym_, hh_;
  std::vector<std::uint64_t> np_, nm_;
  std::int64_t vis_lo_ = 0, vis_hi_ = 0;  // visited (or initially occupied) range
  bool truncated_ = false;
  std::uint64_t max_imbalance_ = 0;
};

Walk new_walk(const WeightModel& m, const InitialConfig& config, const std::optional<Bounds>& bounds,
              std::uint64_t seed, TrackerOptions trackers = {});

struct RunOptions {
  std::uint64_t horizon = 0;
  std::vector<std::uint64_t> checkpoints;  // sorted, <= horizon; horizon is always added
  // Each checkpoint c also gets a window snapshot at floor((1 - phi) c).
  std::vector<double> phis{0.1};
};

inline constexpr int kRecordSchemaVersion = 1;

struct RunRecord {
  int schema_version = kRecordSchemaVersion;
  std::string fingerprint;
  std::string spec_id;
  std::uint64_t replica = 0;
  std::uint64_t seed = 0;
  InitialConfig config;
  std::optional<Bounds> bounds;
  std::uint64_t horizon = 0;
  std::vector<double> phis;
  std::vector<Snapshot> snapshots;
  bool truncated = false;
  std::uint64_t max_crossing_imbalance = 0;
  // phi -> sites visited in the final phi-window of the run.
  std::map<double, std::vector<std::int64_t>> tail_support;

  /// One JSON object per snapshot, each carrying the record header.
  std::vector<std::string> to_jsonl() const;
  /// Reassembles records from JSONL lines (grouped by spec id and replica).
  static std::vector<RunRecord> from_jsonl(const std::vector<std::string>& lines);
  const Snapshot* at(std::uint64_t n) const;
};

RunRecord run(Walk& walk, const RunOptions& opts);

}  // namespace vrrw
