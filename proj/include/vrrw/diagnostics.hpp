#pragma once

// Pure post-processing of run records: tail supports, identity residuals and
// the monitors used for localization experiments. Indicators here describe a
// finite trajectory; they do not certify almost-sure limits.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vrrw/simulator.hpp"
#include "vrrw/weights.hpp"

namespace vrrw {

struct TailSupport {
  double phi = 0.1;
  std::uint64_t horizon = 0;
  std::vector<std::int64_t> sites;  // sorted
  std::size_t cardinality() const { return sites.size(); }
};

/// Sites whose local time strictly increased between the snapshots at
/// floor((1 - phi) c) and c, where c defaults to the last snapshot.
/// InsufficientDataError when either snapshot is missing.
TailSupport tail_support(const RunRecord& r, double phi, std::optional<std::uint64_t> at = std::nullopt);

struct MonitorSeries {
  std::string name;
  std::vector<std::pair<std::uint64_t, double>> points;  // (n, value), n strictly increasing
  nlohmann::json summary = nlohmann::json::object();

  nlohmann::json to_json() const;
  /// "n,value" rows under a header.
  std::string to_csv() const;
};

/// |Y+(x-1) + Y-(x+1) - (W(Z(x)) - W(z0(x)))| per snapshot; 0 at snapshots
/// where x lies outside the visited range. ConfigError when x-1 or x+1 was
/// not registered as a tracker.
MonitorSeries eqW_residual(const RunRecord& r, const WeightModel& m, std::int64_t x);

/// The site playing the role of the centre of a five-site localization: the
/// middle of the final tail support when its size is odd, otherwise its site
/// of largest local time. InsufficientDataError on an empty record.
std::int64_t localization_center(const RunRecord& r, double phi = 0.1);

/// Z(c) - max(Z(c-1), Z(c+1)). Summary "drift" is the fraction of
/// final-quarter points above the first-quarter maximum; fewer than two
/// snapshots leave it undefined ("defined": false).
MonitorSeries center_dominance(const RunRecord& r, std::int64_t center);

/// W(Z(c-1)) - W(Z(c+1)), with the last value and the final-quarter
/// oscillation (max - min) as summary.
MonitorSeries asymmetry_monitor(const RunRecord& r, const WeightModel& m, std::int64_t center);

/// sup over snapshots of W(Z(c)) - 2 W(Z(c-2)): the smallest beta for which
/// W(Z_n(2)) <= 2 W(Z_n(0)) + beta holds along the record, with site 2 at c.
double beta_envelope(const RunRecord& r, const WeightModel& m, std::int64_t center);

/// U(n) = W(Z(-3)) - W(Z(-1))/2 per snapshot, running supremum in the
/// summary. ConfigError when the record carries no U values.
MonitorSeries u_monitor(const RunRecord& r);

struct LocalizationReport {
  double phi = 0.1;
  // horizon -> (|tail support| -> number of records)
  std::map<std::uint64_t, std::map<std::size_t, std::size_t>> histogram;
  std::size_t records = 0;
  std::size_t insufficient = 0;  // (record, horizon) pairs lacking a window

  /// Fraction of records at the given horizon whose tail support has size k.
  double fraction(std::uint64_t horizon, std::size_t k) const;
  std::size_t modal_cardinality(std::uint64_t horizon) const;
  nlohmann::json to_json() const;
  /// "horizon,cardinality,count" rows.
  std::string to_csv() const;
};

/// Histogram of tail-support sizes over the requested (non-window)
/// checkpoints of every record.
LocalizationReport localization_report(const std::vector<RunRecord>& records, double phi = 0.1);

}  // namespace vrrw
