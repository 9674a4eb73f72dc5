#include "vrrw/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "vrrw/errors.hpp"

namespace vrrw {

namespace {

double Wd(const WeightModel& m, std::uint64_t k) { return m.W(static_cast<double>(k)); }

std::size_t quarter(std::size_t k) { return std::max<std::size_t>(1, (k + 3) / 4); }

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

TailSupport tail_support(const RunRecord& r, double phi, std::optional<std::uint64_t> at) {
  if (!(phi > 0 && phi < 1)) throw DomainError("window fraction phi must lie in (0, 1)");
  if (r.snapshots.empty()) throw InsufficientDataError("record has no snapshots");
  const std::uint64_t c = at.value_or(r.snapshots.back().n);
  const auto start = static_cast<std::uint64_t>(std::floor((1.0 - phi) * static_cast<double>(c)));
  const Snapshot* end = r.at(c);
  const Snapshot* begin = r.at(start);
  if (!end || !begin) {
    throw InsufficientDataError("no snapshot pair spans the window [" + std::to_string(start) + ", " +
                                std::to_string(c) + "]");
  }
  TailSupport ts;
  ts.phi = phi;
  ts.horizon = c;
  for (std::size_t i = 0; i < end->Z.size(); ++i) {
    const std::int64_t x = end->lo + static_cast<std::int64_t>(i);
    if (end->Z[i] > begin->Z_at(x)) ts.sites.push_back(x);
  }
  return ts;
}

nlohmann::json MonitorSeries::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& [n, v] : points) pts.push_back({n, v});
  return {{"name", name}, {"points", pts}, {"summary", summary}};
}

std::string MonitorSeries::to_csv() const {
  std::string out = "n," + name + "\n";
  for (const auto& [n, v] : points) out += std::to_string(n) + "," + format_double(v) + "\n";
  return out;
}

MonitorSeries eqW_residual(const RunRecord& r, const WeightModel& m, std::int64_t x) {
  MonitorSeries s;
  s.name = "eqW_residual";
  double worst = 0.0;
  const double base = Wd(m, r.config.at(x));
  for (const auto& snap : r.snapshots) {
    if (!snap.has_trackers) throw ConfigError("record carries no tracker values");
    const bool visited = x >= snap.lo && x < snap.lo + static_cast<std::int64_t>(snap.Z.size());
    if (!visited) {
      // Never entered, never left: both sides vanish.
      s.points.emplace_back(snap.n, 0.0);
      continue;
    }
    if (!snap.tracked(x - 1) || !snap.tracked(x + 1)) {
      throw ConfigError("sites " + std::to_string(x - 1) + " and " + std::to_string(x + 1) +
                        " must be registered trackers");
    }
    const double lhs = snap.Y_plus[static_cast<std::size_t>(x - 1 - snap.t_lo)] +
                       snap.Y_minus[static_cast<std::size_t>(x + 1 - snap.t_lo)];
    const double res = std::abs(lhs - (Wd(m, snap.Z_at(x)) - base));
    worst = std::max(worst, res);
    s.points.emplace_back(snap.n, res);
  }
  s.summary = {{"site", x}, {"max", worst}};
  return s;
}

std::int64_t localization_center(const RunRecord& r, double phi) {
  if (r.snapshots.empty()) throw InsufficientDataError("record has no snapshots");
  std::vector<std::int64_t> sites;
  try {
    sites = tail_support(r, phi).sites;
  } catch (const InsufficientDataError&) {
  }
  const auto& last = r.snapshots.back();
  if (sites.empty()) {
    for (std::size_t i = 0; i < last.Z.size(); ++i) sites.push_back(last.lo + static_cast<std::int64_t>(i));
  }
  if (sites.size() % 2 == 1) return sites[sites.size() / 2];
  return *std::max_element(sites.begin(), sites.end(),
                           [&](std::int64_t a, std::int64_t b) { return last.Z_at(a) < last.Z_at(b); });
}

MonitorSeries center_dominance(const RunRecord& r, std::int64_t c) {
  MonitorSeries s;
  s.name = "center_dominance";
  for (const auto& snap : r.snapshots) {
    const double side = static_cast<double>(std::max(snap.Z_at(c - 1), snap.Z_at(c + 1)));
    s.points.emplace_back(snap.n, static_cast<double>(snap.Z_at(c)) - side);
  }
  s.summary = {{"center", c}};
  const std::size_t k = s.points.size();
  if (k < 2) {
    s.summary["defined"] = false;
    return s;
  }
  const std::size_t q = quarter(k);
  double first_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < q; ++i) first_max = std::max(first_max, s.points[i].second);
  std::size_t above = 0;
  for (std::size_t i = k - q; i < k; ++i) above += s.points[i].second > first_max;
  s.summary["defined"] = true;
  s.summary["drift"] = static_cast<double>(above) / static_cast<double>(q);
  return s;
}

MonitorSeries asymmetry_monitor(const RunRecord& r, const WeightModel& m, std::int64_t c) {
  MonitorSeries s;
  s.name = "asymmetry";
  for (const auto& snap : r.snapshots) {
    s.points.emplace_back(snap.n, Wd(m, snap.Z_at(c - 1)) - Wd(m, snap.Z_at(c + 1)));
  }
  s.summary = {{"center", c}};
  if (s.points.empty()) return s;
  const std::size_t k = s.points.size();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = k - quarter(k); i < k; ++i) {
    lo = std::min(lo, s.points[i].second);
    hi = std::max(hi, s.points[i].second);
  }
  s.summary["last"] = s.points.back().second;
  s.summary["oscillation"] = hi - lo;
  return s;
}

double beta_envelope(const RunRecord& r, const WeightModel& m, std::int64_t c) {
  if (r.snapshots.empty()) throw InsufficientDataError("record has no snapshots");
  double sup = -std::numeric_limits<double>::infinity();
  for (const auto& snap : r.snapshots) sup = std::max(sup, Wd(m, snap.Z_at(c)) - 2 * Wd(m, snap.Z_at(c - 2)));
  return sup;
}

MonitorSeries u_monitor(const RunRecord& r) {
  MonitorSeries s;
  s.name = "U";
  double sup = -std::numeric_limits<double>::infinity();
  for (const auto& snap : r.snapshots) {
    if (!snap.U) throw ConfigError("record carries no U values (needs a run reflected on {-3, ..., 0})");
    sup = std::max(sup, *snap.U);
    s.points.emplace_back(snap.n, *snap.U);
  }
  if (s.points.empty()) throw ConfigError("record carries no U values");
  s.summary = {{"sup", sup}, {"initial", s.points.front().second}, {"last", s.points.back().second}};
  return s;
}

double LocalizationReport::fraction(std::uint64_t horizon, std::size_t k) const {
  const auto it = histogram.find(horizon);
  if (it == histogram.end()) return 0.0;
  std::size_t total = 0, hit = 0;
  for (const auto& [card, count] : it->second) {
    total += count;
    if (card == k) hit = count;
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

std::size_t LocalizationReport::modal_cardinality(std::uint64_t horizon) const {
  const auto it = histogram.find(horizon);
  if (it == histogram.end() || it->second.empty()) return 0;
  return std::max_element(it->second.begin(), it->second.end(),
                          [](const auto& a, const auto& b) { return a.second < b.second; })
      ->first;
}

nlohmann::json LocalizationReport::to_json() const {
  nlohmann::json h = nlohmann::json::array();
  for (const auto& [horizon, counts] : histogram) {
    nlohmann::json c = nlohmann::json::object();
    for (const auto& [card, count] : counts) c[std::to_string(card)] = count;
    h.push_back({{"horizon", horizon}, {"counts", c}, {"modal", modal_cardinality(horizon)}});
  }
  return {{"phi", phi}, {"records", records}, {"insufficient", insufficient}, {"histogram", h}};
}

std::string LocalizationReport::to_csv() const {
  std::string out = "horizon,cardinality,count\n";
  for (const auto& [horizon, counts] : histogram) {
    for (const auto& [card, count] : counts) {
      out += std::to_string(horizon) + "," + std::to_string(card) + "," + std::to_string(count) + "\n";
    }
  }
  return out;
}

LocalizationReport localization_report(const std::vector<RunRecord>& records, double phi) {
  LocalizationReport rep;
  rep.phi = phi;
  rep.records = records.size();
  for (const auto& r : records) {
    for (const auto& snap : r.snapshots) {
      if (snap.window || snap.n == 0) continue;
      try {
        const auto k = tail_support(r, phi, snap.n).cardinality();
        rep.histogram[snap.n][k] += 1;
      } catch (const InsufficientDataError&) {
        ++rep.insufficient;
      }
    }
  }
  return rep;
}

}  // namespace vrrw
