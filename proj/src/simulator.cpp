#include "vrrw/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vrrw/errors.hpp"

namespace vrrw {

// ---------------------------------------------------------------------------
// Initial configurations

InitialConfig InitialConfig::c0() { return custom({{0, 1}}, 0); }

InitialConfig InitialConfig::custom(const std::map<std::int64_t, std::int64_t>& z0, std::int64_t start) {
  InitialConfig c;
  for (const auto& [x, z] : z0) {
    if (z < 0) {
      throw ConfigError("negative initial local time z_0(" + std::to_string(x) + ") = " + std::to_string(z));
    }
    if (z > 0) c.z0_[x] = static_cast<std::uint64_t>(z);
  }
  c.start_ = start;
  return c;
}

std::uint64_t InitialConfig::at(std::int64_t x) const {
  const auto it = z0_.find(x);
  return it == z0_.end() ? 0 : it->second;
}

nlohmann::json InitialConfig::to_json() const {
  nlohmann::json sites = nlohmann::json::array();
  for (const auto& [x, z] : z0_) sites.push_back({x, z});
  return {{"start", start_}, {"z0", sites}};
}

InitialConfig InitialConfig::from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "C0") return c0();
    throw ConfigError("unknown named configuration '" + j.get<std::string>() + "'");
  }
  std::map<std::int64_t, std::int64_t> z0;
  for (const auto& e : j.at("z0")) z0[e.at(0).get<std::int64_t>()] = e.at(1).get<std::int64_t>();
  return custom(z0, j.value("start", std::int64_t{0}));
}

std::string violated_CNEtaBeta(const WeightModel& m, const InitialConfig& c, std::uint64_t N, double eta,
                               double beta) {
  const auto z = [&](std::int64_t x) { return c.at(x); };
  const auto W = [&](std::uint64_t k) { return m.W(static_cast<double>(k)); };
  if (z(-1) > z(-2) + z(0)) return "z0(-1) <= z0(-2) + z0(0)";
  if (std::min(z(-1), z(0)) < N) return "min(z0(-1), z0(0)) >= N";
  if (W(z(-2)) > W(z(0)) - eta) return "W(z0(-2)) <= W(z0(0)) - eta";
  if (W(z(-3)) > W(z(-1)) / 2 - beta) return "W(z0(-3)) <= W(z0(-1))/2 - beta";
  return {};
}

namespace {

// Largest integer m with W(m) <= u, or nullopt when u < 0.
std::optional<std::uint64_t> floor_Winv(const WeightModel& m, double u) {
  if (u < 0) return std::nullopt;
  auto k = static_cast<std::uint64_t>(std::floor(m.Winv(u)));
  while (k > 0 && m.W(static_cast<double>(k)) > u) --k;
  while (m.W(static_cast<double>(k + 1)) <= u) ++k;
  return k;
}

}  // namespace

InitialConfig build_CNEtaBeta(const WeightModel& m, std::uint64_t N, double eta, double beta) {
  if (!(eta > 0 && eta < 1)) throw DomainError("eta must lie in (0, 1)");
  if (N < 1) throw DomainError("N must be at least 1");
  const double WN = m.W(static_cast<double>(N));
  const auto z2 = floor_Winv(m, WN - eta);
  if (!z2) throw InfeasibleError("no z0(-2) satisfies W(z0(-2)) <= W(z0(0)) - eta at N = " + std::to_string(N));
  const auto z3 = floor_Winv(m, WN / 2 - beta);
  if (!z3) {
    throw InfeasibleError("no z0(-3) satisfies W(z0(-3)) <= W(z0(-1))/2 - beta at N = " + std::to_string(N) +
                          " (beta too large)");
  }
  const auto n = static_cast<std::int64_t>(N);
  return InitialConfig::custom({{0, n},
                                {-1, n},
                                {-2, static_cast<std::int64_t>(*z2)},
                                {-3, static_cast<std::int64_t>(*z3)}},
                               0);
}

// ---------------------------------------------------------------------------

WeightCache::WeightCache(const WeightModel& m, std::uint64_t size) : spec_(m.spec()) {
  if (auto t = spec_.table_size(); t && spec_.tail_rule().kind == TailRule::Kind::kNone) {
    size = std::min<std::uint64_t>(size, *t);
  }
  auto& table = m.table();
  size = std::min(size, table.frozen() ? table.capacity() : table.ensure(size));
  w_.resize(size);
  s1_.resize(size + 1);
  for (std::uint64_t n = 0; n < size; ++n) w_[n] = spec_(n);
  for (std::uint64_t n = 0; n <= size; ++n) s1_[n] = m.table().s1(n);
}

double WeightCache::W(std::uint64_t n) const {
  if (n >= s1_.size()) {
    throw ResourceError("weight cache holds W(n) only for n < " + std::to_string(s1_.size()),
                        static_cast<double>(s1_.size() - 1));
  }
  return s1_[n];
}

// ---------------------------------------------------------------------------
// Snapshots

std::uint64_t Snapshot::Z_at(std::int64_t x) const {
  if (x < lo || x >= lo + static_cast<std::int64_t>(Z.size())) return 0;
  return Z[static_cast<std::size_t>(x - lo)];
}

bool Snapshot::tracked(std::int64_t x) const {
  return has_trackers && x >= t_lo && x < t_lo + static_cast<std::int64_t>(Y_plus.size());
}

double Snapshot::M(std::int64_t x) const {
  const auto i = static_cast<std::size_t>(x - t_lo);
  return Y_plus.at(i) - Y_minus.at(i);
}

nlohmann::json Snapshot::to_json() const {
  nlohmann::json j = {{"n", n}, {"position", position}, {"lo", lo}, {"Z", Z}};
  if (has_trackers) {
    j["trackers"] = {{"lo", t_lo},     {"Y_plus", Y_plus},   {"Y_minus", Y_minus},
                     {"h", h},         {"N_right", N_right}, {"N_left", N_left}};
  }
  if (U) j["U"] = *U;
  if (window) j["window"] = true;
  return j;
}

Snapshot Snapshot::from_json(const nlohmann::json& j) {
  Snapshot s;
  s.n = j.at("n").get<std::uint64_t>();
  s.position = j.at("position").get<std::int64_t>();
  s.lo = j.at("lo").get<std::int64_t>();
  s.Z = j.at("Z").get<std::vector<std::uint64_t>>();
  if (j.contains("trackers")) {
    const auto& t = j["trackers"];
    s.has_trackers = true;
    s.t_lo = t.at("lo").get<std::int64_t>();
    s.Y_plus = t.at("Y_plus").get<std::vector<double>>();
    s.Y_minus = t.at("Y_minus").get<std::vector<double>>();
    s.h = t.at("h").get<std::vector<double>>();
    s.N_right = t.at("N_right").get<std::vector<std::uint64_t>>();
    s.N_left = t.at("N_left").get<std::vector<std::uint64_t>>();
  }
  if (j.contains("U")) s.U = j["U"].get<double>();
  s.window = j.value("window", false);
  return s;
}

// ---------------------------------------------------------------------------
// Walk

Walk::Walk(std::shared_ptr<const WeightCache> cache, const InitialConfig& config, const WalkOptions& opts,
           SplitStream rng)
    : cache_(std::move(cache)), config_(config), opts_(opts), rng_(rng), pos_(config.start()) {
  if (opts_.bounds) {
    const auto& b = *opts_.bounds;
    if (b.left > b.right) throw ConfigError("reflecting bounds need left <= right");
    if (b.left == b.right) throw ConfigError("reflecting bounds need at least two sites");
    if (!b.contains(pos_)) throw ConfigError("start position lies outside the reflecting bounds");
  }
  std::int64_t lo = pos_, hi = pos_;
  for (const auto& [x, z] : config_.entries()) lo = std::min(lo, x), hi = std::max(hi, x);
  vis_lo_ = lo;
  vis_hi_ = hi;
  if (opts_.bounds) {
    lo = std::min(lo, opts_.bounds->left);
    hi = std::max(hi, opts_.bounds->right);
  }
  const std::int64_t pad = opts_.bounds ? 1 : 32;
  lo_ = lo - pad;
  const auto size = static_cast<std::size_t>(hi - lo + 2 * pad + 1);
  z_.assign(size, 0);
  wz_.resize(size);
  for (const auto& [x, z] : config_.entries()) z_[idx(x)] = z;
  for (std::size_t i = 0; i < size; ++i) wz_[i] = site_weight(lo_ + static_cast<std::int64_t>(i), z_[i]);
  if (opts_.trackers.enabled) {
    yp_.resize(size);
    ym_.resize(size);
    hh_.resize(size);
    np_.assign(size, 0);
    nm_.assign(size, 0);
  }
}

double Walk::site_weight(std::int64_t x, std::uint64_t z) const {
  if (opts_.bounds && !opts_.bounds->contains(x)) return 0.0;
  return cache_->w(z);
}

std::uint64_t Walk::Z(std::int64_t x) const {
  if (x < lo_ || x >= lo_ + static_cast<std::int64_t>(z_.size())) return config_.at(x);
  return z_[idx(x)];
}

double Walk::p_left() const {
  const std::size_t j = idx(pos_);
  return wz_[j - 1] / (wz_[j - 1] + wz_[j + 1]);
}

bool Walk::tracked(std::int64_t x) const {
  return opts_.trackers.enabled && x >= opts_.trackers.lo && x <= opts_.trackers.hi;
}

namespace {
template <class T>
T tracker_value(const std::vector<T>& v, std::int64_t lo, std::int64_t x) {
  if (x < lo || x >= lo + static_cast<std::int64_t>(v.size())) return T{};
  return v[static_cast<std::size_t>(x - lo)];
}
}  // namespace

double Walk::Y_plus(std::int64_t x) const { return tracked(x) ? tracker_value(yp_, lo_, x).value() : 0.0; }
double Walk::Y_minus(std::int64_t x) const { return tracked(x) ? tracker_value(ym_, lo_, x).value() : 0.0; }
double Walk::h(std::int64_t x) const { return tracked(x) ? tracker_value(hh_, lo_, x).value() : 0.0; }
std::uint64_t Walk::N_right(std::int64_t x) const { return tracked(x) ? tracker_value(np_, lo_, x) : 0; }
std::uint64_t Walk::N_left(std::int64_t x) const { return tracked(x) ? tracker_value(nm_, lo_, x) : 0; }

bool Walk::grow() {
  const std::size_t old = z_.size();
  const std::size_t size = 2 * old;
  if (size > opts_.max_range) return false;
  const auto shift = static_cast<std::int64_t>(old / 2);
  const std::int64_t new_lo = lo_ - shift;
  auto regrow = [&](auto& v, auto fill) {
    using V = std::decay_t<decltype(v)>;
    V next(size, fill);
    std::copy(v.begin(), v.end(), next.begin() + shift);
    v.swap(next);
  };
  regrow(z_, std::uint64_t{0});
  regrow(wz_, 0.0);
  for (std::size_t i = 0; i < size; ++i) {
    if (i < static_cast<std::size_t>(shift) || i >= static_cast<std::size_t>(shift) + old) {
      wz_[i] = site_weight(new_lo + static_cast<std::int64_t>(i), z_[i]);
    }
  }
  if (opts_.trackers.enabled) {
    regrow(yp_, CompensatedSum{});
    regrow(ym_, CompensatedSum{});
    regrow(hh_, CompensatedSum{});
    regrow(np_, std::uint64_t{0});
    regrow(nm_, std::uint64_t{0});
  }
  lo_ = new_lo;
  return true;
}

template <bool Track>
void Walk::advance_impl(std::uint64_t k) {
  const std::int64_t t_lo = opts_.trackers.lo, t_hi = opts_.trackers.hi;
  const std::size_t last = z_.size() - 1;
  std::size_t edge = last;
  for (std::uint64_t i = 0; i < k; ++i) {
    std::size_t j = idx(pos_);
    const double wl = wz_[j - 1], wr = wz_[j + 1];
    const double pl = wl / (wl + wr);
    const bool left = rng_.uniform() < pl;
    const std::size_t jy = left ? j - 1 : j + 1;
    if constexpr (Track) {
      if (pos_ >= t_lo && pos_ <= t_hi) {
        // Y^{+-}(x) uses the destination's local time before the jump.
        const double inv = 1.0 / wz_[jy];
        if (left) {
          ym_[j] += inv;
          ++nm_[j];
          if (pos_ - 1 >= t_lo) max_imbalance_ = std::max(max_imbalance_, nm_[j] > np_[j - 1] ? nm_[j] - np_[j - 1] : np_[j - 1] - nm_[j]);
        } else {
          yp_[j] += inv;
          ++np_[j];
          if (pos_ + 1 <= t_hi) max_imbalance_ = std::max(max_imbalance_, np_[j] > nm_[j + 1] ? np_[j] - nm_[j + 1] : nm_[j + 1] - np_[j]);
        }
      }
    }
    const std::uint64_t z = ++z_[jy];
    wz_[jy] = cache_->w(z);
    pos_ += left ? -1 : 1;
    ++n_;
    if (pos_ < vis_lo_) vis_lo_ = pos_;
    if (pos_ > vis_hi_) vis_hi_ = pos_;
    if (jy == 0 || jy == edge) {
      if (!grow()) {
        truncated_ = true;
        return;
      }
      edge = z_.size() - 1;
    }
    if constexpr (Track) {
      if (pos_ >= t_lo && pos_ <= t_hi) {
        // Corrector term for this visit: (2 p - 1) / w(Z(x)), with p the
        // left-jump probability the walk will use when leaving.
        j = idx(pos_);
        const double a = wz_[j - 1], b = wz_[j + 1];
        hh_[j] += (2.0 * a / (a + b) - 1.0) / wz_[j];
      }
    }
  }
}

void Walk::advance(std::uint64_t k) {
  if (truncated_) return;
  if (opts_.trackers.enabled) advance_impl<true>(k);
  else advance_impl<false>(k);
}

Snapshot Walk::snapshot() const {
  Snapshot s;
  s.n = n_;
  s.position = pos_;
  s.lo = vis_lo_;
  for (std::int64_t x = vis_lo_; x <= vis_hi_; ++x) s.Z.push_back(Z(x));
  if (opts_.trackers.enabled) {
    const std::int64_t a = std::max(vis_lo_ - 1, opts_.trackers.lo);
    const std::int64_t b = std::min(vis_hi_ + 1, opts_.trackers.hi);
    s.has_trackers = true;
    s.t_lo = a;
    for (std::int64_t x = a; x <= b; ++x) {
      s.Y_plus.push_back(Y_plus(x));
      s.Y_minus.push_back(Y_minus(x));
      s.h.push_back(h(x));
      s.N_right.push_back(N_right(x));
      s.N_left.push_back(N_left(x));
    }
  }
  if (opts_.bounds && *opts_.bounds == Bounds{-3, 0}) {
    s.U = cache_->W(Z(-3)) - cache_->W(Z(-1)) / 2;
  }
  return s;
}

Walk new_walk(const WeightModel& m, const InitialConfig& config, const std::optional<Bounds>& bounds,
              std::uint64_t seed, TrackerOptions trackers) {
  auto cache = std::make_shared<const WeightCache>(m, std::uint64_t{1} << 16);
  WalkOptions opts;
  opts.bounds = bounds;
  opts.trackers = trackers;
  return Walk(std::move(cache), config, opts, SplitStream(seed));
}

// ---------------------------------------------------------------------------
// Runs and records

RunRecord run(Walk& walk, const RunOptions& opts) {
  if (opts.horizon < 1) throw ConfigError("run horizon must be at least 1");
  if (!std::is_sorted(opts.checkpoints.begin(), opts.checkpoints.end())) {
    throw ConfigError("checkpoint schedule must be sorted");
  }
  std::set<std::uint64_t> requested(opts.checkpoints.begin(), opts.checkpoints.end());
  requested.insert(opts.horizon);
  std::set<std::uint64_t> windows;
  for (std::uint64_t c : requested) {
    if (c > opts.horizon) throw ConfigError("checkpoint past the horizon");
    for (double phi : opts.phis) {
      if (!(phi > 0 && phi < 1)) throw ConfigError("window fraction phi must lie in (0, 1)");
      const auto w = static_cast<std::uint64_t>(std::floor((1.0 - phi) * static_cast<double>(c)));
      if (!requested.count(w)) windows.insert(w);
    }
  }
  std::set<std::uint64_t> all(requested);
  all.insert(windows.begin(), windows.end());

  RunRecord rec;
  rec.spec_id = walk.cache().spec().id();
  rec.config = walk.config();
  rec.bounds = walk.bounds();
  rec.horizon = opts.horizon;
  rec.phis = opts.phis;
  for (std::uint64_t target : all) {
    if (target < walk.n()) continue;
    walk.advance(target - walk.n());
    if (walk.truncated()) break;
    auto s = walk.snapshot();
    s.window = windows.count(target) > 0;
    rec.snapshots.push_back(std::move(s));
  }
  rec.truncated = walk.truncated();
  rec.max_crossing_imbalance = walk.max_crossing_imbalance();
  return rec;
}

const Snapshot* RunRecord::at(std::uint64_t n) const {
  for (const auto& s : snapshots) {
    if (s.n == n) return &s;
  }
  return nullptr;
}

std::vector<std::string> RunRecord::to_jsonl() const {
  nlohmann::json header = {{"schema_version", schema_version},
                           {"fingerprint", fingerprint},
                           {"spec", spec_id},
                           {"replica", replica},
                           {"seed", seed},
                           {"config", config.to_json()},
                           {"horizon", horizon},
                           {"phis", phis},
                           {"truncated", truncated},
                           {"max_crossing_imbalance", max_crossing_imbalance}};
  header["bounds"] = bounds ? nlohmann::json{bounds->left, bounds->right} : nlohmann::json(nullptr);
  nlohmann::json ts = nlohmann::json::array();
  for (const auto& [phi, sites] : tail_support) ts.push_back({{"phi", phi}, {"sites", sites}});
  header["tail_support"] = ts;
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    nlohmann::json line = header;
    line["index"] = i;
    line["count"] = snapshots.size();
    line["checkpoint"] = snapshots[i].to_json();
    lines.push_back(line.dump());
  }
  return lines;
}

std::vector<RunRecord> RunRecord::from_jsonl(const std::vector<std::string>& lines) {
  std::vector<RunRecord> out;
  for (const auto& text : lines) {
    if (text.empty()) continue;
    const auto j = nlohmann::json::parse(text);
    const auto spec = j.at("spec").get<std::string>();
    const auto replica = j.at("replica").get<std::uint64_t>();
    const auto fp = j.at("fingerprint").get<std::string>();
    if (out.empty() || out.back().spec_id != spec || out.back().replica != replica ||
        out.back().fingerprint != fp || j.at("index").get<std::size_t>() == 0) {
      RunRecord r;
      r.schema_version = j.at("schema_version").get<int>();
      if (r.schema_version != kRecordSchemaVersion) {
        throw ConfigError("unsupported record schema version " + std::to_string(r.schema_version));
      }
      r.fingerprint = fp;
      r.spec_id = spec;
      r.replica = replica;
      r.seed = j.at("seed").get<std::uint64_t>();
      r.config = InitialConfig::from_json(j.at("config"));
      if (!j.at("bounds").is_null()) r.bounds = Bounds{j["bounds"][0], j["bounds"][1]};
      r.horizon = j.at("horizon").get<std::uint64_t>();
      r.phis = j.at("phis").get<std::vector<double>>();
      r.truncated = j.at("truncated").get<bool>();
      r.max_crossing_imbalance = j.at("max_crossing_imbalance").get<std::uint64_t>();
      for (const auto& e : j.at("tail_support")) {
        r.tail_support[e.at("phi").get<double>()] = e.at("sites").get<std::vector<std::int64_t>>();
      }
      out.push_back(std::move(r));
    }
    out.back().snapshots.push_back(Snapshot::from_json(j.at("checkpoint")));
  }
  return out;
}

}  // namespace vrrw
