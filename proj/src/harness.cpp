#include "vrrw/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <memory>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "vrrw/errors.hpp"

namespace vrrw {

namespace {

using json = nlohmann::json;

const char* critical_key(CriticalParameter p) {
  switch (p) {
    case CriticalParameter::kAlphaC: return "alpha_c";
    case CriticalParameter::kBetaC: return "beta_c";
    case CriticalParameter::kBetaTildeC: return "beta_tilde_c";
  }
  return "?";
}

CriticalParameter critical_from_key(const std::string& s) {
  for (auto p : {CriticalParameter::kAlphaC, CriticalParameter::kBetaC, CriticalParameter::kBetaTildeC}) {
    if (s == critical_key(p)) return p;
  }
  throw ConfigError("unknown critical parameter '" + s + "' (expected alpha_c, beta_c or beta_tilde_c)");
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  const std::set<std::string> ok(known.begin(), known.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

// Shortest form that round-trips.
std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr)) {
    throw ResourceError("SHA-256 digest failed", 0.0);
  }
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Plan

InitialConfig ConfigChoice::build(const WeightModel& m) const {
  switch (kind) {
    case Kind::kC0: return InitialConfig::c0();
    case Kind::kCustom: return custom;
    case Kind::kCNEtaBeta: return build_CNEtaBeta(m, N, eta, beta);
  }
  return InitialConfig::c0();
}

json ConfigChoice::to_json() const {
  switch (kind) {
    case Kind::kC0: return "C0";
    case Kind::kCustom: return custom.to_json();
    case Kind::kCNEtaBeta: return {{"cnetabeta", {{"N", N}, {"eta", eta}, {"beta", beta}}}};
  }
  return nullptr;
}

ConfigChoice ConfigChoice::from_json(const json& j) {
  ConfigChoice c;
  if (j.is_string()) {
    if (j.get<std::string>() != "C0") throw ConfigError("unknown named configuration '" + j.get<std::string>() + "'");
    return c;
  }
  if (j.contains("cnetabeta")) {
    const auto& p = j["cnetabeta"];
    c.kind = Kind::kCNEtaBeta;
    c.N = p.at("N").get<std::uint64_t>();
    c.eta = p.at("eta").get<double>();
    c.beta = p.value("beta", 0.0);
    return c;
  }
  c.kind = Kind::kCustom;
  c.custom = InitialConfig::from_json(j);
  return c;
}

void ExperimentPlan::validate() const {
  if (specs.empty()) throw ConfigError("plan has no specs");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    const std::string where = "specs[" + std::to_string(i) + "]";
    if (s.replicas < 1) throw ConfigError(where + ".replicas must be at least 1");
    if (s.horizon < 1) throw ConfigError(where + ".horizon must be at least 1");
    if (!std::is_sorted(s.checkpoints.begin(), s.checkpoints.end())) {
      throw ConfigError(where + ".checkpoints must be sorted");
    }
    if (!s.checkpoints.empty() && s.checkpoints.back() > s.horizon) {
      throw ConfigError(where + ".checkpoints must not exceed the horizon");
    }
    if (s.phis.empty()) throw ConfigError(where + ".phis must not be empty");
    for (double phi : s.phis) {
      if (!(phi > 0 && phi < 1)) throw ConfigError(where + ".phis entries must lie in (0, 1)");
    }
    if (s.bounds && s.bounds->left >= s.bounds->right) throw ConfigError(where + ".bounds must satisfy left < right");
    if (s.config.kind == ConfigChoice::Kind::kCNEtaBeta && !(s.config.eta > 0 && s.config.eta < 1)) {
      throw ConfigError(where + ".config.cnetabeta.eta must lie in (0, 1)");
    }
  }
  if (workers < 1) throw ConfigError("workers must be at least 1");
}

json ExperimentPlan::canonical() const {
  json specs_j = json::array();
  for (const auto& s : specs) {
    json t = false;
    if (s.trackers.enabled) t = json{s.trackers.lo, s.trackers.hi};
    specs_j.push_back({{"weight", s.weight.to_json()},
                       {"horizon", s.horizon},
                       {"replicas", s.replicas},
                       {"checkpoints", s.checkpoints},
                       {"phis", s.phis},
                       {"config", s.config.to_json()},
                       {"bounds", s.bounds ? json{s.bounds->left, s.bounds->right} : json(nullptr)},
                       {"trackers", t}});
  }
  json crit = json::array();
  for (auto p : classifier.criticals) crit.push_back(critical_key(p));
  const auto& o = classifier.options;
  return {{"name", name},
          {"seed", seed},
          {"specs", specs_j},
          {"classifier",
           {{"enabled", classifier.enabled},
            {"criticals", crit},
            {"margin", o.margin},
            {"k_min", o.k_min},
            {"k_max", o.k_max},
            {"exact_cells", o.exact_cells},
            {"fit_points", o.fit_points}}}};
}

std::string ExperimentPlan::fingerprint() const { return sha256_hex(canonical().dump()); }

ExperimentPlan ExperimentPlan::from_json(const json& j) {
  reject_unknown(j, {"name", "seed", "specs", "classifier", "workers", "output_dir"}, "plan");
  ExperimentPlan p;
  p.name = j.value("name", p.name);
  p.seed = j.value("seed", std::uint64_t{0});
  p.workers = j.value("workers", 1u);
  if (j.contains("output_dir")) p.output_dir = j["output_dir"].get<std::string>();
  if (j.contains("classifier")) {
    const auto& c = j["classifier"];
    reject_unknown(c, {"enabled", "criticals", "margin", "k_min", "k_max", "exact_cells", "fit_points"}, "classifier");
    p.classifier.enabled = c.value("enabled", true);
    if (c.contains("criticals")) {
      p.classifier.criticals.clear();
      for (const auto& k : c["criticals"]) p.classifier.criticals.push_back(critical_from_key(k.get<std::string>()));
    }
    auto& o = p.classifier.options;
    o.margin = c.value("margin", o.margin);
    o.k_min = c.value("k_min", o.k_min);
    o.k_max = c.value("k_max", o.k_max);
    o.exact_cells = c.value("exact_cells", o.exact_cells);
    o.fit_points = c.value("fit_points", o.fit_points);
  }
  if (!j.contains("specs")) throw ConfigError("plan needs a 'specs' list");
  for (const auto& s : j.at("specs")) {
    reject_unknown(s, {"weight", "horizon", "replicas", "checkpoints", "phis", "config", "bounds", "trackers"},
                   "spec");
    SpecPlan sp;
    sp.weight = WeightSpec::from_json(s.at("weight"));
    sp.horizon = s.value("horizon", sp.horizon);
    sp.replicas = s.value("replicas", sp.replicas);
    if (s.contains("checkpoints")) sp.checkpoints = s["checkpoints"].get<std::vector<std::uint64_t>>();
    if (s.contains("phis")) sp.phis = s["phis"].get<std::vector<double>>();
    if (s.contains("config")) sp.config = ConfigChoice::from_json(s["config"]);
    if (s.contains("bounds") && !s["bounds"].is_null()) {
      sp.bounds = Bounds{s["bounds"].at(0).get<std::int64_t>(), s["bounds"].at(1).get<std::int64_t>()};
    }
    if (s.contains("trackers")) {
      const auto& t = s["trackers"];
      if (t.is_boolean()) {
        sp.trackers.enabled = t.get<bool>();
      } else {
        sp.trackers = {true, t.at(0).get<std::int64_t>(), t.at(1).get<std::int64_t>()};
      }
    }
    p.specs.push_back(std::move(sp));
  }
  p.validate();
  return p;
}

ExperimentPlan ExperimentPlan::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open plan file " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("plan file " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica) {
  return SplitStream::split(master, replica)();
}

std::string spec_slug(const WeightSpec& spec) {
  std::string out;
  for (char c : spec.id()) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_';
    out += ok ? c : '_';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Execution

json SpecClassification::to_json() const {
  json j = {{"spec", spec_id}};
  if (!error.empty()) {
    j["error"] = error;
    return j;
  }
  j["series"] = {{"recip", series.recip.to_json()}, {"recip_sq", series.recip_sq.to_json()}};
  json c = json::array();
  for (const auto& e : criticals) c.push_back(e.to_json());
  j["criticals"] = c;
  return j;
}

std::size_t ExperimentResult::failures() const {
  std::size_t n = 0;
  for (const auto& r : replicas) n += !r.error.empty();
  for (const auto& c : classifications) n += !c.error.empty();
  return n;
}

std::string ExperimentResult::summary_csv() const {
  std::string out =
      "spec,replica,seed,horizon,steps,truncated,max_crossing_imbalance,final_position,phi,tail_support_size,"
      "tail_support_sites,error\n";
  for (const auto& r : replicas) {
    if (!r.record) {
      out += csv_field(r.spec_id) + "," + std::to_string(r.replica) + "," + std::to_string(r.seed) + ",,,,,,,,," + csv_field(r.error) + "\n";
      continue;
    }
    const auto& rec = *r.record;
    const auto& last = rec.snapshots.back();
    for (double phi : rec.phis) {
      std::string size, sites;
      if (auto it = rec.tail_support.find(phi); it != rec.tail_support.end()) {
        size = std::to_string(it->second.size());
        for (std::size_t i = 0; i < it->second.size(); ++i) sites += (i ? " " : "") + std::to_string(it->second[i]);
      }
      out += csv_field(rec.spec_id) + "," + std::to_string(r.replica) + "," + std::to_string(r.seed) + "," +
             std::to_string(rec.horizon) + "," + std::to_string(last.n) + "," + (rec.truncated ? "1" : "0") + "," +
             std::to_string(rec.max_crossing_imbalance) + "," + std::to_string(last.position) + "," + fmt(phi) +
             "," + size + "," + sites + ",\n";
    }
  }
  return out;
}

std::string ExperimentResult::comparison_csv() const {
  std::string out =
      "spec,recip,recip_sq,alpha_c,beta_c,beta_tilde_c,beta_c_inconsistency,horizon,replicas,completed,phi,"
      "modal_tail_support,fraction_2,fraction_5\n";
  for (std::size_t s = 0; s < classifications.size(); ++s) {
    const auto& c = classifications[s];
    std::string verdicts[3];
    std::string incons;
    std::string recip, recip_sq;
    if (c.error.empty() && !c.series.recip.partials.empty()) {
      recip = to_string(c.series.recip.verdict);
      recip_sq = to_string(c.series.recip_sq.verdict);
    } else if (!c.error.empty()) {
      recip = recip_sq = "error";
    }
    for (const auto& e : c.criticals) {
      verdicts[static_cast<int>(e.parameter)] = to_string(e.verdict);
      if (e.parameter == CriticalParameter::kBetaC && !e.inconsistency.empty()) incons = e.inconsistency;
    }
    std::uint64_t horizon = 0, total = 0, done = 0;
    for (const auto& r : replicas) {
      if (r.spec_index != s) continue;
      ++total;
      if (r.record) {
        ++done;
        horizon = r.record->horizon;
      }
    }
    const auto& loc = localization[s];
    std::string modal, f2, f5;
    if (auto it = loc.histogram.find(horizon); it != loc.histogram.end()) {
      modal = std::to_string(loc.modal_cardinality(horizon));
      f2 = fmt(loc.fraction(horizon, 2));
      f5 = fmt(loc.fraction(horizon, 5));
    }
    out += csv_field(c.spec_id) + "," + recip + "," + recip_sq + "," + verdicts[0] + "," + verdicts[1] + "," +
           verdicts[2] + "," + csv_field(incons) + "," + std::to_string(horizon) + "," + std::to_string(total) +
           "," + std::to_string(done) + "," + fmt(loc.phi) + "," + modal + "," + f2 + "," + f5 + "\n";
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentPlan& plan) {
  plan.validate();
  ExperimentResult result;
  result.fingerprint = plan.fingerprint();

  const std::size_t n_specs = plan.specs.size();
  std::vector<std::unique_ptr<WeightModel>> models;
  std::vector<std::shared_ptr<const WeightCache>> caches(n_specs);
  std::vector<std::optional<InitialConfig>> configs(n_specs);
  std::vector<std::string> setup_errors(n_specs);
  for (std::size_t s = 0; s < n_specs; ++s) {
    const auto& sp = plan.specs[s];
    models.push_back(std::make_unique<WeightModel>(sp.weight));
    try {
      configs[s] = sp.config.build(*models[s]);
      std::uint64_t zmax = 0;
      for (const auto& [x, z] : configs[s]->entries()) zmax = std::max(zmax, z);
      const std::uint64_t size = std::min<std::uint64_t>(sp.horizon + zmax + 2, std::uint64_t{1} << 22);
      caches[s] = std::make_shared<const WeightCache>(*models[s], size);
    } catch (const std::exception& e) {
      setup_errors[s] = e.what();
    }
  }

  for (std::size_t s = 0; s < n_specs; ++s) {
    for (std::uint64_t i = 0; i < plan.specs[s].replicas; ++i) {
      result.replicas.push_back(
          {s, plan.specs[s].weight.id(), i, replica_seed(plan.seed, i), std::nullopt, setup_errors[s]});
    }
  }

  parallel_for(result.replicas.size(), plan.workers, [&](std::size_t k) {
    auto& out = result.replicas[k];
    if (!out.error.empty()) return;
    const auto& sp = plan.specs[out.spec_index];
    try {
      WalkOptions opts;
      opts.bounds = sp.bounds;
      opts.trackers = sp.trackers;
      Walk w(caches[out.spec_index], *configs[out.spec_index], opts, SplitStream(out.seed));
      RunRecord rec = run(w, {sp.horizon, sp.checkpoints, sp.phis});
      rec.fingerprint = result.fingerprint;
      rec.replica = out.replica;
      rec.seed = out.seed;
      for (double phi : sp.phis) {
        try {
          rec.tail_support[phi] = tail_support(rec, phi).sites;
        } catch (const InsufficientDataError&) {
        }
      }
      out.record = std::move(rec);
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  });

  result.classifications.resize(n_specs);
  std::vector<std::size_t> todo;
  for (std::size_t s = 0; s < n_specs; ++s) {
    result.classifications[s].spec_id = plan.specs[s].weight.id();
    if (plan.classifier.enabled) todo.push_back(s);
  }
  parallel_for(todo.size(), plan.workers, [&](std::size_t k) {
    const std::size_t s = todo[k];
    auto& c = result.classifications[s];
    try {
      WeightModel m(plan.specs[s].weight);
      const auto& o = plan.classifier.options;
      c.series = series_tests(m, o);
      for (auto p : plan.classifier.criticals) {
        auto e = estimate_critical(m, p, o);
        if (p == CriticalParameter::kBetaC) apply_consistency_gate(e, c.series);
        c.criticals.push_back(std::move(e));
      }
    } catch (const std::exception& e) {
      c.error = e.what();
    }
  });

  for (std::size_t s = 0; s < n_specs; ++s) {
    std::vector<RunRecord> recs;
    for (const auto& r : result.replicas) {
      if (r.spec_index == s && r.record) recs.push_back(*r.record);
    }
    result.localization.push_back(localization_report(recs, plan.specs[s].phis.front()));
  }
  return result;
}

void write_outputs(const ExperimentPlan& plan, const ExperimentResult& result, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "records");
  fs::create_directories(dir / "classifier");
  auto write = [](const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ResourceError("cannot write " + p.string(), 0.0);
    out << text;
  };
  json pj = plan.canonical();
  pj["fingerprint"] = result.fingerprint;
  pj["schema_version"] = kRecordSchemaVersion;
  write(dir / "plan.json", pj.dump(2) + "\n");

  std::vector<std::string> used;
  std::vector<std::string> slugs;
  for (const auto& sp : plan.specs) {
    std::string slug = spec_slug(sp.weight);
    std::string name = slug;
    for (int k = 2; std::find(used.begin(), used.end(), name) != used.end(); ++k) name = slug + "-" + std::to_string(k);
    used.push_back(name);
    slugs.push_back(name);
  }
  for (std::size_t s = 0; s < plan.specs.size(); ++s) {
    std::string text;
    for (const auto& r : result.replicas) {
      if (r.spec_index != s || !r.record) continue;
      for (const auto& line : r.record->to_jsonl()) text += line + "\n";
    }
    write(dir / "records" / (slugs[s] + ".jsonl"), text);
    json cj = result.classifications[s].to_json();
    cj["fingerprint"] = result.fingerprint;
    cj["localization"] = result.localization[s].to_json();
    write(dir / "classifier" / (slugs[s] + ".json"), cj.dump(2) + "\n");
  }
  write(dir / "summary.csv", result.summary_csv());
  std::string loc = "spec," + std::string("horizon,cardinality,count\n");
  for (std::size_t s = 0; s < plan.specs.size(); ++s) {
    std::istringstream rows(result.localization[s].to_csv());
    std::string row;
    std::getline(rows, row);
    while (std::getline(rows, row)) loc += csv_field(plan.specs[s].weight.id()) + "," + row + "\n";
  }
  write(dir / "localization.csv", loc);
  write(dir / "comparison.csv", result.comparison_csv());
}

}  // namespace vrrw
