#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "acceptance/suite.hpp"
#include "vrrw/criticals.hpp"
#include "vrrw/diagnostics.hpp"
#include "vrrw/errors.hpp"
#include "vrrw/harness.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace vrrw;

namespace {

unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

fs::path output_dir(const std::string& flag, const fs::path& fallback) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("VRRW_OUTPUT_DIR")) return env;
  return fallback;
}

CriticalParameter parse_critical(const std::string& s) {
  if (s == "alpha_c") return CriticalParameter::kAlphaC;
  if (s == "beta_c") return CriticalParameter::kBetaC;
  if (s == "beta_tilde_c") return CriticalParameter::kBetaTildeC;
  throw ConfigError("unknown critical parameter '" + s + "'");
}

// "C0", "cnetabeta:N,eta,beta", or a JSON file holding {"z0": ..., "start": ...}.
json parse_config(const std::string& text) {
  if (text == "C0") return "C0";
  if (text.rfind("cnetabeta:", 0) == 0) {
    std::stringstream ss(text.substr(10));
    std::string a, b, c;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    std::getline(ss, c, ',');
    return {{"cnetabeta", {{"N", std::stoull(a)}, {"eta", std::stod(b)}, {"beta", c.empty() ? 0.0 : std::stod(c)}}}};
  }
  std::ifstream in(text);
  if (!in) throw ConfigError("cannot read configuration file " + text);
  return json::parse(in);
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

int run_classify(const std::string& weight, const std::vector<std::string>& criticals, const std::string& out,
                 unsigned workers) {
  const auto spec = WeightSpec::parse(weight);
  WeightModel m(spec);
  SeriesTests series;
  std::vector<CriticalEstimate> estimates(criticals.size());
  parallel_for(criticals.size() + 1, workers, [&](std::size_t k) {
    WeightModel local(spec);
    if (k == 0) {
      series = series_tests(local);
    } else {
      estimates[k - 1] = estimate_critical(local, parse_critical(criticals[k - 1]));
    }
  });
  json j = {{"spec", spec.id()},
            {"series", {{"recip", series.recip.to_json()}, {"recip_sq", series.recip_sq.to_json()}}}};
  std::cout << spec.id() << "\n  sum 1/w      " << to_string(series.recip.verdict) << "\n  sum 1/w^2    "
            << to_string(series.recip_sq.verdict) << "\n";
  for (auto& e : estimates) {
    if (e.parameter == CriticalParameter::kBetaC) apply_consistency_gate(e, series);
    std::cout << "  " << to_string(e.parameter) << std::string(12 - to_string(e.parameter).size(), ' ')
              << to_string(e.verdict);
    if (e.verdict == CriticalVerdict::kFiniteBracket) std::cout << " in [" << e.lo << ", " << e.hi << "]";
    if (!e.inconsistency.empty()) std::cout << "  (inconsistent: " << e.inconsistency << ")";
    std::cout << "\n";
    j["criticals"].push_back(e.to_json());
  }
  const auto sub = check_sublinear_conditions(m);
  j["sublinear"] = {{"cond_13", to_string(sub.cond_13)}, {"cond_14", to_string(sub.cond_14)}, {"evidence", sub.evidence}};
  if (!out.empty()) {
    std::ofstream(out) << j.dump(2) << "\n";
    std::cout << "report written to " << out << "\n";
  }
  return 0;
}

int finish_experiment(const ExperimentPlan& plan, const fs::path& dir) {
  const auto result = run_experiment(plan);
  write_outputs(plan, result, dir);
  std::cout << "fingerprint " << result.fingerprint << "\n";
  std::cout << result.comparison_csv();
  std::cout << "outputs in " << dir.string() << "\n";
  if (result.failures()) {
    std::cerr << result.failures() << " replica or classifier failures; see summary.csv\n";
    return 1;
  }
  return 0;
}

struct MonitorRow {
  std::string spec;
  std::uint64_t replica;
  json values;
};

int run_report(const std::string& dir_flag, const std::vector<std::string>& record_files, const std::string& weight,
               double phi, const std::string& out_flag) {
  // spec id -> weight, from the plan when reporting on an experiment directory.
  std::map<std::string, WeightSpec> weights;
  std::vector<fs::path> files;
  if (!dir_flag.empty()) {
    const fs::path dir = dir_flag;
    std::ifstream pin(dir / "plan.json");
    if (!pin) throw ConfigError("no plan.json in " + dir.string());
    const auto plan = json::parse(pin);
    for (const auto& s : plan.at("specs")) {
      const auto w = WeightSpec::from_json(s.at("weight"));
      weights.emplace(w.id(), w);
    }
    for (const auto& e : fs::directory_iterator(dir / "records")) files.push_back(e.path());
    std::sort(files.begin(), files.end());
  }
  for (const auto& f : record_files) files.emplace_back(f);
  if (!weight.empty()) {
    const auto w = WeightSpec::parse(weight);
    weights.emplace(w.id(), w);
  }
  if (files.empty()) throw ConfigError("no records given (use --dir or --records)");

  const fs::path out = output_dir(out_flag, dir_flag.empty() ? fs::path("report") : fs::path(dir_flag) / "report");
  fs::create_directories(out);
  std::map<std::string, std::vector<RunRecord>> by_spec;
  for (const auto& f : files) {
    for (auto& r : RunRecord::from_jsonl(read_lines(f))) by_spec[r.spec_id].push_back(std::move(r));
  }

  std::string loc = "spec,horizon,cardinality,count\n";
  std::string mon =
      "spec,replica,center,eqW_max,center_drift,asymmetry_last,asymmetry_oscillation,beta_envelope,U_sup\n";
  for (const auto& [id, recs] : by_spec) {
    const auto rep = localization_report(recs, phi);
    std::istringstream rows(rep.to_csv());
    std::string row;
    std::getline(rows, row);
    while (std::getline(rows, row)) loc += id + "," + row + "\n";
    const auto wit = weights.find(id);
    if (wit == weights.end()) {
      std::cerr << "no weight known for " << id << "; W-based monitors skipped (pass --weight)\n";
    }
    for (const auto& r : recs) {
      std::ostringstream line;
      line << id << "," << r.replica << ",";
      const auto c = localization_center(r, phi);
      line << c << ",";
      std::string eqw;
      if (wit != weights.end() && r.snapshots.back().has_trackers) {
        WeightModel m(wit->second);
        double worst = 0.0;
        const auto& last = r.snapshots.back();
        for (std::int64_t x = last.lo + 1; x + 1 < last.lo + static_cast<std::int64_t>(last.Z.size()); ++x) {
          worst = std::max(worst, eqW_residual(r, m, x).summary["max"].get<double>());
        }
        std::ostringstream os;
        os << worst;
        eqw = os.str();
      }
      line << eqw << ",";
      const auto cd = center_dominance(r, c);
      if (cd.summary["defined"].get<bool>()) line << cd.summary["drift"].get<double>();
      line << ",";
      if (wit != weights.end()) {
        WeightModel m(wit->second);
        const auto as = asymmetry_monitor(r, m, c);
        line << as.summary["last"].get<double>() << "," << as.summary["oscillation"].get<double>() << ","
             << beta_envelope(r, m, c) << ",";
      } else {
        line << ",,,";
      }
      if (r.snapshots.back().U) line << u_monitor(r).summary["sup"].get<double>();
      mon += line.str() + "\n";
    }
  }
  std::ofstream(out / "localization.csv") << loc;
  std::ofstream(out / "monitors.csv") << mon;
  std::cout << loc << "tables written to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vertex reinforced random walks: classification, simulation and diagnostics"};
  app.require_subcommand(1);
  app.fallthrough();
  unsigned workers = default_workers();
  std::uint64_t seed = 0;
  std::string out;
  app.add_option("--workers", workers, "worker threads")->capture_default_str();
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out, "output directory (default from VRRW_OUTPUT_DIR, else per command)");

  auto* classify = app.add_subcommand("classify", "series tests and critical-parameter estimates for one weight");
  std::string weight;
  std::vector<std::string> criticals{"alpha_c", "beta_c", "beta_tilde_c"};
  std::string report_file;
  classify->add_option("weight", weight, "weight, e.g. power:2, linear, sublog:0.3, table:file.txt")->required();
  classify->add_option("--criticals", criticals, "any of alpha_c beta_c beta_tilde_c")->capture_default_str();
  classify->add_option("--json", report_file, "write the full evidence report here");

  auto* simulate = app.add_subcommand("simulate", "replica batch for one weight");
  std::string config = "C0";
  std::vector<std::int64_t> bounds;
  std::uint64_t horizon = 1000000, replicas = 1;
  std::vector<std::uint64_t> checkpoints;
  std::vector<double> phis{0.1};
  bool trackers = false;
  simulate->add_option("weight", weight, "weight specification")->required();
  simulate->add_option("--config", config, "C0, cnetabeta:N,eta,beta or a JSON file")->capture_default_str();
  simulate->add_option("--bounds", bounds, "reflecting interval: LEFT RIGHT")->expected(2);
  simulate->add_option("--horizon", horizon)->capture_default_str();
  simulate->add_option("--replicas", replicas)->capture_default_str();
  simulate->add_option("--checkpoints", checkpoints, "sorted step counts");
  simulate->add_option("--phis", phis, "tail-support window fractions")->capture_default_str();
  simulate->add_flag("--trackers", trackers, "track Y+, Y-, h and crossing counts at every site");

  auto* experiment = app.add_subcommand("experiment", "run a plan file");
  std::string plan_file;
  bool seed_given = false;
  bool dry_run = false;
  experiment->add_option("plan", plan_file, "JSON plan")->required()->check(CLI::ExistingFile);
  experiment->add_flag("--dry-run", dry_run, "validate the plan and print its fingerprint");

  auto* report = app.add_subcommand("report", "diagnostic tables from persisted records");
  std::string dir;
  std::vector<std::string> records;
  double phi = 0.1;
  report->add_option("--dir", dir, "experiment output directory");
  report->add_option("--records", records, "JSONL record files");
  report->add_option("--weight", weight, "weight of the records when no plan is available");
  report->add_option("--phi", phi)->capture_default_str();

  auto* verify = app.add_subcommand("verify", "run acceptance criteria 1-9");
  std::vector<int> only;
  verify->add_option("--only", only, "criterion ids");

  CLI11_PARSE(app, argc, argv);
  seed_given = app.get_option("--seed")->count() > 0;

  try {
    if (*classify) return run_classify(weight, criticals, report_file, workers);
    if (*simulate) {
      json spec = {{"weight", weight}, {"horizon", horizon}, {"replicas", replicas}, {"checkpoints", checkpoints},
                   {"phis", phis}, {"config", parse_config(config)}, {"trackers", trackers}};
      if (!bounds.empty()) spec["bounds"] = bounds;
      auto plan = ExperimentPlan::from_json(
          {{"name", "simulate"}, {"seed", seed}, {"classifier", {{"enabled", false}}}, {"specs", {spec}}});
      plan.workers = workers;
      return finish_experiment(plan, output_dir(out, "simulate-out"));
    }
    if (*experiment) {
      auto plan = ExperimentPlan::load(plan_file);
      if (seed_given) plan.seed = seed;
      plan.workers = workers;
      if (dry_run) {
        std::cout << "fingerprint " << plan.fingerprint() << "\n" << plan.canonical().dump(2) << "\n";
        return 0;
      }
      return finish_experiment(plan, output_dir(out, plan.output_dir));
    }
    if (*report) return run_report(dir, records, weight, phi, out);
    if (*verify) {
      acceptance::SuiteOptions opts;
      opts.workers = workers;
      if (seed_given) opts.seed = seed;
      opts.only = {only.begin(), only.end()};
      opts.evidence_dir = output_dir(out, "verify-out");
      const auto results = acceptance::verify_suite(opts);
      int failed = 0;
      for (const auto& r : results) {
        std::cout << acceptance::format_line(r) << std::endl;
        failed += !r.pass;
      }
      std::ofstream(opts.evidence_dir / "verify.json") << acceptance::to_json(results).dump(2) << "\n";
      return failed ? 1 : 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
