#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "acceptance/suite.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-9"};
  vrrw::acceptance::SuiteOptions opts;
  opts.workers = std::max(1u, std::thread::hardware_concurrency());
  std::string evidence;
  std::vector<int> only;
  app.add_option("--workers", opts.workers, "worker threads");
  app.add_option("--seed", opts.seed, "master seed for the simulation criteria");
  app.add_option("--evidence-dir", evidence, "directory for per-criterion evidence JSON");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);
  opts.evidence_dir = evidence;
  opts.only = {only.begin(), only.end()};

  const auto results = vrrw::acceptance::verify_suite(opts);
  int failed = 0;
  for (const auto& r : results) {
    std::cout << vrrw::acceptance::format_line(r) << std::endl;
    failed += !r.pass;
  }
  std::cout << (failed ? "FAILED " : "PASSED ") << results.size() - failed << "/" << results.size() << " criteria"
            << std::endl;
  return failed ? 1 : 0;
}
