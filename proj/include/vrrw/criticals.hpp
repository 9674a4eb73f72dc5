#pragma once

// Partial values of the improper integrals I_alpha, J_beta, J~_beta, numerical
// convergence classification and critical-parameter estimates.
//
// The verdicts here are heuristics: a log-log slope fit of the integrand over
// the last decades of a geometric cutoff ladder, combined with saturation of
// the partial values. They are evidence, not proofs.

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vrrw/weights.hpp"

namespace vrrw {

enum class IntegralKind { kI, kJ, kJTilde };

/// Exact value of int_a^b g(x) dx for the piecewise-constant integrand of the
/// given kind (parameter = alpha for I, beta otherwise). Cells are walked one
/// unit of x at a time; more than max_cells cells is a ResourceError whose
/// attained() is the partial value reached.
double exact_integral(const WeightModel& m, IntegralKind kind, double param, double a, double b,
                      std::uint64_t max_cells = std::uint64_t{1} << 26);

double partial_I(const WeightModel& m, double alpha, double T);
double partial_J(const WeightModel& m, double beta, double T);
double partial_J_tilde(const WeightModel& m, double beta, double T);

/// log g(e^s) for the integrand g of the given kind; stays finite where g
/// itself would underflow.
double log_integrand_at_log(const WeightModel& m, IntegralKind kind, double param, double s);

enum class Verdict { kFinite, kDivergent, kInconclusive };
std::string to_string(Verdict v);

struct SlopeFit {
  // log g ~ c - p log x over the fit window.
  double exponent = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  // Second tier, x g(x) ~ (log x)^{-q}; only meaningful when used.
  bool log_tier = false;
  double log_exponent = 0.0;
  double log_lo = 0.0;
  double log_hi = 0.0;
  std::size_t points = 0;
};

struct Partial {
  double log_cutoff = 0.0;  // cutoffs may lie far past the double range
  double value = 0.0;
};

struct TailClassification {
  Verdict verdict = Verdict::kInconclusive;
  std::vector<Partial> partials;
  SlopeFit slope;
  // Cutoffs start at origin * 10^k; the stretch [0, origin) is omitted.
  double origin = 0.0;
  bool approximate = false;
  std::string reason;

  nlohmann::json to_json() const;
};

struct ClassifierOptions {
  double margin = 0.15;
  int k_min = 2;
  int k_max = 9;
  // Cells integrated exactly before switching to quadrature in log x.
  std::uint64_t exact_cells = 4096;
  // Points in the slope-fit window (the last two decades of cutoffs).
  int fit_points = 48;
};

/// Classifies int^inf g from partial values at the cutoffs and a probe of
/// log g(e^s). Needs at least four cutoffs.
TailClassification classify_tail(std::vector<Partial> partials,
                                 const std::function<double(double)>& log_g_at_log,
                                 const ClassifierOptions& opts = {});

/// Builds the cutoff ladder, evaluates partials and classifies.
TailClassification classify_integral(const WeightModel& m, IntegralKind kind, double param,
                                     const ClassifierOptions& opts = {});

struct SeriesTests {
  TailClassification recip;
  TailClassification recip_sq;
};

/// Classifies sum 1/w(n) and sum 1/w(n)^2.
SeriesTests series_tests(const WeightModel& m, const ClassifierOptions& opts = {});

enum class CriticalParameter { kAlphaC, kBetaC, kBetaTildeC };
enum class CriticalVerdict { kMinusInfinity, kPlusInfinity, kFiniteBracket, kUnknown };
std::string to_string(CriticalParameter p);
std::string to_string(CriticalVerdict v);

struct CriticalEstimate {
  CriticalParameter parameter = CriticalParameter::kBetaC;
  CriticalVerdict verdict = CriticalVerdict::kUnknown;
  double lo = 0.0;  // bracket, when verdict is kFiniteBracket
  double hi = 0.0;
  std::vector<std::pair<double, TailClassification>> probes;
  // Filled for BetaC when the verdict is finite-side but sum 1/w^2 is not
  // classified Finite.
  std::string inconsistency;

  nlohmann::json to_json() const;
};

/// Probe grids: beta in {0, +-2^k : k = 0..10}, alpha in {0} and {2^k : k = -3..10}.
std::vector<double> default_probe_grid(CriticalParameter p);

CriticalEstimate estimate_critical(const WeightModel& m, CriticalParameter p,
                                   const ClassifierOptions& opts = {},
                                   std::vector<double> grid = {});

/// Sets the inconsistency field of a BetaC estimate from the series tests.
void apply_consistency_gate(CriticalEstimate& beta_c, const SeriesTests& series);

/// |J_beta(lambda w)(T) - J_{lambda beta}(w)(T) / lambda|, together with the
/// magnitude used to normalise it.
struct ScalingResidual {
  double residual = 0.0;
  double value = 0.0;
};
ScalingResidual check_scaling(const WeightSpec& spec, double lambda, double beta, double T);

enum class Boundedness { kBounded, kUnbounded, kInconclusive };
std::string to_string(Boundedness b);

struct SublinearConditions {
  // limsup W^{-1}(W(n) + alpha) / n < inf, for alpha in {0.5, 1, 2}.
  Boundedness cond_13 = Boundedness::kInconclusive;
  // limsup w(c n) / w(n) < inf, for c in {2, 4, 8}.
  Boundedness cond_14 = Boundedness::kInconclusive;
  nlohmann::json evidence;
};

SublinearConditions check_sublinear_conditions(const WeightModel& m, const ClassifierOptions& opts = {});

}  // namespace vrrw
