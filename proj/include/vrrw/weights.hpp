#pragma once

// Weight sequences w(n) and the exact calculus of W(t) = int_0^t du / w(u)
// under the floor convention w(t) = w(floor(t)).
//
// Inside the materialized prefix table W, V and their inverses are exact up to
// rounding of compensated sums. Past the table cap a continuous tail model is
// used (Euler-Maclaurin on the smooth extension of the family formula,
// integrated on a logarithmic grid); results from that region are flagged.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vrrw/compensated_sum.hpp"

namespace vrrw {

enum class WeightFamily {
  kConstant,         // w(n) = c
  kPower,            // w(n) = (n+1)^rho
  kLinearShift,      // w(n) = n+1
  kSubLogCorrected,  // w(n) = (n+1) exp(-(log(n+2))^alpha)
  kSuperLog,         // w(n) = (n+1) (log(n+2))^gamma
  kTabulated,        // finite table plus optional tail rule
};

struct TailRule {
  enum class Kind { kNone, kConstant, kPower };
  Kind kind = Kind::kNone;
  // kConstant: w(n) = coef.  kPower: w(n) = coef * (n+1)^exponent.
  double coef = 1.0;
  double exponent = 0.0;
};

class WeightSpec {
 public:
  static WeightSpec constant(double c);
  static WeightSpec power(double rho);
  static WeightSpec linear_shift();
  static WeightSpec sub_log_corrected(double alpha);
  static WeightSpec super_log(double gamma);
  static WeightSpec tabulated(std::vector<double> values, TailRule tail = {});

  /// Two-column text file "n w(n)" with n = 0, 1, 2, ... in order. Lines
  /// starting with '#' are comments except the directive
  /// "# tail constant [c]" or "# tail power <coef> <exponent>".
  static WeightSpec load_tabulated(const std::filesystem::path& path);

  /// Short textual form: "constant:1", "power:2", "linear", "sublog:0.3",
  /// "superlog:1", "table:<path>". An optional "*<lambda>" suffix scales.
  static WeightSpec parse(std::string_view text);

  /// lambda * w.
  WeightSpec scaled(double lambda) const;

  /// w(n). Throws DomainError for a tabulated weight past its table when no
  /// tail rule is set.
  double operator()(std::uint64_t n) const;

  /// Smooth extension of the family formula at real t >= 0; agrees with
  /// operator() at integers.
  double continuous(double t) const;

  /// log w_c(e^s), usable for s far past the double range of t.
  double log_continuous_at_log(double s) const;

  /// Closed-form knowledge of whether sum 1/w(n) converges.
  bool reciprocal_summable() const;

  /// Checks w(n+1) >= w(n) for n < probe.
  bool is_monotone_up_to(std::uint64_t probe) const;

  WeightFamily family() const { return family_; }
  double parameter() const { return param_; }
  double scale() const { return scale_; }
  const TailRule& tail_rule() const { return tail_; }
  std::optional<std::size_t> table_size() const;

  /// Stable identifier such as "power(2)" or "linear_shift*0.5".
  std::string id() const;

  nlohmann::json to_json() const;
  static WeightSpec from_json(const nlohmann::json& j);

 private:
  WeightSpec(WeightFamily f, double p) : family_(f), param_(p) {}
  double base(double t) const;

  WeightFamily family_;
  double param_ = 0.0;
  double scale_ = 1.0;
  std::shared_ptr<const std::vector<double>> table_;
  TailRule tail_;
  std::string source_;
};

struct WeightModelOptions {
  /// Largest number of exact prefix-table entries. Past it the tail model is
  /// used.
  std::uint64_t table_cap = std::uint64_t{1} << 22;
  /// Largest log-argument the tail model may reach.
  double max_log_arg = 16384.0;
  /// Relative tolerance for H^{-1}.
  double hinv_rel_tol = 1e-12;
};

/// Exact partial sums S1[m] = sum_{k<m} 1/w(k) and S2[m] = sum_{k<m} 1/w(k)^2,
/// grown by doubling in fixed-size chunks. Growth is single-writer; after
/// freeze() the table is read-only and shareable across threads.
class PrefixTable {
 public:
  PrefixTable(const WeightSpec& spec, std::uint64_t cap);
  PrefixTable(const PrefixTable&) = delete;
  PrefixTable& operator=(const PrefixTable&) = delete;

  /// Largest m with S1[m], S2[m] materialized.
  std::uint64_t capacity() const { return size_.load(std::memory_order_acquire) - 1; }
  std::uint64_t cap() const { return cap_; }

  /// Makes sure entries up to index m exist (clamped to the cap). Returns the
  /// resulting capacity.
  std::uint64_t ensure(std::uint64_t m);
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  double s1(std::uint64_t m) const { return at(s1_, m); }
  double s2(std::uint64_t m) const { return at(s2_, m); }

  /// Largest m <= capacity() with S1[m] <= u (u >= 0).
  std::uint64_t locate_s1(double u) const;
  std::uint64_t locate_s2(double u) const;

  /// Test hook: overwrite one S1 entry (used to check that invariant
  /// validation notices corruption).
  void corrupt_s1_for_testing(std::uint64_t m, double value);

 private:
  static constexpr unsigned kChunkBits = 16;
  static constexpr std::uint64_t kChunk = std::uint64_t{1} << kChunkBits;
  using Chunks = std::vector<std::unique_ptr<double[]>>;

  static double at(const Chunks& c, std::uint64_t m) {
    return c[m >> kChunkBits][m & (kChunk - 1)];
  }
  template <class Getter>
  std::uint64_t locate(double u, Getter get) const;

  WeightSpec spec_;
  std::uint64_t cap_;
  Chunks s1_, s2_;
  std::atomic<std::uint64_t> size_{0};
  CompensatedSum acc1_, acc2_;
  bool frozen_ = false;
};

/// W, V = int 1/w^2, their inverses, H and the J-tilde antiderivative for one
/// weight. Queries are logically const but grow tables lazily, so a model is
/// single-threaded until freeze(); afterwards it is read-only and any query
/// that would need more table throws ResourceError.
class WeightModel {
 public:
  explicit WeightModel(WeightSpec spec, WeightModelOptions opts = {});
  ~WeightModel();
  WeightModel(const WeightModel&) = delete;
  WeightModel& operator=(const WeightModel&) = delete;

  const WeightSpec& spec() const { return spec_; }
  const WeightModelOptions& options() const { return opts_; }
  PrefixTable& table() const { return *table_; }

  /// w(floor(t)) for finite t; the continuous formula past 2^52.
  double w_at(double t) const;
  /// log w(e^s).
  double log_w_at_log(double s) const;

  double W(double t) const;
  double W_at_log(double s) const;
  /// sup_t W(t); +inf when sum 1/w diverges.
  double W_sup() const;

  /// W^{-1}(u); 0 for u < 0 and +inf for u >= W_sup(). Throws ResourceError if
  /// the answer exceeds exp(max_log_arg).
  double Winv(double u) const;
  /// log W^{-1}(u) (-inf when W^{-1}(u) = 0).
  double Winv_log(double u) const;

  double V(double t) const;
  double V_at_log(double s) const;

  double H(double x) const;
  double H_log(double log_x) const;
  /// H^{-1}(y); DomainError for y < H(0).
  double Hinv(double y) const;
  /// H^{-1}(y), extended by 0 below H(0) (the convention used inside
  /// J-tilde, mirroring W^{-1}(u) = 0 for u < 0).
  double Hinv_clamped(double y) const;
  double Hinv_clamped_log(double log_y) const;

  /// int_0^y dv / (w(v) w(H^{-1}(v))) with the clamped H^{-1}.
  double Vtilde(double y) const;
  double Vtilde_at_log(double log_y) const;

  /// True once any evaluation had to use the continuous tail model.
  bool used_tail_model() const { return used_tail_.load(); }
  void freeze();

 private:
  struct Tail;
  struct HKnots;

  double W_table(double t) const;
  double V_table(double t) const;
  double exact_limit() const;
  Tail& tail() const;
  void grow_knots(double y) const;
  bool within_knots(double y) const;
  double vtilde_knots(double y, double Wy) const;
  double vtilde_tail(double log_z) const;

  WeightSpec spec_;
  WeightModelOptions opts_;
  std::unique_ptr<PrefixTable> table_;
  mutable std::unique_ptr<Tail> tail_;
  mutable std::unique_ptr<HKnots> hknots_;
  bool frozen_ = false;
  mutable std::atomic<bool> used_tail_{false};
};

}  // namespace vrrw
