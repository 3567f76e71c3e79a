#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hydra/lern.hpp"
#include "hydra/predictors.hpp"

namespace hydra {

struct DeadlineSpec {
  std::uint64_t accesses_per_set = 0;  // M
  double d_sec = 0;                    // seconds per input set (1/IPS)
  std::uint64_t epoch_cycles = 200'000;
  std::uint64_t clock_hz = 2'000'000'000;

  std::uint64_t d_cycles() const { return std::uint64_t(d_sec * double(clock_hz)); }
  double ma_global() const {
    return double(accesses_per_set) * double(epoch_cycles) / double(d_cycles());
  }

  void validate() const {
    if (accesses_per_set == 0) throw config_error("deadline: M must be > 0");
    if (d_sec <= 0) throw config_error("deadline: D_sec must be > 0");
    if (d_cycles() < epoch_cycles)
      throw config_error("deadline: D must be at least one epoch");
  }
};

/// APM snapshot taken at an epoch boundary.
struct EpochCounters {
  std::uint64_t remaining_accesses = 0;  // RA
  std::int64_t remaining_cycles = 0;     // RT
  double core_miss_rate = 0;             // MR, all cores, last epoch
  double ma_past = 0;                    // mean completed accesses/epoch so far
  double amal = 0;                       // mean accel memory latency last epoch
  bool amal_valid = false;
};

struct BypassThresholds {
  double a1 = 1.0, a2 = 1.2, a3 = 1.5, a4 = 2.0;
  double b = 0.9;
  bool operator==(const BypassThresholds&) const = default;
};

struct ReuseThresholds {
  int ri_th = 4;
  int rc_th = -1;
  bool cold_special = false;
  bool operator==(const ReuseThresholds&) const = default;
};

struct HydraParams {
  double margin_high = 0.05;
  double margin_low = 0.01;
  double mr_th = 0.30;
  double alpha = 0.10;
  double beta = 0.05;
  double delta_a = 0.20;
  double delta_b = 0.10;
  BypassThresholds base;
  bool compound_thresholds = false;  // experimental: carry adjustments across epochs
};

struct ProgressEstimate {
  double ma_i = 0;
  double margin = 0;
};

/// Per-epoch progress requirement with safety margins. nullopt signals
/// a missed deadline (RT exhausted); the caller rolls to the next set.
inline std::optional<ProgressEstimate> estimate_progress_requirement(
    const EpochCounters& c, const DeadlineSpec& d, const HydraParams& p) {
  if (c.remaining_cycles <= 0) return std::nullopt;
  const double ma_global = d.ma_global();
  const bool cond_mem = c.core_miss_rate > p.mr_th;
  const bool cond_prog = c.ma_past < (1 + p.alpha) * ma_global;
  double m = 0;
  if (cond_mem && cond_prog)
    m = p.margin_high;
  else if (cond_mem || cond_prog)
    m = p.margin_low;
  const double denom =
      std::max(double(c.remaining_cycles) - m * double(d.d_cycles()), double(d.epoch_cycles));
  return ProgressEstimate{double(c.remaining_accesses) * double(d.epoch_cycles) / denom, m};
}

/// Dynamic bypass threshold update; bands of width beta around
/// MA_global select how far the thresholds move from their base values.
inline BypassThresholds update_bypass_thresholds(double ma_i, double ma_global,
                                                 const BypassThresholds& base,
                                                 const HydraParams& p) {
  BypassThresholds t = base;
  auto drop = [&](int k) {
    t.a1 = std::max(base.a1 - k * p.delta_a, 1.0);
    t.a2 = std::max(base.a2 - k * p.delta_a, 1.0);
    t.a3 = std::max(base.a3 - k * p.delta_a, 1.0);
    t.a4 = std::max(base.a4 - k * p.delta_a, 1.0);
    t.b = base.b - k * p.delta_b;
  };
  if (ma_i <= (1 - 6 * p.beta) * ma_global) {
    drop(6);
  }
  for (int k = 5; k >= 1; --k) {
    if ((1 - (k + 1) * p.beta) * ma_global < ma_i && ma_i <= (1 - k * p.beta) * ma_global)
      drop(k);
  }
  if ((1 - p.beta) * ma_global < ma_i && ma_i <= (1 + p.beta) * ma_global) {
    t = base;
  }
  if (ma_i > (1 + p.beta) * ma_global) {
    t.a1 = base.a1 + p.delta_a;
    t.a2 = base.a2 + p.delta_a;
    t.a3 = base.a3 + p.delta_a;
    t.a4 = base.a4 + p.delta_a;
    t.b = base.b;
  }
  return t;
}

/// Ladder from predicted headroom r = MA_hat / MA_i to the reuse
/// thresholds for this epoch. Bands are lower-inclusive.
inline ReuseThresholds select_reuse_thresholds(double ma_hat, double ma_i,
                                               const BypassThresholds& t) {
  const double r = ma_hat / ma_i;
  if (r >= t.a4) return {-1, 4, false};  // bypass all clusters
  if (r >= t.a3) return {0, 3, false};
  if (r >= t.a2) return {1, 2, false};
  if (r >= t.a1) return {2, 1, false};
  if (r >= t.b) return {3, 0, true};  // Cold special case
  return {4, -1, false};              // only No Reuse bypassed
}

enum class BypassDecision { Cache, Bypass };

/// No Reuse always bypasses; otherwise bypass iff the predicted RI
/// cluster is farther than RI_Th or the RC cluster colder than RC_Th.
/// At RC_Th = 0, Cold accesses bypass only when the Cold center implies
/// at most about one further reuse.
inline BypassDecision accel_bypass_decide(const std::optional<ClusterAssignment>& pred,
                                          const ReuseThresholds& th, double cold_center) {
  if (!pred || pred->rc < 0 || pred->ri < 0) return BypassDecision::Bypass;
  if (pred->ri > th.ri_th || pred->rc < th.rc_th) return BypassDecision::Bypass;
  if (th.cold_special && pred->rc == int(RcClass::Cold) && cold_center < 2.5)
    return BypassDecision::Bypass;
  return BypassDecision::Cache;
}

inline BypassDecision core_bypass_decide(const ShipTable& ship, std::uint64_t signature,
                                         bool enabled) {
  if (enabled && ship.predict(signature) == ReusePrediction::NoReuse)
    return BypassDecision::Bypass;
  return BypassDecision::Cache;
}

enum class Arbitration { FIFO, ARP };
enum class AccelBypassKind { None, Ship, Lern, Random };

/// One named experiment policy: arbitration + core/accel bypass wiring.
struct PolicySpec {
  std::string name;
  Arbitration arbitration = Arbitration::FIFO;
  bool core_bypass = false;
  AccelBypassKind accel_bypass = AccelBypassKind::None;
  bool shared_predictor = false;  // one SHIP table for cores and accelerator
  bool deadline_aware = false;    // gates SHIP accel bypass / drives the APM for LERN
  double gate_fraction = 1.0;     // ASTh variant: bypass after t x required accesses
  double random_p = 0.0;          // AFR variant
};

inline PolicySpec baseline_policy(const std::string& name) {
  PolicySpec s;
  s.name = name;
  auto is = [&](const std::string& n) { return name == n; };
  if (is("FIFO-NB")) return s;
  if (is("FIFO-CS")) {
    s.core_bypass = true;
    return s;
  }
  s.arbitration = Arbitration::ARP;
  if (is("ARP-NB")) return s;
  if (is("ARP-CS")) {
    s.core_bypass = true;
    return s;
  }
  if (is("ARP-CAS")) {
    s.core_bypass = true;
    s.accel_bypass = AccelBypassKind::Ship;
    s.shared_predictor = true;
    return s;
  }
  if (is("ARP-CS-AS") || is("ARP-CS-AS-D")) {
    s.core_bypass = true;
    s.accel_bypass = AccelBypassKind::Ship;
    s.deadline_aware = name.ends_with("-D");
    return s;
  }
  if (is("ARP-AS") || is("ARP-AS-D")) {
    s.accel_bypass = AccelBypassKind::Ship;
    s.deadline_aware = name.ends_with("-D");
    return s;
  }
  if (is("ARP-AL")) {
    s.accel_bypass = AccelBypassKind::Lern;
    return s;
  }
  if (is("HyDRA") || is("ARP-CS-AL-D")) {
    s.name = "HyDRA";
    s.core_bypass = true;
    s.accel_bypass = AccelBypassKind::Lern;
    s.deadline_aware = true;
    return s;
  }
  if (is("HyDRA-noCoreBypass") || is("ARP-AL-D")) {
    s.name = "HyDRA-noCoreBypass";
    s.accel_bypass = AccelBypassKind::Lern;
    s.deadline_aware = true;
    return s;
  }
  if (name.rfind("ARP-CS-ASTh", 0) == 0 && name.ends_with("-D")) {
    s.core_bypass = true;
    s.accel_bypass = AccelBypassKind::Ship;
    s.deadline_aware = true;
    s.gate_fraction = std::stod(name.substr(11, name.size() - 13));
    return s;
  }
  if (name.rfind("ARP-CS-AFR", 0) == 0) {
    s.core_bypass = true;
    s.accel_bypass = AccelBypassKind::Random;
    s.random_p = std::stod(name.substr(10));
    return s;
  }
  throw config_error("unknown policy: " + name);
}

struct EpochTelemetry {
  std::uint64_t epoch = 0;
  double ma_i = 0;
  double ma_hat = 0;
  int rung = 0;  // 0 = bypass-all ... 5 = no-cluster-bypass
  int ri_th = 4;
  int rc_th = -1;
  double margin = 0;
};

/// Runtime decision engine for one simulation. Owns the SHIP tables,
/// the L-RPT, and the APM state; the simulator calls in at epoch
/// boundaries and per access.
class PolicyEngine {
 public:
  PolicyEngine(PolicySpec spec, HydraParams params, DeadlineSpec deadline,
               LRPTConfig lrpt_cfg = {}, std::uint64_t seed = 0)
      : spec_(std::move(spec)),
        params_(params),
        deadline_(deadline),
        ship_core_(),
        ship_accel_(),
        lrpt_(lrpt_cfg),
        rng_(seed) {
    thresholds_ = params_.base;
    rung_ = {4, -1, false};  // conservative until the first epoch closes
  }

  const PolicySpec& spec() const { return spec_; }
  const DeadlineSpec& deadline() const { return deadline_; }
  const std::vector<EpochTelemetry>& telemetry() const { return telemetry_; }
  const ReuseThresholds& current_rung() const { return rung_; }

  ShipTable& core_ship() { return ship_core_; }
  ShipTable& accel_ship() { return spec_.shared_predictor ? ship_core_ : ship_accel_; }
  LRPT& lrpt() { return lrpt_; }

  /// Load the per-layer model at a layer boundary (zero simulated cost).
  void begin_layer(const ClusterModel& model) {
    lrpt_.load(model);
    cold_center_ = model.cold_center();
  }

  /// Epoch boundary: refresh thresholds and the rung from the APM
  /// counters. Returns false when the deadline is already blown.
  bool epoch_begin(const EpochCounters& c) {
    ++epoch_;
    epoch_completions_ = 0;
    if (spec_.accel_bypass == AccelBypassKind::Lern && spec_.deadline_aware) {
      auto est = estimate_progress_requirement(c, deadline_, params_);
      if (!est) return false;
      const BypassThresholds& from = params_.compound_thresholds ? thresholds_ : params_.base;
      thresholds_ = update_bypass_thresholds(est->ma_i, deadline_.ma_global(), from, params_);
      const double ma_hat =
          c.amal_valid ? double(deadline_.epoch_cycles) / c.amal : est->ma_i;
      rung_ = select_reuse_thresholds(ma_hat, est->ma_i, thresholds_);
      int rung_no = 5;
      if (rung_.rc_th >= 0) rung_no = 4 - rung_.rc_th;
      telemetry_.push_back(
          {epoch_, est->ma_i, ma_hat, rung_no, rung_.ri_th, rung_.rc_th, est->margin});
    } else if (spec_.deadline_aware) {
      if (c.remaining_cycles <= 0) return false;
      gate_required_ = deadline_.ma_global();  // SHIP deadline gate
    }
    return true;
  }

  /// Called by the simulator for every completed accelerator access.
  void note_accel_completion() { ++epoch_completions_; }

  /// Bypass decision for an accelerator write request or read response.
  BypassDecision accel_decide(std::uint64_t byte_address) {
    switch (spec_.accel_bypass) {
      case AccelBypassKind::None:
        return BypassDecision::Cache;
      case AccelBypassKind::Random:
        return std::uniform_real_distribution<double>(0, 1)(rng_) < spec_.random_p
                   ? BypassDecision::Bypass
                   : BypassDecision::Cache;
      case AccelBypassKind::Ship: {
        if (spec_.deadline_aware &&
            double(epoch_completions_) <= spec_.gate_fraction * gate_required_)
          return BypassDecision::Cache;
        std::uint64_t sig = byte_address >> 6;  // accelerator accesses carry no PC
        return accel_ship().predict(sig) == ReusePrediction::NoReuse
                   ? BypassDecision::Bypass
                   : BypassDecision::Cache;
      }
      case AccelBypassKind::Lern: {
        const ReuseThresholds th =
            spec_.deadline_aware ? rung_ : ReuseThresholds{2, 1, false};
        return accel_bypass_decide(lrpt_.lookup(byte_address), th, cold_center_);
      }
    }
    return BypassDecision::Cache;
  }

  /// Bypass decision for a core read-response fill.
  BypassDecision core_decide(std::uint64_t tag) {
    return core_bypass_decide(ship_core_, tag, spec_.core_bypass);
  }

 private:
  PolicySpec spec_;
  HydraParams params_;
  DeadlineSpec deadline_;
  ShipTable ship_core_;
  ShipTable ship_accel_;
  LRPT lrpt_;
  double cold_center_ = 0;
  BypassThresholds thresholds_;
  ReuseThresholds rung_;
  std::uint64_t epoch_ = 0;
  std::uint64_t epoch_completions_ = 0;
  double gate_required_ = 0;
  std::vector<EpochTelemetry> telemetry_;
  std::mt19937_64 rng_;
};

}  // namespace hydra
