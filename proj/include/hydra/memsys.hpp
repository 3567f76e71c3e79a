#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "hydra/policy.hpp"
#include "hydra/trace.hpp"

namespace hydra {

struct CacheGeometry {
  std::uint64_t size_bytes = 0;
  std::uint32_t block_bytes = 64;
  std::uint32_t ways = 1;
  std::uint32_t tag_latency = 1;
  std::uint32_t data_latency = 1;

  std::uint64_t sets() const { return size_bytes / (std::uint64_t(block_bytes) * ways); }
  std::uint64_t total_lines() const { return sets() * ways; }

  void validate() const {
    if (size_bytes == 0 || block_bytes == 0 || ways == 0)
      throw config_error("cache geometry fields must be positive");
    if (size_bytes % (std::uint64_t(block_bytes) * ways) != 0)
      throw config_error("cache size not divisible by block*ways");
    std::uint64_t s = sets();
    if ((s & (s - 1)) != 0) throw config_error("cache set count must be a power of two");
  }
};

enum class OwnerClass : std::uint8_t { Core, Accel };

/// Plain LRU set-associative cache with per-line SHIP bookkeeping.
class SetAssocCache {
 public:
  struct Line {
    std::uint64_t tag = 0;
    bool valid = false;
    bool dirty = false;
    bool referenced = false;  // re-referenced since insert
    OwnerClass owner = OwnerClass::Core;
    std::uint64_t lru = 0;
    std::uint64_t sig = 0;  // SHIP training signature recorded at insert
  };

  struct Eviction {
    bool valid = false;
    bool dirty = false;
    bool referenced = false;
    OwnerClass owner = OwnerClass::Core;
    std::uint64_t block_addr = 0;
    std::uint64_t sig = 0;
  };

  explicit SetAssocCache(CacheGeometry g) : geo_(g) {
    geo_.validate();
    lines_.resize(geo_.total_lines());
  }

  const CacheGeometry& geometry() const { return geo_; }

  Line* find(std::uint64_t block_addr) {
    auto [base, tag] = locate(block_addr);
    for (std::uint32_t w = 0; w < geo_.ways; ++w)
      if (lines_[base + w].valid && lines_[base + w].tag == tag) return &lines_[base + w];
    return nullptr;
  }

  void touch(Line& line) { line.lru = ++stamp_; }

  /// Insert a block, evicting LRU if the set is full.
  Eviction insert(std::uint64_t block_addr, OwnerClass owner, bool dirty,
                  std::uint64_t sig) {
    auto [base, tag] = locate(block_addr);
    std::size_t victim = base;
    for (std::uint32_t w = 0; w < geo_.ways; ++w) {
      std::size_t i = base + w;
      if (!lines_[i].valid) {
        victim = i;
        break;
      }
      if (lines_[i].lru < lines_[victim].lru) victim = i;
    }
    Eviction ev;
    Line& l = lines_[victim];
    if (l.valid) {
      ev.valid = true;
      ev.dirty = l.dirty;
      ev.referenced = l.referenced;
      ev.owner = l.owner;
      ev.block_addr = (l.tag * geo_.sets() + (base / geo_.ways)) ;
      ev.sig = l.sig;
    }
    l = Line{tag, true, dirty, false, owner, ++stamp_, sig};
    return ev;
  }

  /// Returns the dirty flag of the dropped line, if any.
  std::optional<bool> invalidate(std::uint64_t block_addr) {
    Line* l = find(block_addr);
    if (!l) return std::nullopt;
    bool dirty = l->dirty;
    l->valid = false;
    return dirty;
  }

  std::pair<std::uint64_t, std::uint64_t> occupancy() const {
    std::uint64_t core = 0, accel = 0;
    for (const auto& l : lines_)
      if (l.valid) (l.owner == OwnerClass::Core ? core : accel)++;
    return {core, accel};
  }

 private:
  std::pair<std::size_t, std::uint64_t> locate(std::uint64_t block_addr) const {
    std::uint64_t set = block_addr & (geo_.sets() - 1);
    std::uint64_t tag = block_addr / geo_.sets();
    return {std::size_t(set * geo_.ways), tag};
  }

  CacheGeometry geo_;
  std::vector<Line> lines_;
  std::uint64_t stamp_ = 0;
};

/// Fixed-latency DRAM with a minimum gap between request starts.
struct DramModel {
  std::uint64_t fixed_latency = 100;
  std::uint64_t min_gap = 4;
  std::uint64_t next_start = 0;

  std::uint64_t service(std::uint64_t arrival) {
    std::uint64_t start = std::max(arrival, next_start);
    next_start = start + min_gap;
    return start + fixed_latency;
  }
};

struct Request {
  std::uint64_t id = 0;
  MemoryAccess origin;
  bool from_accel = false;
  bool is_writeback = false;  // private-cache dirty eviction
  std::uint64_t issue_cycle = 0;
  std::uint64_t llc_arrival = 0;
};

/// FIFO: globally oldest LLC arrival, core winning ties. ARP: the
/// accelerator queue is always drained first.
inline int arbitrate(const std::deque<std::uint64_t>& core_q,
                     const std::deque<std::uint64_t>& accel_q,
                     const std::unordered_map<std::uint64_t, Request>& pool,
                     Arbitration policy) {
  // returns 0 = core head, 1 = accel head, -1 = none
  if (core_q.empty() && accel_q.empty()) return -1;
  if (policy == Arbitration::ARP) return accel_q.empty() ? 0 : 1;
  if (core_q.empty()) return 1;
  if (accel_q.empty()) return 0;
  return pool.at(core_q.front()).llc_arrival <= pool.at(accel_q.front()).llc_arrival ? 0
                                                                                     : 1;
}

struct MemSysConfig {
  CacheGeometry private_cache{256 * 1024, 64, 8, 2, 5};
  CacheGeometry llc{8ull * 1024 * 1024, 64, 16, 3, 9};
  std::uint64_t dram_latency = 100;
  std::uint64_t dram_min_gap = 4;
  std::uint32_t accel_window = 16;
  std::uint64_t core_instruction_budget = 4'000'000;
  std::uint64_t warmup_accesses = 100'000;
  std::uint64_t max_input_sets = 0;  // 0 = unlimited (stop on core budget)

  std::uint64_t private_cache_block() const { return private_cache.block_bytes; }
};

struct ClassStats {
  std::uint64_t accesses = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t bypasses = 0;
  std::uint64_t noreuse_evicts = 0;  // lines evicted without a re-reference
};

struct SimResult {
  std::uint64_t cycles = 0;
  std::vector<std::uint64_t> core_retired;  // local-progress proxy per core
  double throughput_proxy = 0;              // sum of retired/cycles over cores
  std::uint64_t input_sets = 0;
  std::uint64_t deadline_misses = 0;
  ClassStats core_llc, accel_llc;
  std::uint64_t private_hits = 0, private_misses = 0;
  std::vector<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>> occupancy;  // cycle, core, accel
  std::vector<EpochTelemetry> telemetry;
  std::uint64_t pending_at_end = 0;

  double dmr() const {
    return input_sets == 0 ? 0.0 : double(deadline_misses) / double(input_sets);
  }
  double accel_bypass_rate() const {
    return accel_llc.accesses == 0 ? 0.0
                                   : double(accel_llc.bypasses) / double(accel_llc.accesses);
  }
  double core_bypass_rate() const {
    return core_llc.accesses == 0 ? 0.0
                                  : double(core_llc.bypasses) / double(core_llc.accesses);
  }
};

/// One deterministic trace-driven simulation: N cores behind private
/// caches plus one accelerator sharing the LLC, a latency/bandwidth
/// DRAM, and the policy engine consulted on every fill.
class Simulator {
 public:
  Simulator(MemSysConfig cfg, std::vector<AccessSequence> core_traces,
            AccessSequence accel_trace, PolicyEngine policy,
            std::vector<ClusterModel> layer_models = {},
            std::ostream* event_log = nullptr)
      : cfg_(cfg),
        policy_(std::move(policy)),
        llc_(cfg.llc),
        accel_trace_(std::move(accel_trace)),
        layer_models_(std::move(layer_models)),
        log_(event_log) {
    dram_.fixed_latency = cfg.dram_latency;
    dram_.min_gap = cfg.dram_min_gap;
    warmed_ = cfg_.warmup_accesses == 0;
    for (auto& t : core_traces) {
      cores_.push_back(CoreState{std::move(t), SetAssocCache(cfg.private_cache)});
    }
  }

  SimResult run() {
    const auto& dl = policy_.deadline();
    // neutral APM state at cycle zero
    policy_.epoch_begin(make_counters());

    for (std::uint32_t i = 0; i < cores_.size(); ++i)
      if (!cores_[i].trace.empty())
        schedule(cores_[i].trace.accesses[0].timestamp, kPrioIssue, EvKind::CoreIssue, i);
    if (!accel_trace_.empty())
      schedule(accel_trace_.accesses[0].timestamp, kPrioIssue, EvKind::AccelIssue, 0,
               current_set_);
    schedule(dl.epoch_cycles, kPrioEpoch, EvKind::Epoch, 0);
    if (!accel_trace_.empty())
      schedule(dl.d_cycles(), kPrioEpoch, EvKind::Deadline, 0, current_set_);

    while (!events_.empty()) {
      Event ev = events_.top();
      events_.pop();
      now_ = ev.cycle;
      dispatch(ev);
      if (!stopping_ && stop_condition()) {
        stopping_ = true;
        stop_cycle_ = now_;
      }
      if (stopping_ && pending_ == 0 && !has_service_events()) break;
    }
    if (!stopping_) stop_cycle_ = now_;
    return finalize();
  }

 private:
  enum class EvKind : std::uint8_t {
    CoreIssue,
    AccelIssue,
    LlcTry,
    LlcDone,
    DramDone,
    Epoch,
    Deadline
  };
  static constexpr int kPrioResponse = 0;
  static constexpr int kPrioIssue = 1;
  static constexpr int kPrioEpoch = 2;

  struct Event {
    std::uint64_t cycle;
    int prio;
    std::uint64_t seq;
    EvKind kind;
    std::uint32_t who;
    std::uint64_t payload;
    bool operator>(const Event& o) const {
      if (cycle != o.cycle) return cycle > o.cycle;
      if (prio != o.prio) return prio > o.prio;
      return seq > o.seq;
    }
  };

  struct CoreState {
    AccessSequence trace;
    SetAssocCache priv;
    std::size_t idx = 0;
    std::uint64_t local_time = 0;   // retired-instruction proxy
    std::uint64_t loop_offset = 0;  // timestamp shift for wrapped traces
    bool done = false;
  };

  void schedule(std::uint64_t cycle, int prio, EvKind kind, std::uint32_t who,
                std::uint64_t payload = 0) {
    events_.push(Event{cycle, prio, ++seq_, kind, who, payload});
  }

  void log_event(const char* name, std::uint64_t req, std::uint64_t addr,
                 const std::string& detail) {
    if (log_)
      (*log_) << now_ << ',' << name << ',' << req << ",0x" << std::hex << addr << std::dec
              << ',' << detail << '\n';
  }

  bool stop_condition() const {
    if (cfg_.max_input_sets > 0 && input_sets_ >= cfg_.max_input_sets) return true;
    for (const auto& c : cores_)
      if (c.local_time >= cfg_.core_instruction_budget) return true;
    if (cores_.empty() && accel_trace_.empty()) return true;
    if (cores_.empty() && cfg_.max_input_sets == 0) return accel_done_;
    return false;
  }

  bool has_service_events() const { return service_events_ > 0; }

  // ---- core side ----

  std::uint64_t core_gap(const CoreState& c, std::size_t idx) const {
    const auto& a = c.trace.accesses;
    if (idx == 0) return a[0].timestamp;
    return a[idx].timestamp - a[idx - 1].timestamp;
  }

  void core_issue(std::uint32_t i) {
    CoreState& c = cores_[i];
    if (stopping_) {
      c.done = true;
      return;
    }
    const MemoryAccess& a = c.trace.accesses[c.idx];
    const std::uint64_t block = a.address / cfg_.private_cache_block();
    if (auto* line = c.priv.find(block)) {
      c.priv.touch(*line);
      if (a.kind == AccessKind::Write) line->dirty = true;
      ++private_hits_;
      advance_core(i, now_);
      return;
    }
    ++private_misses_;
    // fetch the block through the LLC; the core blocks until the fill
    Request req;
    req.id = new_request();
    req.origin = a;
    req.origin.requester = i;
    req.issue_cycle = now_;
    req.llc_arrival = now_;
    pool_[req.id] = req;
    core_q_.push_back(req.id);
    core_waiting_[req.id] = i;
    log_event("core_miss", req.id, a.address, "req=" + std::to_string(i));
    schedule(now_, kPrioIssue, EvKind::LlcTry, 0);
  }

  void advance_core(std::uint32_t i, std::uint64_t from_cycle) {
    CoreState& c = cores_[i];
    std::size_t next = c.idx + 1;
    if (next >= c.trace.accesses.size()) next = 0;  // loop the workload
    const std::uint64_t gap = core_gap(c, next);
    c.local_time += gap == 0 ? 1 : gap;
    c.idx = next;
    schedule(from_cycle + (gap == 0 ? 1 : gap), kPrioIssue, EvKind::CoreIssue, i);
  }

  void core_fill(const Request& req) {
    auto it = core_waiting_.find(req.id);
    std::uint32_t i = it->second;
    core_waiting_.erase(it);
    CoreState& c = cores_[i];
    const std::uint64_t block = req.origin.address / cfg_.private_cache_block();
    auto ev = c.priv.insert(block, OwnerClass::Core,
                            req.origin.kind == AccessKind::Write, req.origin.tag);
    if (ev.valid && ev.dirty) {
      // dirty private victim: write back to the LLC
      Request wb;
      wb.id = new_request();
      wb.origin.address = ev.block_addr * cfg_.private_cache_block();
      wb.origin.kind = AccessKind::Write;
      wb.origin.requester = i;
      wb.origin.tag = ev.sig;
      wb.is_writeback = true;
      wb.issue_cycle = now_;
      wb.llc_arrival = now_;
      pool_[wb.id] = wb;
      core_q_.push_back(wb.id);
      log_event("core_wb", wb.id, wb.origin.address, "");
      schedule(now_, kPrioIssue, EvKind::LlcTry, 0);
    }
    advance_core(i, now_);
  }

  // ---- accelerator side ----

  void accel_issue(std::uint64_t set_id) {
    if (stopping_ || accel_done_) return;
    if (set_id != current_set_) return;  // stale pacing event from a rolled set
    if (accel_outstanding_ >= cfg_.accel_window) {
      accel_stalled_ = true;
      return;
    }
    maybe_begin_layer(accel_idx_);
    const MemoryAccess& a = accel_trace_.accesses[accel_idx_];
    Request req;
    req.id = new_request();
    req.origin = a;
    req.origin.requester = std::uint32_t(cores_.size());
    req.from_accel = true;
    req.issue_cycle = now_;
    req.llc_arrival = now_;
    pool_[req.id] = req;
    accel_q_.push_back(req.id);
    ++accel_outstanding_;
    log_event("accel_issue", req.id, a.address,
              a.kind == AccessKind::Read ? "R" : "W");
    schedule(now_, kPrioIssue, EvKind::LlcTry, 0);

    ++accel_idx_;
    if (accel_idx_ < accel_trace_.accesses.size()) {
      const std::uint64_t gap = accel_trace_.accesses[accel_idx_].timestamp -
                                accel_trace_.accesses[accel_idx_ - 1].timestamp;
      schedule(now_ + std::max<std::uint64_t>(gap, 1), kPrioIssue, EvKind::AccelIssue, 0,
               current_set_);
    }
    // end-of-trace: the set completes when all responses drain
  }

  void maybe_begin_layer(std::size_t idx) {
    for (const auto& mark : accel_trace_.layer_marks) {
      if (mark.pos == idx) {
        if (mark.layer < layer_models_.size())
          policy_.begin_layer(layer_models_[mark.layer]);  // zero simulated cost
        break;
      }
    }
  }

  void accel_complete(const Request& req) {
    --accel_outstanding_;
    ++accel_completed_;
    epoch_accel_latency_ += now_ - req.issue_cycle;
    ++epoch_accel_completions_;
    policy_.note_accel_completion();
    if (accel_completed_ >= accel_trace_.accesses.size() &&
        accel_idx_ >= accel_trace_.accesses.size()) {
      finish_input_set(now_ <= set_start_ + set_deadline_cycles());
    }
    if (accel_stalled_ && !accel_done_) {
      accel_stalled_ = false;
      schedule(now_, kPrioIssue, EvKind::AccelIssue, 0, current_set_);
    }
  }

  std::uint64_t set_deadline_cycles() const { return policy_.deadline().d_cycles(); }

  void finish_input_set(bool met) {
    ++input_sets_;
    if (warmed_) ++metered_sets_;
    if (!met) {
      ++deadline_misses_;
      if (warmed_) ++metered_misses_;
    }
    log_event(met ? "set_done" : "set_missed", 0, 0, std::to_string(input_sets_));
    ++current_set_;
    accel_idx_ = 0;
    accel_completed_ = 0;
    accel_stalled_ = false;
    set_start_ = now_;
    if (stopping_ || (cfg_.max_input_sets > 0 && input_sets_ >= cfg_.max_input_sets)) {
      accel_done_ = true;
      return;
    }
    schedule(now_ + std::max<std::uint64_t>(accel_trace_.accesses[0].timestamp, 1),
             kPrioIssue, EvKind::AccelIssue, 0, current_set_);
    schedule(set_start_ + set_deadline_cycles(), kPrioEpoch, EvKind::Deadline, 0,
             current_set_);
  }

  void deadline_check(std::uint64_t set_id) {
    if (set_id != current_set_ || accel_done_ || stopping_) return;  // already rolled
    finish_input_set(false);
  }

  // ---- LLC ----

  void llc_try() {
    if (now_ < llc_busy_until_) {
      if (!llc_retry_scheduled_) {
        llc_retry_scheduled_ = true;
        schedule(llc_busy_until_, kPrioIssue, EvKind::LlcTry, 0);
      }
      return;
    }
    llc_retry_scheduled_ = false;
    int pick = arbitrate(core_q_, accel_q_, pool_, policy_.spec().arbitration);
    if (pick < 0) return;
    std::uint64_t id;
    if (pick == 0) {
      id = core_q_.front();
      core_q_.pop_front();
    } else {
      id = accel_q_.front();
      accel_q_.pop_front();
    }
    Request& req = pool_[id];
    count_class_access(req);

    const std::uint64_t tag_lat = cfg_.llc.tag_latency;
    const std::uint64_t data_lat = cfg_.llc.data_latency;
    const std::uint64_t block = req.origin.address / cfg_.llc.block_bytes;

    if (req.origin.kind == AccessKind::Read) {
      if (auto* line = llc_.find(block)) {
        // hit: any bypass decision is ignored, the cache serves it
        llc_.touch(*line);
        line->referenced = true;
        ship_for(line->owner).observe(line->sig, ShipEvent::HitReref);
        note_class_hit(req, true);
        // data array is pipelined: the port frees after the tag check,
        // the response returns a data latency later
        llc_busy_until_ = now_ + tag_lat;
        ++service_events_;
        schedule(now_ + tag_lat + data_lat, kPrioResponse, EvKind::LlcDone, 0, id);
        schedule(llc_busy_until_, kPrioIssue, EvKind::LlcTry, 0);
      } else {
        note_class_hit(req, false);
        llc_busy_until_ = now_ + tag_lat;
        std::uint64_t done = dram_.service(now_ + tag_lat);
        ++service_events_;
        schedule(done, kPrioResponse, EvKind::DramDone, 0, id);
        schedule(llc_busy_until_, kPrioIssue, EvKind::LlcTry, 0);
      }
    } else {
      // writes: core write-backs always cache; accelerator writes consult policy
      BypassDecision dec = BypassDecision::Cache;
      if (req.from_accel) dec = policy_.accel_decide(req.origin.address);
      if (dec == BypassDecision::Bypass) {
        count_bypass(req);
        if (llc_.invalidate(block)) log_event("wb_inval", id, req.origin.address, "");
        llc_busy_until_ = now_ + tag_lat;
        std::uint64_t done = dram_.service(now_ + tag_lat);
        ++service_events_;
        schedule(done, kPrioResponse, EvKind::DramDone, 0, id);
      } else {
        if (auto* line = llc_.find(block)) {
          llc_.touch(*line);
          line->dirty = true;
          line->referenced = true;
          ship_for(line->owner).observe(line->sig, ShipEvent::HitReref);
          note_class_hit(req, true);
        } else {
          note_class_hit(req, false);
          fill_llc(req, /*dirty=*/true);
        }
        llc_busy_until_ = now_ + tag_lat;
        ++service_events_;
        schedule(now_ + tag_lat + data_lat, kPrioResponse, EvKind::LlcDone, 0, id);
      }
      schedule(llc_busy_until_, kPrioIssue, EvKind::LlcTry, 0);
    }
  }

  ShipTable& ship_for(OwnerClass owner) {
    return owner == OwnerClass::Accel ? policy_.accel_ship() : policy_.core_ship();
  }

  std::uint64_t ship_sig(const Request& req) const {
    return req.from_accel ? (req.origin.address >> 6) : req.origin.tag;
  }

  void fill_llc(const Request& req, bool dirty) {
    const std::uint64_t block = req.origin.address / cfg_.llc.block_bytes;
    if (auto* line = llc_.find(block)) {
      // overlapping miss already filled this block; refresh instead of duplicating
      llc_.touch(*line);
      line->dirty |= dirty;
      line->referenced = true;
      return;
    }
    auto ev = llc_.insert(block, req.from_accel ? OwnerClass::Accel : OwnerClass::Core,
                          dirty, ship_sig(req));
    if (ev.valid) {
      if (!ev.referenced) {
        ship_for(ev.owner).observe(ev.sig, ShipEvent::InsertEvictNoReuse);
        auto& s = ev.owner == OwnerClass::Accel ? accel_stats_ : core_stats_;
        ++s.noreuse_evicts;
      }
      if (ev.dirty) dram_.service(now_);  // victim write-back consumes bandwidth
    }
  }

  /// DRAM response arrived at the LLC: decide fill vs response bypass.
  void dram_done(std::uint64_t id) {
    --service_events_;
    Request& req = pool_[id];
    if (req.origin.kind == AccessKind::Read) {
      BypassDecision dec = req.from_accel ? policy_.accel_decide(req.origin.address)
                                          : policy_.core_decide(req.origin.tag);
      if (dec == BypassDecision::Bypass) {
        count_bypass(req);
        log_event("resp_bypass", id, req.origin.address, "");
      } else {
        fill_llc(req, /*dirty=*/false);
      }
    }
    respond(req);
  }

  void llc_done(std::uint64_t id) {
    --service_events_;
    respond(pool_[id]);
    schedule(now_, kPrioIssue, EvKind::LlcTry, 0);
  }

  void respond(const Request& req) {
    log_event("resp", req.id, req.origin.address, "");
    if (req.from_accel) {
      accel_complete(req);
    } else if (!req.is_writeback) {
      core_fill(req);
    }
    pool_.erase(req.id);
    --pending_;
    schedule(now_, kPrioIssue, EvKind::LlcTry, 0);
  }

  // ---- metrics ----

  bool metered() const { return warmed_; }

  void count_class_access(const Request& req) {
    if (!warmed_ && ++total_llc_accesses_ >= cfg_.warmup_accesses) {
      warmed_ = true;
      metrics_start_ = now_;
      snapshot_retired_.clear();
      for (const auto& c : cores_) snapshot_retired_.push_back(c.local_time);
    }
    auto& s = req.from_accel ? accel_stats_ : core_stats_;
    if (metered()) ++s.accesses;
    if (!req.from_accel) ++epoch_core_accesses_;
  }

  void note_class_hit(const Request& req, bool hit) {
    auto& s = req.from_accel ? accel_stats_ : core_stats_;
    if (metered()) (hit ? s.hits : s.misses)++;
    if (!req.from_accel && !hit) ++epoch_core_misses_;
  }

  void count_bypass(const Request& req) {
    auto& s = req.from_accel ? accel_stats_ : core_stats_;
    if (metered()) ++s.bypasses;
  }

  EpochCounters make_counters() const {
    EpochCounters c;
    const auto& dl = policy_.deadline();
    const std::uint64_t m = dl.accesses_per_set;
    c.remaining_accesses = accel_completed_ >= m ? 0 : m - accel_completed_;
    const std::uint64_t deadline_at = set_start_ + dl.d_cycles();
    c.remaining_cycles = std::int64_t(deadline_at) - std::int64_t(now_);
    c.core_miss_rate = epoch_core_accesses_ == 0
                           ? 0.0
                           : double(epoch_core_misses_) / double(epoch_core_accesses_);
    const std::uint64_t elapsed = now_ - set_start_;
    c.ma_past = elapsed == 0 ? dl.ma_global()
                             : double(accel_completed_) * double(dl.epoch_cycles) /
                                   double(elapsed);
    if (epoch_accel_completions_ > 0) {
      c.amal = double(epoch_accel_latency_) / double(epoch_accel_completions_);
      c.amal_valid = true;
    }
    return c;
  }

  void epoch_tick() {
    policy_.epoch_begin(make_counters());
    auto [core_lines, accel_lines] = llc_.occupancy();
    occupancy_.emplace_back(now_, core_lines, accel_lines);
    epoch_core_accesses_ = epoch_core_misses_ = 0;
    epoch_accel_latency_ = 0;
    epoch_accel_completions_ = 0;
    if (!stopping_) schedule(now_ + policy_.deadline().epoch_cycles, kPrioEpoch,
                             EvKind::Epoch, 0);
  }

  void dispatch(const Event& ev) {
    switch (ev.kind) {
      case EvKind::CoreIssue: core_issue(ev.who); break;
      case EvKind::AccelIssue: accel_issue(ev.payload); break;
      case EvKind::LlcTry: llc_try(); break;
      case EvKind::LlcDone: llc_done(ev.payload); break;
      case EvKind::DramDone: dram_done(ev.payload); break;
      case EvKind::Epoch: epoch_tick(); break;
      case EvKind::Deadline: deadline_check(ev.payload); break;
    }
  }

  std::uint64_t new_request() {
    ++pending_;
    return next_req_id_++;
  }

  SimResult finalize() {
    SimResult r;
    r.cycles = stop_cycle_ > metrics_start_ ? stop_cycle_ - metrics_start_ : stop_cycle_;
    double tp = 0;
    for (std::size_t i = 0; i < cores_.size(); ++i) {
      std::uint64_t base = i < snapshot_retired_.size() ? snapshot_retired_[i] : 0;
      std::uint64_t retired = cores_[i].local_time - base;
      r.core_retired.push_back(retired);
      if (r.cycles > 0) tp += double(retired) / double(r.cycles);
    }
    r.throughput_proxy = tp;
    r.input_sets = warmed_ ? metered_sets_ : input_sets_;
    r.deadline_misses = warmed_ ? metered_misses_ : deadline_misses_;
    r.core_llc = core_stats_;
    r.accel_llc = accel_stats_;
    r.private_hits = private_hits_;
    r.private_misses = private_misses_;
    r.occupancy = occupancy_;
    r.telemetry = policy_.telemetry();
    r.pending_at_end = pending_;
    return r;
  }

  MemSysConfig cfg_;
  std::uint64_t private_cache_block() const { return cfg_.private_cache.block_bytes; }

  PolicyEngine policy_;
  SetAssocCache llc_;
  DramModel dram_;
  AccessSequence accel_trace_;
  std::vector<ClusterModel> layer_models_;
  std::ostream* log_ = nullptr;

  std::vector<CoreState> cores_;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
  std::uint64_t seq_ = 0;
  std::uint64_t now_ = 0;
  bool stopping_ = false;
  std::uint64_t stop_cycle_ = 0;

  std::unordered_map<std::uint64_t, Request> pool_;
  std::unordered_map<std::uint64_t, std::uint32_t> core_waiting_;
  std::deque<std::uint64_t> core_q_, accel_q_;
  std::uint64_t next_req_id_ = 1;
  std::uint64_t pending_ = 0;
  std::uint64_t service_events_ = 0;
  std::uint64_t llc_busy_until_ = 0;
  bool llc_retry_scheduled_ = false;

  std::size_t accel_idx_ = 0;
  std::uint64_t accel_completed_ = 0;
  std::uint32_t accel_outstanding_ = 0;
  bool accel_stalled_ = false;
  bool accel_done_ = false;
  std::uint64_t set_start_ = 0;
  std::uint64_t current_set_ = 0;
  std::uint64_t input_sets_ = 0;
  std::uint64_t deadline_misses_ = 0;
  std::uint64_t metered_sets_ = 0;
  std::uint64_t metered_misses_ = 0;

  ClassStats core_stats_, accel_stats_;
  std::uint64_t private_hits_ = 0, private_misses_ = 0;
  std::uint64_t total_llc_accesses_ = 0;
  bool warmed_ = false;
  std::uint64_t metrics_start_ = 0;
  std::vector<std::uint64_t> snapshot_retired_;
  std::uint64_t epoch_core_accesses_ = 0, epoch_core_misses_ = 0;
  std::uint64_t epoch_accel_latency_ = 0, epoch_accel_completions_ = 0;
  std::vector<std::tuple<std::uint64_t, std::uint64_t, std::uint64_t>> occupancy_;
};

}  // namespace hydra
