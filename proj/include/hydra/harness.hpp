#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hydra/gen.hpp"
#include "hydra/memsys.hpp"

namespace hydra {

/// Root-seed split: every consumer gets its own salted stream so one
/// config seed reproduces the whole experiment.
inline std::uint64_t split_seed(std::uint64_t root, std::uint32_t salt) {
  std::uint32_t lo = splitmix32(std::uint32_t(root) ^ salt);
  std::uint32_t hi = splitmix32(std::uint32_t(root >> 32) ^ (salt * 0x9e3779b9u + 1u));
  return (std::uint64_t(hi) << 32) | lo;
}

namespace seed_salt {
inline constexpr std::uint32_t kCoreGen = 0x100;  // + core index
inline constexpr std::uint32_t kAccelGen = 0x200;
inline constexpr std::uint32_t kKmeans = 0x300;  // + layer id
inline constexpr std::uint32_t kPolicy = 0x400;
}  // namespace seed_salt

struct CoreWorkload {
  std::string trace_file;  // if empty, generate
  CoreProfile profile = CoreProfile::CI;
  std::size_t length = 200'000;
  std::uint64_t footprint_bytes = 128 * 1024;
};

struct ExperimentConfig {
  MemSysConfig memsys;
  std::vector<CoreWorkload> cores;
  std::optional<AcceleratorSpec> accel_spec;
  std::string accel_trace_file;
  // Model a coalescing DMA front-end: consecutive accelerator accesses
  // that land in the same LLC block are merged into one LLC request.
  bool accel_coalesce = false;
  double deadline_ips = 10.0;
  std::uint64_t clock_hz = 2'000'000'000;
  std::uint64_t epoch_cycles = 200'000;
  std::string policy = "FIFO-NB";
  HydraParams params;
  LRPTConfig lrpt;
  bool hashed_training = false;
  unsigned block_bits = 6;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::string cache_dir;  // LERN model cache, empty = no caching

  bool has_accel() const { return accel_spec.has_value() || !accel_trace_file.empty(); }

  void validate() const {
    if (cores.empty()) throw config_error("config: at least one core required");
    if (accel_spec && !accel_trace_file.empty())
      throw config_error("config: give either an accelerator spec or a trace, not both");
    if (deadline_ips <= 0) throw config_error("config: deadline_ips must be > 0");
    for (const auto& c : cores)
      if (!c.trace_file.empty() && !std::filesystem::exists(c.trace_file))
        throw config_error("config: missing core trace " + c.trace_file);
    if (!accel_trace_file.empty() && !std::filesystem::exists(accel_trace_file))
      throw config_error("config: missing accelerator trace " + accel_trace_file);
  }
};

// ---- JSON config parsing ----

namespace detail {

inline Dataflow dataflow_from_string(const std::string& s) {
  if (s == "OS") return Dataflow::OS;
  if (s == "WS") return Dataflow::WS;
  if (s == "IS") return Dataflow::IS;
  throw config_error("unknown dataflow: " + s);
}

inline LayerSpec layer_from_json(const nlohmann::json& j) {
  LayerSpec l;
  l.ifmap_h = j.at("ifmap_h");
  l.ifmap_w = j.at("ifmap_w");
  l.filt_h = j.at("filt_h");
  l.filt_w = j.at("filt_w");
  l.channels = j.value("channels", 1);
  l.num_filters = j.value("num_filters", 1);
  l.stride = j.value("stride", 1);
  l.dataflow = dataflow_from_string(j.value("dataflow", "OS"));
  return l;
}

inline TraceFormat format_of(const std::string& path) {
  return path.ends_with(".bin") || path.ends_with(".htrc") ? TraceFormat::Binary
                                                           : TraceFormat::CSV;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  for (const auto& cj : j.at("cores")) {
    CoreWorkload w;
    if (cj.contains("trace")) {
      w.trace_file = cj["trace"];
    } else {
      w.profile = core_profile_from_string(cj.value("profile", "CI"));
      w.length = cj.value("length", std::size_t(200'000));
      w.footprint_bytes = std::uint64_t(cj.value("footprint_kb", 128)) * 1024;
    }
    cfg.cores.push_back(w);
  }
  if (j.contains("accelerator")) {
    const auto& aj = j["accelerator"];
    if (aj.contains("trace")) {
      cfg.accel_trace_file = aj["trace"];
    } else {
      AcceleratorSpec s;
      s.pe_rows = aj.value("pe_rows", 8);
      s.pe_cols = aj.value("pe_cols", 8);
      s.sram_ifmap_kb = aj.value("sram_ifmap_kb", 16);
      s.sram_ofmap_kb = aj.value("sram_ofmap_kb", 16);
      s.sram_filter_kb = aj.value("sram_filter_kb", 16);
      for (const auto& lj : aj.at("layers")) s.layers.push_back(detail::layer_from_json(lj));
      cfg.accel_spec = s;
    }
    cfg.accel_coalesce = aj.value("coalesce", false);
  }
  cfg.deadline_ips = j.value("deadline_ips", 10.0);
  cfg.clock_hz = j.value("clock_hz", std::uint64_t(2'000'000'000));
  cfg.epoch_cycles = j.value("epoch_cycles", std::uint64_t(200'000));
  cfg.policy = j.value("policy", "FIFO-NB");
  cfg.seed = j.value("seed", std::uint64_t(1));
  cfg.out_dir = j.value("out_dir", "out");
  cfg.cache_dir = j.value("cache_dir", "");
  cfg.block_bits = j.value("block_bits", 6u);
  cfg.hashed_training = j.value("hashed_training", false);
  if (j.contains("policy_params")) {
    const auto& p = j["policy_params"];
    cfg.params.margin_high = p.value("margin_high", cfg.params.margin_high);
    cfg.params.margin_low = p.value("margin_low", cfg.params.margin_low);
    cfg.params.mr_th = p.value("mr_th", cfg.params.mr_th);
    cfg.params.alpha = p.value("alpha", cfg.params.alpha);
    cfg.params.beta = p.value("beta", cfg.params.beta);
    cfg.params.delta_a = p.value("delta_a", cfg.params.delta_a);
    cfg.params.delta_b = p.value("delta_b", cfg.params.delta_b);
    cfg.params.base.b = p.value("t_b", cfg.params.base.b);
    cfg.params.base.a1 = p.value("t_a1", cfg.params.base.a1);
    cfg.params.base.a2 = p.value("t_a2", cfg.params.base.a2);
    cfg.params.base.a3 = p.value("t_a3", cfg.params.base.a3);
    cfg.params.base.a4 = p.value("t_a4", cfg.params.base.a4);
    cfg.params.compound_thresholds =
        p.value("compound_thresholds", cfg.params.compound_thresholds);
  }
  if (j.contains("lrpt")) {
    const auto& l = j["lrpt"];
    if (l.contains("hash")) cfg.lrpt.hash = HashScheme::from_string(l["hash"]);
    cfg.lrpt.entries = std::uint64_t(1) << cfg.lrpt.hash.bits;
    cfg.lrpt.validate();
  }
  if (j.contains("memsys")) {
    const auto& m = j["memsys"];
    auto& ms = cfg.memsys;
    ms.llc.size_bytes = std::uint64_t(m.value("llc_kb", 8192)) * 1024;
    ms.llc.ways = m.value("llc_ways", 16u);
    ms.private_cache.size_bytes = std::uint64_t(m.value("private_kb", 256)) * 1024;
    ms.private_cache.ways = m.value("private_ways", 8u);
    ms.dram_latency = m.value("dram_latency", std::uint64_t(100));
    ms.dram_min_gap = m.value("dram_min_gap", std::uint64_t(4));
    ms.accel_window = m.value("accel_window", 16u);
    ms.core_instruction_budget =
        m.value("core_budget", std::uint64_t(4'000'000));
    ms.warmup_accesses = m.value("warmup_accesses", std::uint64_t(100'000));
    ms.max_input_sets = m.value("max_input_sets", std::uint64_t(0));
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(path + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(path + ": " + e.what());
  }
}

// ---- trace assembly ----

struct ExperimentInputs {
  std::vector<AccessSequence> core_traces;
  AccessSequence accel_trace;
};

inline ExperimentInputs build_inputs(const ExperimentConfig& cfg) {
  ExperimentInputs in;
  for (std::size_t i = 0; i < cfg.cores.size(); ++i) {
    const auto& w = cfg.cores[i];
    if (!w.trace_file.empty()) {
      in.core_traces.push_back(parse_trace(w.trace_file, detail::format_of(w.trace_file),
                                           /*load_layers=*/false));
    } else {
      in.core_traces.push_back(generate_core_trace(
          w.profile, w.length, w.footprint_bytes,
          split_seed(cfg.seed, seed_salt::kCoreGen + std::uint32_t(i)),
          0x4000'0000ull + i * 0x1000'0000ull));
    }
  }
  if (cfg.accel_spec) {
    in.accel_trace =
        generate_systolic_trace(*cfg.accel_spec, split_seed(cfg.seed, seed_salt::kAccelGen));
  } else if (!cfg.accel_trace_file.empty()) {
    in.accel_trace =
        parse_trace(cfg.accel_trace_file, detail::format_of(cfg.accel_trace_file));
  }
  if (cfg.accel_coalesce && !in.accel_trace.empty())
    in.accel_trace = coalesce_trace(in.accel_trace, cfg.memsys.llc.block_bytes);
  if (!in.accel_trace.empty() && in.accel_trace.layer_marks.empty())
    in.accel_trace.layer_marks.push_back({0, 0});  // whole trace = one layer
  return in;
}

// ---- LERN training with on-disk caching ----

inline std::uint64_t trace_fingerprint(const AccessSequence& seq) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the record fields
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& a : seq.accesses) {
    mix(a.timestamp);
    mix(a.address);
    mix((std::uint64_t(a.requester) << 8) | std::uint64_t(a.kind));
    mix(a.tag);
  }
  return h;
}

inline std::vector<ClusterModel> train_models(const ExperimentConfig& cfg,
                                              const AccessSequence& accel_trace) {
  std::vector<ClusterModel> models;
  if (accel_trace.empty()) return models;
  std::uint32_t max_layer = 0;
  for (const auto& m : accel_trace.layer_marks) max_layer = std::max(max_layer, m.layer);
  models.resize(max_layer + 1);

  std::string prefix;
  if (!cfg.cache_dir.empty()) {
    std::filesystem::create_directories(cfg.cache_dir);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%016llx_b%u_s%llu_%s",
                  (unsigned long long)trace_fingerprint(accel_trace), cfg.block_bits,
                  (unsigned long long)cfg.seed,
                  cfg.hashed_training ? cfg.lrpt.hash.to_string().c_str() : "full");
    prefix = cfg.cache_dir + "/lern_" + buf;
  }

  for (const auto& mark : accel_trace.layer_marks) {
    const std::uint32_t li = mark.layer;
    std::string path = prefix.empty() ? "" : prefix + "_L" + std::to_string(li) + ".csv";
    if (!path.empty() && std::filesystem::exists(path)) {
      models[li] = load_model(path);
      continue;
    }
    const std::uint64_t seed = split_seed(cfg.seed, seed_salt::kKmeans + li);
    models[li] = cfg.hashed_training
                     ? train_layer_hashed(accel_trace, li, cfg.block_bits, seed,
                                          cfg.lrpt.hash)
                     : train_layer(accel_trace, li, cfg.block_bits, seed);
    if (!path.empty()) save_model(models[li], path);
  }
  return models;
}

// ---- reports ----

struct MetricsReport {
  std::string policy;
  std::uint64_t seed = 0;
  SimResult sim;
  bool dmr_defined = false;
  double wall_seconds = 0;  // not serialized: reports must be run-to-run identical

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["policy"] = policy;
    j["seed"] = seed;
    j["cycles"] = sim.cycles;
    j["core_retired"] = sim.core_retired;
    j["throughput_proxy"] = sim.throughput_proxy;
    j["input_sets"] = sim.input_sets;
    j["deadline_misses"] = sim.deadline_misses;
    j["dmr"] = sim.dmr();
    j["dmr_defined"] = dmr_defined;
    j["accel_bypass_rate"] = sim.accel_bypass_rate();
    j["core_bypass_rate"] = sim.core_bypass_rate();
    auto cls = [](const ClassStats& s) {
      nlohmann::json c;
      c["accesses"] = s.accesses;
      c["hits"] = s.hits;
      c["misses"] = s.misses;
      c["bypasses"] = s.bypasses;
      c["hit_rate"] = s.accesses ? double(s.hits) / double(s.accesses) : 0.0;
      return c;
    };
    j["core_llc"] = cls(sim.core_llc);
    j["accel_llc"] = cls(sim.accel_llc);
    j["private_hits"] = sim.private_hits;
    j["private_misses"] = sim.private_misses;
    j["epochs"] = sim.telemetry.size();
    j["occupancy_samples"] = sim.occupancy.size();
    return j;
  }
};

inline void write_report(const MetricsReport& r, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir + "/report.json");
    out << r.to_json().dump(2) << '\n';
  }
  {
    std::ofstream out(out_dir + "/epochs.csv");
    out << "epoch,ma_i,ma_hat,rung,ri_th,rc_th,margin\n";
    for (const auto& t : r.sim.telemetry)
      out << t.epoch << ',' << t.ma_i << ',' << t.ma_hat << ',' << t.rung << ','
          << t.ri_th << ',' << t.rc_th << ',' << t.margin << '\n';
  }
  {
    std::ofstream out(out_dir + "/occupancy.csv");
    out << "cycle,core_lines,accel_lines\n";
    for (const auto& [cycle, core, accel] : r.sim.occupancy)
      out << cycle << ',' << core << ',' << accel << '\n';
  }
}

// ---- experiment drivers ----

inline DeadlineSpec make_deadline(const ExperimentConfig& cfg,
                                  const AccessSequence& accel_trace) {
  DeadlineSpec dl;
  dl.accesses_per_set = accel_trace.empty() ? 1 : accel_trace.accesses.size();
  dl.d_sec = 1.0 / cfg.deadline_ips;
  dl.epoch_cycles = cfg.epoch_cycles;
  dl.clock_hz = cfg.clock_hz;
  dl.validate();
  return dl;
}

inline MetricsReport run_experiment(const ExperimentConfig& cfg,
                                    const ExperimentInputs* prebuilt = nullptr,
                                    const std::vector<ClusterModel>* premodels = nullptr,
                                    std::ostream* event_log = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  ExperimentInputs local;
  const ExperimentInputs& in = prebuilt ? *prebuilt : (local = build_inputs(cfg), local);

  PolicySpec spec = baseline_policy(cfg.policy);
  DeadlineSpec dl = make_deadline(cfg, in.accel_trace);
  std::vector<ClusterModel> models;
  if (spec.accel_bypass == AccelBypassKind::Lern && !premodels)
    models = train_models(cfg, in.accel_trace);
  const std::vector<ClusterModel>& use_models = premodels ? *premodels : models;

  PolicyEngine engine(spec, cfg.params, dl, cfg.lrpt,
                      split_seed(cfg.seed, seed_salt::kPolicy));
  Simulator sim(cfg.memsys, in.core_traces, in.accel_trace, std::move(engine), use_models,
                event_log);
  MetricsReport r;
  r.policy = spec.name;
  r.seed = cfg.seed;
  r.sim = sim.run();
  r.dmr_defined = r.sim.input_sets > 0;
  if (r.sim.pending_at_end != 0)
    throw validation_error("simulation ended with unanswered requests");
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

/// Numeric sweep axes understood by `sweep`.
inline void apply_axis(ExperimentConfig& cfg, const std::string& axis, double value) {
  if (axis == "deadline_ips" || axis == "ips")
    cfg.deadline_ips = value;
  else if (axis == "epoch_cycles" || axis == "et")
    cfg.epoch_cycles = std::uint64_t(value);
  else if (axis == "seed")
    cfg.seed = std::uint64_t(value);
  else if (axis == "warmup_accesses")
    cfg.memsys.warmup_accesses = std::uint64_t(value);
  else
    throw config_error("unknown sweep axis: " + axis);
}

inline std::vector<MetricsReport> sweep(const ExperimentConfig& tmpl,
                                        const std::string& axis,
                                        const std::vector<double>& values,
                                        const std::string& out_csv = "") {
  std::vector<MetricsReport> reports;
  for (double v : values) {
    ExperimentConfig cfg = tmpl;
    apply_axis(cfg, axis, v);
    reports.push_back(run_experiment(cfg));
  }
  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    out << axis << ",policy,throughput_proxy,dmr,core_bypass_rate,accel_bypass_rate\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const auto& r = reports[i];
      out << values[i] << ',' << r.policy << ',' << r.sim.throughput_proxy << ','
          << r.sim.dmr() << ',' << r.sim.core_bypass_rate() << ','
          << r.sim.accel_bypass_rate() << '\n';
    }
  }
  return reports;
}

struct ComparisonRow {
  std::string policy;
  double norm_throughput = 0;
  double dmr = 0;
  double core_br = 0;
  double accel_br = 0;
};

/// One simulation per policy on identical traces and seeds; throughput
/// is normalized to FIFO-NB (run implicitly when not in the list).
inline std::vector<ComparisonRow> compare_policies(const ExperimentConfig& cfg,
                                                   const std::vector<std::string>& policies,
                                                   const std::string& out_csv = "") {
  if (policies.size() < 2) throw config_error("compare needs at least two policies");
  ExperimentInputs in = build_inputs(cfg);

  double base_tp = 0;
  std::vector<MetricsReport> reports;
  std::optional<std::vector<ClusterModel>> models;  // train once, reuse across policies
  auto run_one = [&](const std::string& name) {
    ExperimentConfig c = cfg;
    c.policy = name;
    if (baseline_policy(name).accel_bypass == AccelBypassKind::Lern && !models)
      models = train_models(c, in.accel_trace);
    return run_experiment(c, &in, models ? &*models : nullptr);
  };

  bool has_base = false;
  for (const auto& p : policies) has_base |= p == "FIFO-NB";
  if (!has_base) base_tp = run_one("FIFO-NB").sim.throughput_proxy;
  for (const auto& p : policies) {
    reports.push_back(run_one(p));
    if (p == "FIFO-NB") base_tp = reports.back().sim.throughput_proxy;
  }

  std::vector<ComparisonRow> rows;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    const auto& r = reports[i];
    ComparisonRow row;
    row.policy = policies[i];
    row.norm_throughput = policies[i] == "FIFO-NB"
                              ? 1.0
                              : (base_tp > 0 ? r.sim.throughput_proxy / base_tp : 0.0);
    row.dmr = r.sim.dmr();
    row.core_br = r.sim.core_bypass_rate();
    row.accel_br = r.sim.accel_bypass_rate();
    rows.push_back(row);
  }
  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    out << "policy,norm_throughput,dmr,core_bypass_rate,accel_bypass_rate\n";
    for (const auto& row : rows)
      out << row.policy << ',' << row.norm_throughput << ',' << row.dmr << ','
          << row.core_br << ',' << row.accel_br << '\n';
  }
  return rows;
}

}  // namespace hydra
