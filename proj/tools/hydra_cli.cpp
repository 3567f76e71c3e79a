// Command-line driver: trace generation, LERN training, experiment
// runs, sweeps, policy comparisons, and L-RPT dumps.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hydra/harness.hpp"

namespace {

hydra::ExperimentConfig load_config(const std::string& path, std::uint64_t seed_override,
                                    const std::string& out_dir_override) {
  auto cfg = hydra::config_from_file(path);
  if (seed_override != 0) cfg.seed = seed_override;
  if (!out_dir_override.empty()) cfg.out_dir = out_dir_override;
  return cfg;
}

int cmd_gen_trace(const std::string& config, std::uint64_t seed, const std::string& out_dir,
                  const std::string& format) {
  auto cfg = load_config(config, seed, out_dir);
  const auto fmt =
      format == "bin" ? hydra::TraceFormat::Binary : hydra::TraceFormat::CSV;
  const std::string ext = format == "bin" ? ".bin" : ".csv";
  std::filesystem::create_directories(cfg.out_dir);
  auto in = hydra::build_inputs(cfg);
  for (std::size_t i = 0; i < in.core_traces.size(); ++i) {
    // requester ids are positional: core i keeps id i in its own file
    for (auto& a : in.core_traces[i].accesses) a.requester = std::uint32_t(i);
    hydra::write_trace(in.core_traces[i],
                       cfg.out_dir + "/core" + std::to_string(i) + ext, fmt);
  }
  if (!in.accel_trace.empty())
    hydra::write_trace(in.accel_trace, cfg.out_dir + "/accel" + ext, fmt);
  std::cout << "wrote " << in.core_traces.size() << " core trace(s)"
            << (in.accel_trace.empty() ? "" : " and 1 accelerator trace") << " to "
            << cfg.out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& config, std::uint64_t seed, const std::string& out_dir) {
  auto cfg = load_config(config, seed, out_dir);
  auto in = hydra::build_inputs(cfg);
  if (in.accel_trace.empty()) throw hydra::config_error("train: no accelerator configured");
  auto models = hydra::train_models(cfg, in.accel_trace);
  std::filesystem::create_directories(cfg.out_dir);
  for (const auto& m : models) {
    const std::string path =
        cfg.out_dir + "/model_L" + std::to_string(m.layer_id) + ".csv";
    hydra::save_model(m, path);
    auto sig = hydra::build_reuse_signature(
        in.accel_trace, cfg.block_bits, {},
        in.accel_trace.layer_range(m.layer_id).first,
        in.accel_trace.layer_range(m.layer_id).second);
    std::cout << "layer " << m.layer_id << ": " << sig.n_unique() << " lines, accuracy "
              << hydra::prediction_accuracy(sig, m) << " -> " << path << "\n";
  }
  return 0;
}

int cmd_run(const std::string& config, std::uint64_t seed, const std::string& out_dir,
            const std::string& event_log) {
  auto cfg = load_config(config, seed, out_dir);
  std::ofstream log;
  if (!event_log.empty()) {
    log.open(event_log);
    log << "cycle,event,req,addr,detail\n";
  }
  auto report = hydra::run_experiment(cfg, nullptr, nullptr, log.is_open() ? &log : nullptr);
  hydra::write_report(report, cfg.out_dir);
  std::cout << report.to_json().dump(2) << "\n";
  return 0;
}

int cmd_sweep(const std::string& config, std::uint64_t seed, const std::string& out_dir,
              const std::string& axis, const std::vector<double>& values) {
  auto cfg = load_config(config, seed, out_dir);
  std::filesystem::create_directories(cfg.out_dir);
  auto reports = hydra::sweep(cfg, axis, values, cfg.out_dir + "/sweep.csv");
  std::cout << "swept " << axis << " over " << values.size() << " value(s) -> "
            << cfg.out_dir << "/sweep.csv\n";
  return 0;
}

int cmd_compare(const std::string& config, std::uint64_t seed, const std::string& out_dir,
                const std::vector<std::string>& policies) {
  auto cfg = load_config(config, seed, out_dir);
  std::filesystem::create_directories(cfg.out_dir);
  auto rows = hydra::compare_policies(cfg, policies, cfg.out_dir + "/comparison.csv");
  for (const auto& r : rows)
    std::cout << r.policy << ": tp=" << r.norm_throughput << " dmr=" << r.dmr
              << " core_br=" << r.core_br << " accel_br=" << r.accel_br << "\n";
  return 0;
}

int cmd_dump_lrpt(const std::string& model_path, const std::string& hash,
                  const std::string& out) {
  auto model = hydra::load_model(model_path);
  hydra::LRPTConfig cfg;
  if (!hash.empty()) {
    cfg.hash = hydra::HashScheme::from_string(hash);
    cfg.entries = std::uint64_t(1) << cfg.hash.bits;
  }
  hydra::LRPT table(cfg);
  table.load(model);
  if (out.empty()) {
    table.dump_csv(std::cout);
  } else {
    std::ofstream os(out);
    table.dump_csv(os);
    std::cout << "wrote " << cfg.entries << " entries (" << table.footprint_bits() / 8192
              << " KB) to " << out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heterogeneous shared-LLC bypass simulator"};
  app.require_subcommand(1);

  std::string config, out_dir, format = "csv", event_log, axis, model_path, hash, out;
  std::uint64_t seed = 0;
  std::vector<double> values;
  std::vector<std::string> policies;

  auto add_common = [&](CLI::App* sub, bool need_config = true) {
    if (need_config)
      sub->add_option("-c,--config", config, "experiment config (JSON)")->required();
    sub->add_option("--seed", seed, "root seed override");
    sub->add_option("--out-dir", out_dir, "output directory override");
  };

  auto* gen = app.add_subcommand("gen-trace", "generate core/accelerator traces");
  add_common(gen);
  gen->add_option("--format", format, "csv or bin")
      ->check(CLI::IsMember({"csv", "bin"}));

  auto* train = app.add_subcommand("train", "train per-layer LERN models");
  add_common(train);

  auto* run = app.add_subcommand("run", "run one experiment");
  add_common(run);
  run->add_option("--event-log", event_log, "per-event CSV log path");

  auto* sw = app.add_subcommand("sweep", "sweep one config axis");
  add_common(sw);
  sw->add_option("--axis", axis, "config field to sweep")->required();
  sw->add_option("--values", values, "axis values")->required();

  auto* cmp = app.add_subcommand("compare", "compare policies on one workload");
  add_common(cmp);
  cmp->add_option("--policies", policies, "policy names")->required();

  auto* dump = app.add_subcommand("dump-lrpt", "load a model export and dump the table");
  dump->add_option("--model", model_path, "model export CSV")->required();
  dump->add_option("--hash", hash, "index scheme, e.g. bitmask:19 or splitmix32:17");
  dump->add_option("--out", out, "output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_trace(config, seed, out_dir, format);
    if (train->parsed()) return cmd_train(config, seed, out_dir);
    if (run->parsed()) return cmd_run(config, seed, out_dir, event_log);
    if (sw->parsed()) return cmd_sweep(config, seed, out_dir, axis, values);
    if (cmp->parsed()) return cmd_compare(config, seed, out_dir, policies);
    if (dump->parsed()) return cmd_dump_lrpt(model_path, hash, out);
  } catch (const hydra::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const hydra::parse_error& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const hydra::validation_error& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const hydra::annotation_error& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
