// Copyright 2026 prft-sim contributors.
// Licensed under the Apache License, Version 2.0 (see LICENSE).
//
// Command-line front end: run scenarios, check traces, sweep message
// complexity, and re-render reports from saved artifacts.
//
// Exit codes: 0 all checks passed, 1 a protocol or robustness violation was
// found, 2 bad configuration or input.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "prft/prft.hpp"

namespace fs = std::filesystem;
using namespace prft;

namespace {

std::string default_out_dir() {
  if (const char* env = std::getenv("PRFT_OUT")) return env;
  return "out";
}

std::vector<fs::path> collect_configs(const std::string& path) {
  fs::path p(path);
  if (fs::is_directory(p)) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(p)) {
      if (e.path().extension() == ".cfg") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
  }
  return {p};
}

ScenarioConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file.string(), "cannot open");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text, file.stem().string());
}

int do_run(const std::string& path, const std::string& out_dir,
           const std::vector<std::uint64_t>& seed_override, bool write_traces) {
  fs::create_directories(out_dir);
  std::ofstream records(fs::path(out_dir) / "records.txt", std::ios::app);
  bool violation = false;
  for (const auto& file : collect_configs(path)) {
    ScenarioConfig cfg = load_config(file);
    auto seeds = seed_override.empty() ? cfg.seeds_or_default() : seed_override;
    for (std::uint64_t seed : seeds) {
      RunOutcome oc = run_scenario(cfg, seed);
      if (write_traces) {
        fs::path tp = fs::path(out_dir) / (cfg.name + "-s" + std::to_string(seed) + ".jsonl");
        save_trace(oc.trace, tp.string());
      }
      std::cout << robustness_summary(cfg.name, seed, oc.robustness) << " state="
                << to_string(oc.state.label) << (oc.state.provisional ? "*" : "") << "\n";
      records << record_line(cfg.name, seed, "sends_per_round",
                             oc.metrics.sends_per_round())
              << "\n";
      records << record_line(cfg.name, seed, "bytes_per_round",
                             oc.metrics.bytes_per_round())
              << "\n";
      records << record_line(cfg.name, seed, "state",
                             static_cast<double>(oc.state.label))
              << "\n";
      records << record_line(cfg.name, seed, "trace_hash",
                             static_cast<double>(trace_hash(oc.trace) >> 16))
              << "\n";
      if (!oc.robustness.all_pass()) violation = true;
    }
  }
  return violation ? 1 : 0;
}

int do_check(const std::string& trace_path, std::uint32_t c) {
  RunTrace tr = load_trace(trace_path);
  RobustnessReport rep = check_robustness(tr, c);
  std::cout << robustness_summary(tr.scenario, tr.seed, rep) << "\n";
  auto st = classify_state(tr);
  std::cout << "state=" << to_string(st.label) << (st.provisional ? "*" : "") << "\n";
  return rep.all_pass() ? 0 : 1;
}

ScenarioConfig sweep_config(std::uint32_t n) {
  ScenarioConfig cfg;
  cfg.name = "sweep_n" + std::to_string(n);
  cfg.n = n;
  cfg.rounds = 6;
  cfg.seeds = {0, 1, 2};
  cfg.block_size = 2;
  cfg.num_txs = 12;
  cfg.tx_bytes = 32;
  cfg.delay = {NetKind::Synchronous, 10, 0, 100};
  validate_config(cfg);
  return cfg;
}

int do_sweep(const std::vector<std::uint32_t>& ns, const std::string& param,
             const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream records(fs::path(out_dir) / "records.txt", std::ios::app);
  std::vector<SweepPoint> pts;
  std::uint32_t kappa = 64;
  for (std::uint32_t n : ns) {
    ScenarioConfig cfg = sweep_config(n);
    kappa = cfg.kappa;
    double s = 0, b = 0;
    auto seeds = cfg.seeds_or_default();
    for (std::uint64_t seed : seeds) {
      MessageMetrics m = collect_metrics(simulate(cfg, seed));
      s += m.sends_per_round();
      b += m.bytes_per_round();
      records << record_line(cfg.name, seed, "sends_per_round", m.sends_per_round()) << "\n";
      records << record_line(cfg.name, seed, "bytes_per_round", m.bytes_per_round()) << "\n";
    }
    pts.push_back({n, s / seeds.size(), b / seeds.size()});
  }
  if (param == "sends" || param == "bytes") {
    for (const auto& p : pts) {
      std::cout << p.n << " "
                << (param == "sends" ? p.sends_per_round : p.bytes_per_round) << "\n";
    }
  }
  std::cout << complexity_report(pts, kappa);
  return 0;
}

int do_report(const std::string& bundle, const std::string& format) {
  std::vector<fs::path> traces;
  fs::path p(bundle);
  if (fs::is_directory(p)) {
    for (const auto& e : fs::directory_iterator(p)) {
      if (e.path().extension() == ".jsonl") traces.push_back(e.path());
    }
    std::sort(traces.begin(), traces.end());
  } else {
    traces.push_back(p);
  }
  bool violation = false;
  for (const auto& tp : traces) {
    RunTrace tr = load_trace(tp.string());
    RobustnessReport rep = check_robustness(tr);
    MessageMetrics m = collect_metrics(tr);
    auto st = classify_state(tr);
    if (format == "records") {
      std::cout << record_line(tr.scenario, tr.seed, "sends_per_round",
                               m.sends_per_round())
                << "\n";
      std::cout << record_line(tr.scenario, tr.seed, "bytes_per_round",
                               m.bytes_per_round())
                << "\n";
      std::cout << record_line(tr.scenario, tr.seed, "state",
                               static_cast<double>(st.label))
                << "\n";
    } else {
      std::cout << robustness_summary(tr.scenario, tr.seed, rep) << " state="
                << to_string(st.label) << (st.provisional ? "*" : "") << " sends/round="
                << m.sends_per_round() << " bytes/round=" << m.bytes_per_round() << "\n";
    }
    if (!rep.all_pass()) violation = true;
  }
  return violation ? 1 : 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"prft: rational-consensus protocol simulator and checker"};
  app.require_subcommand(1);

  std::string run_path, out_dir = default_out_dir();
  std::vector<std::uint64_t> run_seeds;
  bool no_traces = false;
  auto* run = app.add_subcommand("run", "simulate one config file or a directory of them");
  run->add_option("config", run_path, "config file or directory of .cfg files")->required();
  run->add_option("--out", out_dir, "output directory (default $PRFT_OUT or ./out)");
  run->add_option("--seeds", run_seeds, "seed list overriding the config");
  run->add_flag("--no-traces", no_traces, "skip writing trace files");

  std::string trace_path;
  std::uint32_t c = 1;
  auto* check = app.add_subcommand("check", "robustness-check a saved trace");
  check->add_option("trace", trace_path, "trace .jsonl file")->required();
  check->add_option("--c", c, "ordering common-prefix truncation (default 1)");

  std::vector<std::uint32_t> ns{5, 9, 13, 17};
  std::string param = "all";
  auto* sweep = app.add_subcommand("sweep", "message-complexity sweep over system sizes");
  sweep->add_option("--n", ns, "system sizes (default 5 9 13 17)")->delimiter(',');
  sweep->add_option("--param", param, "metric to print raw: sends, bytes or all");

  std::string bundle, format = "text";
  auto* report = app.add_subcommand("report", "re-render saved traces");
  report->add_option("bundle", bundle, "trace file or directory")->required();
  report->add_option("--format", format, "text or records")
      ->check(CLI::IsMember({"text", "records"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return do_run(run_path, out_dir, run_seeds, !no_traces);
    if (check->parsed()) return do_check(trace_path, c);
    if (sweep->parsed()) return do_sweep(ns, param, out_dir);
    if (report->parsed()) return do_report(bundle, format);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const TraceIoError& e) {
    std::cerr << "trace error: " << e.what() << "\n";
    return 2;
  } catch (const SimAbort& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
