// qsc: command-line front end for the collapse/observer simulator.
//
//   qsc run       --config cfg.json [--seed N] [--out run.csv] [--threads N] [--json]
//   qsc sweep     --config cfg.json [--seed N] [--out sweep.csv] [--threads N] [--json]
//   qsc calibrate --config cfg.json [--seed N] [--out calibrated.json] [--threads N] [--json]
//   qsc selftest  [--seed N] [--threads N] [--scale S] [--json]

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qsc/errors.hpp"
#include "qsc/harness.hpp"
#include "qsc/selftest.hpp"

namespace {

using qsc::harness::json;

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kRuntime = 3 };

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned threads = 1;
  bool json = false;
  double scale = 0.1;
};

qsc::harness::HarnessConfig load(const Flags& f) {
  auto cfg = qsc::harness::load_config(f.config);
  if (f.seed) {
    // Re-parse so every derived sweep point picks up the override too.
    auto doc = cfg.document;
    doc["master_seed"] = *f.seed;
    cfg = qsc::harness::parse_config(doc);
  }
  return cfg;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw qsc::Error("cannot write " + path);
  out << contents;
  if (!out) throw qsc::Error("failed writing " + path);
}

std::string pct(const qsc::stats::Proportion& p) {
  if (p.trials == 0) return "n/a (no trials)";
  std::ostringstream os;
  os.precision(6);
  os << p.estimate << "  [" << p.lo << ", " << p.hi << "]  (" << p.successes << "/" << p.trials << ")";
  return os.str();
}

void print_summary(const qsc::ExperimentSummary& s) {
  std::cout << "trials:                 " << s.n_trials << "\n"
            << "threshold_time:         " << s.threshold_time << " s\n"
            << "qsc_condition:          " << (s.qsc_satisfied ? "satisfied" : "not satisfied") << "\n"
            << "accuracy definite:      " << pct(s.accuracy_definite) << "\n"
            << "accuracy superposition: " << pct(s.accuracy_superposition) << "\n"
            << "accuracy overall:       " << pct(s.overall) << "\n"
            << "mean report time:       definite " << s.mean_report_time_definite
            << " s, superposition " << s.mean_report_time_superposition << " s\n";
  if (s.device) {
    std::cout << "device success:         " << pct(s.device->success) << "\n"
              << "device optimal bound:   " << s.device->bound << "\n";
  }
}

int cmd_run(const Flags& f) {
  const auto cfg = load(f);
  const auto out = qsc::harness::run(cfg, f.threads);
  if (!f.out.empty()) write_file(f.out, out.csv);
  if (f.json) {
    std::cout << qsc::harness::to_json(out.summary).dump(2) << "\n";
  } else {
    print_summary(out.summary);
  }
  return kOk;
}

int cmd_sweep(const Flags& f) {
  const auto cfg = load(f);
  const auto out = qsc::harness::sweep(cfg, f.threads);
  if (!f.out.empty()) write_file(f.out, out.csv);
  if (f.json) {
    json rows = json::array();
    for (const auto& [value, summary] : out.rows) {
      rows.push_back({{"sweep_param", cfg.sweep->param},
                      {"sweep_value", value},
                      {"summary", qsc::harness::to_json(summary)}});
    }
    std::cout << rows.dump(2) << "\n";
  } else if (f.out.empty()) {
    std::cout << out.csv;
  } else {
    std::cout << "wrote " << out.rows.size() << " rows to " << f.out << "\n";
  }
  return kOk;
}

int cmd_calibrate(const Flags& f) {
  const auto cfg = load(f);
  const auto out = qsc::harness::calibrate(cfg, f.threads);
  if (!f.out.empty()) write_file(f.out, out.updated_source.dump(2) + "\n");
  const auto& r = out.result;
  if (f.json) {
    std::cout << json{{"gamma", r.gamma},
                      {"target_mean", cfg.experiment.collapse.t_c_mean},
                      {"achieved_mean", r.achieved_mean},
                      {"achieved_ci95", {out.ci_lo, out.ci_hi}},
                      {"runs_per_evaluation", r.runs},
                      {"evaluations", r.evaluations}}
                     .dump(2)
              << "\n";
  } else {
    std::cout.precision(10);
    std::cout << "gamma:          " << r.gamma << " 1/sqrt(s)\n"
              << "target mean:    " << cfg.experiment.collapse.t_c_mean << " s\n"
              << "achieved mean:  " << r.achieved_mean << " s  95% CI [" << out.ci_lo << ", "
              << out.ci_hi << "]\n"
              << "runs/eval:      " << r.runs << " (" << r.evaluations << " evaluations)\n";
  }
  return kOk;
}

int cmd_selftest(const Flags& f) {
  qsc::selftest::Options opt;
  opt.scale = f.scale;
  opt.threads = f.threads;
  if (f.seed) opt.seed = *f.seed;
  const auto results = qsc::selftest::run_all(opt, [&](const auto& r) {
    if (!f.json) std::cout << qsc::selftest::format_line(r) << std::endl;
  });
  bool ok = true;
  json lines = json::array();
  for (const auto& r : results) {
    ok = ok && r.passed;
    lines.push_back({{"criterion", r.id}, {"name", r.name}, {"passed", r.passed},
                     {"seconds", r.seconds}, {"detail", r.detail}});
  }
  if (f.json) std::cout << json{{"passed", ok}, {"criteria", lines}}.dump(2) << "\n";
  return ok ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-time collapse and observer discrimination simulator"};
  app.require_subcommand(1);
  Flags flags;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", flags.config, "experiment configuration (JSON)");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "override master_seed");
    sub->add_option("--threads", flags.threads, "worker threads")->check(CLI::Range(1u, 1024u));
    sub->add_flag("--json", flags.json, "emit the summary as JSON on stdout");
  };

  auto* run = app.add_subcommand("run", "run one experiment");
  add_common(run, true);
  run->add_option("--out", flags.out, "CSV output path");
  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep, one CSV row per point");
  add_common(sweep, true);
  sweep->add_option("--out", flags.out, "CSV output path");
  auto* calibrate = app.add_subcommand("calibrate", "calibrate diffusion gamma to t_c_mean");
  add_common(calibrate, true);
  calibrate->add_option("--out", flags.out, "write the config back with collapse.gamma set");
  auto* selftest = app.add_subcommand("selftest", "run the acceptance checks at reduced size");
  add_common(selftest, false);
  selftest->add_option("--scale", flags.scale, "sample-size scale (1 = full acceptance size)")
      ->check(CLI::Range(1e-4, 1.0));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(flags);
    if (*sweep) return cmd_sweep(flags);
    if (*calibrate) return cmd_calibrate(flags);
    if (*selftest) return cmd_selftest(flags);
  } catch (const qsc::ConfigError& e) {
    std::cerr << "qsc: " << e.kind() << ": " << e.what() << "\n";
    return kConfig;
  } catch (const qsc::Error& e) {
    std::cerr << "qsc: " << e.kind() << ": " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "qsc: error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
