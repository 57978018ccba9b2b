#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "driftmon/calibrate.hpp"
#include "driftmon/error.hpp"
#include "driftmon/eval.hpp"
#include "driftmon/monitor.hpp"
#include "driftmon/parallel.hpp"
#include "driftmon/predict.hpp"
#include "driftmon/preprocess.hpp"
#include "driftmon/simgen.hpp"

namespace fs = std::filesystem;
using namespace driftmon;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitSignal = 2;

// Encoding used by `simulate` so that unclipped noisy intensities survive
// the trip through PGM.
const char* const kSimulationRange = "-1,2";

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size()) throw PreconditionError("bad number '" + item + "' in list");
    out.push_back(v);
  }
  if (out.empty()) throw PreconditionError("empty list");
  return out;
}

// Flat key=value file, as written by `calibrate --out`.
std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r\"");
      const auto e = s.find_last_not_of(" \t\r\"");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
  }
  return kv;
}

double require_number(const std::map<std::string, std::string>& kv, const std::string& key, const fs::path& from) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw FormatError(from.string() + ": missing '" + key + "'");
  return std::stod(it->second);
}

struct FitFlags {
  FitConfig cfg;
  double gain_cutoff = 0.0;

  void add(CLI::App* sub) {
    sub->add_option("--gain-cutoff", gain_cutoff, "Per-point SSE reduction a split must exceed (0 = automatic)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--min-leaf", cfg.min_leaf, "Minimum points per leaf")->check(CLI::PositiveNumber);
    sub->add_option("--max-depth", cfg.max_depth, "Maximum tree depth")->check(CLI::PositiveNumber);
    sub->add_option("--directions", cfg.n_grid_directions, "Grid directions including the three axes")
        ->check(CLI::Range(3, 100000));
    sub->add_option("--random-directions", cfg.n_random_directions, "Extra seeded random directions");
    sub->add_option("--time-scale", cfg.time_scale, "Extent of the window along the time axis")
        ->check(CLI::PositiveNumber);
    sub->add_option("--refine-min-step", cfg.refine_min_step, "Direction refinement resolution (0 disables)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--fit-seed", cfg.seed, "Seed for random directions");
  }

  FitConfig resolved() const {
    FitConfig c = cfg;
    if (gain_cutoff > 0.0) c.gain_cutoff = gain_cutoff;
    c.validate();
    return c;
  }
};

// Flat key=value files name options without a section; they belong to the
// subcommand being run.
class SubcommandConfig : public CLI::ConfigBase {
 public:
  explicit SubcommandConfig(const CLI::App* app) : app_(app) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    auto items = CLI::ConfigBase::from_config(in);
    const auto subs = app_->get_subcommands();
    if (subs.empty()) return items;
    for (auto& item : items)
      if (item.parents.empty()) item.parents = {subs.front()->get_name()};
    return items;
  }

 private:
  const CLI::App* app_;
};

struct Common {
  std::size_t threads = 0;
  std::string resolved_config;

  void add(CLI::App* sub) {
    sub->option_defaults()->always_capture_default();
    sub->fallthrough();
    sub->add_option("--threads", threads, "Worker threads (0 = all cores)");
    sub->add_option("--resolved-config", resolved_config, "Where to write the fully resolved options");
  }
};

void write_resolved(const CLI::App* sub, const Common& common, const fs::path& fallback) {
  const fs::path path = common.resolved_config.empty() ? fallback : fs::path(common.resolved_config);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  // Thread count never changes results, so it is left out to keep sidecars comparable.
  std::string text = sub->config_to_str(true, false);
  std::stringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("threads=", 0) == 0 || line.rfind("resolved-config=", 0) == 0 || line.rfind("config=", 0) == 0)
      continue;
    out << line << '\n';
  }
}

fs::path sidecar_for(const fs::path& output) { return fs::path(output.string() + ".config"); }

// ---- simulate ----

struct SimulateArgs {
  ScenarioSpec spec;
  std::string scenario = "s1";
  std::string regime = "ic";
  std::string out;
  int bit_depth = 16;
  std::string range = kSimulationRange;
};

int run_simulate(const CLI::App* sub, const Common& common, SimulateArgs a) {
  a.spec.scenario = parse_scenario(a.scenario);
  a.spec.regime = parse_regime(a.regime);
  a.spec.validate();
  const IntensityRange range = parse_intensity_range(a.range);
  const ImageSequence seq = generate_sequence(a.spec);
  const fs::path manifest = save_sequence(seq, a.out, a.bit_depth, range);
  {
    std::ofstream truth(fs::path(a.out) / "truth.csv");
    truth << "scenario,regime,n,sigma,change_time,horizon,seed,encoding_lo,encoding_hi\n";
    truth << to_string(a.spec.scenario) << ',' << to_string(a.spec.regime) << ',' << a.spec.n << ','
          << num(a.spec.sigma) << ',' << num(a.spec.change_time) << ',' << a.spec.horizon << ',' << a.spec.seed << ','
          << num(range.lo) << ',' << num(range.hi) << '\n';
    if (!truth) throw FormatError("cannot write truth.csv");
  }
  write_resolved(sub, common, fs::path(a.out) / "resolved_config.ini");
  std::cout << manifest.string() << '\n';
  return kExitOk;
}

// ---- impute ----

struct ImputeArgs {
  std::string manifest;
  std::string times;
  std::string out;
  int bit_depth = 16;
  std::string range = "0,1";
};

int run_impute(const CLI::App* sub, const Common& common, const ImputeArgs& a) {
  const IntensityRange range = parse_intensity_range(a.range);
  const ImageSequence seq = load_sequence(a.manifest, range);
  const std::vector<double> times = parse_list(a.times);
  const fs::path manifest = save_sequence(impute_missing(seq, times), a.out, a.bit_depth, range);
  write_resolved(sub, common, fs::path(a.out) / "resolved_config.ini");
  std::cout << manifest.string() << '\n';
  return kExitOk;
}

// ---- denoise ----

struct DenoiseArgs {
  std::string manifest;
  std::size_t m0 = 20;
  std::size_t frame = 0;
  std::string out;
  int bit_depth = 16;
  std::string range = "0,1";
};

int run_denoise(const CLI::App* sub, const Common& common, const FitFlags& fit, const DenoiseArgs& a) {
  const IntensityRange range = parse_intensity_range(a.range);
  const ImageSequence seq = load_sequence(a.manifest, range);
  if (a.frame >= seq.size()) throw PreconditionError("frame index beyond the sequence");
  if (a.m0 < 2 || a.m0 > seq.size()) throw PreconditionError("m0 must be between 2 and the sequence length");
  // Window of m0 frames ending at the requested one, or the first m0 frames.
  const std::size_t first = a.frame + 1 >= a.m0 ? a.frame + 1 - a.m0 : 0;
  const ImageFrame out = denoise_in_window(seq.slice(first, a.m0), fit.resolved(), a.frame - first);
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  write_pgm(a.out, out, a.bit_depth, range);
  write_resolved(sub, common, sidecar_for(a.out));
  std::cout << a.out << '\n';
  return kExitOk;
}

// ---- monitor ----

struct MonitorArgs {
  std::string manifest;
  std::size_t m0 = 20;
  double kappa = -1.0;
  double q0 = -1.0;
  double theta_sq = 0.0;
  std::string calibration;
  std::string ic_manifest;
  std::string chart;
  bool continue_after_signal = false;
  std::string range = "0,1";
};

int run_monitor_cmd(const CLI::App* sub, const Common& common, const FitFlags& fit, MonitorArgs a) {
  const IntensityRange range = parse_intensity_range(a.range);
  const FitConfig fc = fit.resolved();
  if (!a.calibration.empty()) {
    const auto kv = read_key_values(a.calibration);
    if (a.kappa < 0.0) a.kappa = require_number(kv, "kappa", a.calibration);
    if (a.q0 < 0.0) a.q0 = require_number(kv, "q0", a.calibration);
    if (a.theta_sq <= 0.0 && kv.count("theta_sq")) a.theta_sq = require_number(kv, "theta_sq", a.calibration);
  }
  if (a.kappa < 0.0 || a.q0 < 0.0) throw PreconditionError("monitor needs --kappa and --q0 or a --calibration file");
  if (a.theta_sq <= 0.0) {
    if (a.ic_manifest.empty()) throw PreconditionError("monitor needs --theta-sq, --ic-manifest or a calibration file");
    a.theta_sq = estimate_theta_sq(load_sequence(a.ic_manifest, range), a.m0, fc);
  }
  const ImageSequence stream = load_sequence(a.manifest, range);
  MonitorState state;
  state.kappa = a.kappa;
  state.q0 = a.q0;
  state.theta_sq = a.theta_sq;
  const MonitorResult res = run_monitor(stream, state, fc, {a.m0, a.continue_after_signal});
  const fs::path chart = a.chart.empty() ? fs::path(a.manifest).parent_path() / "chart.csv" : fs::path(a.chart);
  {
    std::ofstream out(chart);
    if (!out) throw FormatError("cannot write " + chart.string());
    write_chart_csv(out, res.history);
  }
  write_resolved(sub, common, sidecar_for(chart.string()));
  if (res.first_signal) {
    std::cout << "signal at k=" << *res.first_signal << " t=" << num(stream[*res.first_signal - 1].time()) << '\n';
    return kExitSignal;
  }
  std::cout << "no signal in " << res.history.size() << " monitored frames\n";
  return kExitOk;
}

// ---- calibrate ----

struct CalibrateArgs {
  std::string scenario;
  std::string manifest;
  std::size_t n = 64;
  double sigma = 0.15;
  double kappa = -1.0;
  std::size_t m0 = 20;
  double arl0 = 20.0;
  std::size_t reps = 50;
  std::size_t max_run_length = 0;
  std::string bracket;
  double tolerance = 0.5;
  std::size_t theta_frames = 20;
  std::uint64_t seed = 0;
  std::size_t bootstrap = 50;
  double keep_fraction = 0.8;
  std::size_t j_lo = 0;
  std::size_t j_hi = 0;
  std::string range = "0,1";
  std::string out = "calibration.txt";
  std::string report;
};

int run_calibrate(const CLI::App* sub, const Common& common, const FitFlags& fit, const CalibrateArgs& a) {
  const FitConfig fc = fit.resolved();
  std::ofstream out(a.out);
  if (!out) throw FormatError("cannot write " + a.out);
  if (!a.manifest.empty()) {
    BootstrapConfig bc;
    bc.m0 = a.m0;
    bc.n_bootstrap = a.bootstrap;
    bc.keep_fraction = a.keep_fraction;
    bc.j_lo = a.j_lo;
    bc.j_hi = a.j_hi;
    bc.seed = a.seed;
    const BootstrapCalibration r = bootstrap_calibrate(load_sequence(a.manifest, parse_intensity_range(a.range)), bc, fc);
    out << "method=bootstrap\nkappa=" << num(r.kappa) << "\nq0=" << num(r.q0) << "\ntheta_sq=" << num(r.theta_sq)
        << "\nm0=" << a.m0 << '\n';
    std::cout << "kappa=" << num(r.kappa) << " q0=" << num(r.q0) << " theta_sq=" << num(r.theta_sq) << '\n';
  } else {
    if (a.scenario.empty()) throw PreconditionError("calibrate needs --scenario or --manifest");
    ScenarioSpec spec;
    spec.scenario = parse_scenario(a.scenario);
    spec.n = a.n;
    spec.sigma = a.sigma;
    spec.validate();
    const double kappa = a.kappa >= 0.0 ? a.kappa : default_kappa(spec.scenario);
    CalibrationConfig cc;
    cc.arl0 = a.arl0;
    cc.n_replications = a.reps;
    if (a.max_run_length > 0) cc.max_run_length = a.max_run_length;
    if (!a.bracket.empty()) {
      const auto b = parse_list(a.bracket);
      if (b.size() != 2) throw PreconditionError("--bracket takes 'low,high'");
      cc.q0_bracket = std::make_pair(b[0], b[1]);
    }
    cc.tolerance = a.tolerance;
    cc.seed = a.seed;
    cc.validate();
    const double theta_sq = scenario_theta_sq(spec, a.m0, a.theta_frames, fc, a.seed);
    LambdaPaths paths(scenario_source(spec, derive_seed(a.seed, "calibration")), a.m0, fc, theta_sq);
    const CalibrationResult r = calibrate_q0(paths, kappa, cc);
    if (!a.report.empty()) {
      std::ofstream rep(a.report);
      if (!rep) throw FormatError("cannot write " + a.report);
      write_calibration_csv(rep, r.steps);
    }
    out << "method=simulation\nscenario=" << to_string(spec.scenario) << "\nkappa=" << num(kappa) << "\nq0="
        << num(r.q0) << "\ntheta_sq=" << num(theta_sq) << "\narl=" << num(r.achieved.arl)
        << "\nsd=" << num(r.achieved.sd) << "\ncensored=" << r.achieved.censored << "\nm0=" << a.m0 << '\n';
    std::cout << "q0=" << num(r.q0) << " achieved ARL=" << num(r.achieved.arl) << " (sd " << num(r.achieved.sd)
              << ", censored " << r.achieved.censored << ")\n";
  }
  if (!out) throw FormatError("failed writing " + a.out);
  write_resolved(sub, common, sidecar_for(a.out));
  return kExitOk;
}

// ---- eval ----

struct EvalArgs {
  std::string scenario = "s1";
  std::string regime = "both";
  std::size_t n = 64;
  double sigma = 0.15;
  double change_time = 20.0;
  double kappa = -1.0;
  double q0 = -1.0;
  double theta_sq = 0.0;
  std::string calibration;
  std::size_t m0 = 20;
  std::size_t reps = 50;
  std::size_t max_run_length = 200;
  std::size_t theta_frames = 20;
  std::uint64_t seed = 0;
  std::string report = "report.csv";
  std::string summary = "summary.csv";
};

int run_eval(const CLI::App* sub, const Common& common, const FitFlags& fit, EvalArgs a) {
  const FitConfig fc = fit.resolved();
  ScenarioSpec spec;
  spec.scenario = parse_scenario(a.scenario);
  spec.n = a.n;
  spec.sigma = a.sigma;
  spec.change_time = a.change_time;
  spec.validate();
  if (!a.calibration.empty()) {
    const auto kv = read_key_values(a.calibration);
    if (a.kappa < 0.0) a.kappa = require_number(kv, "kappa", a.calibration);
    if (a.q0 < 0.0) a.q0 = require_number(kv, "q0", a.calibration);
    if (a.theta_sq <= 0.0 && kv.count("theta_sq")) a.theta_sq = require_number(kv, "theta_sq", a.calibration);
  }
  if (a.kappa < 0.0) a.kappa = default_kappa(spec.scenario);
  if (a.q0 < 0.0) throw PreconditionError("eval needs --q0 or a --calibration file");
  if (a.theta_sq <= 0.0) a.theta_sq = scenario_theta_sq(spec, a.m0, a.theta_frames, fc, a.seed);
  std::vector<Regime> regimes;
  if (a.regime == "both")
    regimes = {Regime::IC, Regime::OC};
  else
    regimes = {parse_regime(a.regime)};

  ExperimentConfig ec;
  ec.m0 = a.m0;
  ec.n_reps = a.reps;
  ec.max_run_length = a.max_run_length;
  ec.seed = derive_seed(a.seed, "evaluation");
  std::vector<RunLengthReport> reports;
  std::vector<std::string> labels;
  std::ofstream rep(a.report);
  if (!rep) throw FormatError("cannot write " + a.report);
  for (std::size_t i = 0; i < regimes.size(); ++i) {
    spec.regime = regimes[i];
    reports.push_back(replicate_experiment(spec, a.kappa, a.q0, a.theta_sq, ec, fc));
    labels.push_back(to_string(spec.scenario));
    std::ostringstream one;
    write_report_csv(one, reports.back());
    std::string text = one.str();
    if (i > 0) text = text.substr(text.find('\n') + 1);
    rep << text;
  }
  std::ofstream sum(a.summary);
  if (!sum) throw FormatError("cannot write " + a.summary);
  write_summary_csv(sum, labels, reports);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    std::cout << to_string(r.regime) << " ARL " << format_cell(r.arl, r.sd) << ", censored " << r.censored;
    if (r.regime == Regime::OC)
      std::cout << ", delay " << format_cell(r.mean_delay, r.sd_delay) << ", false alarms " << r.false_alarms;
    std::cout << '\n';
  }
  write_resolved(sub, common, sidecar_for(a.summary));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drift-pattern monitoring of image sequences with oblique regression trees and a CUSUM chart"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key=value file with option defaults (flags take precedence)");
  app.config_formatter(std::make_shared<SubcommandConfig>(&app));
  app.allow_config_extras(CLI::config_extras_mode::error);

  Common common;
  FitFlags fit;

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Write a simulated scenario as PGM frames and a manifest");
  common.add(s);
  s->add_option("--scenario", sim.scenario, "s1..s5");
  s->add_option("--regime", sim.regime, "ic or oc");
  s->add_option("--n", sim.spec.n, "Frame side in pixels")->check(CLI::Range(2, 1 << 16));
  s->add_option("--horizon", sim.spec.horizon, "Number of frames")->check(CLI::PositiveNumber);
  s->add_option("--sigma", sim.spec.sigma, "Noise standard deviation")->check(CLI::NonNegativeNumber);
  s->add_option("--change-time", sim.spec.change_time, "Time after which the OC regime differs");
  s->add_option("--alpha", sim.spec.alpha, "Scenario 5 intensity rate");
  s->add_option("--beta", sim.spec.beta, "Scenario 5 starting outside intensity");
  s->add_option("--seed", sim.spec.seed, "Noise seed");
  s->add_option("--out", sim.out, "Output directory")->required();
  s->add_option("--bit-depth", sim.bit_depth, "8 or 16")->check(CLI::IsMember({8, 16}));
  s->add_option("--intensity-range", sim.range, "Intensities mapped onto 0..maxval, as lo,hi");

  ImputeArgs imp;
  auto* i = app.add_subcommand("impute", "Fill missing frames by linear interpolation in time");
  common.add(i);
  i->add_option("--manifest", imp.manifest, "Input manifest")->required();
  i->add_option("--times", imp.times, "Comma-separated output times")->required();
  i->add_option("--out", imp.out, "Output directory")->required();
  i->add_option("--bit-depth", imp.bit_depth, "8 or 16")->check(CLI::IsMember({8, 16}));
  i->add_option("--intensity-range", imp.range, "Intensity range of the PGM encoding, as lo,hi");

  DenoiseArgs den;
  auto* d = app.add_subcommand("denoise", "Leaf-average one frame with a tree fitted on its window");
  common.add(d);
  fit.add(d);
  d->add_option("--manifest", den.manifest, "Input manifest")->required();
  d->add_option("--m0", den.m0, "Window width");
  d->add_option("--frame", den.frame, "0-based frame index")->required();
  d->add_option("--out", den.out, "Output PGM")->required();
  d->add_option("--bit-depth", den.bit_depth, "8 or 16")->check(CLI::IsMember({8, 16}));
  d->add_option("--intensity-range", den.range, "Intensity range of the PGM encoding, as lo,hi");

  MonitorArgs mon;
  auto* m = app.add_subcommand("monitor", "Run the CUSUM chart over a sequence (exit 2 on a signal)");
  common.add(m);
  fit.add(m);
  m->add_option("--manifest", mon.manifest, "Stream manifest; the first m0 frames form the initial window")->required();
  m->add_option("--m0", mon.m0, "Window width");
  m->add_option("--kappa", mon.kappa, "Allowance")->check(CLI::NonNegativeNumber);
  m->add_option("--q0", mon.q0, "Control limit")->check(CLI::NonNegativeNumber);
  m->add_option("--theta-sq", mon.theta_sq, "In-control prediction error variance")->check(CLI::PositiveNumber);
  m->add_option("--calibration", mon.calibration, "key=value file from calibrate");
  m->add_option("--ic-manifest", mon.ic_manifest, "In-control data for estimating theta_sq");
  m->add_option("--chart", mon.chart, "Chart CSV (default: chart.csv next to the manifest)");
  m->add_flag("--continue", mon.continue_after_signal, "Keep charting after the first signal");
  m->add_option("--intensity-range", mon.range, "Intensity range of the PGM encoding, as lo,hi");

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Choose the control limit by simulation or by bootstrap");
  common.add(c);
  fit.add(c);
  c->add_option("--scenario", cal.scenario, "Calibrate by simulating this scenario (s1..s5)");
  c->add_option("--manifest", cal.manifest, "Calibrate by bootstrap on this in-control sequence");
  c->add_option("--n", cal.n, "Simulated frame side")->check(CLI::Range(2, 1 << 16));
  c->add_option("--sigma", cal.sigma, "Simulated noise SD")->check(CLI::NonNegativeNumber);
  c->add_option("--kappa", cal.kappa, "Allowance (default: the scenario's)")->check(CLI::NonNegativeNumber);
  c->add_option("--m0", cal.m0, "Window width");
  c->add_option("--arl0", cal.arl0, "Target in-control ARL")->check(CLI::Range(1.0, 1e9));
  c->add_option("--reps", cal.reps, "Replications per ARL estimate")->check(CLI::PositiveNumber);
  c->add_option("--max-run-length", cal.max_run_length, "Censoring bound (0 = 10 * arl0)");
  c->add_option("--bracket", cal.bracket, "Initial q0 bracket as low,high (default: automatic)");
  c->add_option("--tolerance", cal.tolerance, "Accepted |ARL - arl0|")->check(CLI::PositiveNumber);
  c->add_option("--theta-frames", cal.theta_frames, "Phase-I frames for theta_sq")->check(CLI::PositiveNumber);
  c->add_option("--seed", cal.seed, "Seed");
  c->add_option("--bootstrap", cal.bootstrap, "Bootstrap samples")->check(CLI::PositiveNumber);
  c->add_option("--keep-fraction", cal.keep_fraction, "Fraction of frames kept per bootstrap sample")
      ->check(CLI::Range(0.0, 1.0));
  c->add_option("--j-lo", cal.j_lo, "First 1-based frame averaged for kappa (0 = m0 + 1)");
  c->add_option("--j-hi", cal.j_hi, "Last 1-based frame averaged for kappa (0 = last)");
  c->add_option("--intensity-range", cal.range, "Intensity range of the PGM encoding, as lo,hi");
  c->add_option("--out", cal.out, "Calibration key=value file");
  c->add_option("--report", cal.report, "Per-step CSV of the q0 search");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Run-length experiment for a scenario");
  common.add(e);
  fit.add(e);
  e->add_option("--scenario", ev.scenario, "s1..s5");
  e->add_option("--regime", ev.regime, "ic, oc or both");
  e->add_option("--n", ev.n, "Frame side")->check(CLI::Range(2, 1 << 16));
  e->add_option("--sigma", ev.sigma, "Noise SD")->check(CLI::NonNegativeNumber);
  e->add_option("--change-time", ev.change_time, "OC change time");
  e->add_option("--kappa", ev.kappa, "Allowance (default: calibration file or the scenario's)")
      ->check(CLI::NonNegativeNumber);
  e->add_option("--q0", ev.q0, "Control limit")->check(CLI::NonNegativeNumber);
  e->add_option("--theta-sq", ev.theta_sq, "In-control prediction error variance")->check(CLI::PositiveNumber);
  e->add_option("--calibration", ev.calibration, "key=value file from calibrate");
  e->add_option("--m0", ev.m0, "Window width");
  e->add_option("--reps", ev.reps, "Replications")->check(CLI::PositiveNumber);
  e->add_option("--max-run-length", ev.max_run_length, "Censoring bound")->check(CLI::PositiveNumber);
  e->add_option("--theta-frames", ev.theta_frames, "Phase-I frames for theta_sq")->check(CLI::PositiveNumber);
  e->add_option("--seed", ev.seed, "Seed");
  e->add_option("--report", ev.report, "Per-replicate CSV");
  e->add_option("--summary", ev.summary, "Summary CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    std::cerr << app.help();
    return kExitError;
  }

  try {
    set_max_threads(common.threads);
    if (*s) return run_simulate(s, common, sim);
    if (*i) return run_impute(i, common, imp);
    if (*d) return run_denoise(d, common, fit, den);
    if (*m) return run_monitor_cmd(m, common, fit, mon);
    if (*c) return run_calibrate(c, common, fit, cal);
    if (*e) return run_eval(e, common, fit, ev);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
