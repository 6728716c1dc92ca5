// Command-line front end: trials, sweeps, comparisons, reports, background
// models, and bridge utilities.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "linrl/linrl.hpp"

namespace fs = std::filesystem;
using namespace linrl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitAllDiverged = 3;

std::string default_results_dir() {
  if (const char* dir = std::getenv("LINRL_RESULTS_DIR"); dir && *dir) return dir;
  return "results";
}

/// File-name-safe form of an identifier such as "corridor:10".
std::string file_stem(std::string_view id) {
  std::string out;
  for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out;
}

fs::path output_dir(const std::string& out) {
  fs::path dir = out.empty() ? fs::path(default_results_dir()) : fs::path(out);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  return f;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Trial flags shared by run and sweep. Each maps onto a config-file key;
/// explicit flags are applied after the config file.
struct TrialFlags {
  struct Entry {
    const char* flag;
    const char* key;
    const char* help;
    std::optional<std::string> value;
  };
  std::vector<Entry> entries{
      {"--algo", "algo", "Algorithm: sarsa, q, ettr, r, gq, ac", {}},
      {"--env", "env", "Environment id (corridor:10, external:<command>); comma-separated list for run and sweep", {}},
      {"--seed", "seed", "Base random seed", {}},
      {"--features", "features", "Feature mode: basic, tabular, native", {}},
      {"--alpha", "alpha", "Step size for the main weights", {}},
      {"--beta", "beta", "Secondary step size (rho, auxiliary weights)", {}},
      {"--alpha-decay", "alpha_decay", "Step-size decay c in alpha/(1+c*updates)", {}},
      {"--beta-decay", "beta_decay", "Decay of the secondary step size", {}},
      {"--gamma", "gamma", "Discount factor", {}},
      {"--lambda", "lambda", "Trace decay", {}},
      {"--normalize-alpha", "normalize_alpha", "Divide the step size by the active feature count (true/false)", {}},
      {"--watkins-cut", "watkins_cut", "Cut Q traces after exploratory actions (true/false)", {}},
      {"--trace-threshold", "trace_threshold", "Traces below this are dropped", {}},
      {"--divergence-threshold", "divergence_threshold", "Weight magnitude flagged as divergence", {}},
      {"--q0", "q0", "Initial action value", {}},
      {"--ettr-terminal-value", "ettr_terminal_value", "Target for non-rewarding terminal states (ettr)", {}},
      {"--policy", "policy", "Exploration policy: epsilon_greedy, softmax, exploration_period", {}},
      {"--epsilon", "epsilon", "Exploration rate (start value when decaying)", {}},
      {"--epsilon-end", "epsilon_end", "Final exploration rate for linear decay", {}},
      {"--epsilon-decay-episodes", "epsilon_decay_episodes", "Episodes over which epsilon decays", {}},
      {"--temperature", "temperature", "Softmax temperature", {}},
      {"--period", "period", "Exploration period length in steps", {}},
      {"--tie-break", "tie_break", "Greedy tie breaking: uniform or first", {}},
      {"--frame-skip", "frame_skip", "Frames per agent action", {}},
      {"--max-steps", "max_steps", "Step limit per episode", {}},
      {"--train-episodes", "train_episodes", "Training episodes per trial", {}},
      {"--test-episodes", "test_episodes", "Test episodes per trial", {}},
      {"--background-frames", "background_frames", "Random-policy frames for the background model", {}},
      {"--stall-window", "stall_window", "Trailing episodes checked for stalls", {}},
      {"--greedy-test", "greedy_test", "Test every algorithm greedily (true/false)", {}},
  };
  std::string config;
  std::string palette;
  std::string background;

  void attach(CLI::App& app) {
    app.add_option("--config", config, "Config file of 'key = value' lines; flags override it");
    for (auto& e : entries) app.add_option(e.flag, e.value, e.help);
    app.add_option("--palette", palette, "Palette file mapping 128 colors to 8 classes");
    app.add_option("--background", background, "Background model file (skips the rollout)");
  }

  TrialConfig build() const {
    TrialConfig c;
    if (!config.empty()) {
      if (!fs::exists(config)) throw UsageError("cannot open config file " + config);
      apply_settings(c, load_settings(config));
    }
    for (const auto& e : entries)
      if (e.value) apply_setting(c, e.key, *e.value);
    if (!palette.empty()) c.palette = load_palette(palette);
    if (!background.empty()) c.background = load_background(background);
    validate(c);
    // Resolve the environment now so bad names fail before any work starts.
    if (c.environment.rfind("external:", 0) != 0)
      for (const auto& env : split_list(c.environment)) make_synthetic(env, c.env);
    return c;
  }
};

// ---------------------------------------------------------------------------

struct RunOptions {
  TrialFlags trial;
  int trials = 1;
  int jobs = 1;
  std::string out;
};

int cmd_run(const RunOptions& o) {
  if (o.trials < 1) throw UsageError("--trials must be >= 1");
  if (o.jobs < 1) throw UsageError("--jobs must be >= 1");
  const TrialConfig base = o.trial.build();
  const auto envs = base.environment.rfind("external:", 0) == 0 ? std::vector<std::string>{base.environment}
                                                                 : split_list(base.environment);
  std::vector<TrialConfig> configs;
  for (const auto& env : envs) {
    for (int t = 0; t < o.trials; ++t) {
      TrialConfig c = base;
      c.environment = env;
      c.seed = base.seed + static_cast<std::uint64_t>(t);
      configs.push_back(std::move(c));
    }
  }
  const auto results = run_trials_parallel(configs, o.jobs);

  const fs::path dir = output_dir(o.out);
  std::string stem = std::string(to_string(base.algorithm)) + "-" + file_stem(base.environment) + "-" +
                     std::to_string(base.seed);
  if (o.trials > 1) stem += "-n" + std::to_string(o.trials);
  {
    auto f = open_output(dir / (stem + ".episodes.csv"));
    write_episode_csv(f, results);
  }
  std::vector<TrialSummary> summaries;
  for (const auto& r : results) summaries.push_back(summarize_trial(r));
  {
    auto f = open_output(dir / (stem + ".summary.csv"));
    write_summary_csv(f, summaries);
  }
  int diverged = 0;
  for (const auto& r : results) {
    if (!r.error.empty()) {
      std::cerr << "trial " << r.run_id << " failed: " << r.error << '\n';
      continue;
    }
    if (r.final_state) save_checkpoint((dir / (file_stem(r.run_id) + ".ckpt")).string(), *r.final_state);
    if (r.diverged) ++diverged;
    const MeanSd s = test_statistics(r);
    std::printf("%s: %s test mean %.4f sd %.4f over %zu episodes\n", r.run_id.c_str(),
                r.diverged ? "diverged," : (r.stalled ? "stalled," : "finished,"), s.mean, s.sd, s.n);
  }
  std::printf("results written to %s\n", (dir / stem).string().c_str());
  for (const auto& r : results)
    if (!r.error.empty()) return kExitRuntime;
  return diverged == static_cast<int>(results.size()) ? kExitAllDiverged : kExitOk;
}

// ---------------------------------------------------------------------------

struct SweepOptions {
  TrialFlags trial;
  std::string axis;
  std::string values;
  int trials = 5;
  int jobs = 1;
  bool gnuplot = false;
  std::string out;
};

void write_gnuplot_script(std::ostream& out, SweepAxis axis, const std::vector<std::pair<std::string, std::string>>& files) {
  out << "set xlabel '" << to_string(axis) << "'\n";
  out << "set ylabel 'mean test reward'\n";
  out << "plot ";
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (i) out << ", \\\n     ";
    out << "'" << files[i].second << "' using 1:2 with linespoints title '" << files[i].first << "'";
  }
  out << '\n';
}

int cmd_sweep(const SweepOptions& o) {
  const SweepAxis axis = parse_sweep_axis(o.axis);
  std::vector<double> values;
  for (const auto& v : split_list(o.values)) {
    try {
      values.push_back(parse_real(v));
    } catch (const FormatError&) {
      throw UsageError("--values: '" + v + "' is not a number");
    }
  }
  if (values.empty()) throw UsageError("--values needs at least one value");
  if (o.jobs < 1) throw UsageError("--jobs must be >= 1");
  const TrialConfig base = o.trial.build();
  const auto envs = split_list(base.environment);
  if (envs.empty()) throw UsageError("--env needs at least one environment");

  const fs::path dir = output_dir(o.out);
  std::vector<std::pair<std::string, std::string>> plot_files;
  int total = 0, diverged = 0;
  for (const auto& env : envs) {
    SweepSpec spec;
    spec.base = base;
    spec.base.environment = env;
    spec.axis = axis;
    spec.values = values;
    spec.trials_per_value = o.trials;
    const SweepResult res = run_sweep(spec, o.jobs);
    const std::string stem = "sweep-" + std::string(to_string(axis)) + "-" + file_stem(env);
    {
      auto f = open_output(dir / (stem + ".csv"));
      write_sweep_table(f, res);
    }
    {
      auto f = open_output(dir / (stem + ".dat"));
      write_plot_data(f, res);
    }
    {
      auto f = open_output(dir / (stem + ".episodes.csv"));
      write_episode_csv(f, res.trials);
    }
    plot_files.emplace_back(env, stem + ".dat");
    std::cout << "# " << env << '\n';
    write_sweep_table(std::cout, res);
    for (const auto& r : res.rows) {
      total += r.trials;
      diverged += r.diverged;
    }
  }
  if (o.gnuplot) {
    auto f = open_output(dir / ("sweep-" + std::string(to_string(axis)) + ".gp"));
    write_gnuplot_script(f, axis, plot_files);
  }
  return diverged == total ? kExitAllDiverged : kExitOk;
}

// ---------------------------------------------------------------------------

struct CompareOptions {
  std::vector<std::string> summaries;
  std::string baseline = "sarsa";
  std::string out;
};

int cmd_compare(const CompareOptions& o) {
  std::vector<TrialSummary> rows;
  for (const auto& path : o.summaries) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open summary file " + path);
    auto part = read_summary_csv(in);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  const ComparisonReport rep = build_report(rows, o.baseline);
  write_report_text(std::cout, rep);
  if (!o.out.empty()) {
    const fs::path dir = output_dir(o.out);
    auto txt = open_output(dir / "comparison.txt");
    write_report_text(txt, rep);
    auto csv_file = open_output(dir / "comparison.csv");
    write_report_csv(csv_file, rep);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ReportOptions {
  std::string episodes;
  int window = 1;
  bool gnuplot = false;
  std::string out;
};

int cmd_report(const ReportOptions& o) {
  if (o.window < 1) throw UsageError("--window must be >= 1");
  std::ifstream in(o.episodes);
  if (!in) throw UsageError("cannot open episode file " + o.episodes);
  const auto rows = read_episode_csv(in);
  const auto summaries = summaries_from_episodes(rows);

  const fs::path dir = output_dir(o.out);
  const std::string stem = file_stem(fs::path(o.episodes).stem().string());
  {
    auto f = open_output(dir / (stem + ".summary.csv"));
    write_summary_csv(f, summaries);
  }

  // Learning curves: mean training reward per episode index over the
  // finished trials of each (algorithm, environment), then a trailing
  // moving average.
  std::set<std::string> excluded;
  for (const auto& s : summaries)
    if (!s.finished()) excluded.insert(s.run_id);
  std::map<SummaryKey, std::map<int, std::pair<double, int>>> sums;
  for (const auto& r : rows) {
    if (r.phase != Phase::train || excluded.count(r.run_id)) continue;
    auto& cell = sums[{r.environment, r.algorithm}][r.index];
    cell.first += r.reward;
    ++cell.second;
  }
  std::vector<std::pair<std::string, std::string>> curve_files;
  for (const auto& [key, by_index] : sums) {
    const std::string name = file_stem(key.second + "-" + key.first);
    const std::string file = stem + "." + name + ".curve.dat";
    auto f = open_output(dir / file);
    f << "# episode mean_train_reward (" << key.second << " on " << key.first << ", window " << o.window << ")\n";
    std::vector<double> means;
    for (const auto& [index, cell] : by_index) {
      means.push_back(cell.first / cell.second);
      const std::size_t lo = means.size() > static_cast<std::size_t>(o.window) ? means.size() - o.window : 0;
      double acc = 0.0;
      for (std::size_t i = lo; i < means.size(); ++i) acc += means[i];
      f << index << ' ' << format_real(acc / static_cast<double>(means.size() - lo)) << '\n';
    }
    curve_files.emplace_back(key.second + " on " + key.first, file);
  }
  if (o.gnuplot) {
    auto f = open_output(dir / (stem + ".curves.gp"));
    f << "set xlabel 'episode'\nset ylabel 'mean training reward'\nplot ";
    for (std::size_t i = 0; i < curve_files.size(); ++i) {
      if (i) f << ", \\\n     ";
      f << "'" << curve_files[i].second << "' using 1:2 with lines title '" << curve_files[i].first << "'";
    }
    f << '\n';
  }

  // Per (environment, algorithm) table on stdout.
  const auto grouped = summarize(summaries);
  std::printf("%-24s %-6s %6s %8s %8s %14s %12s\n", "environment", "algo", "trials", "diverged", "stalled",
              "test_mean", "test_sd");
  for (const auto& [key, g] : grouped)
    std::printf("%-24s %-6s %6d %8d %8d %14.4f %12.4f\n", key.first.c_str(), key.second.c_str(), g.total, g.diverged,
                g.stalled, g.mean, g.sd);
  if (const auto rate = convergence_rate(summaries)) std::printf("converged: %.0f%% of finished trials\n", *rate);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BackgroundOptions {
  std::string env;
  int frames = 1000;
  std::uint64_t seed = 0;
  std::string palette;
  std::string output;
};

int cmd_background(const BackgroundOptions& o) {
  if (o.frames < 1) throw UsageError("--frames must be >= 1");
  const Palette palette = o.palette.empty() ? default_palette() : load_palette(o.palette);
  auto env = make_environment(o.env, EnvConfig{});
  const BackgroundModel bg = background_from_rollout(*env, o.frames, o.seed, palette);
  fs::path path = o.output.empty() ? output_dir("") / ("background-" + file_stem(o.env) + ".txt") : fs::path(o.output);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_background(path.string(), bg);
  std::printf("background model (%dx%d, %d frames) written to %s\n", bg.width, bg.height, o.frames,
              path.string().c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BridgeTestOptions {
  std::string command;
  int episodes = 1;
  std::uint64_t seed = 0;
  int max_steps = 100000;
};

/// Drives a peer with a uniformly random policy and reports each episode.
int cmd_bridge_test(const BridgeTestOptions& o) {
  if (o.episodes < 1) throw UsageError("--episodes must be >= 1");
  auto env = connect_external(o.command);
  std::printf("handshake: %dx%d screen, %d actions\n", env->screen_width(), env->screen_height(),
              env->num_actions());
  Rng rng(derive_seed(o.seed, 1));
  for (int ep = 0; ep < o.episodes; ++ep) {
    env->restart(derive_seed(o.seed, static_cast<std::uint64_t>(ep)));
    double reward = 0.0;
    int steps = 0;
    for (;;) {
      const auto t = env->act(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(env->num_actions()))));
      reward += t.reward;
      ++steps;
      if (t.terminal) break;
      if (steps >= o.max_steps) throw Error("episode exceeded " + std::to_string(o.max_steps) + " steps");
    }
    std::printf("episode %d: reward %s, %d steps\n", ep, format_real(reward).c_str(), steps);
  }
  std::printf("bridge ok\n");
  return kExitOk;
}

struct BridgeServeOptions {
  std::string env;
  int episodes = 1;
  int frame_skip = 5;
  int max_steps = 10000;
};

/// Serves a synthetic environment over stdin/stdout.
int cmd_bridge_serve(const BridgeServeOptions& o) {
  if (o.episodes < 1) throw UsageError("--episodes must be >= 1");
  EnvConfig cfg;
  cfg.frame_skip = o.frame_skip;
  cfg.max_steps = o.max_steps;
  validate(cfg);
  auto env = make_synthetic(o.env, cfg);
  FdChannel channel(0, 1, false);
  serve_environment(*env, channel, o.episodes);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear reinforcement learning agents on rendered grid-world environments"};
  app.name("linrl");
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Train and test agents, writing episode/summary CSVs and checkpoints");
  run.trial.attach(*run_cmd);
  run_cmd->add_option("--trials", run.trials, "Trials per environment, with seeds seed, seed+1, ...");
  run_cmd->add_option("--jobs", run.jobs, "Maximum worker threads");
  run_cmd->add_option("--out", run.out, "Results directory (default $LINRL_RESULTS_DIR or ./results)");

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Vary one parameter and tabulate mean test reward");
  sweep_cmd->add_option("--axis", sweep.axis, "gamma, lambda, epsilon, temperature or period")->required();
  sweep_cmd->add_option("--values", sweep.values, "Comma-separated parameter values")->required();
  sweep_cmd->add_option("--trials", sweep.trials, "Trials per value");
  sweep.trial.attach(*sweep_cmd);
  sweep_cmd->add_option("--jobs", sweep.jobs, "Maximum worker threads");
  sweep_cmd->add_flag("--gnuplot", sweep.gnuplot, "Also write a gnuplot script");
  sweep_cmd->add_option("--out", sweep.out, "Results directory (default $LINRL_RESULTS_DIR or ./results)");

  CompareOptions compare;
  auto* compare_cmd = app.add_subcommand("compare", "Compare algorithms from summary CSVs");
  compare_cmd->add_option("--summary", compare.summaries, "Summary CSV files")->required();
  compare_cmd->add_option("--baseline", compare.baseline, "Baseline algorithm for relative performance");
  compare_cmd->add_option("--out", compare.out, "Also write comparison.txt and comparison.csv here");

  ReportOptions report;
  auto* report_cmd = app.add_subcommand("report", "Summary table and learning curves from an episode CSV");
  report_cmd->add_option("--episodes", report.episodes, "Episode CSV file")->required();
  report_cmd->add_option("--window", report.window, "Moving-average window for learning curves");
  report_cmd->add_flag("--gnuplot", report.gnuplot, "Also write a gnuplot script");
  report_cmd->add_option("--out", report.out, "Results directory (default $LINRL_RESULTS_DIR or ./results)");

  BackgroundOptions background;
  auto* background_cmd = app.add_subcommand("background", "Per-pixel modal color model from a random rollout");
  background_cmd->add_option("--env", background.env, "Environment id")->required();
  background_cmd->add_option("--frames", background.frames, "Frames to sample");
  background_cmd->add_option("--seed", background.seed, "Random seed");
  background_cmd->add_option("--palette", background.palette, "Palette file");
  background_cmd->add_option("--output", background.output, "Output file (default <results>/background-<env>.txt)");

  BridgeTestOptions bridge_test;
  auto* bridge_test_cmd = app.add_subcommand("bridge-test", "Drive an external environment with a random policy");
  bridge_test_cmd->add_option("--cmd", bridge_test.command, "Shell command speaking the bridge protocol")->required();
  bridge_test_cmd->add_option("--episodes", bridge_test.episodes, "Episodes to play");
  bridge_test_cmd->add_option("--seed", bridge_test.seed, "Random seed");
  bridge_test_cmd->add_option("--max-steps", bridge_test.max_steps, "Abort an episode after this many steps");

  BridgeServeOptions bridge_serve;
  auto* bridge_serve_cmd = app.add_subcommand("bridge-serve", "Serve a synthetic environment over stdin/stdout");
  bridge_serve_cmd->add_option("--env", bridge_serve.env, "Environment id")->required();
  bridge_serve_cmd->add_option("--episodes", bridge_serve.episodes, "Episodes before sending END");
  bridge_serve_cmd->add_option("--frame-skip", bridge_serve.frame_skip, "Frames per agent action");
  bridge_serve_cmd->add_option("--max-steps", bridge_serve.max_steps, "Step limit per episode");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*sweep_cmd) return cmd_sweep(sweep);
    if (*compare_cmd) return cmd_compare(compare);
    if (*report_cmd) return cmd_report(report);
    if (*background_cmd) return cmd_background(background);
    if (*bridge_test_cmd) return cmd_bridge_test(bridge_test);
    if (*bridge_serve_cmd) return cmd_bridge_serve(bridge_serve);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
