// gtpctl: command-line front end for the synthetic corpus, training runs,
// baselines, sweeps, gradient checks and plots.
//
// Exit codes: 0 success, 1 validation failure, 2 runtime error.

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gtp/errors.hpp"
#include "gtp/harness.hpp"

namespace {

constexpr const char* kOutDirEnv = "GTP_OUT_DIR";

// One string option per RunConfig key; applied after the config file.
struct RunFlags {
  std::string config;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "flat key = value file; flags override it")->check(CLI::ExistingFile);
    for (const auto& [key, def] : gtp::describe(gtp::RunConfig{})) {
      std::string names = "--" + key;
      std::string dashed = key;
      for (char& c : dashed)
        if (c == '_') c = '-';
      if (dashed != key) names += ",--" + dashed;
      app->add_option(names, values[key], "default " + (def.empty() ? std::string("\"\"") : def));
    }
  }

  gtp::RunConfig resolve(CLI::App* app) const {
    gtp::RunConfig cfg;
    if (const char* env = std::getenv(kOutDirEnv); env && *env) cfg.out_dir = env;
    if (!config.empty()) gtp::apply_config_file(cfg, config);
    for (const auto& [key, value] : values)
      if (app->count("--" + key) > 0) gtp::apply_setting(cfg, key, value);
    gtp::validate(cfg);
    return cfg;
  }
};

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    std::size_t comma = list.find(',', pos);
    if (comma == std::string::npos) comma = list.size();
    const std::string item = list.substr(pos, comma - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw gtp::InvalidConfig("bad sweep value '" + item + "'");
    }
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group topology-preserving music-to-text experiments"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "write a synthetic paired corpus as JSONL");
  std::size_t synth_n = 200;
  std::uint64_t synth_seed = 0;
  std::string synth_out = "corpus.jsonl";
  synth->add_option("--n", synth_n, "number of samples");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--out", synth_out, "output path (relative paths go under $GTP_OUT_DIR when set)");

  auto* train = app.add_subcommand("train", "pre-train and joint-train every fold, then evaluate");
  RunFlags train_flags;
  train_flags.attach(train);

  auto* baseline = app.add_subcommand("baseline", "tags kNN and tags representative baselines");
  RunFlags baseline_flags;
  baseline_flags.attach(baseline);

  auto* sweep = app.add_subcommand("sweep", "one train run per value of k or alpha");
  RunFlags sweep_flags;
  sweep_flags.attach(sweep);
  std::string sweep_param = "k";
  std::string sweep_values = "8,16,32,64";
  sweep->add_option("--param", sweep_param, "k or alpha")->check(CLI::IsMember({"k", "alpha"}));
  sweep->add_option("--values", sweep_values, "comma-separated values");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks of every loss");
  gtp::GradSuiteOptions grad_opts;
  gradcheck->add_option("--instances", grad_opts.instances, "random instances per loss");
  gradcheck->add_option("--seed", grad_opts.seed);
  gradcheck->add_option("--tol", grad_opts.tolerance, "relative error tolerance");
  gradcheck->add_option("--step", grad_opts.step, "central difference step");
  gradcheck->add_option("--corrupt", grad_opts.corrupt, "perturb this loss's analytic gradient");

  auto* plot = app.add_subcommand("plot", "render an SVG figure");
  std::string plot_input, plot_kind, plot_out;
  plot->add_option("--input", plot_input, "metrics.jsonl, pairs CSV or sweep CSV")->required();
  plot->add_option("--kind", plot_kind, "similarity_scatter, similarity_histogram, sentiment_bars or sweep_curve")
      ->required();
  plot->add_option("--out", plot_out, "output .svg")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      std::filesystem::path out = synth_out;
      if (const char* env = std::getenv(kOutDirEnv); env && *env && out.is_relative()) out = env / out;
      gtp::cmd_synth(synth_n, synth_seed, out, &std::cout);
    } else if (*train) {
      gtp::cmd_train(train_flags.resolve(train), &std::cout);
    } else if (*baseline) {
      gtp::cmd_baseline(baseline_flags.resolve(baseline), &std::cout);
    } else if (*sweep) {
      const auto values = parse_values(sweep_values);
      const auto points = gtp::cmd_sweep(sweep_flags.resolve(sweep), sweep_param, values, &std::cout);
      for (const auto& p : points) std::cout << sweep_param << " = " << p.value << "  mean bleu " << p.summary.mean_bleu << '\n';
    } else if (*gradcheck) {
      bool ok = true;
      for (const auto& c : gtp::cmd_gradcheck(grad_opts, &std::cout)) ok = ok && c.passed;
      return ok ? 0 : 1;
    } else if (*plot) {
      gtp::cmd_plot(plot_input, plot_kind, plot_out);
      std::cout << "wrote " << plot_out << '\n';
    }
  } catch (const gtp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
