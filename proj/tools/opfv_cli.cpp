#include <CLI11.hpp>

#include <filesystem>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "opfv/harness.hpp"

namespace {

using opfv::harness::ExperimentConfig;
using opfv::harness::Json;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  std::string out;
  bool plot = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON experiment config")->required();
  cmd->add_option("--override", args.overrides, "dot-path override, e.g. env.lambda=1.0");
  cmd->add_option("--seed", args.seed, "run with this single seed");
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_flag("--plot", args.plot, "also write SVG charts");
}

Json load_config(const CommonArgs& args) {
  std::ifstream in(args.config_path);
  if (!in) throw std::invalid_argument("config file not found: " + args.config_path);
  Json j = Json::parse(in);
  for (const auto& ov : args.overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("override must look like key=value: " + ov);
    opfv::harness::apply_override(j, ov.substr(0, eq), ov.substr(eq + 1));
  }
  if (args.seed >= 0) j["seeds"] = Json::array({static_cast<std::uint64_t>(args.seed)});
  if (!args.out.empty()) j["out"] = args.out;
  if (args.plot) j["plot"] = true;
  return j;
}

int run_mode(const std::string& mode, const CommonArgs& args) {
  ExperimentConfig cfg = ExperimentConfig::from_json(load_config(args));
  if (mode != "sweep") cfg.mode = mode;
  if (mode == "sweep" && !cfg.sweep)
    throw std::invalid_argument("sweep mode requires a sweep block in the config");

  if (cfg.mode == "tune") {
    const auto report = opfv::harness::run_tune(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    opfv::harness::emit_tune_csv(report, cfg.out_dir + "/tune.csv");
    std::ifstream echo(cfg.out_dir + "/tune.csv");
    std::cout << echo.rdbuf();
    return 0;
  }
  const auto report =
      cfg.mode == "fopl" ? opfv::harness::run_fopl(cfg) : opfv::harness::run_fope(cfg);
  opfv::harness::emit_report(report, cfg.out_dir, cfg.plot);
  std::cout << "wrote " << report.rows.size() << " rows (" << report.failures.size()
            << " failures) to " << cfg.out_dir << "\n";
  return 0;
}

int run_gen_data(const CommonArgs& args, std::size_t n) {
  ExperimentConfig cfg = ExperimentConfig::from_json(load_config(args));
  const opfv::SyntheticEnv env = opfv::SyntheticEnv::from_json_string(cfg.env.dump());
  const std::size_t size = n > 0 ? n : (cfg.n > 0 ? cfg.n : 1000);
  const auto ds = env.sample_logged_data(size, cfg.seeds.front());
  std::filesystem::create_directories(cfg.out_dir);
  opfv::io::write_dataset_csv(ds, cfg.out_dir + "/data.csv", cfg.out_dir + "/data.meta.json");
  std::cout << "wrote " << ds.size() << " records to " << cfg.out_dir << "/data.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Future off-policy evaluation and learning toolkit"};
  app.require_subcommand(1);

  CommonArgs fope_args, fopl_args, tune_args, sweep_args, gen_args;
  std::size_t gen_n = 0;

  add_common(app.add_subcommand("fope", "estimate future policy values"), fope_args);
  add_common(app.add_subcommand("fopl", "learn policies for a future target time"), fopl_args);
  add_common(app.add_subcommand("tune", "score time-feature candidates"), tune_args);
  add_common(app.add_subcommand("sweep", "run the sweep configured in the config"), sweep_args);
  auto* gen = app.add_subcommand("gen-data", "sample a logged dataset to CSV");
  add_common(gen, gen_args);
  gen->add_option("-n", gen_n, "number of records");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand("fope")) return run_mode("fope", fope_args);
    if (app.got_subcommand("fopl")) return run_mode("fopl", fopl_args);
    if (app.got_subcommand("tune")) return run_mode("tune", tune_args);
    if (app.got_subcommand("sweep")) return run_mode("sweep", sweep_args);
    if (app.got_subcommand("gen-data")) return run_gen_data(gen_args, gen_n);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
