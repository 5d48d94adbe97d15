// mmtlab: dataset generation, pretraining, training, evaluation, sweeps and
// reports. Failures print a JSON error record on stderr (and into
// <out>/error.json when the output directory is known) and exit nonzero.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mmt/commands.hpp"
#include "mmt/error.hpp"

namespace fs = std::filesystem;
using namespace mmt;

namespace {

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string("bad ") + what + " value '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(std::string(what) + " list is empty");
  return out;
}

std::vector<double> percent_to_fraction(std::vector<double> v) {
  for (double& x : v) x /= 100.0;
  return v;
}

int exit_code(const std::string& kind) {
  if (kind == "config") return 2;
  if (kind == "file") return 3;
  if (kind == "checkpoint") return 4;
  if (kind == "data") return 5;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmtlab: missing-modality-robust multimodal transformer experiments"};
  app.require_subcommand(1);

  std::string config_arg, out_arg, checkpoint_arg, rtest_arg, axis_arg, grid_arg, metrics_arg, preset_name;
  std::optional<std::uint64_t> seed_arg;
  std::vector<std::string> method_args;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_arg, "run config JSON, or preset:<name>")->required();
  };
  auto add_out = [&](CLI::App* cmd) { cmd->add_option("--out", out_arg, "output directory (default: config out)"); };
  auto add_seed = [&](CLI::App* cmd) { cmd->add_option("--seed", seed_arg, "run seed (default: first config seed)"); };

  auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  add_config(gen);
  add_out(gen);

  auto* pre = app.add_subcommand("pretrain", "masked-autoencoder pretraining");
  add_config(pre);
  add_out(pre);
  add_seed(pre);

  auto* train = app.add_subcommand("train", "train (or fine-tune) a classifier");
  add_config(train);
  add_out(train);
  add_seed(train);
  train->add_option("--checkpoint", checkpoint_arg, "pretrained checkpoint to fine-tune from");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint over the r_test grid");
  add_config(eval);
  add_out(eval);
  add_seed(eval);
  eval->add_option("--checkpoint", checkpoint_arg, "fine-tuned checkpoint")->required();
  eval->add_option("--method", method_args, "substitution method(s): mmt, zeros, skip")->delimiter(',');
  eval->add_option("--rtest", rtest_arg, "test missing rates in percent, e.g. 0,25,50,75,100");

  auto* sweep = app.add_subcommand("sweep", "train + eval over a grid and all config seeds");
  add_config(sweep);
  add_out(sweep);
  sweep->add_option("--axis", axis_arg, "p, fusion_layer or r_train")->required();
  sweep->add_option("--grid", grid_arg, "grid values; percent for p and r_train, layer index for fusion_layer")
      ->required();

  auto* report = app.add_subcommand("report", "accuracy-vs-r_test table and SVG charts");
  report->add_option("--metrics", metrics_arg, "metrics CSV")->required();
  report->add_option("--out", out_arg, "output directory (default: next to the CSV)");

  auto* show = app.add_subcommand("preset", "print a built-in preset config");
  show->add_option("name", preset_name, "epic-kitchens-like, epic-sounds-like or ego4d-ar-like")->required();

  CLI11_PARSE(app, argc, argv);

  fs::path out;
  try {
    if (show->parsed()) {
      std::cout << json(preset(preset_name)).dump(2) << '\n';
      return 0;
    }
    if (report->parsed()) {
      out = out_arg.empty() ? fs::path(metrics_arg).parent_path() : fs::path(out_arg);
      if (out.empty()) out = ".";
      const auto curves = cmd_report(metrics_arg, out);
      std::cout << report_text(curves);
      return 0;
    }

    out = out_arg;  // so a config that fails to load still leaves error.json behind
    const RunConfig cfg = config_arg.rfind("preset:", 0) == 0 ? preset(config_arg.substr(7))
                                                               : load_run_config(config_arg);
    out = out_arg.empty() ? fs::path(cfg.out) : fs::path(out_arg);
    const std::uint64_t seed = seed_arg.value_or(cfg.seeds.front());

    if (gen->parsed()) {
      std::cout << cmd_gen_data(cfg, out).string() << '\n';
    } else if (pre->parsed()) {
      std::cout << cmd_pretrain(cfg, seed, out).string() << '\n';
    } else if (train->parsed()) {
      std::optional<fs::path> init;
      if (!checkpoint_arg.empty()) init = checkpoint_arg;
      std::cout << cmd_train(cfg, seed, out, init).string() << '\n';
    } else if (eval->parsed()) {
      std::vector<SubstitutionMethod> methods;
      for (const auto& m : method_args) methods.push_back(parse_method(m));
      std::vector<double> rates;
      if (!rtest_arg.empty()) rates = percent_to_fraction(parse_list(rtest_arg, "--rtest"));
      cmd_eval(cfg, seed, checkpoint_arg, out, methods, rates).write_csv(std::cout);
    } else if (sweep->parsed()) {
      const SweepAxis axis = parse_sweep_axis(axis_arg);
      std::vector<double> grid = parse_list(grid_arg, "--grid");
      if (axis != SweepAxis::FusionLayer) grid = percent_to_fraction(std::move(grid));
      cmd_sweep(cfg, axis, grid, out).write_csv(std::cout);
    }
    return 0;
  } catch (const Error& e) {
    const json record = error_record(e.kind(), e.what());
    std::cerr << record.dump() << '\n';
    if (!out.empty()) {
      std::error_code ec;
      fs::create_directories(out, ec);
      std::ofstream(out / "error.json") << record.dump(2) << '\n';
    }
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << error_record("internal", e.what()).dump() << '\n';
    return 1;
  }
}
