// stabgap: run continual-learning grids and re-aggregate their traces.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stabgap/experiment.hpp"

namespace {

struct Flag {
  const char* name;
  const char* key;
  const char* help;
};

const Flag kFlags[] = {
    {"--benchmark", "benchmark", "rotated-mnist | synthetic-domain | synthetic-class"},
    {"--method", "method", "objective(s): Finetune, ER, Joint, DER, BiC (comma list)"},
    {"--projector", "projector", "None, AGEM, GEM (comma list)"},
    {"--gamma", "gamma", "GEM margin(s)"},
    {"--lr", "lr", "learning rate(s)"},
    {"--batch-size", "batch-size", "mini-batch size(s)"},
    {"--iters", "iters", "iterations per task (offline regime)"},
    {"--regime", "regime", "offline | online"},
    {"--buffer", "buffer", "stored examples per class per task, or 'full'"},
    {"--seeds", "seeds", "seed list, e.g. 0,1,2,3,4"},
    {"--eval-period", "eval-period", "evaluate every N iterations outside post-switch windows"},
    {"--data-dir", "data-dir", "directory holding the MNIST IDX files"},
    {"--out", "out", "output directory"},
    {"--jobs", "jobs", "parallel workers"},
    {"--always-solve", "always-solve", "GEM: solve the QP even when no constraint is violated (true/false)"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual-learning stability benchmark"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "execute a method x seed grid");
  std::string config_path;
  run->add_option("--config", config_path, "key = value configuration file");
  std::vector<std::string> values(std::size(kFlags));
  for (std::size_t i = 0; i < std::size(kFlags); ++i) run->add_option(kFlags[i].name, values[i], kFlags[i].help);
  std::vector<std::string> extra;
  run->add_option("--set", extra, "additional key=value setting (repeatable)");
  bool quiet = false;
  run->add_flag("-q,--quiet", quiet, "no per-run progress");

  auto* summ = app.add_subcommand("summarize", "re-aggregate CSV traces of one cell into a summary");
  std::vector<std::string> csvs;
  std::string summary_out;
  summ->add_option("csv", csvs, "trace files")->required();
  summ->add_option("-o,--output", summary_out, "write the summary here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      stabgap::RunConfig cfg;
      if (!config_path.empty()) stabgap::load_config_file(cfg, config_path);
      for (std::size_t i = 0; i < std::size(kFlags); ++i)
        if (run->count(kFlags[i].name) > 0) stabgap::set_option(cfg, kFlags[i].key, values[i]);
      for (const auto& kv : extra) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw stabgap::ConfigError("--set expects key=value, got '" + kv + "'");
        stabgap::set_option(cfg, stabgap::detail::trim(kv.substr(0, eq)), kv.substr(eq + 1));
      }
      const auto cells = stabgap::run_experiments(cfg, quiet ? nullptr : &std::cerr);
      for (const auto& c : cells) {
        const auto& s = c.summary;
        std::cout << s["method"].get<std::string>() << " [" << c.cell_id << "]: final avg-ACC "
                  << 100.0 * s["final_avg_acc"]["mean"].get<double>();
        if (!s["avg_min_acc"]["mean"].is_null())
          std::cout << ", avg-min-ACC " << 100.0 * s["avg_min_acc"]["mean"].get<double>();
        std::cout << ", train " << s["wall_ms"]["mean"].get<double>() / 1000.0 << " s  -> " << c.summary_path.string()
                  << '\n';
      }
      return 0;
    }
    std::vector<std::filesystem::path> paths(csvs.begin(), csvs.end());
    const auto summary = stabgap::summarize(paths);
    if (summary_out.empty()) {
      std::cout << summary.dump(2) << '\n';
    } else {
      std::ofstream out(summary_out);
      if (!out) throw std::runtime_error("cannot write " + summary_out);
      out << summary.dump(2) << '\n';
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "stabgap: " << e.what() << '\n';
    return 1;
  }
}
