// Desk-scale acceptance on Rotated MNIST (criteria 6-12).
//
// Runs are cached per cell under the cache directory together with the
// configuration that produced them; a cell is recomputed when the
// configuration differs or any seed is missing.
//
// Environment:
//   STABILITY_BENCH_DATA     MNIST directory (default set at configure time)
//   STABGAP_ACCEPTANCE_CACHE cache directory (default set at configure time)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "stabgap/stabgap.hpp"

namespace fs = std::filesystem;
using namespace stabgap;

namespace {

constexpr int kSeeds = 5;

// Tolerances, in accuracy points.
constexpr double kJointTarget = 97.5, kJointTol = 1.0;
constexpr double kErFinalTarget = 91.9, kErFinalTol = 1.5;
constexpr double kErMinTarget = 83.1, kErMinTol = 2.5;
constexpr double kGammaSweepMargin = 3.0;
constexpr double kGapMin = 4.0;
constexpr long kSwitchWindow = 50;
constexpr int kSeedsWithEarlyMin = 4;
constexpr double kAgemNullTol = 1.0;
constexpr double kAgemLowerRatio = 0.95;
constexpr double kAgemUpperRatio = 1.15;

RunConfig desk_config(const std::string& data_dir) {
  RunConfig c;
  c.benchmark = "rotated-mnist";
  c.data_dir = data_dir;
  c.lrs = {0.1};
  c.batch_sizes = {128};
  c.iters = 2000;
  c.regime = "offline";
  c.buffer = "100";
  c.seeds = {0, 1, 2, 3, 4};
  c.eval_period = 5;
  c.dense_window = 50;
  c.hidden = {400, 400};
  return c;
}

std::string fingerprint(const RunConfig& c) {
  std::ostringstream os;
  os << "benchmark=" << c.benchmark << "\nobjective=" << c.objectives.at(0) << "\nprojector=" << c.projectors.at(0)
     << "\ngamma=" << c.gammas.at(0) << "\nalways_solve=" << c.always_solve << "\nlr=" << c.lrs.at(0)
     << "\nbatch=" << c.batch_sizes.at(0) << "\niters=" << c.iters << "\nregime=" << c.regime
     << "\nbuffer=" << c.buffer << "\neval_period=" << c.eval_period << "\ndense=" << c.dense_window
     << "\neval_size=" << c.eval_size << "\nseeds=";
  for (auto s : c.seeds) os << s << ' ';
  os << "\nhidden=";
  for (int h : c.hidden) os << h << ' ';
  os << '\n';
  return os.str();
}

struct Cell {
  std::string name;
  nlohmann::json summary;
  std::vector<MetricsLog> logs;

  [[nodiscard]] double mean(const char* key) const { return 100.0 * summary[key]["mean"].get<double>(); }
};

Cell load_or_run(const std::string& name, RunConfig c, const fs::path& cache) {
  const fs::path dir = cache / name;
  c.output_dir = dir.string();
  const std::string fp = fingerprint(c);
  const fs::path fp_file = dir / "config.txt";

  const auto cells = expand_grid(c);
  if (cells.size() != 1) throw std::logic_error("desk cell must expand to one grid point");
  const fs::path cell_dir = dir / cells[0].id();
  std::vector<fs::path> csvs;
  for (auto s : c.seeds) csvs.push_back(cell_dir / ("seed_" + std::to_string(s) + ".csv"));

  bool cached = false;
  if (std::ifstream in(fp_file); in) {
    std::stringstream ss;
    ss << in.rdbuf();
    cached = ss.str() == fp && std::all_of(csvs.begin(), csvs.end(), [](const fs::path& p) { return fs::exists(p); });
  }
  if (!cached) {
    std::cerr << "[desk] computing " << name << " (" << c.seeds.size() << " seeds)" << std::endl;
    fs::remove_all(dir);
    fs::create_directories(dir);
    run_experiments(c, &std::cerr);
    std::ofstream(fp_file) << fp;
  } else {
    std::cerr << "[desk] reusing cached " << name << std::endl;
  }

  Cell out;
  out.name = name;
  out.summary = summarize(csvs);
  for (const auto& p : csvs) out.logs.push_back(read_csv(p).log);
  return out;
}

int failures = 0;

void report(bool ok, const std::string& id, const std::string& text) {
  std::printf("[%s] %s %s\n", ok ? "PASS" : "FAIL", id.c_str(), text.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

/// Every old task's minimum lies within kSwitchWindow iterations after a switch
/// (its own or a later one).
bool min_near_switch(const MetricsLog& log) {
  const auto& b = log.task_boundaries;
  for (std::size_t t = 0; t + 1 < b.size(); ++t) {
    const long at = min_acc_record(log, t).global_iter;
    bool near = false;
    for (std::size_t s = t; s + 1 < b.size(); ++s)
      if (at > b[s] && at <= b[s] + kSwitchWindow) near = true;
    if (!near) return false;
  }
  return true;
}

// Training time only, evaluation excluded.
double training_seconds(const TaskStream& stream, const MethodSpec& m, const TrainConfig& tc) {
  return run_sequence_detailed(stream, m, tc).log.records.back().wall_ms / 1000.0;
}

}  // namespace

int main() {
  std::string data_dir;
  if (const char* env = std::getenv("STABILITY_BENCH_DATA")) data_dir = env;
  if (data_dir.empty()) data_dir = STABGAP_DEFAULT_DATA_DIR;
  fs::path cache = STABGAP_DEFAULT_CACHE;
  if (const char* env = std::getenv("STABGAP_ACCEPTANCE_CACHE")) cache = env;

  try {
    (void)find_idx_file(data_dir, "train-images-idx3-ubyte");
  } catch (const std::exception& e) {
    std::printf("[SKIP] C6-C12 Rotated MNIST not found in %s (%s)\n", data_dir.c_str(), e.what());
    return 77;
  }

  try {
    const RunConfig base = desk_config(data_dir);
    auto variant = [&](const char* obj, const char* proj, double gamma, bool always, const char* buffer) {
      RunConfig c = base;
      c.objectives = {obj};
      c.projectors = {proj};
      c.gammas = {gamma};
      c.always_solve = always;
      c.buffer = buffer;
      return c;
    };

    const Cell er = load_or_run("er", variant("ER", "None", 0.5, false, "100"), cache);
    const Cell joint = load_or_run("joint", variant("Joint", "None", 0.5, false, "full"), cache);
    const Cell gem = load_or_run("er_gem", variant("ER", "GEM", 0.5, false, "100"), cache);
    const Cell agem = load_or_run("er_agem", variant("ER", "AGEM", 0.5, false, "100"), cache);
    const Cell g0 = load_or_run("er_gem_always_g0", variant("ER", "GEM", 0.0, true, "100"), cache);
    const Cell g1 = load_or_run("er_gem_always_g1", variant("ER", "GEM", 1.0, true, "100"), cache);

    for (const Cell* c : {&er, &joint, &gem, &agem, &g0, &g1})
      std::printf("  %-18s final avg-ACC %6.2f +- %.2f   avg-min-ACC %6.2f +- %.2f   train %7.1f s\n", c->name.c_str(),
                  c->mean("final_avg_acc"), 100.0 * c->summary["final_avg_acc"]["sem"].get<double>(),
                  c->mean("avg_min_acc"), 100.0 * c->summary["avg_min_acc"]["sem"].get<double>(),
                  c->summary["wall_ms"]["mean"].get<double>() / 1000.0);

    const double jf = joint.mean("final_avg_acc");
    report(std::abs(jf - kJointTarget) <= kJointTol, "C6",
           fmt("Joint final avg-ACC %.2f, target %.1f +- %.1f", jf, kJointTarget, kJointTol));

    const double ef = er.mean("final_avg_acc"), em = er.mean("avg_min_acc");
    report(std::abs(ef - kErFinalTarget) <= kErFinalTol && std::abs(em - kErMinTarget) <= kErMinTol, "C7",
           fmt("ER final avg-ACC %.2f (target %.1f +- %.1f), avg-min-ACC %.2f (target %.1f +- %.1f)", ef,
               kErFinalTarget, kErFinalTol, em, kErMinTarget, kErMinTol));

    const double gf = gem.mean("final_avg_acc"), gm = gem.mean("avg_min_acc");
    report(gf > ef && gm > em, "C8",
           fmt("ER+GEM(0.5) vs ER: final %.2f vs %.2f, avg-min %.2f vs %.2f", gf, ef, gm, em));

    const double m0 = g0.mean("avg_min_acc"), m1 = g1.mean("avg_min_acc");
    report(m1 - m0 > kGammaSweepMargin, "C9",
           fmt("ER+GEM always-solve avg-min-ACC gamma=1.0 %.2f vs gamma=0 %.2f, diff %.2f > %.1f", m1, m0, m1 - m0,
               kGammaSweepMargin));

    int early = 0;
    for (const auto& log : er.logs) early += min_near_switch(log) ? 1 : 0;
    report(ef - em >= kGapMin && early >= kSeedsWithEarlyMin, "C10",
           fmt("ER gap final - avg-min = %.2f (>= %.1f); minima within %ld iters of a switch in %d/%d seeds (>= %d)",
               ef - em, kGapMin, kSwitchWindow, early, kSeeds, kSeedsWithEarlyMin));

    const double af = agem.mean("final_avg_acc");
    report(std::abs(af - ef) <= kAgemNullTol, "C11",
           fmt("|ER+AGEM - ER| final avg-ACC = |%.2f - %.2f| = %.2f <= %.1f", af, ef, std::abs(af - ef),
               kAgemNullTol));

    // Timing: fresh fixed-size runs, interleaved so drift hits every method alike.
    {
      TaskStream stream = build_rotated_mnist(data_dir);
      TrainConfig tc;
      tc.iters_per_task = 300;
      tc.eval_period = 1000000;
      tc.dense_window = 0;
      tc.eval_set_size = 10;
      tc.seed = 0;
      MethodSpec m_er{Objective::ER, Projector::None};
      MethodSpec m_agem{Objective::ER, Projector::AGEM};
      MethodSpec m_gem{Objective::ER, Projector::GEM};
      double b_er = 1e300, b_agem = 1e300, b_gem = 1e300;
      for (int rep = 0; rep < 3; ++rep) {
        b_er = std::min(b_er, training_seconds(stream, m_er, tc));
        b_agem = std::min(b_agem, training_seconds(stream, m_agem, tc));
        b_gem = std::min(b_gem, training_seconds(stream, m_gem, tc));
      }
      const double ratio = b_agem / b_er;
      report(b_gem > b_agem && ratio >= kAgemLowerRatio && ratio <= kAgemUpperRatio, "C12",
             fmt("training time (best of 3, 3x300 iters): ER %.2f s, ER+AGEM %.2f s (ratio %.3f in [%.2f, %.2f]), "
                 "ER+GEM %.2f s",
                 b_er, b_agem, ratio, kAgemLowerRatio, kAgemUpperRatio, b_gem));
    }
  } catch (const std::exception& e) {
    std::printf("[FAIL] desk suite aborted: %s\n", e.what());
    return 1;
  }
  std::printf("%s: %d failing criteria\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
