#pragma once

// Batch experiment runner: configuration, grid expansion, per-run CSV traces
// and per-cell summary JSON.

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "stabgap/data.hpp"
#include "stabgap/evaluation.hpp"
#include "stabgap/methods.hpp"

namespace stabgap {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string benchmark = "synthetic-domain";  // rotated-mnist | synthetic-domain | synthetic-class
  std::vector<std::string> objectives{"ER"};
  std::vector<std::string> projectors{"None"};
  std::vector<double> gammas{0.5};
  bool always_solve = false;
  double der_alpha = 0.3;
  double bic_temperature = 2.0;
  int bic_iters = 200;
  double bic_lr = 0.1;
  std::vector<double> lrs{0.1};
  std::vector<int> batch_sizes{128};
  int iters = 2000;
  std::string regime = "offline";
  std::string buffer = "100";  // per class per task, or "full"
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  int eval_period = 5;
  int dense_window = 50;
  std::size_t eval_size = 1000;
  std::vector<int> hidden{400, 400};
  std::string output_dir = "runs";
  std::string data_dir;
  std::vector<double> rotations{0.0, 80.0, 160.0};
  std::size_t max_train = 0;  // 0: whole MNIST train split
  int jobs = 1;
  // synthetic streams
  int syn_tasks = 3;
  int syn_classes = 4;
  int syn_samples = 200;
  int syn_test = 100;
  int syn_dim = 8;
  double syn_rotation = 60.0;
  double syn_separation = 6.0;
  double syn_noise = 1.0;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw ConfigError("empty list value");
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& s) {
  T v{};
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) throw ConfigError("invalid value '" + s + "' for " + key);
  return v;
}

template <class T>
std::vector<T> parse_numbers(const std::string& key, const std::string& s) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) out.push_back(parse_number<T>(key, item));
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "1" || s == "true" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "no") return false;
  throw ConfigError("invalid boolean '" + s + "' for " + key);
}

}  // namespace detail

/// Apply one key/value setting. Keys match the long CLI flag names.
inline void set_option(RunConfig& c, const std::string& key, const std::string& raw) {
  using namespace detail;
  const std::string v = trim(raw);
  if (key == "benchmark") {
    if (v != "rotated-mnist" && v != "synthetic-domain" && v != "synthetic-class")
      throw ConfigError("unknown benchmark '" + v + "'");
    c.benchmark = v;
  } else if (key == "method" || key == "objective") {
    c.objectives = split_list(v);
    for (const auto& o : c.objectives) (void)parse_objective(o);
  } else if (key == "projector") {
    c.projectors = split_list(v);
    for (const auto& p : c.projectors) (void)parse_projector(p);
  } else if (key == "gamma") c.gammas = parse_numbers<double>(key, v);
  else if (key == "always-solve") c.always_solve = parse_bool(key, v);
  else if (key == "der-alpha") c.der_alpha = parse_number<double>(key, v);
  else if (key == "bic-temperature") c.bic_temperature = parse_number<double>(key, v);
  else if (key == "bic-iters") c.bic_iters = parse_number<int>(key, v);
  else if (key == "bic-lr") c.bic_lr = parse_number<double>(key, v);
  else if (key == "lr") c.lrs = parse_numbers<double>(key, v);
  else if (key == "batch-size") c.batch_sizes = parse_numbers<int>(key, v);
  else if (key == "iters") c.iters = parse_number<int>(key, v);
  else if (key == "regime") {
    (void)parse_regime(v);
    c.regime = v;
  } else if (key == "buffer") {
    if (v != "full") (void)parse_number<std::size_t>(key, v);
    c.buffer = v;
  } else if (key == "seeds") c.seeds = parse_numbers<std::uint64_t>(key, v);
  else if (key == "eval-period") c.eval_period = parse_number<int>(key, v);
  else if (key == "dense-window") c.dense_window = parse_number<int>(key, v);
  else if (key == "eval-size") c.eval_size = parse_number<std::size_t>(key, v);
  else if (key == "hidden") c.hidden = parse_numbers<int>(key, v);
  else if (key == "out") c.output_dir = v;
  else if (key == "data-dir") c.data_dir = v;
  else if (key == "rotations") c.rotations = parse_numbers<double>(key, v);
  else if (key == "max-train") c.max_train = parse_number<std::size_t>(key, v);
  else if (key == "jobs") c.jobs = parse_number<int>(key, v);
  else if (key == "syn-tasks") c.syn_tasks = parse_number<int>(key, v);
  else if (key == "syn-classes") c.syn_classes = parse_number<int>(key, v);
  else if (key == "syn-samples") c.syn_samples = parse_number<int>(key, v);
  else if (key == "syn-test") c.syn_test = parse_number<int>(key, v);
  else if (key == "syn-dim") c.syn_dim = parse_number<int>(key, v);
  else if (key == "syn-rotation") c.syn_rotation = parse_number<double>(key, v);
  else if (key == "syn-separation") c.syn_separation = parse_number<double>(key, v);
  else if (key == "syn-noise") c.syn_noise = parse_number<double>(key, v);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

/// `key = value` lines; `#` starts a comment.
inline void load_config_file(RunConfig& c, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      set_option(c, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

/// Resolve the data directory: explicit setting, then STABILITY_BENCH_DATA.
inline std::string resolve_data_dir(const RunConfig& c) {
  if (!c.data_dir.empty()) return c.data_dir;
  if (const char* env = std::getenv("STABILITY_BENCH_DATA")) return env;
  return {};
}

/// One point of the grid; all seeds of a cell share a summary.
struct GridCell {
  MethodSpec method;
  TrainConfig train;  // seed filled per run

  [[nodiscard]] std::string method_name() const {
    std::string s = method.label();
    if (method.projector == Projector::GEM && method.gem.always_solve) s += "-always";
    return s;
  }
  [[nodiscard]] std::string id() const {
    std::ostringstream os;
    os << method_name() << "_lr" << train.learning_rate << "_bs" << train.batch_size;
    if (method.projector == Projector::GEM) os << "_g" << method.gem.gamma;
    return os.str();
  }
};

inline std::vector<GridCell> expand_grid(const RunConfig& c) {
  std::vector<GridCell> cells;
  std::set<std::string> seen;
  for (const auto& o : c.objectives)
    for (const auto& p : c.projectors)
      for (double gamma : c.gammas)
        for (double lr : c.lrs)
          for (int bs : c.batch_sizes) {
            GridCell cell;
            cell.method.objective = parse_objective(o);
            cell.method.projector = parse_projector(p);
            cell.method.gem.gamma = gamma;
            cell.method.gem.always_solve = c.always_solve;
            cell.method.der.alpha = c.der_alpha;
            cell.method.bic.temperature = c.bic_temperature;
            cell.method.bic.bias_stage_iters = c.bic_iters;
            cell.method.bic.bias_lr = c.bic_lr;
            cell.train.hidden_layers = c.hidden;
            cell.train.batch_size = bs;
            cell.train.learning_rate = lr;
            cell.train.iters_per_task = c.iters;
            cell.train.regime = parse_regime(c.regime);
            cell.train.eval_period = c.eval_period;
            cell.train.dense_window = c.dense_window;
            cell.train.eval_set_size = c.eval_size;
            if (c.buffer == "full")
              cell.train.buffer_capacity = std::nullopt;
            else
              cell.train.buffer_capacity = detail::parse_number<std::size_t>("buffer", c.buffer);
            cell.train.validate();
            if (seen.insert(cell.id()).second) cells.push_back(cell);
          }
  return cells;
}

inline TaskStream build_stream(const RunConfig& c, std::uint64_t seed) {
  if (c.benchmark == "rotated-mnist") {
    const std::string dir = resolve_data_dir(c);
    if (dir.empty()) throw ConfigError("rotated-mnist needs --data-dir or STABILITY_BENCH_DATA");
    return build_rotated_mnist(dir, c.rotations, c.max_train);
  }
  SyntheticConfig s;
  s.scenario = c.benchmark == "synthetic-class" ? Scenario::ClassIL : Scenario::DomainIL;
  s.num_tasks = c.syn_tasks;
  s.classes = c.syn_classes;
  s.samples_per_class = c.syn_samples;
  s.test_per_class = c.syn_test;
  s.dim = c.syn_dim;
  s.rotation_per_task_degrees = c.syn_rotation;
  s.separation = c.syn_separation;
  s.noise = c.syn_noise;
  s.seed = seed;
  return build_synthetic_stream(s);
}

// ---------------------------------------------------------------------------
// CSV traces

inline constexpr const char* kCsvHeader =
    "run_id,seed,method,objective,projector,gamma,lr,batch_size,iter,train_task,eval_task,accuracy,projected,"
    "degenerate_ref,wall_ms";

/// Identity of a run as carried by every CSV row.
struct RunIdentity {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string method;
  std::string objective;
  std::string projector;
  std::optional<double> gamma;
  double lr = 0.0;
  int batch_size = 0;

  bool operator==(const RunIdentity&) const = default;
};

inline RunIdentity identity_of(const GridCell& cell, std::uint64_t seed) {
  RunIdentity id;
  id.run_id = cell.id() + "_s" + std::to_string(seed);
  id.seed = seed;
  id.method = cell.method_name();
  id.objective = to_string(cell.method.objective);
  id.projector = to_string(cell.method.projector);
  if (cell.method.projector == Projector::GEM) id.gamma = cell.method.gem.gamma;
  id.lr = cell.train.learning_rate;
  id.batch_size = cell.train.batch_size;
  return id;
}

namespace detail {

inline std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline void write_csv(const std::filesystem::path& path, const RunIdentity& id, const MetricsLog& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << kCsvHeader << '\n';
  const std::string prefix = id.run_id + "," + std::to_string(id.seed) + "," + id.method + "," + id.objective + "," +
                             id.projector + "," + (id.gamma ? detail::fmt_double(*id.gamma) : std::string{}) + "," +
                             detail::fmt_double(id.lr) + "," + std::to_string(id.batch_size) + ",";
  for (const auto& r : log.records)
    for (std::size_t t = 0; t < r.accuracy.size(); ++t)
      out << prefix << r.global_iter << ',' << r.training_task << ',' << t << ',' << detail::fmt_double(r.accuracy[t])
          << ',' << (r.projected ? 1 : 0) << ',' << (r.degenerate_ref ? 1 : 0) << ',' << detail::fmt_double(r.wall_ms)
          << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

struct CsvRun {
  RunIdentity id;
  MetricsLog log;
};

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parse one run's trace. Records must be grouped per iteration with eval
/// tasks 0..T-1 in order.
inline CsvRun read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw CsvError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw CsvError(path.string() + ": header does not match the trace schema");

  static const char* cols[] = {"run_id", "seed",      "method",    "objective", "projector",
                               "gamma",  "lr",        "batch_size", "iter",      "train_task",
                               "eval_task", "accuracy", "projected", "degenerate_ref", "wall_ms"};
  CsvRun run;
  std::size_t row = 1;
  bool first = true;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_csv_line(line);
    auto where = [&](int c) { return path.string() + ": row " + std::to_string(row) + ", column " + cols[c]; };
    if (f.size() != 15) throw CsvError(path.string() + ": row " + std::to_string(row) + ": expected 15 columns");
    auto num = [&]<class T>(int c, T) {
      try {
        return detail::parse_number<T>(cols[c], f[static_cast<std::size_t>(c)]);
      } catch (const ConfigError&) {
        throw CsvError(where(c) + ": invalid value '" + f[static_cast<std::size_t>(c)] + "'");
      }
    };
    auto flag = [&](int c) {
      const auto& s = f[static_cast<std::size_t>(c)];
      if (s == "0") return false;
      if (s == "1") return true;
      throw CsvError(where(c) + ": expected 0 or 1");
    };

    RunIdentity id;
    id.run_id = f[0];
    id.seed = num(1, std::uint64_t{});
    id.method = f[2];
    id.objective = f[3];
    id.projector = f[4];
    if (!f[5].empty()) id.gamma = num(5, double{});
    id.lr = num(6, double{});
    id.batch_size = num(7, int{});
    if (first) {
      run.id = id;
      first = false;
    } else if (!(id == run.id)) {
      throw CsvError(path.string() + ": row " + std::to_string(row) + ": run identity changes within file");
    }

    const long iter = num(8, long{});
    const int train_task = num(9, int{});
    const int eval_task = num(10, int{});
    const double acc = num(11, double{});
    if (!(acc >= 0.0 && acc <= 1.0)) throw CsvError(where(11) + ": accuracy outside [0,1]");
    const bool projected = flag(12);
    const bool degenerate = flag(13);
    const double wall = num(14, double{});

    auto& recs = run.log.records;
    if (eval_task == 0) {
      if (!recs.empty() && iter <= recs.back().global_iter) throw CsvError(where(8) + ": iterations not increasing");
      MetricsRecord r;
      r.global_iter = iter;
      r.training_task = train_task;
      r.projected = projected;
      r.degenerate_ref = degenerate;
      r.wall_ms = wall;
      recs.push_back(std::move(r));
    } else {
      if (recs.empty() || recs.back().global_iter != iter || static_cast<int>(recs.back().accuracy.size()) != eval_task)
        throw CsvError(where(10) + ": eval tasks out of order");
    }
    recs.back().accuracy.push_back(acc);
  }
  if (run.log.records.empty()) throw CsvError(path.string() + ": no records");
  const auto T = run.log.records.front().accuracy.size();
  for (const auto& r : run.log.records)
    if (r.accuracy.size() != T) throw CsvError(path.string() + ": iteration " + std::to_string(r.global_iter) +
                                               " has an incomplete set of eval tasks");
  run.log.task_boundaries = MetricsLog::boundaries_from(run.log.records);
  return run;
}

// ---------------------------------------------------------------------------
// Summaries

struct RunMetrics {
  std::uint64_t seed = 0;
  std::string run_id;
  double final_avg_acc = 0.0;
  std::optional<double> avg_min_acc;
  double wall_ms = 0.0;
  double projection_rate = 0.0;
};

inline RunMetrics metrics_of(const RunIdentity& id, const MetricsLog& log) {
  RunMetrics m;
  m.seed = id.seed;
  m.run_id = id.run_id;
  m.final_avg_acc = final_avg_acc(log);
  m.avg_min_acc = avg_min_acc(log);
  m.wall_ms = log.records.back().wall_ms;
  m.projection_rate = projected_fraction(log);
  return m;
}

/// {mean, sem} with sem = sample std / sqrt(n); sem is null for n < 2.
inline nlohmann::json mean_sem(const std::vector<double>& xs) {
  nlohmann::json j;
  if (xs.empty()) {
    j["mean"] = nullptr;
    j["sem"] = nullptr;
    return j;
  }
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  j["mean"] = mean;
  if (xs.size() < 2) {
    j["sem"] = nullptr;
  } else {
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    j["sem"] = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return j;
}

inline nlohmann::json build_summary(const RunIdentity& cell, std::vector<RunMetrics> runs) {
  if (runs.empty()) throw std::invalid_argument("summary: no runs");
  std::sort(runs.begin(), runs.end(), [](const RunMetrics& a, const RunMetrics& b) { return a.seed < b.seed; });
  nlohmann::json j;
  j["method"] = cell.method;
  j["objective"] = cell.objective;
  j["projector"] = cell.projector;
  j["gamma"] = cell.gamma ? nlohmann::json(*cell.gamma) : nlohmann::json(nullptr);
  j["lr"] = cell.lr;
  j["batch_size"] = cell.batch_size;
  j["n_seeds"] = runs.size();
  std::vector<double> fin, mins, wall, proj;
  j["per_seed"] = nlohmann::json::array();
  for (const auto& r : runs) {
    fin.push_back(r.final_avg_acc);
    if (r.avg_min_acc) mins.push_back(*r.avg_min_acc);
    wall.push_back(r.wall_ms);
    proj.push_back(r.projection_rate);
    j["per_seed"].push_back({{"seed", r.seed},
                             {"run_id", r.run_id},
                             {"final_avg_acc", r.final_avg_acc},
                             {"avg_min_acc", r.avg_min_acc ? nlohmann::json(*r.avg_min_acc) : nlohmann::json(nullptr)},
                             {"wall_ms", r.wall_ms},
                             {"projection_rate", r.projection_rate}});
  }
  j["final_avg_acc"] = mean_sem(fin);
  j["avg_min_acc"] = mean_sem(mins);
  j["wall_ms"] = mean_sem(wall);
  j["projection_rate"] = mean_sem(proj);
  return j;
}

/// Re-aggregate a cell from its CSV traces alone.
inline nlohmann::json summarize(const std::vector<std::filesystem::path>& csvs) {
  if (csvs.empty()) throw CsvError("summarize: no CSV files given");
  std::vector<RunMetrics> runs;
  std::optional<RunIdentity> cell;
  std::set<std::uint64_t> seeds;
  for (const auto& p : csvs) {
    const CsvRun run = read_csv(p);
    RunIdentity key = run.id;
    key.run_id.clear();
    key.seed = 0;
    if (!cell) cell = key;
    else if (!(key == *cell)) throw CsvError(p.string() + ": belongs to a different method/hyperparameter cell");
    if (!seeds.insert(run.id.seed).second) throw CsvError(p.string() + ": duplicate seed " + std::to_string(run.id.seed));
    runs.push_back(metrics_of(run.id, run.log));
  }
  return build_summary(*cell, std::move(runs));
}

struct CellOutput {
  std::string cell_id;
  std::filesystem::path summary_path;
  std::vector<std::filesystem::path> csvs;
  nlohmann::json summary;
};

/// Run the whole grid, writing <out>/<cell>/seed_<s>.csv and <out>/<cell>/summary.json.
inline std::vector<CellOutput> run_experiments(const RunConfig& c, std::ostream* progress = nullptr) {
  if (c.seeds.empty()) throw ConfigError("no seeds given");
  if (c.jobs < 1) throw ConfigError("jobs must be >= 1");
  const auto cells = expand_grid(c);
  const std::filesystem::path root(c.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + root.string() + ": " + ec.message());

  const bool shared_stream = c.benchmark == "rotated-mnist";
  std::optional<TaskStream> mnist;
  if (shared_stream) mnist = build_stream(c, 0);

  struct Job {
    std::size_t cell;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (auto s : c.seeds) jobs.push_back({i, s});

  std::vector<std::vector<RunMetrics>> metrics(cells.size());
  std::vector<std::vector<std::filesystem::path>> paths(cells.size());
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t j = next++;
      if (j >= jobs.size()) return;
      try {
        const GridCell& cell = cells[jobs[j].cell];
        TrainConfig tc = cell.train;
        tc.seed = jobs[j].seed;
        const TaskStream stream = shared_stream ? TaskStream{} : build_stream(c, jobs[j].seed);
        const TaskStream& s = shared_stream ? *mnist : stream;
        const RunIdentity id = identity_of(cell, tc.seed);
        const RunResult res = run_sequence_detailed(s, cell.method, tc);
        const auto dir = root / cell.id();
        std::filesystem::create_directories(dir);
        const auto csv = dir / ("seed_" + std::to_string(tc.seed) + ".csv");
        write_csv(csv, id, res.log);
        std::lock_guard lock(mu);
        metrics[jobs[j].cell].push_back(metrics_of(id, res.log));
        paths[jobs[j].cell].push_back(csv);
        if (progress)
          *progress << id.run_id << ": final avg-ACC " << metrics_of(id, res.log).final_avg_acc << ", train "
                    << res.log.records.back().wall_ms / 1000.0 << " s" << std::endl;
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
        return;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int i = 0; i < std::min<int>(c.jobs, static_cast<int>(jobs.size())); ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<CellOutput> out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    RunIdentity key = identity_of(cells[i], 0);
    key.run_id.clear();
    CellOutput co;
    co.cell_id = cells[i].id();
    std::sort(paths[i].begin(), paths[i].end());
    co.csvs = paths[i];
    co.summary = build_summary(key, metrics[i]);
    co.summary_path = root / co.cell_id / "summary.json";
    std::ofstream js(co.summary_path);
    if (!js) throw std::runtime_error("cannot write " + co.summary_path.string());
    js << co.summary.dump(2) << '\n';
    out.push_back(std::move(co));
  }
  return out;
}

}  // namespace stabgap
