#pragma once

// Continual training loops: objective (what is optimized) x projector (how the
// update direction is chosen), plus the DER and BiC losses.

#include <algorithm>
#include <chrono>
#include <map>
#include <numeric>
#include <span>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stabgap/core.hpp"
#include "stabgap/data.hpp"
#include "stabgap/evaluation.hpp"
#include "stabgap/nn.hpp"
#include "stabgap/projection.hpp"
#include "stabgap/replay.hpp"

namespace stabgap {

enum class Objective { Finetune, ER, Joint, DER, BiC };
enum class Projector { None, AGEM, GEM };
enum class Regime { Offline, Online };

inline std::string to_string(Objective o) {
  switch (o) {
    case Objective::Finetune: return "Finetune";
    case Objective::ER: return "ER";
    case Objective::Joint: return "Joint";
    case Objective::DER: return "DER";
    case Objective::BiC: return "BiC";
  }
  return "?";
}

inline std::string to_string(Projector p) {
  switch (p) {
    case Projector::None: return "None";
    case Projector::AGEM: return "AGEM";
    case Projector::GEM: return "GEM";
  }
  return "?";
}

inline std::string to_string(Regime r) { return r == Regime::Offline ? "offline" : "online"; }

inline Objective parse_objective(const std::string& s) {
  for (auto o : {Objective::Finetune, Objective::ER, Objective::Joint, Objective::DER, Objective::BiC})
    if (to_string(o) == s) return o;
  throw std::invalid_argument("unknown objective '" + s + "' (Finetune|ER|Joint|DER|BiC)");
}

inline Projector parse_projector(const std::string& s) {
  for (auto p : {Projector::None, Projector::AGEM, Projector::GEM})
    if (to_string(p) == s) return p;
  if (s == "A-GEM") return Projector::AGEM;
  throw std::invalid_argument("unknown projector '" + s + "' (None|AGEM|GEM)");
}

inline Regime parse_regime(const std::string& s) {
  if (s == "offline") return Regime::Offline;
  if (s == "online") return Regime::Online;
  throw std::invalid_argument("unknown regime '" + s + "' (offline|online)");
}

struct DerConfig {
  double alpha = 0.3;
};

struct BicConfig {
  double temperature = 2.0;
  std::size_t val_per_class = 10;  // 9:1 train/validation split of a 100-per-class buffer
  int bias_stage_iters = 200;
  double bias_lr = 0.1;
};

struct MethodSpec {
  Objective objective = Objective::ER;
  Projector projector = Projector::None;
  GemConfig gem{};
  DerConfig der{};
  BicConfig bic{};

  /// Conventional name: "ER", "ER+GEM", "GEM" (= Finetune+GEM), ...
  [[nodiscard]] std::string label() const {
    if (objective == Objective::Finetune && projector != Projector::None) return to_string(projector);
    if (projector == Projector::None) return to_string(objective);
    return to_string(objective) + "+" + to_string(projector);
  }

  void validate(Scenario scenario) const {
    gem.validate();
    if (objective == Objective::BiC && scenario != Scenario::ClassIL)
      throw std::invalid_argument("BiC is only defined for class-incremental streams");
    if (projector == Projector::GEM && (objective == Objective::DER || objective == Objective::BiC))
      throw std::invalid_argument(to_string(objective) + " is only combined with the A-GEM projector");
    if (objective == Objective::DER && !(der.alpha >= 0)) throw std::invalid_argument("DER alpha must be >= 0");
    if (objective == Objective::BiC && !(bic.temperature > 0))
      throw std::invalid_argument("BiC temperature must be > 0");
  }
};

struct TrainConfig {
  std::vector<int> hidden_layers{400, 400};
  int batch_size = 128;
  double learning_rate = 0.1;
  double momentum = 0.9;
  int iters_per_task = 2000;  // offline only; online runs one pass
  Regime regime = Regime::Offline;
  std::uint64_t seed = 0;
  int eval_period = 1;
  int dense_window = 50;  // evaluate every iteration this long after each task switch
  std::optional<std::size_t> buffer_capacity = 100;  // per class per task; nullopt = full replay
  std::size_t eval_set_size = 1000;

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
    if (iters_per_task < 1) throw std::invalid_argument("iters_per_task must be >= 1");
    if (eval_period < 1) throw std::invalid_argument("eval_period must be >= 1");
    if (dense_window < 0) throw std::invalid_argument("dense_window must be >= 0");
    for (int h : hidden_layers)
      if (h < 1) throw std::invalid_argument("hidden layer sizes must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// DER

/// Cross-entropy over current and replayed samples together, plus alpha times
/// the mean squared error between stored and current logits on the replay
/// samples (averaged over samples and logits). Either batch may be empty, not both.
inline LossGrad der_loss_and_grad(const ParamVector& w, const NetworkSpec& spec, const Batch& current,
                                  const Batch& replay, const Matrix& replay_logits, double alpha) {
  const Batch all = concat(current, replay);
  if (all.empty()) throw std::invalid_argument("der_loss_and_grad: empty input");
  if (!replay.empty() && (replay_logits.rows() != static_cast<Eigen::Index>(replay.size()) ||
                          replay_logits.cols() != spec.output_dim()))
    throw std::invalid_argument("der_loss_and_grad: stored logits do not match replay batch");
  const ForwardPass pass = forward(w, spec, all.inputs);
  LogitLoss ll = softmax_cross_entropy(pass.logits, all.labels);
  if (!replay.empty() && alpha != 0.0) {
    const auto nr = static_cast<Eigen::Index>(replay.size());
    const Matrix diff = pass.logits.bottomRows(nr) - replay_logits;
    // mean over every stored logit entry, as in the usual MSE
    ll.loss += alpha * diff.squaredNorm() / static_cast<double>(diff.size());
    ll.dlogits.bottomRows(nr) += (2.0 * alpha / static_cast<double>(diff.size())) * diff;
  }
  return {ll.loss, backward(w, spec, all.inputs, pass, ll.dlogits)};
}

// ---------------------------------------------------------------------------
// BiC

/// q_k = alpha*o_k + beta on classes [first_class, end_class); other logits untouched.
struct BiasCorrection {
  int first_class = 0;
  int end_class = 0;
  double alpha = 1.0;
  double beta = 0.0;

  void apply(Matrix& logits) const {
    if (end_class <= first_class) return;
    auto block = logits.middleCols(first_class, end_class - first_class);
    block = (alpha * block.array() + beta).matrix();
  }
};

/// Balancing scalar n / (n + m) between distillation and classification.
inline double bic_balance(int n_old, int n_new) {
  if (n_old < 0 || n_new < 1) throw std::invalid_argument("bic_balance: need n >= 0 and m >= 1");
  return static_cast<double>(n_old) / static_cast<double>(n_old + n_new);
}

struct BicDistillArgs {
  int n_old = 0;
  int n_new = 0;
  double temperature = 2.0;
  BiasCorrection old_correction{};
};

/// lambda * L_d + (1 - lambda) * L_c on logits, both as means over the batch.
/// L_c uses a softmax over the n + m seen classes; L_d compares temperature
/// softened distributions over the n old classes.
inline LogitLoss bic_logit_loss(const Matrix& logits, const Matrix& old_logits, std::span<const int> labels,
                                const BicDistillArgs& a) {
  const double lambda = bic_balance(a.n_old, a.n_new);
  const int seen = a.n_old + a.n_new;
  if (seen > logits.cols()) throw std::invalid_argument("bic: more seen classes than outputs");
  LogitLoss out = softmax_cross_entropy(logits, labels, seen, 1.0 - lambda);
  if (a.n_old == 0 || lambda == 0.0) return out;
  const auto n = logits.rows();
  const double T = a.temperature;
  Matrix old = old_logits;
  a.old_correction.apply(old);
  const Matrix p_old = softmax(old / T, a.n_old);
  const Matrix p_new = softmax(logits / T, a.n_old);
  double ld = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (int k = 0; k < a.n_old; ++k)
      if (p_old(i, k) > 0.0) ld -= p_old(i, k) * std::log(p_new(i, k));
  out.loss += lambda * ld / static_cast<double>(n);
  out.dlogits.leftCols(a.n_old) +=
      (lambda / (T * static_cast<double>(n))) * (p_new.leftCols(a.n_old) - p_old.leftCols(a.n_old));
  return out;
}

inline LossGrad bic_distill_loss(const ParamVector& w, const ParamVector& old_w, const NetworkSpec& spec,
                                 const Batch& batch, const BicDistillArgs& args) {
  if (batch.empty()) throw std::invalid_argument("bic_distill_loss: empty batch");
  const ForwardPass pass = forward(w, spec, batch.inputs);
  Matrix old_logits;
  if (args.n_old > 0) old_logits = forward_logits(old_w, spec, batch.inputs);
  LogitLoss ll = bic_logit_loss(pass.logits, old_logits, batch.labels, args);
  return {ll.loss, backward(w, spec, batch.inputs, pass, ll.dlogits)};
}

/// Mean bias-stage loss -log softmax(q)[y] over the seen classes, and its
/// gradient w.r.t. (alpha, beta).
struct BiasStageLoss {
  double loss = 0.0;
  double d_alpha = 0.0;
  double d_beta = 0.0;
};

inline BiasStageLoss bias_stage_loss(const Matrix& logits, std::span<const int> labels, const BiasCorrection& bc,
                                     int seen) {
  Matrix q = logits;
  bc.apply(q);
  const LogitLoss ll = softmax_cross_entropy(q, labels, seen);
  BiasStageLoss out{ll.loss, 0.0, 0.0};
  const int width = bc.end_class - bc.first_class;
  if (width > 0) {
    const auto dq = ll.dlogits.middleCols(bc.first_class, width);
    out.d_alpha = (dq.array() * logits.middleCols(bc.first_class, width).array()).sum();
    out.d_beta = dq.sum();
  }
  return out;
}

/// Fit (alpha, beta) on held-out data with the network frozen.
inline BiasCorrection bic_train_bias_stage(const ParamVector& w, const NetworkSpec& spec, const Batch& val,
                                           BiasCorrection init, int seen_classes, const BicConfig& cfg) {
  if (val.empty()) throw std::invalid_argument("bic_train_bias_stage: empty validation split");
  const Matrix logits = forward_logits(w, spec, val);
  BiasCorrection bc = init;
  for (int it = 0; it < cfg.bias_stage_iters; ++it) {
    const auto l = bias_stage_loss(logits, val.labels, bc, seen_classes);
    bc.alpha -= cfg.bias_lr * l.d_alpha;
    bc.beta -= cfg.bias_lr * l.d_beta;
  }
  return bc;
}

// ---------------------------------------------------------------------------
// Training loop

struct LearnerStats {
  std::size_t iterations = 0;
  std::size_t projections = 0;
  std::size_t degenerate_refs = 0;
  std::size_t max_sample_visits = 0;  // highest number of times any current-task sample was drawn
};

struct StepOutcome {
  bool projected = false;
  bool degenerate_ref = false;
  double gjoint_dot_gold = 0.0;  // only meaningful when a replay gradient exists
  bool has_replay_gradient = false;
};

class ContinualLearner {
 public:
  ContinualLearner(const NetworkSpec& spec, MethodSpec method, TrainConfig cfg, Scenario scenario = Scenario::DomainIL)
      : spec_(spec),
        method_(method),
        cfg_(std::move(cfg)),
        scenario_(scenario),
        w_(init_network(spec, cfg_.seed)),
        opt_(OptimizerState::zeros(spec, cfg_.learning_rate, cfg_.momentum)),
        data_rng_(make_rng(cfg_.seed, 0xda7a)),
        replay_rng_(make_rng(cfg_.seed, 0x7e91)),
        buffer_rng_(make_rng(cfg_.seed, 0xb0ff)) {
    spec_.validate();
    cfg_.validate();
    method_.validate(scenario_);
    MemoryBuffer::Options opts;
    opts.capacity_per_class = method_.objective == Objective::Joint ? std::nullopt : cfg_.buffer_capacity;
    if (method_.objective == Objective::BiC) {
      if (!opts.capacity_per_class) throw std::invalid_argument("BiC needs a bounded buffer");
      opts.holdout_per_class = method_.bic.val_per_class;
    }
    buffer_ = MemoryBuffer(opts);
  }

  [[nodiscard]] const ParamVector& weights() const { return w_; }
  [[nodiscard]] const NetworkSpec& spec() const { return spec_; }
  [[nodiscard]] const MemoryBuffer& buffer() const { return buffer_; }
  [[nodiscard]] const LearnerStats& stats() const { return stats_; }
  [[nodiscard]] const MethodSpec& method() const { return method_; }
  [[nodiscard]] int tasks_done() const { return tasks_done_; }
  [[nodiscard]] long global_iter() const { return global_iter_; }
  [[nodiscard]] const BiasCorrection& bias_correction() const { return correction_; }

  /// Logit transform used at evaluation (BiC correction; identity otherwise).
  [[nodiscard]] LogitTransform eval_transform() const {
    if (method_.objective != Objective::BiC) return {};
    return [bc = correction_](Matrix& logits) { bc.apply(logits); };
  }

  /// Train one task, appending continual-evaluation records to `log`.
  void train_task(const Task& task, const EvalSets& eval, MetricsLog& log) {
    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    const int t = tasks_done_ + 1;
    DatasetPtr train = task.train;
    Batch holdout;

    if (method_.objective == Objective::BiC) begin_bic_task(task, train, holdout);

    const std::size_t N = train->size();
    if (N == 0) throw std::invalid_argument("train_task: empty training set");
    const auto b = static_cast<std::size_t>(cfg_.batch_size);
    const long iters = cfg_.regime == Regime::Online ? static_cast<long>((N + b - 1) / b) : cfg_.iters_per_task;

    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), data_rng_);
    std::size_t cursor = 0;
    std::vector<std::uint32_t> visits(N, 0);
    wall_ms_ += std::chrono::duration<double, std::milli>(clock::now() - t0).count();

    for (long i = 1; i <= iters; ++i) {
      t0 = clock::now();
      std::vector<std::size_t> rows;
      rows.reserve(b);
      while (rows.size() < b) {
        if (cursor == N) {
          if (cfg_.regime == Regime::Online) break;
          std::shuffle(order.begin(), order.end(), data_rng_);
          cursor = 0;
        }
        rows.push_back(order[cursor++]);
      }
      for (auto r : rows) ++visits[r];
      const Batch current = gather(*train, rows);
      const StepOutcome out = step(current, t);
      ++global_iter_;
      ++stats_.iterations;
      stats_.projections += out.projected ? 1 : 0;
      stats_.degenerate_refs += out.degenerate_ref ? 1 : 0;
      wall_ms_ += std::chrono::duration<double, std::milli>(clock::now() - t0).count();

      if (i <= cfg_.dense_window || global_iter_ % cfg_.eval_period == 0 || i == iters) {
        MetricsRecord rec;
        rec.global_iter = global_iter_;
        rec.training_task = tasks_done_;
        rec.accuracy = continual_eval(w_, spec_, eval, eval_transform());
        rec.projected = out.projected;
        rec.degenerate_ref = out.degenerate_ref;
        rec.wall_ms = wall_ms_;
        log.records.push_back(std::move(rec));
      }
    }
    for (auto v : visits) stats_.max_sample_visits = std::max<std::size_t>(stats_.max_sample_visits, v);

    t0 = clock::now();
    if (method_.objective == Objective::BiC && t >= 2) end_bic_task(task, holdout);
    LogitFn snapshot;
    if (method_.objective == Objective::DER)
      snapshot = [this](const Matrix& x) { return forward_logits(w_, spec_, x); };
    buffer_.update(tasks_done_, train, buffer_rng_, snapshot);
    wall_ms_ += std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    // the final record of the task carries the buffer-update time as well
    if (!log.records.empty() && log.records.back().global_iter == global_iter_) log.records.back().wall_ms = wall_ms_;

    log.task_boundaries.push_back(global_iter_);
    if (method_.objective == Objective::BiC) seen_classes_ = n_old_classes_ + n_new_classes_;
    ++tasks_done_;
  }

  /// One parameter update on `current` while training task t (1-based).
  StepOutcome step(const Batch& current, int t) {
    StepOutcome out;
    const auto b = static_cast<std::size_t>(cfg_.batch_size);
    const bool have_past = !buffer_.empty();
    const auto [w_new, w_old] = joint_mix_weights(t);

    ParamVector g_joint;
    std::optional<ParamVector> g_old;
    std::optional<ReferenceGradients> gem_refs;

    auto grad_of = [&](const Batch& batch) { return ce_loss_and_grad(w_, spec_, batch).grad; };

    // Per-task reference gradients, shared by GEM and full replay.
    std::vector<Batch> ref_batches;
    const bool need_refs = have_past && (method_.projector == Projector::GEM || method_.objective == Objective::Joint);
    if (need_refs) {
      ref_batches = buffer_.sample_per_task_refs(b, replay_rng_);
      ReferenceGradients G(static_cast<Eigen::Index>(ref_batches.size()), w_.size());
      for (std::size_t k = 0; k < ref_batches.size(); ++k)
        G.rows.row(static_cast<Eigen::Index>(k)) = grad_of(ref_batches[k]).transpose();
      gem_refs = std::move(G);
    }

    switch (method_.objective) {
      case Objective::Finetune: {
        g_joint = grad_of(current);
        if (have_past && method_.projector == Projector::AGEM) g_old = grad_of(buffer_.sample_uniform(b, replay_rng_).batch);
        break;
      }
      case Objective::ER: {
        g_joint = grad_of(current);
        if (have_past) {
          const Batch replay = method_.projector == Projector::GEM ? subsample_replay_batch(ref_batches, b, replay_rng_)
                                                                   : buffer_.sample_uniform(b, replay_rng_).batch;
          g_old = grad_of(replay);
        }
        break;
      }
      case Objective::Joint: {
        g_joint = grad_of(current);
        if (have_past) g_old = gem_refs->rows.colwise().mean().transpose();
        break;
      }
      case Objective::DER: {
        g_joint = grad_of(current);
        if (have_past) {
          const ReplayDraw draw = buffer_.sample_uniform(b, replay_rng_);
          g_old = der_loss_and_grad(w_, spec_, Batch{}, draw.batch, draw.stored_logits, method_.der.alpha).grad;
        }
        break;
      }
      case Objective::BiC: {
        const BicDistillArgs args = bic_args();
        g_joint = bic_distill_loss(w_, old_w_, spec_, current, args).grad;
        if (have_past) {
          const Batch replay = buffer_.sample_uniform(b, replay_rng_).batch;
          ParamVector g_rep = bic_distill_loss(w_, old_w_, spec_, replay, args).grad;
          // mean over current and replay samples together
          const double nc = static_cast<double>(current.size());
          const double nr = static_cast<double>(replay.size());
          g_joint = (nc * g_joint + nr * g_rep) / (nc + nr);
          g_old = std::move(g_rep);
        }
        break;
      }
    }

    if (g_old && method_.objective != Objective::Finetune && method_.objective != Objective::BiC)
      g_joint = w_new * g_joint + w_old * *g_old;

    if (g_old) {
      out.has_replay_gradient = true;
      out.gjoint_dot_gold = g_joint.dot(*g_old);
    }

    ParamVector g_bar;
    if (method_.projector == Projector::AGEM && g_old) {
      ProjectionOutcome p = project_agem(g_joint, *g_old);
      out.projected = p.projected;
      out.degenerate_ref = p.degenerate_ref;
      g_bar = std::move(p.g_bar);
    } else if (method_.projector == Projector::GEM && gem_refs) {
      ProjectionOutcome p = project_gem(g_joint, *gem_refs, method_.gem);
      out.projected = p.projected;
      out.degenerate_ref = p.degenerate_ref;
      g_bar = std::move(p.g_bar);
    } else {
      g_bar = std::move(g_joint);
    }

    if (!g_bar.allFinite())
      throw std::runtime_error("non-finite gradient at iteration " + std::to_string(global_iter_ + 1));
    sgd_momentum_step(w_, opt_, g_bar);
    return out;
  }

  [[nodiscard]] double wall_ms() const { return wall_ms_; }

 private:
  [[nodiscard]] BicDistillArgs bic_args() const {
    return {n_old_classes_, n_new_classes_, method_.bic.temperature, old_correction_};
  }

  void begin_bic_task(const Task& task, DatasetPtr& train, Batch& holdout) {
    if (task.classes.empty()) throw std::invalid_argument("BiC: task lists no classes");
    const int first = *std::min_element(task.classes.begin(), task.classes.end());
    const int last = *std::max_element(task.classes.begin(), task.classes.end());
    if (first != seen_classes_ || last - first + 1 != static_cast<int>(task.classes.size()))
      throw std::invalid_argument("BiC: task classes must be consecutive and follow the previous tasks");
    n_old_classes_ = seen_classes_;
    n_new_classes_ = static_cast<int>(task.classes.size());
    old_w_ = w_;
    old_correction_ = correction_;
    if (tasks_done_ == 0) return;

    // hold out a class-balanced validation slice of the new data
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < train->size(); ++i) by_class[train->labels[i]].push_back(i);
    std::vector<std::size_t> keep;
    std::vector<std::size_t> held;
    for (auto& [cls, idx] : by_class) {
      std::shuffle(idx.begin(), idx.end(), buffer_rng_);
      const std::size_t h = std::min(method_.bic.val_per_class, idx.size() > 1 ? idx.size() - 1 : 0);
      held.insert(held.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(h));
      keep.insert(keep.end(), idx.begin() + static_cast<std::ptrdiff_t>(h), idx.end());
    }
    std::sort(keep.begin(), keep.end());
    std::sort(held.begin(), held.end());
    holdout = gather(*train, held);
    Batch kept = gather(*train, keep);
    train = std::make_shared<Dataset>(Dataset{std::move(kept.inputs), std::move(kept.labels)});
  }

  void end_bic_task(const Task&, const Batch& holdout) {
    const Batch val = concat(buffer_.holdout_batch(), holdout);
    BiasCorrection init{n_old_classes_, n_old_classes_ + n_new_classes_, 1.0, 0.0};
    correction_ = bic_train_bias_stage(w_, spec_, val, init, n_old_classes_ + n_new_classes_, method_.bic);
  }

  NetworkSpec spec_;
  MethodSpec method_;
  TrainConfig cfg_;
  Scenario scenario_;
  ParamVector w_;
  OptimizerState opt_;
  MemoryBuffer buffer_;
  Rng data_rng_;
  Rng replay_rng_;
  Rng buffer_rng_;
  LearnerStats stats_;
  int tasks_done_ = 0;
  long global_iter_ = 0;
  double wall_ms_ = 0.0;

  // BiC state
  ParamVector old_w_;
  BiasCorrection correction_{};
  BiasCorrection old_correction_{};
  int seen_classes_ = 0;
  int n_old_classes_ = 0;
  int n_new_classes_ = 0;
};

struct RunResult {
  MetricsLog log;
  ParamVector final_weights;
  LearnerStats stats;
  BiasCorrection bias_correction{};
};

inline NetworkSpec network_for(const TaskStream& stream, const TrainConfig& cfg) {
  NetworkSpec spec;
  spec.layer_sizes.push_back(stream.input_dim());
  for (int h : cfg.hidden_layers) spec.layer_sizes.push_back(h);
  spec.layer_sizes.push_back(stream.num_classes);
  return spec;
}

/// Train every task of the stream in order with continual evaluation.
inline RunResult run_sequence_detailed(const TaskStream& stream, const MethodSpec& method, const TrainConfig& cfg) {
  if (stream.tasks.empty()) throw std::invalid_argument("run_sequence: empty stream");
  const NetworkSpec spec = network_for(stream, cfg);
  ContinualLearner learner(spec, method, cfg, stream.scenario);
  const EvalSets eval = build_eval_sets(stream.test_splits(), cfg.eval_set_size, cfg.seed);
  RunResult out;
  for (const auto& task : stream.tasks) {
    learner.train_task(task, eval, out.log);
  }
  out.final_weights = learner.weights();
  out.stats = learner.stats();
  out.bias_correction = learner.bias_correction();
  return out;
}

inline MetricsLog run_sequence(const TaskStream& stream, const MethodSpec& method, const TrainConfig& cfg) {
  return run_sequence_detailed(stream, method, cfg).log;
}

}  // namespace stabgap
