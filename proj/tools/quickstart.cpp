// Train ER and ER+GEM on a small synthetic domain-incremental stream and
// print the per-task accuracy right after the first task switch.

#include <cstdio>

#include "stabgap/stabgap.hpp"

int main() {
  using namespace stabgap;

  SyntheticConfig data;
  data.scenario = Scenario::DomainIL;
  data.num_tasks = 3;
  data.seed = 7;
  const TaskStream stream = build_synthetic_stream(data);

  TrainConfig train;
  train.hidden_layers = {32, 32};
  train.batch_size = 32;
  train.iters_per_task = 300;
  train.buffer_capacity = 20;
  train.seed = 1;

  for (Projector p : {Projector::None, Projector::GEM}) {
    MethodSpec method;
    method.objective = Objective::ER;
    method.projector = p;
    const MetricsLog log = run_sequence(stream, method, train);
    std::printf("%-7s final avg-ACC %.3f  avg-min-ACC %.3f\n", method.label().c_str(), final_avg_acc(log),
                avg_min_acc(log).value_or(0.0));
  }
}
