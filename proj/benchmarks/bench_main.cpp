#include <benchmark/benchmark.h>

#include <vector>

#include "feedflow/controller.hpp"
#include "feedflow/gfn/decision_tree.hpp"
#include "feedflow/gfn/flow_model.hpp"
#include "feedflow/gfn/policy.hpp"
#include "feedflow/rng.hpp"
#include "feedflow/sim.hpp"

using namespace feedflow;

namespace {

Video video(std::string id, std::size_t chunks) {
  Video v{std::move(id), 2.0, {}};
  for (std::size_t c = 0; c < chunks; ++c) v.chunk_sizes.push_back({125000, 250000, 375000, 625000});
  return v;
}

struct Session {
  NetworkTrace trace = NetworkTrace::constant(2.0);
  RecommendationQueue queue;
  UserTrace user;
  SimConfig config;

  Session() {
    for (int v = 0; v < 20; ++v) {
      queue.videos.push_back(video("v" + std::to_string(v), 10));
      user.watch_durations.push_back(v % 3 == 0 ? 3.0 : 15.0);
    }
  }
  SessionEnv env() const { return {trace, queue, user, config}; }
};

void BM_SimEpisode(benchmark::State& st) {
  const Session s;
  const auto env = s.env();
  for (auto _ : st) {
    auto state = initial_state(env);
    std::size_t steps = 0;
    while (!state.finished) {
      const auto& buf = state.buffers[state.current_video];
      const CompositeAction a = buf.size() < s.queue[state.current_video].chunk_count()
                                    ? CompositeAction{Download{state.current_video, 1}}
                                    : CompositeAction{Pause{0.5}};
      step(state, a, env);
      ++steps;
    }
    benchmark::DoNotOptimize(state.downloaded_bytes);
    st.counters["steps"] = static_cast<double>(steps);
  }
}
BENCHMARK(BM_SimEpisode);

void BM_MlpForward(benchmark::State& st) {
  const ControllerConfig config;
  const std::vector<std::size_t> hidden{64, 64};
  const gfn::FlowModel model(controller_architecture(config, hidden), 1);
  std::vector<double> x(model.architecture().input_dim(), 0.3);
  for (auto _ : st) benchmark::DoNotOptimize(model.forward(x));
}
BENCHMARK(BM_MlpForward);

void BM_MlpForwardBackward(benchmark::State& st) {
  const ControllerConfig config;
  const std::vector<std::size_t> hidden{64, 64};
  const gfn::FlowModel model(controller_architecture(config, hidden), 1);
  std::vector<double> x(model.architecture().input_dim(), 0.3);
  std::vector<double> d(model.architecture().output_dim(), 0.01);
  auto grad = model.zero_gradient();
  gfn::FlowModel::Cache cache;
  for (auto _ : st) {
    model.forward(x, &cache);
    model.backward(cache, d, grad.params);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_MlpForwardBackward);

void BM_SampleCandidates(benchmark::State& st) {
  const Session s;
  const auto state = initial_state(s.env());
  const auto at = gfn::build_action_tree(state, s.queue, s.config, 4);
  std::vector<double> lf(gfn::make_layout(s.config, 4).output_dim());
  Rng init(3);
  for (auto& v : lf) v = init.uniform(-1.0, 1.0);
  Rng rng(7);
  for (auto _ : st) {
    benchmark::DoNotOptimize(gfn::sample_candidates(at.tree, lf, static_cast<std::size_t>(st.range(0)), rng));
  }
}
BENCHMARK(BM_SampleCandidates)->Arg(1)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
