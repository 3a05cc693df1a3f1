// Times the objective/gradient evaluator with the serial and the OpenMP
// kernels on a generated corpus. The two must agree bit for bit; this tool
// reports what the parallel path buys on top of that guarantee.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "banppa/model.hpp"
#include "banppa/optimize.hpp"
#include "banppa/parallel.hpp"
#include "banppa/synthgen.hpp"

using namespace banppa;

namespace {

double median_ms(std::vector<double>& samples) {
  std::sort(samples.begin(), samples.end());
  return samples[samples.size() / 2];
}

double time_eval(const ModelState& state, const Dataset& ds, GradRequest req,
                 parallel::Exec exec, int reps) {
  const AugLagMultipliers mult = AugLagMultipliers::initial(
      state.components(), static_cast<double>(ds.total_events()) / ds.size());
  std::vector<double> samples;
  double sink = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    const Evaluation eval = evaluate_model(state, &mult, ds, default_gtable(), req, exec);
    const auto t1 = std::chrono::steady_clock::now();
    sink += eval.objective;
    samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::printf("  (objective sum %.3f)\r", sink);  // keep the evals observable
  return median_ms(samples);
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 9;
  if (argc > 1) reps = std::max(3, std::atoi(argv[1]));

  SynthSpec spec = SynthSpec::preset('B', 42);
  const auto [data, truth] = generate(spec);

  FitConfig cfg;
  cfg.components = 14;
  cfg.pseudo_count = 24;
  cfg.seed = 7;
  const ModelState state = initialize_state(data, cfg);

  std::printf("corpus: %d sequences, %ld events, K=%d, M=%d, %d hardware threads\n",
              static_cast<int>(data.size()), static_cast<long>(data.total_events()),
              cfg.components, cfg.pseudo_count, parallel::hardware_threads());

  struct Case {
    const char* name;
    GradRequest req;
  };
  const Case cases[] = {
      {"objective only", GradRequest::none()},
      {"allocation gradients", GradRequest{false, true}},
      {"gp gradients", GradRequest{true, false}},
      {"all gradients", GradRequest::all()},
  };

  std::printf("%-22s %12s %12s %9s\n", "pass", "serial ms", "openmp ms", "speedup");
  for (const auto& c : cases) {
    const double serial = time_eval(state, data, c.req, parallel::Exec::serial, reps);
    const double openmp = time_eval(state, data, c.req, parallel::Exec::openmp, reps);
    std::printf("%-22s %12.3f %12.3f %8.2fx\n", c.name, serial, openmp, serial / openmp);
  }
  return 0;
}
