#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace banppa::cli {

struct SimulateArgs {
  std::string variant = "A";
  std::uint64_t seed = 0;
  std::string out;
  bool split = false;          // also write <out>.train / <out>.test
  std::uint64_t split_seed = 0;
};
int cmd_simulate(const SimulateArgs& args);

struct FitArgs {
  std::string data;
  std::string out;
  std::string config_file;     // optional JSON; its values override the flags
  std::string variant = "banppa";
  int components = 14;
  int pseudo_count = 18;
  std::uint64_t seed = 0;
  double inner_tol = 1e-3;
  double outer_tol = 1e-3;
  int max_outer = 15;
  int max_sweeps = 60;
  int max_block_iters = 100;
  double fix_alpha = 0.0;        // nonzero: freeze the concentration at this value
  double fix_lengthscale = 0.0;  // nonzero: freeze kernel widths at this value
  double gamma_scale = 1.0;
  bool serial = false;           // force the serial kernels
};
int cmd_fit(const FitArgs& args);

struct EvaluateArgs {
  std::string fit;
  std::string test;
  std::string train;           // optional
  std::string out_dir;
  int samples = 100;
  int grid = 200;
  double threshold = 0.01;
  std::uint64_t seed = 0;
};
int cmd_evaluate(const EvaluateArgs& args);

struct CompareArgs {
  std::vector<std::string> fits;  // >= 2, all over the same training split
  std::string test;
  std::string out;             // optional CSV path; the table always prints
  int samples = 100;
  std::uint64_t seed = 0;
};
int cmd_compare(const CompareArgs& args);

struct GTableArgs {
  std::string out;
};
int cmd_gtable(const GTableArgs& args);

// Maps exceptions to the documented exit codes: 2 for data and contract
// problems, 3 for numerical failures. Usage errors exit 1 at the parser.
int run_guarded(const std::function<int()>& body);

}  // namespace banppa::cli
