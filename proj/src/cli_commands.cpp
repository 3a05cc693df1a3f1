#include "banppa/cli_commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "banppa/errors.hpp"
#include "banppa/evaluate.hpp"
#include "banppa/gtable.hpp"
#include "banppa/io_util.hpp"
#include "banppa/optimize.hpp"
#include "banppa/parallel.hpp"
#include "banppa/serialize.hpp"
#include "banppa/synthgen.hpp"

namespace banppa::cli {

namespace {

void apply_config_file(FitConfig& cfg, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  try {
    if (j.contains("variant")) cfg.variant = parse_variant(j["variant"].get<std::string>());
    if (j.contains("components")) cfg.components = j["components"].get<int>();
    if (j.contains("pseudo_count")) cfg.pseudo_count = j["pseudo_count"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("inner_tol")) cfg.inner_tol = j["inner_tol"].get<double>();
    if (j.contains("outer_tol")) cfg.outer_tol = j["outer_tol"].get<double>();
    if (j.contains("max_outer")) cfg.max_outer = j["max_outer"].get<int>();
    if (j.contains("max_sweeps")) cfg.max_sweeps = j["max_sweeps"].get<int>();
    if (j.contains("max_block_iters")) cfg.max_block_iters = j["max_block_iters"].get<int>();
    if (j.contains("lbfgs_memory")) cfg.lbfgs_memory = j["lbfgs_memory"].get<int>();
    if (j.contains("positivity_floor")) {
      cfg.positivity_floor = j["positivity_floor"].get<double>();
    }
    if (j.contains("learn_alpha")) cfg.learn_alpha = j["learn_alpha"].get<bool>();
    if (j.contains("alpha0")) cfg.alpha0 = j["alpha0"].get<double>();
    if (j.contains("gamma_scale")) cfg.gamma_scale = j["gamma_scale"].get<double>();
    if (j.contains("lengthscale0")) cfg.lengthscale0 = j["lengthscale0"].get<double>();
    if (j.contains("learn_lengthscale")) {
      cfg.learn_lengthscale = j["learn_lengthscale"].get<bool>();
    }
    if (j.contains("multiplier_growth")) {
      cfg.multiplier_growth = j["multiplier_growth"].get<double>();
    }
    if (j.contains("multiplier_clip")) {
      cfg.multiplier_clip = j["multiplier_clip"].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

double read_meta_wall_seconds(const std::string& meta_path) {
  std::ifstream in(meta_path, std::ios::binary);
  if (!in) return -1.0;
  try {
    const auto j = nlohmann::json::parse(in);
    return j.value("wall_seconds", -1.0);
  } catch (const nlohmann::json::exception&) {
    return -1.0;
  }
}

double top_mass(const Eigen::VectorXd& ner, int top) {
  std::vector<double> values(ner.data(), ner.data() + ner.size());
  std::sort(values.begin(), values.end(), std::greater<double>());
  const std::size_t take = std::min<std::size_t>(values.size(), static_cast<std::size_t>(top));
  double total = 0.0;
  for (std::size_t i = 0; i < take; ++i) total += values[i];
  return total;
}

}  // namespace

int cmd_simulate(const SimulateArgs& args) {
  SynthSpec spec = SynthSpec::preset(args.variant.at(0), args.seed);
  auto [data, truth] = generate(spec);
  save_dataset(data, args.out);
  save_ground_truth(spec, truth, args.out + ".truth.json");
  std::printf("wrote %s: %d sequences, %ld events, window [%s, %s]\n", args.out.c_str(),
              static_cast<int>(data.sequences.size()),
              static_cast<long>(data.total_events()),
              to_exact_string(data.window.start).c_str(),
              to_exact_string(data.window.end).c_str());
  if (args.split) {
    Rng rng = make_rng(args.split_seed);
    auto [train, test] = split_train_test(data, rng);
    save_dataset(train, args.out + ".train");
    save_dataset(test, args.out + ".test");
    std::printf("split: %ld train events, %ld test events\n",
                static_cast<long>(train.total_events()),
                static_cast<long>(test.total_events()));
  }
  return 0;
}

int cmd_fit(const FitArgs& args) {
  if (args.serial) parallel::set_default_exec(parallel::Exec::serial);
  const Dataset train = load_dataset(args.data);

  FitConfig cfg;
  cfg.variant = parse_variant(args.variant);
  cfg.components = args.components;
  cfg.pseudo_count = args.pseudo_count;
  cfg.seed = args.seed;
  cfg.inner_tol = args.inner_tol;
  cfg.outer_tol = args.outer_tol;
  cfg.max_outer = args.max_outer;
  cfg.max_sweeps = args.max_sweeps;
  cfg.max_block_iters = args.max_block_iters;
  cfg.gamma_scale = args.gamma_scale;
  if (args.fix_alpha != 0.0) {
    cfg.learn_alpha = false;
    cfg.alpha0 = args.fix_alpha;
  }
  if (args.fix_lengthscale != 0.0) {
    cfg.learn_lengthscale = false;
    cfg.lengthscale0 = args.fix_lengthscale;
  }
  if (!args.config_file.empty()) apply_config_file(cfg, args.config_file);

  FitResult fit = outer_loop(train, cfg);
  save_fit(fit, dataset_checksum(train), args.out);
  save_trace_csv(fit, args.out + ".trace.csv");
  if (cfg.variant == Variant::banppa) save_residuals_csv(fit, args.out + ".residuals.csv");

  const double objective =
      fit.objective_trace.empty() ? 0.0 : fit.objective_trace.back();
  std::printf("fit %s: %s, objective %.6f, %d outer, %ld accepted steps, %.2fs\n",
              variant_name(cfg.variant).c_str(), fit.termination.c_str(), objective,
              fit.outer_iterations, fit.accepted_steps, fit.wall_seconds);
  if (fit.termination != "converged") {
    std::fprintf(stderr, "banppa: fit stopped at the iteration cap; artifacts are usable\n");
  }
  return 0;
}

int cmd_evaluate(const EvaluateArgs& args) {
  LoadedFit loaded = load_fit(args.fit);
  const Dataset test = load_dataset(args.test);
  Dataset train;
  const bool has_train = !args.train.empty();
  if (has_train) train = load_dataset(args.train);

  EvalOptions opts;
  opts.samples = args.samples;
  opts.intensity_grid = args.grid;
  opts.active_threshold = args.threshold;
  opts.seed = args.seed;
  const EvalReport report =
      build_report(loaded.fit.state, has_train ? &train : nullptr, test, opts);
  save_report(report, loaded.fit.state, loaded.fit.config.hash(), args.out_dir);

  std::printf("test likelihood: point %.6f, sampled %.6f (se %.6f, L=%d)\n",
              report.test_likelihood_point, report.test_likelihood_sampled,
              report.test_likelihood_se, report.samples);
  if (report.has_train) std::printf("train likelihood: point %.6f\n", report.train_likelihood_point);
  std::printf("active components (ner >= %s): %d of %d\n",
              to_exact_string(report.active_threshold).c_str(), report.active_components,
              static_cast<int>(report.ner.size()));
  return 0;
}

int cmd_compare(const CompareArgs& args) {
  if (args.fits.size() < 2) throw std::invalid_argument("compare needs at least two fits");
  const Dataset test = load_dataset(args.test);

  struct Row {
    std::string variant;
    int components = 0;
    std::string config_hash;
    double point = 0.0, sampled = 0.0, se = 0.0, top = 0.0;
    int active = 0;
    double wall = -1.0;
  };
  std::vector<Row> rows;
  std::uint64_t split_checksum = 0;
  bool first = true;
  for (const auto& path : args.fits) {
    LoadedFit loaded = load_fit(path);
    if (first) {
      split_checksum = loaded.train_checksum;
      first = false;
    } else if (loaded.train_checksum != split_checksum) {
      throw DataError(path + ": fit was trained on a different split");
    }
    Row row;
    row.variant = variant_name(loaded.fit.config.variant);
    row.components = loaded.fit.state.components();
    row.config_hash = hash_hex(loaded.fit.config.hash());
    row.point = test_likelihood_point(loaded.fit.state, test);
    Rng rng = derive_rng(args.seed, loaded.fit.config.hash());
    row.sampled =
        test_likelihood_sampled(loaded.fit.state, test, args.samples, rng, &row.se);
    const Eigen::VectorXd ner = normalized_usage(loaded.fit.state);
    row.top = top_mass(ner, 4);
    for (Eigen::Index k = 0; k < ner.size(); ++k) {
      if (ner[k] >= 0.01) ++row.active;
    }
    row.wall = read_meta_wall_seconds(path + ".meta.json");
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.variant, a.components, a.config_hash) <
           std::tie(b.variant, b.components, b.config_hash);
  });

  std::printf("%-10s %4s %14s %14s %10s %8s %7s %9s\n", "variant", "K", "test-point",
              "test-sampled", "se", "top4-ner", "active", "wall-s");
  for (const auto& r : rows) {
    std::printf("%-10s %4d %14.4f %14.4f %10.4f %8.4f %7d ", r.variant.c_str(), r.components,
                r.point, r.sampled, r.se, r.top, r.active);
    if (r.wall >= 0.0) {
      std::printf("%9.2f\n", r.wall);
    } else {
      std::printf("%9s\n", "-");
    }
  }

  if (!args.out.empty()) {
    std::string text =
        "variant,components,test_likelihood_point,test_likelihood_sampled,"
        "test_likelihood_se,ner_top_mass,active_components,wall_seconds\n";
    for (const auto& r : rows) {
      text += r.variant;
      text += ',' + std::to_string(r.components);
      text += ',' + to_exact_string(r.point);
      text += ',' + to_exact_string(r.sampled);
      text += ',' + to_exact_string(r.se);
      text += ',' + to_exact_string(r.top);
      text += ',' + std::to_string(r.active);
      text += ',';
      text += (r.wall >= 0.0) ? to_exact_string(r.wall) : "";
      text += '\n';
    }
    std::ofstream out(args.out, std::ios::binary);
    out << text;
    if (!out) throw DataError("cannot write " + args.out);
  }
  return 0;
}

int cmd_gtable(const GTableArgs& args) {
  const GTable table = GTable::build();
  table.save(args.out);
  std::printf("wrote %s\n", args.out.c_str());
  return 0;
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "banppa: numerical failure: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "banppa: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "banppa: %s\n", e.what());
    return 2;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "banppa: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "banppa: %s\n", e.what());
    return 3;
  }
}

}  // namespace banppa::cli
