#include "banppa/serialize.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "banppa/errors.hpp"
#include "banppa/io_util.hpp"

namespace banppa {

namespace {

using nlohmann::json;

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index at = 0;
  for (const auto& x : j) v[at++] = x.get<double>();
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return {};
  const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw DataError("ragged matrix in artifact");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c));
  }
  return m;
}

// Lower triangle stored as ragged rows; keeps the artifact free of the
// structural zeros above the diagonal.
json lower_to_json(const Eigen::MatrixXd& chol) {
  json out = json::array();
  for (Eigen::Index i = 0; i < chol.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j <= i; ++j) row.push_back(chol(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::MatrixXd lower_from_json(const json& j) {
  const Eigen::Index m = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != i + 1) {
      throw DataError("malformed cholesky rows in artifact");
    }
    for (Eigen::Index c = 0; c <= i; ++c) chol(i, c) = row.at(static_cast<std::size_t>(c));
  }
  return chol;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path);
}

json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

void check_kind(const json& j, const char* kind, const std::string& path) {
  if (j.value("tool", "") != kToolName || j.value("kind", "") != kind) {
    throw DataError(path + ": not a " + kToolName + " " + kind + " file");
  }
}

void write_meta(const std::string& path, double wall_seconds) {
  json meta;
  meta["tool"] = kToolName;
  meta["version"] = kToolVersion;
  meta["kind"] = "meta";
  meta["wall_seconds"] = wall_seconds;
  write_text(path, meta.dump(1) + "\n");
}

}  // namespace

json state_to_json(const ModelState& state) {
  json j;
  j["variant"] = variant_name(state.variant);
  j["window"] = {{"start", state.window.start}, {"end", state.window.end}};
  j["sequence_ids"] = state.sequence_ids;
  j["pseudo"] = vector_to_json(state.pseudo.locations);
  json kernels = json::array();
  for (const auto& k : state.kernels) {
    kernels.push_back(
        {{"gamma", k.gamma}, {"lengthscale", k.lengthscale}, {"jitter", k.jitter}});
  }
  j["kernels"] = std::move(kernels);
  json gps = json::array();
  for (const auto& gp : state.gps) {
    gps.push_back({{"mu", vector_to_json(gp.mu)}, {"chol", lower_to_json(gp.chol)}});
  }
  j["gps"] = std::move(gps);
  if (state.has_sticks()) {
    j["tau0"] = matrix_to_json(state.alloc.tau0.matrix());
    j["tau1"] = matrix_to_json(state.alloc.tau1.matrix());
  } else {
    j["theta"] = matrix_to_json(state.lppa_theta.matrix());
  }
  j["eta"] = vector_to_json(state.rates.eta);
  j["hyper"] = {{"alpha", state.hyper.alpha},
                {"a0", state.hyper.a0},
                {"b0", state.hyper.b0},
                {"prior_mean", state.hyper.prior_mean}};
  return j;
}

ModelState state_from_json(const json& j) {
  ModelState state;
  state.variant = parse_variant(j.at("variant").get<std::string>());
  state.window.start = j.at("window").at("start").get<double>();
  state.window.end = j.at("window").at("end").get<double>();
  state.sequence_ids = j.at("sequence_ids").get<std::vector<std::string>>();
  state.pseudo.locations = vector_from_json(j.at("pseudo"));
  for (const auto& k : j.at("kernels")) {
    KernelParams p;
    p.gamma = k.at("gamma").get<double>();
    p.lengthscale = k.at("lengthscale").get<double>();
    p.jitter = k.at("jitter").get<double>();
    state.kernels.push_back(p);
  }
  for (const auto& g : j.at("gps")) {
    SparseGPPosterior gp;
    gp.mu = vector_from_json(g.at("mu"));
    gp.chol = lower_from_json(g.at("chol"));
    state.gps.push_back(std::move(gp));
  }
  if (state.variant == Variant::lppa) {
    state.lppa_theta = matrix_from_json(j.at("theta")).array();
  } else {
    state.alloc.tau0 = matrix_from_json(j.at("tau0")).array();
    state.alloc.tau1 = matrix_from_json(j.at("tau1")).array();
  }
  state.rates.eta = vector_from_json(j.at("eta"));
  const auto& h = j.at("hyper");
  state.hyper.alpha = h.at("alpha").get<double>();
  state.hyper.a0 = h.at("a0").get<double>();
  state.hyper.b0 = h.at("b0").get<double>();
  state.hyper.prior_mean = h.at("prior_mean").get<double>();
  return state;
}

json config_to_json(const FitConfig& cfg) {
  json j;
  j["variant"] = variant_name(cfg.variant);
  j["components"] = cfg.components;
  j["pseudo_count"] = cfg.pseudo_count;
  j["seed"] = cfg.seed;
  j["inner_tol"] = cfg.inner_tol;
  j["outer_tol"] = cfg.outer_tol;
  j["max_outer"] = cfg.max_outer;
  j["max_sweeps"] = cfg.max_sweeps;
  j["max_block_iters"] = cfg.max_block_iters;
  j["lbfgs_memory"] = cfg.lbfgs_memory;
  j["positivity_floor"] = cfg.positivity_floor;
  j["learn_alpha"] = cfg.learn_alpha;
  j["alpha0"] = cfg.alpha0;
  j["gamma_scale"] = cfg.gamma_scale;
  j["lengthscale0"] = cfg.lengthscale0;
  j["learn_lengthscale"] = cfg.learn_lengthscale;
  j["multiplier_growth"] = cfg.multiplier_growth;
  j["multiplier_clip"] = cfg.multiplier_clip;
  return j;
}

FitConfig config_from_json(const json& j) {
  FitConfig cfg;
  cfg.variant = parse_variant(j.at("variant").get<std::string>());
  cfg.components = j.at("components").get<int>();
  cfg.pseudo_count = j.at("pseudo_count").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.inner_tol = j.at("inner_tol").get<double>();
  cfg.outer_tol = j.at("outer_tol").get<double>();
  cfg.max_outer = j.at("max_outer").get<int>();
  cfg.max_sweeps = j.at("max_sweeps").get<int>();
  cfg.max_block_iters = j.at("max_block_iters").get<int>();
  cfg.lbfgs_memory = j.at("lbfgs_memory").get<int>();
  cfg.positivity_floor = j.at("positivity_floor").get<double>();
  cfg.learn_alpha = j.at("learn_alpha").get<bool>();
  cfg.alpha0 = j.at("alpha0").get<double>();
  cfg.gamma_scale = j.at("gamma_scale").get<double>();
  cfg.lengthscale0 = j.at("lengthscale0").get<double>();
  cfg.learn_lengthscale = j.at("learn_lengthscale").get<bool>();
  cfg.multiplier_growth = j.at("multiplier_growth").get<double>();
  cfg.multiplier_clip = j.at("multiplier_clip").get<double>();
  return cfg;
}

void save_fit(const FitResult& fit, std::uint64_t train_checksum, const std::string& path) {
  json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["kind"] = "fit";
  j["config"] = config_to_json(fit.config);
  j["config_hash"] = hash_hex(fit.config.hash());
  j["train_checksum"] = hash_hex(train_checksum);
  j["target_volume"] = fit.target_volume;
  j["outer_iterations"] = fit.outer_iterations;
  j["accepted_steps"] = fit.accepted_steps;
  j["termination"] = fit.termination;
  j["degraded"] = fit.degraded;
  j["state"] = state_to_json(fit.state);
  j["objective_trace"] = fit.objective_trace;
  j["outer_objective_trace"] = fit.outer_objective_trace;
  json residuals = json::array();
  for (const auto& r : fit.residual_trace) residuals.push_back(vector_to_json(r));
  j["residual_trace"] = std::move(residuals);
  write_text(path, j.dump(1) + "\n");
  write_meta(path + ".meta.json", fit.wall_seconds);
}

LoadedFit load_fit(const std::string& path) {
  const json j = read_json(path);
  check_kind(j, "fit", path);
  try {
    LoadedFit loaded;
    loaded.fit.config = config_from_json(j.at("config"));
    loaded.fit.state = state_from_json(j.at("state"));
    loaded.fit.target_volume = j.at("target_volume").get<double>();
    loaded.fit.outer_iterations = j.at("outer_iterations").get<int>();
    loaded.fit.accepted_steps = j.at("accepted_steps").get<long>();
    loaded.fit.termination = j.at("termination").get<std::string>();
    loaded.fit.degraded = j.at("degraded").get<bool>();
    loaded.fit.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    loaded.fit.outer_objective_trace =
        j.at("outer_objective_trace").get<std::vector<double>>();
    for (const auto& r : j.at("residual_trace")) {
      loaded.fit.residual_trace.push_back(vector_from_json(r));
    }
    const std::string stored_hash = j.at("config_hash").get<std::string>();
    if (stored_hash != hash_hex(loaded.fit.config.hash())) {
      throw DataError(path + ": config hash does not match the stored config");
    }
    std::uint64_t checksum = 0;
    const std::string hex = j.at("train_checksum").get<std::string>();
    for (char c : hex) {
      const int digit = (c >= '0' && c <= '9')   ? c - '0'
                        : (c >= 'a' && c <= 'f') ? c - 'a' + 10
                                                 : -1;
      if (digit < 0) throw DataError(path + ": malformed train checksum");
      checksum = (checksum << 4) | static_cast<std::uint64_t>(digit);
    }
    loaded.train_checksum = checksum;
    return loaded;
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

void save_trace_csv(const FitResult& fit, const std::string& path) {
  std::string text = "step,objective\n";
  for (std::size_t i = 0; i < fit.objective_trace.size(); ++i) {
    text += std::to_string(i);
    text += ',';
    text += to_exact_string(fit.objective_trace[i]);
    text += '\n';
  }
  write_text(path, text);
}

void save_residuals_csv(const FitResult& fit, const std::string& path) {
  std::string text = "outer,component,residual\n";
  for (std::size_t it = 0; it < fit.residual_trace.size(); ++it) {
    const auto& r = fit.residual_trace[it];
    for (Eigen::Index k = 0; k < r.size(); ++k) {
      text += std::to_string(it);
      text += ',';
      text += std::to_string(k);
      text += ',';
      text += to_exact_string(r[k]);
      text += '\n';
    }
  }
  write_text(path, text);
}

void save_report(const EvalReport& report, const ModelState& state, std::uint64_t config_hash,
                 const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto in_dir = [&dir](const char* name) {
    return (std::filesystem::path(dir) / name).string();
  };

  json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["kind"] = "report";
  j["config_hash"] = hash_hex(config_hash);
  j["test_likelihood_point"] = report.test_likelihood_point;
  j["test_likelihood_sampled"] = report.test_likelihood_sampled;
  j["test_likelihood_se"] = report.test_likelihood_se;
  j["samples"] = report.samples;
  if (report.has_train) j["train_likelihood_point"] = report.train_likelihood_point;
  j["active_components"] = report.active_components;
  j["active_threshold"] = report.active_threshold;
  j["ner"] = vector_to_json(report.ner);
  j["uner"] = vector_to_json(report.uner);
  j["volumes"] = vector_to_json(report.volumes);
  write_text(in_dir("report.json"), j.dump(1) + "\n");
  write_meta(in_dir("report.meta.json"), report.wall_seconds);

  const auto k_table = [&](const char* name, const Eigen::VectorXd& v, const char* column) {
    std::string text = std::string("component,") + column + "\n";
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      text += std::to_string(k);
      text += ',';
      text += to_exact_string(v[k]);
      text += '\n';
    }
    write_text(in_dir(name), text);
  };
  k_table("ner.csv", report.ner, "ner");
  k_table("uner.csv", report.uner, "uner");
  k_table("volumes.csv", report.volumes, "volume");

  {
    std::string text = "sequence";
    for (Eigen::Index k = 0; k < report.theta_hat.cols(); ++k) {
      text += ",component" + std::to_string(k);
    }
    text += '\n';
    for (Eigen::Index d = 0; d < report.theta_hat.rows(); ++d) {
      text += state.sequence_ids[static_cast<std::size_t>(d)];
      for (Eigen::Index k = 0; k < report.theta_hat.cols(); ++k) {
        text += ',';
        text += to_exact_string(report.theta_hat(d, k));
      }
      text += '\n';
    }
    write_text(in_dir("theta_hat.csv"), text);
  }
  {
    std::string text = "t";
    for (Eigen::Index k = 0; k < report.component_moment.rows(); ++k) {
      text += ",component" + std::to_string(k);
    }
    text += '\n';
    for (Eigen::Index i = 0; i < report.grid.size(); ++i) {
      text += to_exact_string(report.grid[i]);
      for (Eigen::Index k = 0; k < report.component_moment.rows(); ++k) {
        text += ',';
        text += to_exact_string(report.component_moment(k, i));
      }
      text += '\n';
    }
    write_text(in_dir("component_moments.csv"), text);
  }
  {
    std::string text = "t";
    for (const auto& id : state.sequence_ids) text += "," + id;
    text += '\n';
    for (Eigen::Index i = 0; i < report.grid.size(); ++i) {
      text += to_exact_string(report.grid[i]);
      for (Eigen::Index d = 0; d < report.intensity.rows(); ++d) {
        text += ',';
        text += to_exact_string(report.intensity(d, i));
      }
      text += '\n';
    }
    write_text(in_dir("intensity.csv"), text);
  }
}

void save_ground_truth(const SynthSpec& spec, const GroundTruth& truth,
                       const std::string& path) {
  json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["kind"] = "ground-truth";
  j["name"] = spec.name;
  j["sequences"] = spec.sequences;
  j["window"] = {{"start", spec.window.start}, {"end", spec.window.end}};
  json bases = json::array();
  for (const auto& b : spec.bases) bases.push_back({{"centers", b.centers}});
  j["bases"] = std::move(bases);
  j["dirichlet"] = spec.dirichlet;
  j["rate_shape"] = spec.rate_shape;
  j["rate_rate"] = spec.rate_rate;
  j["intensity_scale"] = spec.intensity_scale;
  j["seed"] = spec.seed;
  j["recommended_lengthscale"] = spec.recommended_lengthscale;
  j["s"] = vector_to_json(truth.s);
  j["theta"] = matrix_to_json(truth.theta);
  write_text(path, j.dump(1) + "\n");
}

std::pair<SynthSpec, GroundTruth> load_ground_truth(const std::string& path) {
  const json j = read_json(path);
  check_kind(j, "ground-truth", path);
  try {
    SynthSpec spec;
    spec.name = j.at("name").get<std::string>();
    spec.sequences = j.at("sequences").get<int>();
    spec.window.start = j.at("window").at("start").get<double>();
    spec.window.end = j.at("window").at("end").get<double>();
    for (const auto& b : j.at("bases")) {
      spec.bases.push_back({b.at("centers").get<std::vector<double>>()});
    }
    spec.dirichlet = j.at("dirichlet").get<std::vector<double>>();
    spec.rate_shape = j.at("rate_shape").get<double>();
    spec.rate_rate = j.at("rate_rate").get<double>();
    spec.intensity_scale = j.value("intensity_scale", 1.0);
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.recommended_lengthscale = j.at("recommended_lengthscale").get<double>();
    GroundTruth truth;
    truth.s = vector_from_json(j.at("s"));
    truth.theta = matrix_from_json(j.at("theta"));
    return {std::move(spec), std::move(truth)};
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace banppa
