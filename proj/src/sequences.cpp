#include "banppa/sequences.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "banppa/errors.hpp"
#include "banppa/io_util.hpp"

namespace banppa {

namespace {

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

[[noreturn]] void parse_fail(const std::string& path, std::size_t line_no, const std::string& what) {
  throw DataError(path + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::size_t Dataset::total_events() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.events.size();
  return n;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open event list: " + path);

  Dataset ds;
  std::unordered_map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;

  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;

    if (!have_header) {
      std::size_t c1 = line.find(',');
      std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
      if (line.substr(0, c1) != "window" || c2 == std::string::npos) {
        parse_fail(path, line_no, "expected header 'window,<start>,<end>'");
      }
      TimeWindow w;
      if (!parse_double(std::string_view(line).substr(c1 + 1, c2 - c1 - 1), w.start) ||
          !parse_double(std::string_view(line).substr(c2 + 1), w.end)) {
        parse_fail(path, line_no, "malformed window bounds");
      }
      if (!(w.start < w.end)) parse_fail(path, line_no, "window start must precede end");
      ds.window = w;
      have_header = true;
      continue;
    }

    std::size_t comma = line.find(',');
    if (comma == std::string::npos || comma == 0) {
      parse_fail(path, line_no, "expected '<sequence_id>,<time>'");
    }
    std::string id = line.substr(0, comma);
    if (id == "sequence") {
      // Declaration record: registers the id (possibly with no events) so
      // empty sequences survive a save/load round trip in order.
      id = line.substr(comma + 1);
      if (id.empty()) parse_fail(path, line_no, "empty sequence id");
      auto [it, fresh] = index.try_emplace(id, ds.sequences.size());
      (void)it;
      if (!fresh) parse_fail(path, line_no, "duplicate declaration of sequence '" + id + "'");
      ds.sequences.push_back(TimeSequence{id, {}});
      continue;
    }
    double t = 0.0;
    if (!parse_double(std::string_view(line).substr(comma + 1), t)) {
      parse_fail(path, line_no, "malformed event time");
    }
    if (!ds.window.contains_interior(t)) {
      parse_fail(path, line_no, "event at " + to_exact_string(t) + " in sequence '" + id +
                                    "' lies outside the open window (" +
                                    to_exact_string(ds.window.start) + ", " +
                                    to_exact_string(ds.window.end) + ")");
    }
    auto [it, fresh] = index.try_emplace(id, ds.sequences.size());
    if (fresh) ds.sequences.push_back(TimeSequence{id, {}});
    ds.sequences[it->second].events.push_back(t);
  }

  if (!have_header) throw DataError(path + ": missing 'window,<start>,<end>' header");
  for (auto& s : ds.sequences) std::sort(s.events.begin(), s.events.end());
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  if (!(ds.window.start < ds.window.end)) {
    throw std::invalid_argument("save_dataset: degenerate window");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write event list: " + path);
  out << "window," << to_exact_string(ds.window.start) << ',' << to_exact_string(ds.window.end)
      << '\n';
  for (const auto& s : ds.sequences) {
    if (s.id.empty() || s.id == "window" || s.id == "sequence" ||
        s.id.find_first_of(",\r\n") != std::string::npos) {
      throw std::invalid_argument("save_dataset: sequence id '" + s.id +
                                  "' cannot be represented in the event-list format");
    }
    out << "sequence," << s.id << '\n';
    for (double t : s.events) out << s.id << ',' << to_exact_string(t) << '\n';
  }
  if (!out) throw DataError("short write: " + path);

  nlohmann::json summary{
      {"tool", kToolName},
      {"version", kToolVersion},
      {"sequences", ds.size()},
      {"events", ds.total_events()},
      {"window", {{"start", ds.window.start}, {"end", ds.window.end}}},
      {"checksum", hash_hex(dataset_checksum(ds))},
  };
  std::ofstream side(path + ".summary.json", std::ios::binary);
  if (!side) throw DataError("cannot write summary sidecar for " + path);
  side << summary.dump(2) << '\n';
}

double log_poisson_likelihood(const TimeSequence& seq,
                              const std::function<double(double)>& intensity,
                              double integral) {
  if (!(integral >= 0.0)) {
    throw std::domain_error("log_poisson_likelihood: negative intensity integral");
  }
  double ll = -integral;
  for (double t : seq.events) {
    double lam = intensity(t);
    if (std::isnan(lam) || lam < 0.0) {
      throw std::domain_error("log_poisson_likelihood: intensity is negative at an event");
    }
    ll += std::log(lam);  // lam == 0 yields -inf, which is the honest answer
  }
  return ll;
}

TimeSequence sample_inhomogeneous_pp(const std::function<double(double)>& intensity,
                                     double bound, const TimeWindow& window, Rng& rng,
                                     std::string id) {
  if (!(bound > 0.0) || !std::isfinite(bound)) {
    throw std::invalid_argument("sample_inhomogeneous_pp: bound must be finite and positive");
  }
  if (!(window.start < window.end)) {
    throw std::invalid_argument("sample_inhomogeneous_pp: degenerate window");
  }

  std::poisson_distribution<long> count(bound * window.length());
  std::uniform_real_distribution<double> pos(window.start, window.end);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  long m = count(rng);
  std::vector<double> candidates(static_cast<std::size_t>(m));
  for (auto& t : candidates) t = pos(rng);
  std::sort(candidates.begin(), candidates.end());

  TimeSequence out{std::move(id), {}};
  for (double t : candidates) {
    double lam = intensity(t);
    if (std::isnan(lam) || lam < 0.0) {
      throw std::domain_error("sample_inhomogeneous_pp: negative intensity at t=" +
                              to_exact_string(t));
    }
    if (lam > bound) {
      throw std::invalid_argument("sample_inhomogeneous_pp: intensity " + to_exact_string(lam) +
                                  " exceeds the dominating bound " + to_exact_string(bound));
    }
    if (unit(rng) * bound < lam && window.contains_interior(t)) out.events.push_back(t);
  }
  return out;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, Rng& rng) {
  if (ds.size() == 0) throw std::invalid_argument("split_train_test: empty dataset");
  Dataset train{ds.window, {}};
  Dataset test{ds.window, {}};
  train.sequences.reserve(ds.size());
  test.sequences.reserve(ds.size());
  std::uniform_int_distribution<int> coin(0, 1);
  for (const auto& s : ds.sequences) {
    TimeSequence tr{s.id, {}};
    TimeSequence te{s.id, {}};
    for (double t : s.events) (coin(rng) == 0 ? tr : te).events.push_back(t);
    train.sequences.push_back(std::move(tr));
    test.sequences.push_back(std::move(te));
  }
  return {std::move(train), std::move(test)};
}

std::uint64_t dataset_checksum(const Dataset& ds) {
  auto h = fnv1a("event-list-v1");
  auto mix_bits = [&h](double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    char raw[8];
    for (int i = 0; i < 8; ++i) raw[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    h = fnv1a(std::string_view(raw, 8), h);
  };
  mix_bits(ds.window.start);
  mix_bits(ds.window.end);
  for (const auto& s : ds.sequences) {
    h = fnv1a(s.id, h);
    h = fnv1a("|", h);
    for (double t : s.events) mix_bits(t);
  }
  return h;
}

}  // namespace banppa
