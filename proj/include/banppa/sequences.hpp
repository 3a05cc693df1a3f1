#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "banppa/rng.hpp"

namespace banppa {

struct TimeWindow {
  double start = 0.0;
  double end = 1.0;

  double length() const { return end - start; }
  // Events must lie strictly inside the window; boundary times are rejected
  // so that window edges never carry probability mass.
  bool contains_interior(double t) const { return t > start && t < end; }
  bool operator==(const TimeWindow&) const = default;
};

struct TimeSequence {
  std::string id;
  std::vector<double> events;  // non-decreasing, strictly inside the window

  std::size_t count() const { return events.size(); }
};

struct Dataset {
  TimeWindow window;
  std::vector<TimeSequence> sequences;

  std::size_t size() const { return sequences.size(); }
  std::size_t total_events() const;
};

// Event-list text format: a `window,<start>,<end>` header line, then per
// sequence a `sequence,<id>` declaration followed by one `<id>,<time>`
// record per event. Declarations keep zero-event sequences (and sequence
// order) across a round trip; event records for undeclared ids register the
// sequence on first sight, so plain event lists load too. The ids "window"
// and "sequence" are reserved by the format. Saving also writes a
// `<path>.summary.json` sidecar with counts; loading ignores the sidecar.
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& ds, const std::string& path);

// log p(events | intensity) for one observation window: the negated integral
// of the intensity plus the log intensity summed over events. `integral`
// must be the caller's value of the intensity integral over the window.
double log_poisson_likelihood(const TimeSequence& seq,
                              const std::function<double(double)>& intensity,
                              double integral);

// Thinning sampler. `bound` must dominate the intensity on the window; the
// sampler draws a homogeneous candidate process at rate `bound` and keeps
// each candidate t with probability intensity(t)/bound.
TimeSequence sample_inhomogeneous_pp(const std::function<double(double)>& intensity,
                                     double bound, const TimeWindow& window, Rng& rng,
                                     std::string id = "sample");

// Per-event fair-coin split. Both halves keep every sequence id (possibly
// with zero events) and the full window, so indices stay aligned.
std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, Rng& rng);

std::uint64_t dataset_checksum(const Dataset& ds);

}  // namespace banppa
