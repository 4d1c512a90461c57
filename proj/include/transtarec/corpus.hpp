// Check-in corpora: vocabularies, per-user chronological sequences,
// train/test splits, transition enumeration and synthetic data generation.
#pragma once

#include "transtarec/types.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace transtarec {

// Bijection between opaque string ids and dense indices [0, n).
class Vocabulary {
 public:
  int intern(std::string_view id);
  std::optional<int> find(std::string_view id) const;
  const std::string& id(int index) const { return ids_.at(static_cast<std::size_t>(index)); }
  int size() const { return static_cast<int>(ids_.size()); }
  const std::vector<std::string>& ids() const { return ids_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.ids_ == b.ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> index_;
};

struct Event {
  std::int64_t timestamp = 0;  // UTC seconds
  int tz_offset_minutes = 0;
  TimeKey time;  // decomposed in local time
  int poi = -1;

  friend bool operator==(const Event&, const Event&) = default;
};

struct Corpus {
  Vocabulary users;
  Vocabulary pois;
  std::vector<std::vector<Event>> sequences;  // indexed by user

  std::size_t n_records() const;

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

// Interns ids in arrival order and sorts each sequence by timestamp on finish
// (stable, so equal timestamps keep arrival order).
class CorpusBuilder {
 public:
  void add(std::string_view user, std::string_view poi, std::int64_t utc_seconds,
           int tz_offset_minutes);
  Corpus finish();

 private:
  Corpus corpus_;
};

enum class DataFormat { generic_tsv, foursquare_tsv };

struct ParseStats {
  std::size_t lines = 0;      // non-empty lines seen
  std::size_t malformed = 0;  // lines rejected
  std::size_t records = 0;    // records kept
};

// generic_tsv: user TAB poi TAB iso8601. foursquare_tsv: 8 columns, of which
// user (1), venue (2), tz offset minutes (7) and UTC time string (8) are used.
// Malformed lines are tolerated up to 50% of the input; beyond that the
// format flag is presumed wrong and FormatError is thrown.
Corpus parse_dataset(const std::filesystem::path& path, DataFormat format,
                     ParseStats* stats = nullptr);
Corpus parse_dataset(std::istream& in, DataFormat format, ParseStats* stats = nullptr);

// One generic_tsv line per record, users in index order, each sequence in
// chronological order. Round-trips through parse_dataset.
std::string to_generic_tsv(const Corpus& corpus);
void write_generic_tsv(const Corpus& corpus, const std::filesystem::path& path);

// Per-user chronological prefix split. Users with fewer than two records are
// dropped (counted in dropped_users); every retained user keeps at least one
// test record. POI vocabulary is preserved as-is.
struct Split {
  Corpus corpus;
  std::vector<std::size_t> boundary;  // per user: index of first test event
  std::size_t dropped_users = 0;

  std::span<const Event> train(int user) const {
    const auto& s = corpus.sequences[static_cast<std::size_t>(user)];
    return {s.data(), boundary[static_cast<std::size_t>(user)]};
  }
  std::span<const Event> test(int user) const {
    const auto& s = corpus.sequences[static_cast<std::size_t>(user)];
    const std::size_t b = boundary[static_cast<std::size_t>(user)];
    return {s.data() + b, s.size() - b};
  }
};

Split chronological_split(const Corpus& corpus, double train_fraction = 0.8);

enum class TransitionTask { next, timespec, timespec_min_gap };

// Ordered (i, j) index pairs into seq, lexicographic. next: j = i+1;
// timespec: all i < j; timespec_min_gap: i < j with t_j - t_i >= gap_hours.
std::vector<std::pair<int, int>> make_transitions(std::span<const Event> seq,
                                                  TransitionTask task,
                                                  double gap_hours = 5.0);

enum class SyntheticPattern { time_dependent, time_blind };

// Desk-scale corpus with a known generative law. time_dependent: POIs sit on
// a line and the successor of POI a is a+1 for hours 6..14 and a-1 for hours
// 15..23 (reflecting at the ends), i.e. one fixed successor per (prev POI,
// hour bucket); time_blind: successors are drawn uniformly regardless of
// hour. Byte-identical output for identical arguments.
//
// The walk layout keeps the pattern representable by a translation model
// (each bucket is a constant step along the line, with no wrap-around cycle)
// while a time-blind ranker stays capped near 0.5 by the 50/50 bucket mix.
Corpus generate_synthetic(int n_users, int n_pois, SyntheticPattern pattern,
                          std::uint64_t seed, int records_per_user = 100);

// The time_dependent successor maps (exposed so tests can check learned
// behaviour against ground truth).
struct SyntheticLaw {
  std::vector<int> day_successor;  // hour in [6, 14]
  std::vector<int> eve_successor;  // hour in [15, 23]
};
SyntheticLaw synthetic_law(int n_pois);

}  // namespace transtarec
