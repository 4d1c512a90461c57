#include "transtarec/corpus.hpp"

#include "transtarec/calendar.hpp"
#include "transtarec/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace transtarec {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

bool parse_int_field(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

int Vocabulary::intern(std::string_view id) {
  auto it = index_.find(std::string(id));
  if (it != index_.end()) return it->second;
  const int idx = static_cast<int>(ids_.size());
  ids_.emplace_back(id);
  index_.emplace(ids_.back(), idx);
  return idx;
}

std::optional<int> Vocabulary::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Corpus::n_records() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.size();
  return n;
}

void CorpusBuilder::add(std::string_view user, std::string_view poi,
                        std::int64_t utc_seconds, int tz_offset_minutes) {
  const int u = corpus_.users.intern(user);
  const int p = corpus_.pois.intern(poi);
  if (static_cast<std::size_t>(u) >= corpus_.sequences.size()) {
    corpus_.sequences.resize(static_cast<std::size_t>(u) + 1);
  }
  Event ev;
  ev.timestamp = utc_seconds;
  ev.tz_offset_minutes = tz_offset_minutes;
  ev.time = decompose_time(utc_seconds, tz_offset_minutes);
  ev.poi = p;
  corpus_.sequences[static_cast<std::size_t>(u)].push_back(ev);
}

Corpus CorpusBuilder::finish() {
  for (auto& seq : corpus_.sequences) {
    std::stable_sort(seq.begin(), seq.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
  }
  return std::move(corpus_);
}

Corpus parse_dataset(std::istream& in, DataFormat format, ParseStats* stats) {
  CorpusBuilder builder;
  ParseStats local;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++local.lines;

    const auto cols = split_tabs(line);
    bool ok = false;
    if (format == DataFormat::generic_tsv) {
      if (cols.size() == 3 && !cols[0].empty() && !cols[1].empty()) {
        if (const auto t = parse_iso8601(cols[2])) {
          builder.add(cols[0], cols[1], t->utc_seconds, t->tz_offset_minutes);
          ok = true;
        }
      }
    } else {  // foursquare_tsv
      int offset = 0;
      if (cols.size() >= 8 && !cols[0].empty() && !cols[1].empty() &&
          parse_int_field(cols[6], offset)) {
        if (const auto utc = parse_checkin_time(cols[7])) {
          builder.add(cols[0], cols[1], *utc, offset);
          ok = true;
        }
      }
    }
    if (ok) {
      ++local.records;
    } else {
      ++local.malformed;
    }
  }

  if (stats) *stats = local;
  if (local.lines > 0 && local.malformed * 2 > local.lines) {
    throw FormatError("more than 50% of lines malformed (" +
                      std::to_string(local.malformed) + "/" + std::to_string(local.lines) +
                      "); wrong --format?");
  }
  if (local.records == 0) throw EmptyCorpusError("no valid records in input");
  return builder.finish();
}

Corpus parse_dataset(const std::filesystem::path& path, DataFormat format, ParseStats* stats) {
  std::ifstream in(path);
  if (!in.is_open()) throw FileNotFoundError("cannot open " + path.string());
  return parse_dataset(in, format, stats);
}

std::string to_generic_tsv(const Corpus& corpus) {
  std::string out;
  for (int u = 0; u < corpus.users.size(); ++u) {
    const std::string& uid = corpus.users.id(u);
    for (const Event& ev : corpus.sequences[static_cast<std::size_t>(u)]) {
      out += uid;
      out += '\t';
      out += corpus.pois.id(ev.poi);
      out += '\t';
      out += format_iso8601(ev.timestamp, ev.tz_offset_minutes);
      out += '\n';
    }
  }
  return out;
}

void write_generic_tsv(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out.is_open()) throw IoError("cannot write " + path.string());
  out << to_generic_tsv(corpus);
  if (!out) throw IoError("write failed for " + path.string());
}

Split chronological_split(const Corpus& corpus, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgumentError("train_fraction must lie in (0, 1)");
  }
  Split split;
  for (int u = 0; u < corpus.users.size(); ++u) {
    const auto& seq = corpus.sequences[static_cast<std::size_t>(u)];
    if (seq.size() < 2) {
      ++split.dropped_users;
      continue;
    }
    split.corpus.users.intern(corpus.users.id(u));
    split.corpus.sequences.push_back(seq);
    const auto n = seq.size();
    // ceil with an epsilon guard against 0.8*10 -> 8.0000000000000004;
    // capped at n-1 so every retained user keeps a test record.
    auto b = static_cast<std::size_t>(
        std::ceil(train_fraction * static_cast<double>(n) - 1e-9));
    b = std::clamp<std::size_t>(b, 1, n - 1);
    split.boundary.push_back(b);
  }
  if (split.corpus.users.size() == 0) {
    throw EmptyCorpusError("no users with at least 2 records");
  }
  split.corpus.pois = corpus.pois;
  return split;
}

std::vector<std::pair<int, int>> make_transitions(std::span<const Event> seq,
                                                  TransitionTask task, double gap_hours) {
  std::vector<std::pair<int, int>> pairs;
  const int n = static_cast<int>(seq.size());
  switch (task) {
    case TransitionTask::next:
      for (int i = 0; i + 1 < n; ++i) pairs.emplace_back(i, i + 1);
      break;
    case TransitionTask::timespec:
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
      break;
    case TransitionTask::timespec_min_gap: {
      const double gap_seconds = gap_hours * 3600.0;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          const auto dt = static_cast<double>(seq[static_cast<std::size_t>(j)].timestamp -
                                              seq[static_cast<std::size_t>(i)].timestamp);
          if (dt >= gap_seconds) pairs.emplace_back(i, j);
        }
      }
      break;
    }
  }
  return pairs;
}

SyntheticLaw synthetic_law(int n_pois) {
  SyntheticLaw law;
  law.day_successor.resize(static_cast<std::size_t>(n_pois));
  law.eve_successor.resize(static_cast<std::size_t>(n_pois));
  for (int a = 0; a < n_pois; ++a) {
    law.day_successor[static_cast<std::size_t>(a)] = a + 1 < n_pois ? a + 1 : n_pois - 2;
    law.eve_successor[static_cast<std::size_t>(a)] = a > 0 ? a - 1 : 1;
  }
  return law;
}

Corpus generate_synthetic(int n_users, int n_pois, SyntheticPattern pattern,
                          std::uint64_t seed, int records_per_user) {
  if (n_users < 1) throw InvalidArgumentError("n_users must be >= 1");
  if (n_pois < 4) throw InvalidArgumentError("n_pois must be >= 4");
  if (records_per_user < 2) throw InvalidArgumentError("records_per_user must be >= 2");

  const SyntheticLaw law = synthetic_law(n_pois);
  // 2012-04-12T00:00:00Z
  const std::int64_t base = *civil_to_epoch({2012, 4, 12, 0, 0, 0}, 0);

  CorpusBuilder builder;
  char uid[24], pid[24];
  for (int u = 0; u < n_users; ++u) {
    Rng rng(mix_seed(seed, 1 + static_cast<std::uint64_t>(u)));
    std::snprintf(uid, sizeof uid, "u%d", u);
    int poi = rng.below_int(n_pois);
    for (int k = 0; k < records_per_user; ++k) {
      const int hour = 6 + rng.below_int(18);  // 6..23, two 9-hour buckets
      if (k > 0) {
        if (pattern == SyntheticPattern::time_dependent) {
          poi = hour <= 14 ? law.day_successor[static_cast<std::size_t>(poi)]
                           : law.eve_successor[static_cast<std::size_t>(poi)];
        } else {
          poi = rng.below_int(n_pois);
        }
      }
      const std::int64_t ts = base + std::int64_t{k} * 86400 + std::int64_t{hour} * 3600;
      std::snprintf(pid, sizeof pid, "p%d", poi);
      builder.add(uid, pid, ts, 0);
    }
  }
  return builder.finish();
}

}  // namespace transtarec
