// Deterministic text persistence for trained models. Format:
//
//   TRANSTAREC 1
//   dim/margin/soft_c/epsilon/rank_mode/baseline header lines
//   seed/epochs_run/final_loss training metadata
//   users N / pois N counts, then one id per line in index order
//   per tensor: "tensor <name> <rows> <cols>" then rows of %.17g values
//
// 17 significant digits round-trip doubles exactly, so save -> load -> save
// is byte-identical. Writes are atomic (temp file + rename).
#pragma once

#include "transtarec/corpus.hpp"
#include "transtarec/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace transtarec {

struct TrainMeta {
  std::uint64_t seed = 0;
  int epochs_run = 0;
  Scalar final_loss = 0;
};

struct ModelArchive {
  int format_version = 1;
  HyperParams hyper;
  std::vector<std::string> user_ids;
  std::vector<std::string> poi_ids;
  ModelParams params;
  TrainMeta meta;
};

void save_archive(const ModelArchive& archive, const std::filesystem::path& path);
ModelArchive load_archive(const std::filesystem::path& path);

// Convenience: the archive's vocab ids as a Vocabulary (index order kept).
Vocabulary archive_users(const ModelArchive& archive);
Vocabulary archive_pois(const ModelArchive& archive);

}  // namespace transtarec
