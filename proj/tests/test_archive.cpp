#include "transtarec/archive.hpp"

#include "oracles.hpp"
#include "transtarec/rng.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace transtarec;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("transtarec_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static inline int counter = 0;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

ModelArchive sample_archive(std::uint64_t seed, int n_users = 3, int n_pois = 5, int d = 4) {
  Rng rng(seed);
  const Model m = oracle::random_model(rng, n_users, n_pois, d);
  ModelArchive a;
  a.hyper = m.hyper;
  a.hyper.epsilon = 0.001;
  a.params = m.params;
  for (int u = 0; u < n_users; ++u) a.user_ids.push_back("user_" + std::to_string(u));
  for (int p = 0; p < n_pois; ++p) a.poi_ids.push_back("poi_" + std::to_string(p));
  a.meta.seed = seed;
  a.meta.epochs_run = 17;
  a.meta.final_loss = 0.125 + rng.uniform01();
  return a;
}

}  // namespace

TEST_CASE("archives round-trip field for field") {
  TempDir dir;
  const fs::path file = dir.path / "model.ttr";
  const ModelArchive a = sample_archive(1);
  save_archive(a, file);
  const ModelArchive b = load_archive(file);

  CHECK(b.format_version == 1);
  CHECK(b.hyper.dim == a.hyper.dim);
  CHECK(b.hyper.margin == a.hyper.margin);
  CHECK(b.hyper.soft_c == a.hyper.soft_c);
  CHECK(b.hyper.epsilon == a.hyper.epsilon);
  CHECK(b.hyper.rank_mode == a.hyper.rank_mode);
  CHECK(b.hyper.baseline_mode == a.hyper.baseline_mode);
  CHECK(b.user_ids == a.user_ids);
  CHECK(b.poi_ids == a.poi_ids);
  CHECK(b.meta.seed == a.meta.seed);
  CHECK(b.meta.epochs_run == a.meta.epochs_run);
  CHECK(b.meta.final_loss == a.meta.final_loss);  // bit-exact through text
  CHECK(b.params.user_emb == a.params.user_emb);
  CHECK(b.params.poi_emb == a.params.poi_emb);
  CHECK(b.params.month_emb == a.params.month_emb);
  CHECK(b.params.weekday_emb == a.params.weekday_emb);
  CHECK(b.params.hour_emb == a.params.hour_emb);
  CHECK(b.params.g_weight == a.params.g_weight);
  CHECK(b.params.g_bias == a.params.g_bias);
  CHECK(b.params.h_weight == a.params.h_weight);
  CHECK(b.params.h_bias == a.params.h_bias);
}

TEST_CASE("save-load-save is byte identical") {
  TempDir dir;
  const fs::path f1 = dir.path / "one.ttr";
  const fs::path f2 = dir.path / "two.ttr";
  const ModelArchive a = sample_archive(2, 4, 7, 5);
  save_archive(a, f1);
  save_archive(load_archive(f1), f2);
  CHECK(slurp(f1) == slurp(f2));
}

TEST_CASE("tensor sections have exact shapes") {
  TempDir dir;
  const fs::path file = dir.path / "tiny.ttr";
  save_archive(sample_archive(3, 1, 2, 2), file);
  const std::string text = slurp(file);

  // "tensor poi_emb 2 2" followed by exactly 2 lines of 2 numbers
  const auto pos = text.find("tensor poi_emb 2 2\n");
  REQUIRE(pos != std::string::npos);
  std::istringstream in(text.substr(pos));
  std::string line;
  std::getline(in, line);
  for (int row = 0; row < 2; ++row) {
    REQUIRE(std::getline(in, line));
    std::istringstream vals(line);
    double x;
    int n = 0;
    while (vals >> x) ++n;
    CHECK(n == 2);
  }
  REQUIRE(std::getline(in, line));
  CHECK(line.rfind("tensor month_emb", 0) == 0);
}

TEST_CASE("magic and version gates") {
  TempDir dir;
  const fs::path good = dir.path / "good.ttr";
  save_archive(sample_archive(4), good);

  const std::string text = slurp(good);
  const fs::path wrong_version = dir.path / "v2.ttr";
  spit(wrong_version, "TRANSTAREC 2\n" + text.substr(text.find('\n') + 1));
  CHECK_THROWS_AS(load_archive(wrong_version), UnsupportedVersionError);

  const fs::path not_ours = dir.path / "other.ttr";
  spit(not_ours, "SOMETHINGELSE 1\nwhatever\n");
  CHECK_THROWS_AS(load_archive(not_ours), BadMagicError);

  CHECK_THROWS_AS(load_archive(dir.path / "missing.ttr"), FileNotFoundError);
}

TEST_CASE("corrupt tensors are caught with the section named") {
  TempDir dir;
  const fs::path good = dir.path / "good.ttr";
  save_archive(sample_archive(5, 2, 3, 3), good);
  const std::string text = slurp(good);

  SUBCASE("truncated file") {
    const auto pos = text.find("tensor h_weight");
    const fs::path trunc = dir.path / "trunc.ttr";
    spit(trunc, text.substr(0, pos + 40));
    CHECK_THROWS_WITH_AS(load_archive(trunc), doctest::Contains("h_weight"),
                         ShapeMismatchError);
  }

  SUBCASE("row with too few values") {
    const auto pos = text.find("tensor poi_emb 3 3\n");
    const auto row_start = pos + std::string("tensor poi_emb 3 3\n").size();
    const auto row_end = text.find('\n', row_start);
    std::string broken = text.substr(0, row_start) + "1 2" + text.substr(row_end);
    const fs::path f = dir.path / "short_row.ttr";
    spit(f, broken);
    CHECK_THROWS_WITH_AS(load_archive(f), doctest::Contains("poi_emb"), ShapeMismatchError);
  }

  SUBCASE("unparseable number carries a line number") {
    const auto pos = text.find("tensor g_bias 1 3\n");
    const auto row_start = pos + std::string("tensor g_bias 1 3\n").size();
    const auto row_end = text.find('\n', row_start);
    std::string broken = text.substr(0, row_start) + "1 oops 3" + text.substr(row_end);
    const fs::path f = dir.path / "bad_number.ttr";
    spit(f, broken);
    CHECK_THROWS_WITH_AS(load_archive(f), doctest::Contains("line"), ParseError);
  }

  SUBCASE("non-finite values are rejected") {
    const auto pos = text.find("tensor g_bias 1 3\n");
    const auto row_start = pos + std::string("tensor g_bias 1 3\n").size();
    const auto row_end = text.find('\n', row_start);
    std::string broken = text.substr(0, row_start) + "1 inf 3" + text.substr(row_end);
    const fs::path f = dir.path / "inf.ttr";
    spit(f, broken);
    CHECK_THROWS_AS(load_archive(f), ParseError);
  }

  SUBCASE("trailing garbage is rejected") {
    const fs::path f = dir.path / "trailing.ttr";
    spit(f, text + "extra\n");
    CHECK_THROWS_AS(load_archive(f), ParseError);
  }
}

TEST_CASE("unwritable paths fail without leaving partial files") {
  const fs::path target = "/nonexistent_dir_for_sure/model.ttr";
  CHECK_THROWS_AS(save_archive(sample_archive(6), target), IoError);
  CHECK_FALSE(fs::exists(target));
  CHECK_FALSE(fs::exists("/nonexistent_dir_for_sure"));
}
