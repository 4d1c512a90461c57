#include "transtarec/archive.hpp"

#include "transtarec/corpus.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

namespace transtarec {

namespace {

constexpr const char* kMagic = "TRANSTAREC";
constexpr int kVersion = 1;

std::string fmt_scalar(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct TensorRef {
  const char* name;
  const Mat* mat;
  const Vec* vec;
};

std::vector<TensorRef> tensor_list(const ModelParams& p) {
  return {
      {"user_emb", &p.user_emb, nullptr},   {"poi_emb", &p.poi_emb, nullptr},
      {"month_emb", &p.month_emb, nullptr}, {"weekday_emb", &p.weekday_emb, nullptr},
      {"hour_emb", &p.hour_emb, nullptr},   {"g_weight", &p.g_weight, nullptr},
      {"g_bias", nullptr, &p.g_bias},       {"h_weight", &p.h_weight, nullptr},
      {"h_bias", nullptr, &p.h_bias},
  };
}

// Line-oriented reader keeping a 1-based line number for diagnostics.
class LineReader {
 public:
  explicit LineReader(std::string text) : text_(std::move(text)) {}

  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    const std::size_t nl = text_.find('\n', pos_);
    const std::size_t end = nl == std::string::npos ? text_.size() : nl;
    line = std::string_view(text_).substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = nl == std::string::npos ? text_.size() : nl + 1;
    ++line_no_;
    return true;
  }

  std::string_view require(const char* what) {
    std::string_view line;
    if (!next(line)) {
      throw ParseError("unexpected end of file, expected " + std::string(what));
    }
    return line;
  }

  int line_no() const { return line_no_; }

 private:
  std::string text_;
  std::size_t pos_ = 0;
  int line_no_ = 0;
};

std::string line_msg(const LineReader& r, const std::string& msg) {
  return "line " + std::to_string(r.line_no()) + ": " + msg;
}

// "key value" header line with an exact expected key.
std::string_view header_value(LineReader& r, const char* key) {
  const std::string_view line = r.require(key);
  const std::size_t space = line.find(' ');
  if (space == std::string_view::npos || line.substr(0, space) != key) {
    throw ParseError(line_msg(r, "expected header '" + std::string(key) + " ...', got '" +
                                     std::string(line) + "'"));
  }
  return line.substr(space + 1);
}

template <typename T>
T parse_number(LineReader& r, std::string_view text, const char* what) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw ParseError(line_msg(r, std::string("cannot parse ") + what + " from '" +
                                     std::string(text) + "'"));
  }
  return value;
}

void read_tensor_rows(LineReader& r, const char* name, int rows, int cols,
                      Scalar* data /* row-major */) {
  for (int i = 0; i < rows; ++i) {
    std::string_view line;
    if (!r.next(line)) {
      throw ShapeMismatchError("tensor " + std::string(name) + " truncated: expected " +
                               std::to_string(rows) + " rows, got " + std::to_string(i));
    }
    const char* ptr = line.data();
    const char* last = line.data() + line.size();
    for (int j = 0; j < cols; ++j) {
      while (ptr < last && *ptr == ' ') ++ptr;
      Scalar v{};
      auto [next, ec] = std::from_chars(ptr, last, v);
      if (ec != std::errc{} || next == ptr) {
        if (ptr == last) {
          throw ShapeMismatchError("tensor " + std::string(name) + " row " +
                                   std::to_string(i) + " has fewer than " +
                                   std::to_string(cols) + " values (line " +
                                   std::to_string(r.line_no()) + ")");
        }
        throw ParseError(line_msg(r, "bad number in tensor " + std::string(name)));
      }
      if (!std::isfinite(v)) {
        throw ParseError(line_msg(r, "non-finite value in tensor " + std::string(name)));
      }
      data[static_cast<std::ptrdiff_t>(i) * cols + j] = v;
      ptr = next;
    }
    while (ptr < last && *ptr == ' ') ++ptr;
    if (ptr != last) {
      throw ShapeMismatchError("tensor " + std::string(name) + " row " + std::to_string(i) +
                               " has more than " + std::to_string(cols) + " values (line " +
                               std::to_string(r.line_no()) + ")");
    }
  }
}

}  // namespace

void save_archive(const ModelArchive& a, const std::filesystem::path& path) {
  if (static_cast<int>(a.user_ids.size()) != a.params.n_users() ||
      static_cast<int>(a.poi_ids.size()) != a.params.n_pois()) {
    throw ShapeMismatchError("vocabulary sizes do not match embedding tables");
  }

  std::string out;
  out.reserve(1 << 20);
  out += std::string(kMagic) + " " + std::to_string(kVersion) + "\n";
  out += "dim " + std::to_string(a.hyper.dim) + "\n";
  out += "margin " + fmt_scalar(a.hyper.margin) + "\n";
  out += "soft_c " + fmt_scalar(a.hyper.soft_c) + "\n";
  out += "epsilon " + fmt_scalar(a.hyper.epsilon) + "\n";
  out += "rank_mode " + std::string(to_string(a.hyper.rank_mode)) + "\n";
  out += "baseline " + std::string(a.hyper.baseline_mode ? "1" : "0") + "\n";
  out += "seed " + std::to_string(a.meta.seed) + "\n";
  out += "epochs_run " + std::to_string(a.meta.epochs_run) + "\n";
  out += "final_loss " + fmt_scalar(a.meta.final_loss) + "\n";
  out += "users " + std::to_string(a.user_ids.size()) + "\n";
  out += "pois " + std::to_string(a.poi_ids.size()) + "\n";
  for (const auto& id : a.user_ids) out += id + "\n";
  for (const auto& id : a.poi_ids) out += id + "\n";

  char buf[40];
  for (const TensorRef& t : tensor_list(a.params)) {
    const int rows = t.mat ? static_cast<int>(t.mat->rows()) : 1;
    const int cols = t.mat ? static_cast<int>(t.mat->cols()) : static_cast<int>(t.vec->size());
    out += "tensor " + std::string(t.name) + " " + std::to_string(rows) + " " +
           std::to_string(cols) + "\n";
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        const Scalar v = t.mat ? (*t.mat)(i, j) : (*t.vec)(j);
        std::snprintf(buf, sizeof buf, "%.17g", v);
        if (j > 0) out += ' ';
        out += buf;
      }
      out += '\n';
    }
  }

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f.is_open()) throw IoError("cannot write " + tmp.string());
    f << out;
    f.flush();
    if (!f) {
      f.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ec2;
    std::filesystem::remove(tmp, ec2);
    throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " +
                  ec.message());
  }
}

ModelArchive load_archive(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f.is_open()) throw FileNotFoundError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  LineReader reader(std::move(ss).str());

  const std::string_view magic_line = reader.require("magic line");
  const std::size_t space = magic_line.find(' ');
  if (space == std::string_view::npos || magic_line.substr(0, space) != kMagic) {
    throw BadMagicError("not a " + std::string(kMagic) + " file: " + path.string());
  }
  const int version =
      parse_number<int>(reader, magic_line.substr(space + 1), "format version");
  if (version != kVersion) {
    throw UnsupportedVersionError("format version " + std::to_string(version) +
                                  " not supported (expected " + std::to_string(kVersion) +
                                  ")");
  }

  ModelArchive a;
  a.format_version = version;
  a.hyper.dim = parse_number<int>(reader, header_value(reader, "dim"), "dim");
  a.hyper.margin = parse_number<Scalar>(reader, header_value(reader, "margin"), "margin");
  a.hyper.soft_c = parse_number<Scalar>(reader, header_value(reader, "soft_c"), "soft_c");
  a.hyper.epsilon = parse_number<Scalar>(reader, header_value(reader, "epsilon"), "epsilon");
  const std::string_view mode = header_value(reader, "rank_mode");
  if (mode == "inner") {
    a.hyper.rank_mode = RankMode::inner;
  } else if (mode == "neg_l2") {
    a.hyper.rank_mode = RankMode::neg_l2;
  } else {
    throw ParseError("line 6: unknown rank_mode '" + std::string(mode) + "'");
  }
  a.hyper.baseline_mode =
      parse_number<int>(reader, header_value(reader, "baseline"), "baseline flag") != 0;
  a.meta.seed = parse_number<std::uint64_t>(reader, header_value(reader, "seed"), "seed");
  a.meta.epochs_run =
      parse_number<int>(reader, header_value(reader, "epochs_run"), "epochs_run");
  a.meta.final_loss =
      parse_number<Scalar>(reader, header_value(reader, "final_loss"), "final_loss");
  const int n_users = parse_number<int>(reader, header_value(reader, "users"), "user count");
  const int n_pois = parse_number<int>(reader, header_value(reader, "pois"), "poi count");
  if (a.hyper.dim < 1) throw ShapeMismatchError("dim must be >= 1");
  if (n_users < 1 || n_pois < 1) throw ShapeMismatchError("vocabulary counts must be >= 1");

  a.user_ids.reserve(static_cast<std::size_t>(n_users));
  for (int i = 0; i < n_users; ++i) {
    const std::string_view id = reader.require("user id");
    if (id.empty()) throw ParseError(line_msg(reader, "empty user id"));
    a.user_ids.emplace_back(id);
  }
  a.poi_ids.reserve(static_cast<std::size_t>(n_pois));
  for (int i = 0; i < n_pois; ++i) {
    const std::string_view id = reader.require("poi id");
    if (id.empty()) throw ParseError(line_msg(reader, "empty poi id"));
    a.poi_ids.emplace_back(id);
  }

  const int d = a.hyper.dim;
  a.params.user_emb.resize(n_users, d);
  a.params.poi_emb.resize(n_pois, d);
  a.params.month_emb.resize(kMonths, d);
  a.params.weekday_emb.resize(kWeekdays, d);
  a.params.hour_emb.resize(kHours, d);
  a.params.g_weight.resize(d, 3 * d);
  a.params.g_bias.resize(d);
  a.params.h_weight.resize(d, 3 * d);
  a.params.h_bias.resize(d);

  for (const TensorRef& t : tensor_list(a.params)) {
    const int rows = t.mat ? static_cast<int>(t.mat->rows()) : 1;
    const int cols = t.mat ? static_cast<int>(t.mat->cols()) : static_cast<int>(t.vec->size());
    const std::string_view line = reader.require("tensor header");
    std::ostringstream expected;
    expected << "tensor " << t.name << " " << rows << " " << cols;
    if (line != expected.str()) {
      throw ShapeMismatchError(line_msg(reader, "expected '" + expected.str() + "', got '" +
                                                    std::string(line) + "'"));
    }
    Scalar* data = t.mat ? const_cast<Mat*>(t.mat)->data() : const_cast<Vec*>(t.vec)->data();
    read_tensor_rows(reader, t.name, rows, cols, data);
  }

  std::string_view trailing;
  if (reader.next(trailing)) {
    throw ParseError(line_msg(reader, "unexpected trailing content"));
  }
  return a;
}

Vocabulary archive_users(const ModelArchive& a) {
  Vocabulary v;
  for (const auto& id : a.user_ids) v.intern(id);
  return v;
}

Vocabulary archive_pois(const ModelArchive& a) {
  Vocabulary v;
  for (const auto& id : a.poi_ids) v.intern(id);
  return v;
}

}  // namespace transtarec
