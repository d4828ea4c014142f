#include "protolp/feature_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace protolp {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kConsistency: return "consistency error";
    case ErrorKind::kSampling: return "sampling error";
    case ErrorKind::kSolver: return "solver error";
    case ErrorKind::kContract: return "contract error";
    case ErrorKind::kIo: return "io error";
  }
  return "error";
}

FeatureStore::FeatureStore(Matrix features, Labels labels)
    : features_(std::move(features)), labels_(std::move(labels)) {
  if (features_.rows() == 0 || labels_.empty()) {
    fail(ErrorKind::kConsistency, "feature store is empty");
  }
  if (features_.cols() == 0) fail(ErrorKind::kConsistency, "feature dimension is zero");
  if (static_cast<std::size_t>(features_.rows()) != labels_.size()) {
    fail(ErrorKind::kConsistency, "label count " + std::to_string(labels_.size()) +
                                      " does not match row count " +
                                      std::to_string(features_.rows()));
  }
  if (!features_.allFinite()) fail(ErrorKind::kData, "non-finite feature value");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0) {
      fail(ErrorKind::kData, "negative label at row " + std::to_string(i));
    }
    class_index_[labels_[i]].push_back(i);
  }
}

std::optional<FeatureFormat> parse_feature_format(std::string_view name) {
  if (name == "plpf") return FeatureFormat::kPlpf;
  if (name == "csv") return FeatureFormat::kCsv;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// PLPF: "PLPF" | u32 version | u64 n | u64 D | n*D f32 | n u32, little endian.
// ---------------------------------------------------------------------------

namespace {

constexpr std::array<char, 4> kMagic = {'P', 'L', 'P', 'F'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 8;

template <typename T>
T read_le(const char* p) {
  static_assert(std::is_unsigned_v<T>);
  T value = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    value |= static_cast<T>(static_cast<unsigned char>(p[b])) << (8 * b);
  }
  return value;
}

template <typename T>
void write_le(std::string& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    out.push_back(static_cast<char>((value >> (8 * b)) & 0xFFu));
  }
}

}  // namespace

FeatureStore decode_plpf(std::string_view bytes) {
  if (bytes.size() < kHeaderBytes) fail(ErrorKind::kFormat, "PLPF header truncated");
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    fail(ErrorKind::kFormat, "bad PLPF magic");
  }
  const auto version = read_le<std::uint32_t>(bytes.data() + 4);
  if (version != kVersion) {
    fail(ErrorKind::kFormat, "unsupported PLPF version " + std::to_string(version));
  }
  const auto n = read_le<std::uint64_t>(bytes.data() + 8);
  const auto d = read_le<std::uint64_t>(bytes.data() + 16);
  if (n == 0) fail(ErrorKind::kConsistency, "PLPF file holds no rows");
  if (d == 0) fail(ErrorKind::kConsistency, "PLPF file has zero feature dimension");

  const std::uint64_t payload = bytes.size() - kHeaderBytes;
  // Guard the products below against overflow from a corrupt header.
  if (n > payload / 4 || d > payload / 4 / n) {
    fail(ErrorKind::kConsistency, "PLPF payload too short for declared shape");
  }
  const std::uint64_t expected = n * d * 4 + n * 4;
  if (payload != expected) {
    fail(ErrorKind::kConsistency, "PLPF payload is " + std::to_string(payload) +
                                      " bytes, expected " + std::to_string(expected));
  }

  Matrix features(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const char* p = bytes.data() + kHeaderBytes;
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint64_t j = 0; j < d; ++j, p += 4) {
      features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::bit_cast<float>(read_le<std::uint32_t>(p));
    }
  }
  Labels labels(n);
  for (std::uint64_t i = 0; i < n; ++i, p += 4) {
    const auto raw = read_le<std::uint32_t>(p);
    if (raw > static_cast<std::uint32_t>(std::numeric_limits<Label>::max())) {
      fail(ErrorKind::kData, "label out of range at row " + std::to_string(i));
    }
    labels[i] = static_cast<Label>(raw);
  }
  return FeatureStore(std::move(features), std::move(labels));
}

std::string encode_plpf(const FeatureStore& store) {
  const auto& x = store.features();
  std::string out;
  out.reserve(kHeaderBytes + static_cast<std::size_t>(x.size()) * 4 + store.size() * 4);
  out.append(kMagic.data(), kMagic.size());
  write_le<std::uint32_t>(out, kVersion);
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(x.rows()));
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      write_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(x(i, j))));
    }
  }
  for (Label label : store.labels()) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(label));
  return out;
}

// ---------------------------------------------------------------------------
// CSV: D numeric columns then an integer label, no header.
// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

FeatureStore parse_csv(std::istream& in) {
  std::vector<double> values;
  Labels labels;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest = trim(line);
    if (rest.empty()) continue;

    std::vector<std::string_view> fields;
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(trim(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() < 2) {
      fail(ErrorKind::kFormat, "line " + std::to_string(line_no) + ": need features and a label");
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width) {
      fail(ErrorKind::kFormat, "line " + std::to_string(line_no) + ": expected " +
                                   std::to_string(width) + " columns");
    }
    for (std::size_t j = 0; j + 1 < fields.size(); ++j) {
      double v = 0.0;
      const auto f = fields[j];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        fail(ErrorKind::kFormat, "line " + std::to_string(line_no) + ": bad number '" +
                                     std::string(f) + "'");
      }
      if (!std::isfinite(v)) {
        fail(ErrorKind::kData, "line " + std::to_string(line_no) + ": non-finite value");
      }
      values.push_back(v);
    }
    Label label = 0;
    const auto f = fields.back();
    const auto res = std::from_chars(f.data(), f.data() + f.size(), label);
    if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
      fail(ErrorKind::kFormat, "line " + std::to_string(line_no) + ": bad label '" +
                                   std::string(f) + "'");
    }
    labels.push_back(label);
  }
  if (labels.empty()) fail(ErrorKind::kConsistency, "CSV file holds no rows");

  const auto n = static_cast<Eigen::Index>(labels.size());
  const auto d = static_cast<Eigen::Index>(width - 1);
  Matrix features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                   Eigen::RowMajor>>(values.data(), n, d);
  return FeatureStore(std::move(features), std::move(labels));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

FeatureStore load_features(const std::filesystem::path& path, FeatureFormat format) {
  if (format == FeatureFormat::kPlpf) return decode_plpf(read_file(path));
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return parse_csv(in);
}

void write_features(const FeatureStore& store, const std::filesystem::path& path,
                    FeatureFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  if (format == FeatureFormat::kPlpf) {
    const std::string bytes = encode_plpf(store);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  } else {
    const auto& x = store.features();
    char buf[32];
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const auto res = std::to_chars(buf, buf + sizeof(buf), x(i, j));
        out.write(buf, res.ptr - buf);
        out.put(',');
      }
      out << store.labels()[static_cast<std::size_t>(i)] << '\n';
    }
  }
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace protolp
