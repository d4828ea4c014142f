#include "fixtures.hpp"

#include <doctest.h>

#include <cstring>
#include <fstream>
#include <set>

using namespace protolp;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kIo;
}

// Store whose values are exactly representable in float32.
FeatureStore random_store(std::mt19937_64& rng, int classes, int per_class, int dim) {
  Matrix x = fixtures::gaussian(rng, classes * per_class, dim).cast<float>().cast<double>();
  Labels y;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) y.push_back(c * 3 + 1);
  }
  return FeatureStore(std::move(x), std::move(y));
}

}  // namespace

TEST_CASE("csv store with three rows") {
  const auto path = fixtures::temp_path("three.csv");
  write_text(path, "1.5,2\n-3,4e-1\n0,7,1\n");
  // Third row has one feature too many.
  CHECK(kind_of([&] { load_features(path, FeatureFormat::kCsv); }) == ErrorKind::kFormat);

  write_text(path, "1.5,2,0\n-3,4e-1,0\n0,7,1\n");
  const FeatureStore s = load_features(path, FeatureFormat::kCsv);
  CHECK(s.size() == 3);
  CHECK(s.dim() == 2);
  CHECK(s.class_index().at(0) == std::vector<std::size_t>{0, 1});
  CHECK(s.class_index().at(1) == std::vector<std::size_t>{2});
  CHECK(s.features()(1, 1) == doctest::Approx(0.4));
  std::filesystem::remove(path);
}

TEST_CASE("csv rejects non-finite values and garbage") {
  const auto path = fixtures::temp_path("bad.csv");
  write_text(path, "1,nan,0\n");
  CHECK(kind_of([&] { load_features(path, FeatureFormat::kCsv); }) == ErrorKind::kData);
  write_text(path, "1,x,0\n");
  CHECK(kind_of([&] { load_features(path, FeatureFormat::kCsv); }) == ErrorKind::kFormat);
  write_text(path, "");
  CHECK(kind_of([&] { load_features(path, FeatureFormat::kCsv); }) == ErrorKind::kConsistency);
  std::filesystem::remove(path);
  CHECK(kind_of([&] { load_features(path, FeatureFormat::kCsv); }) == ErrorKind::kIo);
}

TEST_CASE("plpf header checks") {
  std::mt19937_64 rng(3);
  std::string bytes = encode_plpf(random_store(rng, 2, 3, 4));
  CHECK(bytes.size() == 4 + 4 + 8 + 8 + 6 * 4 * 4 + 6 * 4);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK(kind_of([&] { decode_plpf(bad); }) == ErrorKind::kFormat);
  bad = bytes;
  bad[4] = 2;
  CHECK(kind_of([&] { decode_plpf(bad); }) == ErrorKind::kFormat);
  CHECK(kind_of([&] { decode_plpf(bytes.substr(0, 10)); }) == ErrorKind::kFormat);
  CHECK(kind_of([&] { decode_plpf(bytes + "x"); }) == ErrorKind::kConsistency);
  CHECK(kind_of([&] { decode_plpf(bytes.substr(0, bytes.size() - 1)); }) ==
        ErrorKind::kConsistency);

  // n = 0 with an otherwise valid header.
  std::string empty = bytes.substr(0, 24);
  for (int i = 8; i < 16; ++i) empty[static_cast<std::size_t>(i)] = 0;
  CHECK(kind_of([&] { decode_plpf(empty); }) == ErrorKind::kConsistency);
}

TEST_CASE("plpf layout is little-endian row-major") {
  FeatureStore s(Matrix{{1.0, 2.0}, {3.0, -0.5}}, Labels{7, 2});
  const std::string b = encode_plpf(s);
  CHECK(b.substr(0, 4) == "PLPF");
  CHECK(static_cast<unsigned char>(b[4]) == 1);
  CHECK(static_cast<unsigned char>(b[8]) == 2);   // n
  CHECK(static_cast<unsigned char>(b[16]) == 2);  // D
  float second = 0.0f;
  std::memcpy(&second, b.data() + 24 + 4, 4);
  CHECK(second == 2.0f);
  CHECK(static_cast<unsigned char>(b[24 + 16]) == 7);
  CHECK(static_cast<unsigned char>(b[24 + 20]) == 2);
}

TEST_CASE("plpf round trip is byte-identical") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureStore s = random_store(rng, 1 + trial % 4, 1 + trial % 5, 1 + trial % 7);
    const auto path = fixtures::temp_path("rt.plpf");
    write_features(s, path, FeatureFormat::kPlpf);
    const std::string original = read_bytes(path);
    const auto again = fixtures::temp_path("rt2.plpf");
    write_features(load_features(path, FeatureFormat::kPlpf), again, FeatureFormat::kPlpf);
    CHECK(read_bytes(again) == original);
    CHECK(load_features(again, FeatureFormat::kPlpf).features() == s.features());
    std::filesystem::remove(path);
    std::filesystem::remove(again);
  }
}

TEST_CASE("csv round trip keeps values") {
  std::mt19937_64 rng(5);
  const FeatureStore s = random_store(rng, 3, 4, 5);
  const auto path = fixtures::temp_path("rt.csv");
  write_features(s, path, FeatureFormat::kCsv);
  const FeatureStore back = load_features(path, FeatureFormat::kCsv);
  CHECK(back.features() == s.features());
  CHECK(back.labels() == s.labels());
  std::filesystem::remove(path);
}

TEST_CASE("store validation") {
  CHECK(kind_of([] { FeatureStore(Matrix(0, 2), Labels{}); }) == ErrorKind::kConsistency);
  CHECK(kind_of([] { FeatureStore(Matrix::Zero(2, 2), Labels{0}); }) == ErrorKind::kConsistency);
  Matrix x = Matrix::Zero(2, 2);
  x(1, 0) = std::numeric_limits<double>::infinity();
  CHECK(kind_of([&] { FeatureStore(x, Labels{0, 1}); }) == ErrorKind::kData);
}

TEST_CASE("l2 normalisation") {
  FeatureStore s(Matrix{{3.0, 4.0}, {0.0, 0.0}, {-1.0, 2.0}}, Labels{0, 0, 1});
  const FeatureStore out = preprocess(s, preset_preprocess("l2"));
  CHECK(out.features()(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(out.features()(0, 1) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(out.features().row(1).norm() == 0.0);
  CHECK(out.labels() == s.labels());

  std::mt19937_64 rng(2);
  const FeatureStore r = random_store(rng, 3, 10, 6);
  const FeatureStore once = preprocess(r, preset_preprocess("l2"));
  const FeatureStore twice = preprocess(once, preset_preprocess("l2"));
  for (Eigen::Index i = 0; i < once.features().rows(); ++i) {
    CHECK(std::abs(once.features().row(i).norm() - 1.0) < 1e-9);
  }
  CHECK((once.features() - twice.features()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("power transform then l2") {
  FeatureStore s(Matrix{{1.0, 1.0}, {4.0, 0.0}}, Labels{0, 1});
  PreprocessSpec spec{{PowerTransform{0.5, 0.0}, L2Normalize{}}};
  const FeatureStore out = preprocess(s, spec);
  CHECK(out.features()(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(out.features()(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(out.features()(1, 0) == doctest::Approx(1.0));

  FeatureStore neg(Matrix{{-0.1, 1.0}}, Labels{0});
  CHECK(kind_of([&] { preprocess(neg, preset_preprocess("pt+l2")); }) == ErrorKind::kData);
  // Within -epsilon is accepted.
  FeatureStore edge(Matrix{{-5e-7, 1.0}}, Labels{0});
  CHECK(preprocess(edge, preset_preprocess("pt+l2")).features().allFinite());
  CHECK(kind_of([&] { preprocess(s, PreprocessSpec{{PowerTransform{0.0, 0.0}}}); }) ==
        ErrorKind::kConfig);
}

TEST_CASE("centring with the column mean") {
  std::mt19937_64 rng(9);
  const FeatureStore s = random_store(rng, 4, 7, 5);
  const FeatureStore out = preprocess(s, PreprocessSpec{{Center{column_mean(s)}}});
  CHECK(out.features().colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
  CHECK(kind_of([&] { preprocess(s, PreprocessSpec{{Center{Vector::Zero(3)}}}); }) ==
        ErrorKind::kConsistency);
  CHECK(kind_of([] { preset_preprocess("center+l2"); }) == ErrorKind::kConfig);
  CHECK(kind_of([] { preset_preprocess("pca"); }) == ErrorKind::kConfig);
}

namespace {

FeatureStore pool(int classes, int per_class) {
  std::mt19937_64 rng(1);
  return random_store(rng, classes, per_class, 3);
}

std::vector<int> histogram(const Labels& y, int ways) {
  std::vector<int> h(static_cast<std::size_t>(ways), 0);
  for (Label l : y) ++h[static_cast<std::size_t>(l)];
  return h;
}

}  // namespace

TEST_CASE("balanced 5-way 1-shot episode") {
  const FeatureStore s = pool(10, 40);
  SamplerConfig cfg;
  cfg.seed = 42;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const Episode e = sample_episode(s, cfg, i);
    CHECK(e.n_support() == 5);
    CHECK(e.n_query() == 75);
    CHECK_FALSE(e.unlabeled_x.has_value());
    CHECK(histogram(*e.truth_query_y, 5) == std::vector<int>(5, 15));
    CHECK(histogram(e.support_y, 5) == std::vector<int>(5, 1));
    CHECK(std::is_sorted(e.classes.begin(), e.classes.end()));
    for (std::size_t j = 0; j < e.query_rows.size(); ++j) {
      const Label local = (*e.truth_query_y)[j];
      CHECK(s.labels()[e.query_rows[j]] == e.classes[static_cast<std::size_t>(local)]);
      CHECK(e.query_x.row(static_cast<Eigen::Index>(j)) ==
            s.features().row(static_cast<Eigen::Index>(e.query_rows[j])));
    }
  }
}

TEST_CASE("dirichlet query counts") {
  const FeatureStore s = pool(8, 120);
  SamplerConfig cfg;
  cfg.mode = DirichletQueries{2.0};
  cfg.seed = 7;
  std::vector<double> mean(5, 0.0);
  const int draws = 1000;
  bool varied = false;
  for (int i = 0; i < draws; ++i) {
    const Episode e = sample_episode(s, cfg, static_cast<std::uint64_t>(i));
    const auto h = histogram(*e.truth_query_y, 5);
    int total = 0;
    for (std::size_t k = 0; k < 5; ++k) {
      CHECK(h[k] >= 0);
      total += h[k];
      mean[k] += h[k];
    }
    CHECK(total == 75);
    varied = varied || h != std::vector<int>(5, 15);
  }
  CHECK(varied);
  for (double m : mean) CHECK(std::abs(m / draws - 15.0) < 0.05 * 15.0);
}

TEST_CASE("semi-supervised pool is disjoint") {
  const FeatureStore s = pool(6, 60);
  SamplerConfig cfg;
  cfg.shots = 5;
  cfg.unlabeled_per_class = 30;
  for (std::uint64_t i = 0; i < 30; ++i) {
    const Episode e = sample_episode(s, cfg, i);
    REQUIRE(e.unlabeled_x.has_value());
    CHECK(e.n_unlabeled() == 150);
    std::set<std::size_t> seen;
    for (auto r : e.support_rows) seen.insert(r);
    for (auto r : e.query_rows) seen.insert(r);
    for (auto r : e.unlabeled_rows) seen.insert(r);
    CHECK(seen.size() == 25 + 75 + 150);
    CHECK(e.stacked().rows() == 250);
  }
}

TEST_CASE("episodes are a pure function of seed and index") {
  const FeatureStore s = pool(10, 30);
  SamplerConfig cfg;
  cfg.seed = 99;
  const Episode a = sample_episode(s, cfg, 17);
  const Episode b = sample_episode(s, cfg, 17);
  CHECK(a.query_rows == b.query_rows);
  CHECK(a.support_rows == b.support_rows);
  CHECK(a.query_x == b.query_x);
  const Episode c = sample_episode(s, cfg, 18);
  CHECK(a.query_rows != c.query_rows);
  cfg.seed = 100;
  CHECK(sample_episode(s, cfg, 17).query_rows != a.query_rows);
}

TEST_CASE("sampling errors") {
  SamplerConfig cfg;
  CHECK(kind_of([&] { sample_episode(pool(4, 30), cfg, 0); }) == ErrorKind::kSampling);
  try {
    sample_episode(pool(5, 10), cfg, 0);
    FAIL("expected a sampling error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSampling);
    CHECK(std::string(e.what()).find("class ") != std::string::npos);
  }
  cfg.queries_total = 74;
  CHECK(kind_of([&] { validate(cfg); }) == ErrorKind::kConfig);
  CHECK(kind_of([] { parse_query_distribution("dirichlet:-1"); }) == ErrorKind::kConfig);
  CHECK(std::get<DirichletQueries>(parse_query_distribution("dirichlet:2.5")).gamma == 2.5);
}
