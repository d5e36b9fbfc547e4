#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "dpglm/baselines.hpp"
#include "dpglm/data_io.hpp"
#include "dpglm/errors.hpp"
#include "helpers.hpp"

using namespace dpglm;
using namespace dpglm::test;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("dpglm_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

DataSchema level_schema() {
  DataSchema s;
  s.columns = {continuous("x"), {"grade", ColumnKind::categorical(2), {"low", "high"}},
               {"y", ColumnKind::continuous_response(), {}}};
  s.response_index = 2;
  return s;
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::ArrayXd x = a.array() - a.mean(), y = b.array() - b.mean();
  return (x * y).sum() / std::sqrt((x * x).sum() * (y * y).sum());
}

std::string cmb_text(std::size_t rows) {
  std::string out = "# multipole power\n";
  for (std::size_t i = 0; i < rows; ++i) out += std::to_string(i + 2) + " " + std::to_string(1000.0 + 0.5 * static_cast<double>(i)) + "\n";
  return out;
}

}  // namespace

TEST_SUITE("data_io") {
  TEST_CASE("two rows, one covariate") {
    DataSchema s;
    s.columns = {continuous("x"), {"y", ColumnKind::continuous_response(), {}}};
    s.response_index = 1;
    const Dataset d = parse_csv("x,y\n0.5,1\n-2,3.25\n", s);
    CHECK(d.size() == 2);
    CHECK(d.dims() == 1);
    CHECK(d.covariates(1, 0) == -2.0);
    CHECK(d.responses[1] == 3.25);
  }

  TEST_CASE("declared levels map in order; undeclared levels are rejected") {
    const DataSchema s = level_schema();
    const Dataset d = parse_csv("x,grade,y\n1,high,2\n0,low,1\n", s);
    CHECK(d.covariates(0, 1) == 1.0);
    CHECK(d.covariates(1, 1) == 0.0);
    try {
      parse_csv("x,grade,y\n1,medium,2\n", s);
      FAIL("expected UnknownLevel");
    } catch (const UnknownLevel& e) {
      CHECK(std::string(e.what()).find("medium") != std::string::npos);
    }
  }

  TEST_CASE("malformed cells and headers") {
    const DataSchema s = level_schema();
    CHECK_THROWS_AS(parse_csv("x,grade,y\nabc,low,2\n", s), ParseError);
    CHECK_THROWS_AS(parse_csv("x,grade,y\n1,low\n", s), ParseError);
    CHECK_THROWS_AS(parse_csv("x,level,y\n1,low,2\n", s), ValidationError);
  }

  TEST_CASE("files round trip exactly") {
    TempDir tmp;
    Rng rng(1);
    Eigen::MatrixXd x(50, 2);
    Eigen::VectorXd y(50);
    for (Eigen::Index i = 0; i < 50; ++i) {
      x(i, 0) = rng.normal() * std::pow(10.0, rng.normal(0, 5));
      x(i, 1) = static_cast<double>(rng.uniform_index(2));
      y[i] = rng.normal() / 3.0;
    }
    Dataset d;
    d.schema = level_schema();
    d.covariates = x;
    d.responses = y;
    write_csv(d, tmp.path / "d.csv");
    write_schema(d.schema, tmp.path / "d.json");
    const Dataset back = load_csv(tmp.path / "d.csv", tmp.path / "d.json");
    CHECK(back.covariates == d.covariates);
    CHECK(back.responses == d.responses);
    CHECK(back.schema.columns[1].level_names == d.schema.columns[1].level_names);
    for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -1e-310, 5e-324}) CHECK(std::strtod(format_real(v).c_str(), nullptr) == v);
  }

  TEST_CASE("a split partitions the rows") {
    SplitPlan plan;
    plan.train_sizes = {8};
    plan.replications = 1;
    plan.test_size = 2;
    const auto splits = make_splits(10, plan);
    REQUIRE(splits.size() == 1);
    std::set<std::size_t> all(splits[0].train.begin(), splits[0].train.end());
    all.insert(splits[0].test.begin(), splits[0].test.end());
    CHECK(all.size() == 10);
    CHECK(*all.rbegin() == 9);
  }

  TEST_CASE("splits are deterministic, disjoint and distinct") {
    SplitPlan plan;
    plan.train_sizes = {30, 50};
    plan.replications = 5;
    plan.seed = 7;
    const auto a = make_splits(200, plan), b = make_splits(200, plan);
    REQUIRE(a.size() == 10);
    std::set<std::vector<std::size_t>> distinct;
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].train == b[k].train);
      CHECK(a[k].test == b[k].test);
      std::set<std::size_t> tr(a[k].train.begin(), a[k].train.end());
      CHECK(tr.size() == a[k].train.size());
      for (std::size_t i : a[k].test) CHECK(tr.count(i) == 0);
      distinct.insert(a[k].train);
    }
    CHECK(distinct.size() == 10);
    plan.seed = 8;
    CHECK(make_splits(200, plan)[0].train != a[0].train);
  }

  TEST_CASE("bad split plans") {
    SplitPlan plan;
    plan.train_sizes = {8};
    plan.test_size = 5;
    CHECK_THROWS_AS(make_splits(10, plan), InsufficientData);
    plan.train_sizes = {};
    CHECK_THROWS_AS(make_splits(10, plan), ConfigError);
    plan.train_sizes = {2};
    plan.replications = 0;
    CHECK_THROWS_AS(make_splits(10, plan), ConfigError);
  }

  TEST_CASE("heteroscedastic generator moments") {
    const Dataset d = synth_heteroscedastic(10000, 2);
    std::vector<double> left, right;
    for (Eigen::Index i = 0; i < 10000; ++i) {
      const double x = d.covariates(i, 0);
      CHECK((x > 0.0 && x < 1.0));
      (x < 0.5 ? left : right).push_back(d.responses[i] - heteroscedastic_mean(x));
    }
    const double ratio = std::sqrt(variance(right) / variance(left));
    CHECK(ratio >= 8.0);
    CHECK(ratio <= 12.5);
    for (const auto* r : {&left, &right}) {
      const double t = mean(*r) / std::sqrt(variance(*r) / static_cast<double>(r->size()));
      CHECK(std::abs(t) < 4.0);
    }
    const Dataset again = synth_heteroscedastic(10000, 2);
    CHECK(again.responses == d.responses);
  }

  TEST_CASE("spurious-dimension generator") {
    CHECK(synth_spurious(10, 0, 1).data.dims() == 1);
    const SpuriousData s = synth_spurious(10000, 3, 3);
    CHECK(s.data.dims() == 4);
    for (Eigen::Index j = 1; j < 4; ++j) CHECK(std::abs(correlation(s.data.responses, s.data.covariates.col(j))) < 0.03);
    for (int c = 0; c < SpuriousModel::kComponents; ++c) {
      std::vector<Eigen::Index> rows;
      for (Eigen::Index i = 0; i < 10000; ++i)
        if (s.components[static_cast<std::size_t>(i)] == c) rows.push_back(i);
      Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), 2);
      Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        design.row(static_cast<Eigen::Index>(r)) << 1.0, s.data.covariates(rows[r], 0);
        y[static_cast<Eigen::Index>(r)] = s.data.responses[rows[r]];
      }
      const OlsModel m = fit_ols(design, y);
      CHECK(std::abs(m.beta[1] - SpuriousModel::kSlopes[c]) < 0.05);
    }
  }

  TEST_CASE("benchmark registry shapes") {
    CHECK(benchmark_info("ccs").rows == 1030);
    CHECK(benchmark_info("solar").rows == 1389);
    CHECK(benchmark_info("cmb").rows == 899);
    CHECK(benchmark_schema("ccs").num_covariates() == 8);
    CHECK(benchmark_schema("cmb").num_covariates() == 1);
    const DataSchema solar = benchmark_schema("solar");
    CHECK(solar.columns[solar.response_index].kind.type == ColumnType::CountResponse);
    for (std::size_t j = 0; j < solar.num_covariates(); ++j) CHECK(solar.columns[j].kind.type == ColumnType::Categorical);
    CHECK_THROWS_AS(benchmark_info("iris"), ConfigError);
  }

  TEST_CASE("raw flare records sum the three flare classes") {
    const Dataset d = parse_benchmark_raw("solar", {"C S O 1 2 1 1 2 1 2 0 1 2\nH A X 1 3 1 1 1 1 1 0 0 0\nbad line\n"});
    REQUIRE(d.size() == 2);
    CHECK(d.responses[0] == 3.0);
    CHECK(d.covariates(0, 0) == 2.0);  // class C
    CHECK(d.covariates(1, 1) == 3.0);  // spot size A
  }

  TEST_CASE("a supplied file is validated, cached and checksummed") {
    TempDir tmp;
    write_file(tmp.path / "cmb.txt", cmb_text(899));
    const Dataset d = fetch_benchmark("cmb", tmp.path, tmp.path / "cmb.txt");
    CHECK(d.size() == 899);
    CHECK(fs::exists(tmp.path / "cmb" / "data.csv"));
    CHECK(fs::exists(tmp.path / "cmb" / "checksum.txt"));
    const Dataset cached = fetch_benchmark("cmb", tmp.path);
    CHECK(cached.responses == d.responses);

    std::ofstream(tmp.path / "cmb" / "data.csv", std::ios::app) << "901,1.5\n";
    CHECK_THROWS_AS(fetch_benchmark("cmb", tmp.path), ChecksumMismatch);
    write_file(tmp.path / "cmb" / "checksum.txt", sha256_hex(read_file(tmp.path / "cmb" / "data.csv")));
    CHECK_THROWS_AS(fetch_benchmark("cmb", tmp.path), RowCountMismatch);

    write_file(tmp.path / "short.txt", cmb_text(40));
    CHECK_THROWS_AS(fetch_benchmark("cmb", tmp.path / "other", tmp.path / "short.txt"), RowCountMismatch);
  }

  TEST_CASE("no cache and no download route") {
    TempDir tmp;
    CHECK_THROWS_AS(fetch_benchmark("cmb", tmp.path), NetworkUnavailable);
  }

  TEST_CASE("SHA-256 of a known string") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }
}
