#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "timbre/errors.hpp"
#include "timbre/mds.hpp"
#include "timbre/ratings.hpp"
#include "timbre/rng.hpp"

using namespace timbre;

namespace {

RatingRecord rec(const std::string& study, const std::string& a,
                 const std::string& b, double value, double lo = 0.0,
                 double hi = 1.0) {
  RatingRecord r;
  r.study_id = study;
  r.subject_id = "s1";
  r.instrument_a = a;
  r.instrument_b = b;
  r.value = value;
  r.scale_min = lo;
  r.scale_max = hi;
  return r;
}

}  // namespace

TEST_CASE("normalize_studies maps each study scale onto [0,1]") {
  auto out = normalize_studies({rec("k", "a", "b", 9.0, 1.0, 9.0),
                                rec("i", "a", "b", 0.3, 0.0, 1.0),
                                rec("m", "a", "b", 1.0, 1.0, 16.0)});
  CHECK(out[0].value == doctest::Approx(1.0));
  CHECK(out[1].value == doctest::Approx(0.3));
  CHECK(out[2].value == doctest::Approx(0.0));

  CHECK_THROWS_AS(normalize_studies({rec("bad", "a", "b", 1.0, 2.0, 2.0)}),
                  DegenerateScale);
}

TEST_CASE("normalize_studies preserves order") {
  auto out = normalize_studies({rec("k", "a", "b", 3.0, 1.0, 9.0),
                                rec("k", "a", "c", 7.0, 1.0, 9.0)});
  CHECK(out[0].value < out[1].value);
}

TEST_CASE("select_common_instruments: single study keeps its full list") {
  auto got = select_common_instruments(
      {rec("g", "a", "b", .5), rec("g", "a", "c", .5), rec("g", "b", "c", .5)});
  CHECK(got == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("select_common_instruments: disjoint studies have no common pairs") {
  CHECK_THROWS_AS(
      select_common_instruments({rec("g1", "a", "b", .5), rec("g2", "c", "d", .5)}),
      NoCommonPairs);
}

TEST_CASE("select_common_instruments: pooled pair coverage across studies") {
  // a,b,c rated across two studies; d appears once and is dropped
  std::vector<RatingRecord> rs = {
      rec("s1", "a", "b", .1), rec("s1", "b", "c", .2), rec("s1", "a", "d", .9),
      rec("s2", "a", "c", .3), rec("s2", "a", "b", .4), rec("s2", "b", "c", .5)};
  auto got = select_common_instruments(rs);
  CHECK(got == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("aggregate: mean per pair, symmetric, zero diagonal") {
  std::vector<RatingRecord> rs = {rec("s", "a", "b", 0.2), rec("s", "b", "a", 0.4),
                                  rec("s", "a", "c", 0.6), rec("s", "b", "c", 0.8)};
  auto m = aggregate(rs, {"a", "b", "c"});
  CHECK(m.values(0, 1) == doctest::Approx(0.3));
  CHECK((m.values - m.values.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.values.diagonal().cwiseAbs().maxCoeff() == 0.0);

  // order independence
  std::reverse(rs.begin(), rs.end());
  auto m2 = aggregate(rs, {"a", "b", "c"});
  CHECK((m.values - m2.values).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(aggregate({rec("s", "a", "b", .5)}, {"a", "b", "c"}),
                  MissingPair);
  // grand-mean imputation is opt-in
  auto imputed = aggregate({rec("s", "a", "b", .5)}, {"a", "b", "c"}, true);
  CHECK(imputed.values(0, 2) == doctest::Approx(0.5));
}

TEST_CASE("mds: equilateral dissimilarities embed as an equilateral triangle") {
  DissimilarityMatrix m;
  m.instruments = {"a", "b", "c"};
  m.values = Eigen::MatrixXd::Constant(3, 3, 1.0);
  m.values.diagonal().setZero();
  auto t = mds(m, 2);
  auto d = pairwise_distances(t.coords);
  CHECK(std::abs(d(0, 1) - d(0, 2)) < 1e-9);
  CHECK(std::abs(d(0, 1) - d(1, 2)) < 1e-9);
  CHECK(d(0, 1) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("mds: two points embed at +-delta/2") {
  DissimilarityMatrix m;
  m.instruments = {"a", "b"};
  m.values.resize(2, 2);
  m.values << 0.0, 0.6, 0.6, 0.0;
  auto t = mds(m, 1);
  CHECK(std::abs(t.coords(0, 0)) == doctest::Approx(0.3));
  CHECK(t.coords(0, 0) == doctest::Approx(-t.coords(1, 0)));
}

TEST_CASE("mds: zero matrix embeds at the origin") {
  DissimilarityMatrix m;
  m.instruments = {"a", "b", "c"};
  m.values = Eigen::MatrixXd::Zero(3, 3);
  auto t = mds(m, 2);
  CHECK(t.coords.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("mds: reproduces distances of Euclidean-embeddable input") {
  CounterRng rng(1234);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd pts(12, 3);
    rng.fill_uniform(pts, -2.0, 2.0);
    DissimilarityMatrix m;
    m.instruments.resize(12, "x");
    m.values = pairwise_distances(pts);
    auto t = mds(m, 3);
    auto got = pairwise_distances(t.coords);
    double worst = 0;
    for (int i = 0; i < 12; ++i)
      for (int j = i + 1; j < 12; ++j)
        worst = std::max(worst, std::abs(got(i, j) - m.values(i, j)) /
                                    m.values(i, j));
    CHECK(worst < 1e-9);
    // centered output
    CHECK(t.coords.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("mds: gram matrix is reproduced by its eigenpairs") {
  CounterRng rng(99);
  Eigen::MatrixXd a(8, 8);
  rng.fill_uniform(a, -1.0, 1.0);
  Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  Eigen::MatrixXd rebuilt = es.eigenvectors() *
                            es.eigenvalues().asDiagonal() *
                            es.eigenvectors().transpose();
  CHECK((rebuilt - sym).norm() / sym.norm() < 1e-8);
}

TEST_CASE("smacof refinement does not break a perfect embedding") {
  CounterRng rng(5);
  Eigen::MatrixXd pts(6, 2);
  rng.fill_uniform(pts, -1.0, 1.0);
  DissimilarityMatrix m;
  m.instruments.resize(6, "x");
  m.values = pairwise_distances(pts);
  auto t = mds(m, 2);
  auto before = pairwise_distances(t.coords);
  smacof_refine(t, 20);
  auto after = pairwise_distances(t.coords);
  CHECK((after - before).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("target json round trip") {
  DissimilarityMatrix m;
  m.instruments = {"a", "b", "c", "d"};
  m.values.setZero(4, 4);
  m.values << 0, .5, .7, .3, .5, 0, .4, .6, .7, .4, 0, .2, .3, .6, .2, 0;
  auto t = mds(m, 3);
  save_target_json("/tmp/timbre_target_test.json", t);
  auto u = load_target_json("/tmp/timbre_target_test.json");
  CHECK(u.instruments == t.instruments);
  CHECK((u.coords - t.coords).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((u.source_matrix.values - t.source_matrix.values).cwiseAbs().maxCoeff() <
        1e-12);
  std::remove("/tmp/timbre_target_test.json");
}

TEST_CASE("ratings csv parsing") {
  {
    std::ofstream os("/tmp/timbre_ratings_test.csv");
    os << "study,subject,instrument_a,instrument_b,value,scale_min,scale_max\n";
    os << "g,s1,piano,cello,0.4,0,1\n";
    os << "g,s2,piano,cello,0.8,0,1\n";
  }
  auto rs = load_ratings_csv("/tmp/timbre_ratings_test.csv");
  REQUIRE(rs.size() == 2);
  CHECK(rs[0].instrument_a == "piano");
  CHECK(rs[1].value == doctest::Approx(0.8));
  std::remove("/tmp/timbre_ratings_test.csv");
  CHECK_THROWS_AS(load_ratings_csv("/tmp/definitely_missing.csv"), IoError);
}
