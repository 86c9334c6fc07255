#include <cmath>

#include "doctest.h"

#include "charterseg/errors.hpp"
#include "charterseg/forest.hpp"
#include "charterseg/random.hpp"
#include "oracles.hpp"

using namespace charterseg;

namespace {

std::vector<std::string> names_for(std::size_t m) {
  std::vector<std::string> out;
  for (std::size_t f = 0; f < m; ++f) out.push_back("x" + std::to_string(f));
  return out;
}

// Feature 0 carries a step signal; the rest are independent noise.
oracle::Matrix planted(Rng& rng, std::size_t n, std::size_t noise_features) {
  const std::size_t m = 1 + noise_features;
  oracle::Matrix mat{n, m, std::vector<double>(n * m), std::vector<double>(n)};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t f = 0; f < m; ++f) mat.x[r * m + f] = rng.uniform(1, 5);
    mat.y[r] = (mat.x[r * m] < 3.0 ? 0.9 : 1.1) + 0.2 * rng.normal();
  }
  return mat;
}

}  // namespace

TEST_CASE("one tree, all features, identity bootstrap equals grow") {
  Rng rng(1);
  const auto mat = oracle::random_matrix(rng, 200, 4, false);
  ForestParams params;
  params.n_trees = 1;
  params.mtry = 4;
  params.min_leaf = 5;
  params.identity_bootstrap = true;
  const auto forest = grow_forest(mat.view(), names_for(4), params);
  GrowOptions opts;
  opts.params.min_leaf = 5;
  const auto tree = grow(mat.view(), names_for(4), opts);
  CHECK(forest.trees[0].structurally_equal(tree, 1e-12));
  CHECK(forest.out_of_bag_rows(0).empty());

  // no tree has out-of-bag rows, so nothing can be predicted
  const auto oob = oob_predict(forest, mat.view());
  CHECK(oob.rows_used == 0);
  CHECK(std::isnan(oob.prediction[0]));
}

TEST_CASE("forests do not depend on the number of jobs") {
  Rng rng(2);
  const auto mat = oracle::random_matrix(rng, 150, 5, false);
  ForestParams params;
  params.n_trees = 40;
  params.seed = 123;
  const auto a = grow_forest(mat.view(), names_for(5), params);
  params.jobs = 6;
  const auto b = grow_forest(mat.view(), names_for(5), params);
  REQUIRE(a.trees.size() == b.trees.size());
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    CHECK(a.trees[t].structurally_equal(b.trees[t]));
    CHECK(a.in_bag_counts[t] == b.in_bag_counts[t]);
  }
  const auto ia = permutation_importance(a, mat.view(), 9, 1);
  const auto ib = permutation_importance(b, mat.view(), 9, 5);
  CHECK(importance_csv(ia) == importance_csv(ib));

  params.seed = 124;
  const auto c = grow_forest(mat.view(), names_for(5), params);
  CHECK(c.in_bag_counts[0] != a.in_bag_counts[0]);
}

TEST_CASE("bootstraps leave about e^-1 of the rows out") {
  Rng rng(3);
  const auto mat = oracle::random_matrix(rng, 1000, 2, false);
  ForestParams params;
  params.n_trees = 50;
  params.min_leaf = 50;
  const auto forest = grow_forest(mat.view(), names_for(2), params);
  double mean = 0;
  for (std::size_t t = 0; t < forest.trees.size(); ++t) {
    std::uint64_t drawn = 0;
    for (auto c : forest.in_bag_counts[t]) drawn += c;
    CHECK(drawn == 1000);
    CHECK(forest.trees[t].total_n() == 1000);
    mean += forest.oob_fraction(t);
  }
  mean /= 50.0;
  CHECK(mean == doctest::Approx(std::exp(-1.0)).epsilon(0.03));
}

TEST_CASE("oob prediction averages only the trees that left a row out") {
  Rng rng(4);
  const auto mat = oracle::random_matrix(rng, 120, 3, false);
  ForestParams params;
  params.n_trees = 25;
  params.min_leaf = 5;
  const auto forest = grow_forest(mat.view(), names_for(3), params);
  const auto oob = oob_predict(forest, mat.view());
  double sse = 0;
  std::size_t used = 0;
  for (std::size_t r = 0; r < mat.n; ++r) {
    double sum = 0;
    std::size_t k = 0;
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
      if (forest.in_bag_counts[t][r] != 0) continue;
      sum += forest.trees[t].predict(std::span<const double>(mat.x).subspan(r * 3, 3));
      ++k;
    }
    CHECK(oob.tree_count[r] == k);
    if (k == 0) {
      CHECK_FALSE(oob.has_prediction[r]);
      continue;
    }
    CHECK(oob.prediction[r] == doctest::Approx(sum / static_cast<double>(k)));
    sse += (mat.y[r] - sum / static_cast<double>(k)) * (mat.y[r] - sum / static_cast<double>(k));
    ++used;
  }
  CHECK(oob.rows_used == used);
  CHECK(oob.oob_mse == doctest::Approx(sse / static_cast<double>(used)));
}

TEST_CASE("the signal feature outranks noise features") {
  Rng rng(5);
  const auto mat = planted(rng, 300, 3);
  ForestParams params;
  params.n_trees = 150;
  params.seed = 42;
  params.jobs = 4;
  const auto forest = grow_forest(mat.view(), names_for(4), params);
  const auto report = permutation_importance(forest, mat.view(), 43, 4);
  CHECK(report.ranking().front() == "x0");
  CHECK(report.at("x0").pct_inc_mse > 10.0);
  for (const char* noise : {"x1", "x2", "x3"}) {
    CHECK(std::abs(report.at(noise).pct_inc_mse) < 5.0);
    CHECK(report.at(noise).std_error >= 0.0);
  }
  CHECK(report.oob_mse > 0.0);
  CHECK_THROWS_AS(report.at("x9"), ConfigError);
}

TEST_CASE("parameter checks") {
  Rng rng(6);
  const auto mat = oracle::random_matrix(rng, 50, 3, false);
  ForestParams params;
  params.n_trees = 2;
  params.mtry = 4;
  CHECK_THROWS_AS(grow_forest(mat.view(), names_for(3), params), ConfigError);
  params.mtry = 0;
  CHECK_THROWS_AS(grow_forest(mat.view(), names_for(3), params), ConfigError);
  params.mtry.reset();
  CHECK(params.resolved_mtry(3) == 1);
  CHECK(params.resolved_mtry(18) == 6);
  CHECK(params.resolved_mtry(2) == 1);
  params.n_trees = 0;
  CHECK_THROWS_AS(grow_forest(mat.view(), names_for(3), params), ConfigError);
}

TEST_CASE("importance csv round trip") {
  ImportanceReport report;
  report.features = {{"Capt", 46.6, 0.01, 0.001}, {"Asts, x", -0.125, -3e-5, 1e-6}};
  const auto back = parse_importance_csv(importance_csv(report));
  REQUIRE(back.features.size() == 2);
  CHECK(back.features[1].feature == "Asts, x");
  CHECK(back.features[0].pct_inc_mse == 46.6);
  CHECK(back.features[1].raw_delta == -3e-5);
  CHECK(back.features[1].std_error == 1e-6);
  CHECK_THROWS_AS(parse_importance_csv("name,score\nA,1\n"), SchemaError);
  CHECK_THROWS_AS(parse_importance_csv("feature,pct_inc_mse\nA,abc\n"), ParseError);
}
