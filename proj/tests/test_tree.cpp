#include <cmath>
#include <numeric>

#include "doctest.h"

#include "charterseg/errors.hpp"
#include "charterseg/random.hpp"
#include "charterseg/tree.hpp"
#include "oracles.hpp"

using namespace charterseg;

namespace {

std::vector<std::string> names_for(std::size_t m) {
  std::vector<std::string> out;
  for (std::size_t f = 0; f < m; ++f) out.push_back("x" + std::to_string(f));
  return out;
}

RegressionTree grow_all(const oracle::Matrix& mat, std::size_t min_leaf,
                        std::optional<std::size_t> depth = std::nullopt) {
  GrowOptions opts;
  opts.params.min_leaf = min_leaf;
  opts.params.max_depth = depth;
  return grow(mat.view(), names_for(mat.m), opts);
}

// Sum of leaf SSEs recomputed from the training rows routed through the tree.
double routed_sse(const RegressionTree& tree, const oracle::Matrix& mat) {
  std::map<int, std::vector<double>> by_leaf;
  for (std::size_t r = 0; r < mat.n; ++r) {
    by_leaf[tree.leaf_for(std::span<const double>(mat.x).subspan(r * mat.m, mat.m))].push_back(mat.y[r]);
  }
  double total = 0;
  for (const auto& [leaf, ys] : by_leaf) total += oracle::sse_of(ys);
  return total;
}

}  // namespace

TEST_CASE("node_sse examples") {
  const auto a = node_sse(std::vector<double>{5, 5, 5});
  CHECK(a.mean == 5);
  CHECK(a.sse == 0);
  const auto b = node_sse(std::vector<double>{0, 10});
  CHECK(b.mean == 5);
  CHECK(b.sse == 50);
  CHECK(node_sse(std::vector<double>{0, 0, 10, 10}).sse == 100);
  CHECK_THROWS_AS(node_sse(std::vector<double>{}), DomainError);
}

TEST_CASE("best_split on a perfectly separable column") {
  oracle::Matrix mat{4, 1, {1, 2, 3, 4}, {0, 0, 10, 10}};
  const auto s = best_split(mat.view(), 1);
  REQUIRE(s);
  CHECK(s->rule.feature == 0);
  CHECK(s->rule.threshold == 2.5);
  CHECK(s->gain == doctest::Approx(100));

  oracle::Matrix flat{4, 1, {1, 2, 3, 4}, {7, 7, 7, 7}};
  CHECK_FALSE(best_split(flat.view(), 1));
  CHECK_FALSE(best_split(mat.view(), 3));  // n < 2 * min_leaf
}

TEST_CASE("duplicate features resolve to the lowest index") {
  oracle::Matrix mat{4, 2, {1, 1, 2, 2, 3, 3, 4, 4}, {0, 0, 10, 10}};
  const auto s = best_split(mat.view(), 1);
  REQUIRE(s);
  CHECK(s->rule.feature == 0);
}

TEST_CASE("best_split agrees with the brute-force oracle") {
  Rng rng(17);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 10 + rng.index(80);
    const std::size_t m = 1 + rng.index(5);
    const std::size_t min_leaf = 1 + rng.index(8);
    const auto mat = oracle::random_matrix(rng, n, m, trial % 3 == 0);
    const auto got = best_split(mat.view(), min_leaf);
    const auto want = oracle::brute_force_split(mat, min_leaf);
    REQUIRE(got.has_value() == want.has_value());
    if (!got) continue;
    ++checked;
    CHECK(got->rule.feature == want->feature);
    CHECK(got->rule.threshold == want->threshold);
    CHECK(got->gain == doctest::Approx(want->gain).epsilon(1e-9));
  }
  CHECK(checked > 250);
}

TEST_CASE("grow on four rows") {
  oracle::Matrix mat{4, 1, {1, 2, 3, 4}, {0, 0, 10, 10}};
  const auto tree = grow_all(mat, 1);
  REQUIRE(tree.nodes().size() == 3);
  CHECK(tree.root().split.threshold == 2.5);
  CHECK(tree.node(tree.root().left).mean == 0);
  CHECK(tree.node(tree.root().right).mean == 10);
  CHECK(tree.leaf_count() == 2);
  CHECK(tree.depth() == 1);
  CHECK(tree.total_n() == 4);
  CHECK_THROWS_AS(grow_all(mat, 5), EmptyModelError);
}

TEST_CASE("predict follows the strict less-than rule") {
  oracle::Matrix mat{4, 1, {1, 2, 3, 4}, {0, 0, 10, 10}};
  const auto tree = grow_all(mat, 1);
  CHECK(tree.predict(std::vector<double>{2.4999}) == 0);
  CHECK(tree.predict(std::vector<double>{2.5}) == 10);
  CHECK(tree.predict(std::vector<double>{-50}) == 0);
  CHECK(tree.predict(mat.view()) == std::vector<double>{0, 0, 10, 10});
}

TEST_CASE("grown trees respect min_leaf and decompose SSE") {
  Rng rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t min_leaf = 1 + rng.index(10);
    const auto mat = oracle::random_matrix(rng, 60 + rng.index(200), 1 + rng.index(6), false);
    const auto tree = grow_all(mat, min_leaf);
    double leaf_sse = 0;
    std::size_t leaf_n = 0;
    for (int leaf : tree.leaves()) {
      CHECK(tree.node(leaf).n >= min_leaf);
      leaf_sse += tree.node(leaf).sse;
      leaf_n += tree.node(leaf).n;
    }
    CHECK(leaf_n == mat.n);
    CHECK(leaf_sse == doctest::Approx(routed_sse(tree, mat)).epsilon(1e-9));
    CHECK(leaf_sse <= oracle::sse_of(mat.y) + 1e-9);
    for (const auto& node : tree.nodes()) {
      if (node.is_leaf()) continue;
      const auto& l = tree.node(node.left);
      const auto& r = tree.node(node.right);
      CHECK(l.n + r.n == node.n);
      CHECK(l.sse + r.sse <= node.sse + 1e-9);
    }
  }
}

TEST_CASE("splits are invariant to affine maps of the response and row order") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mat = oracle::random_matrix(rng, 150, 4, false);
    const auto base = grow_all(mat, 5);

    auto shifted = mat;
    for (auto& y : shifted.y) y = 3.0 * y + 100.0;
    const auto moved = grow_all(shifted, 5);
    REQUIRE(moved.nodes().size() == base.nodes().size());
    for (std::size_t i = 0; i < base.nodes().size(); ++i) {
      CHECK(moved.nodes()[i].split == base.nodes()[i].split);
      CHECK(moved.nodes()[i].n == base.nodes()[i].n);
      CHECK(moved.nodes()[i].mean == doctest::Approx(3.0 * base.nodes()[i].mean + 100.0));
    }

    std::vector<std::size_t> perm(mat.n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    oracle::Matrix permuted = mat;
    for (std::size_t r = 0; r < mat.n; ++r) {
      permuted.y[r] = mat.y[perm[r]];
      for (std::size_t f = 0; f < mat.m; ++f) permuted.x[r * mat.m + f] = mat.at(perm[r], f);
    }
    CHECK(grow_all(permuted, 5).structurally_equal(base, 1e-9));
  }
}

TEST_CASE("max_depth caps the tree") {
  Rng rng(12);
  const auto mat = oracle::random_matrix(rng, 400, 3, false);
  CHECK(grow_all(mat, 2, 0).leaf_count() == 1);
  CHECK(grow_all(mat, 2, 1).depth() <= 1);
  CHECK(grow_all(mat, 2, 3).depth() <= 3);
}

TEST_CASE("export_dot") {
  oracle::Matrix mat{4, 1, {1, 2, 3, 4}, {0, 0, 10, 10}};
  SUBCASE("single leaf") {
    const auto tree = grow_all(mat, 3);
    const auto g = oracle::parse_dot(export_dot(tree));
    CHECK(g.is_digraph);
    CHECK(g.labels.size() == 1);
    CHECK(g.edges.empty());
  }
  SUBCASE("stump") {
    const auto tree = grow_all(mat, 1);
    const std::vector<std::string> labels{"Capt"};
    const auto g = oracle::parse_dot(export_dot(tree, labels));
    CHECK(g.labels.size() == 3);
    CHECK(g.edges.size() == 2);
    const auto nodes = oracle::dot_nodes(g);
    CHECK(nodes.at("n0").label == "Capt < 2.500");
    CHECK(nodes.at(nodes.at("n0").yes).label == "n = 2\\nQ = 0.000\\nQ^Min");
    CHECK(nodes.at(nodes.at("n0").no).label == "n = 2\\nQ = 10.000\\nQ^Max");
  }
  SUBCASE("every node and edge of a larger tree survives") {
    Rng rng(4);
    const auto big = grow_all(oracle::random_matrix(rng, 300, 3, false), 10);
    const auto nodes = oracle::dot_nodes(oracle::parse_dot(export_dot(big)));
    CHECK(nodes.size() == big.nodes().size());
    for (std::size_t i = 0; i < big.nodes().size(); ++i) {
      const auto& node = big.nodes()[i];
      const auto& parsed = nodes.at("n" + std::to_string(i));
      if (node.is_leaf()) {
        CHECK(parsed.yes.empty());
        CHECK(parsed.label.rfind("n = " + std::to_string(node.n), 0) == 0);
      } else {
        CHECK(parsed.yes == "n" + std::to_string(node.left));
        CHECK(parsed.no == "n" + std::to_string(node.right));
      }
    }
  }
}

TEST_CASE("json round trip is exact") {
  Rng rng(21);
  const auto tree = grow_all(oracle::random_matrix(rng, 250, 4, false), 7, 5);
  const auto back = import_json(export_json(tree));
  CHECK(back.structurally_equal(tree, 0.0));
  CHECK(back.feature_names() == tree.feature_names());
  CHECK(back.params().min_leaf == 7);
  CHECK(back.params().max_depth == std::optional<std::size_t>(5));
  CHECK(export_json(back) == export_json(tree));

  const auto text = export_json(tree);
  CHECK_THROWS_AS(import_json(text.substr(0, text.size() / 2)), ParseError);
  CHECK_THROWS_AS(import_json("[]"), ParseError);
  CHECK_THROWS_AS(import_json(R"({"feature_names":["a"],"root":{"kind":"twig","n":1,"mean":0,"sse":0}})"),
                  ParseError);
}
