// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance --cli <path to charterseg> --work <scratch dir>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <string>
#include <thread>

#include "charterseg/analysis.hpp"
#include "charterseg/forest.hpp"
#include "charterseg/io.hpp"
#include "charterseg/rescale.hpp"
#include "charterseg/select.hpp"
#include "charterseg/tree.hpp"
#include "oracles.hpp"
#include "scenarios.hpp"

using namespace charterseg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::vector<std::string> names_for(std::size_t m) {
  std::vector<std::string> out;
  for (std::size_t f = 0; f < m; ++f) out.push_back("x" + std::to_string(f));
  return out;
}

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

Panel planted_panel(std::uint64_t seed, double sigma) {
  SyntheticOptions opts;
  opts.n = 500;
  opts.seed = seed;
  opts.noise_sigma = sigma;
  return generate_synthetic_panel(scenario::planted_three_splits(), opts);
}

// ---------------------------------------------------------------------------

Outcome split_oracle() {
  Rng rng(20240601);
  const auto start = std::chrono::steady_clock::now();
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.index(199);
    const std::size_t m = 1 + rng.index(8);
    const std::size_t min_leaf = 1 + rng.index(10);
    const auto mat = oracle::random_matrix(rng, n, m, trial % 4 == 0);
    const auto got = best_split(mat.view(), min_leaf);
    const auto want = oracle::brute_force_split(mat, min_leaf);
    const bool same = got.has_value() == want.has_value() &&
                      (!got || (got->rule.feature == want->feature &&
                                got->rule.threshold == want->threshold &&
                                close_rel(got->gain, want->gain, 1e-9)));
    if (!same) ++mismatches;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {mismatches == 0 && secs < 60.0,
          std::to_string(mismatches) + " mismatches in 100 matrices, " + io::format_fixed(secs, 2) + " s"};
}

Outcome sse_decomposition() {
  Rng rng(77);
  std::size_t nodes = 0;
  std::size_t bad = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto mat = oracle::random_matrix(rng, 50 + rng.index(400), 1 + rng.index(6), false);
    GrowOptions opts;
    opts.params.min_leaf = 1 + rng.index(20);
    const auto tree = grow(mat.view(), names_for(mat.m), opts);
    for (const auto& node : tree.nodes()) {
      if (node.is_leaf()) continue;
      const auto& l = tree.node(node.left);
      const auto& r = tree.node(node.right);
      const double nl = static_cast<double>(l.n);
      const double nr = static_cast<double>(r.n);
      const double between = nl * nr / (nl + nr) * (l.mean - r.mean) * (l.mean - r.mean);
      ++nodes;
      if (!close_rel(node.sse, l.sse + r.sse + between, 1e-9)) ++bad;
    }
  }
  return {bad == 0 && nodes > 0, std::to_string(nodes - bad) + "/" + std::to_string(nodes) + " internal nodes"};
}

// Judged under the one-standard-error rule; the min-cv count is reported too.
Outcome planted_recovery() {
  const auto start = std::chrono::steady_clock::now();
  int recovered = 0;
  int recovered_min_cv = 0;
  std::string first_failure;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto panel = planted_panel(seed, 0.05 * scenario::kLeafGap);
    BuildOptions opts;
    opts.rename_to_groups = true;
    const auto build = build_scored_matrix(panel, scenario::selected_specs(), opts);
    TreeParams params;
    params.min_leaf = 30;
    CvOptions cv;
    cv.seed = seed;
    const auto planted = scenario::planted_three_splits();
    if (scenario::check_recovery(cv_prune(build.matrix, params, cv).tree, build, planted).ok) ++recovered_min_cv;
    cv.rule = PruneRule::OneSe;
    const auto rec = scenario::check_recovery(cv_prune(build.matrix, params, cv).tree, build, planted);
    if (rec.ok) ++recovered;
    else if (first_failure.empty()) first_failure = "; seed " + std::to_string(seed) + ": " + rec.why;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {recovered >= 18 && secs < 120.0,
          std::to_string(recovered) + "/20 seeds (one-se), " + std::to_string(recovered_min_cv) + "/20 (min-cv), " +
              io::format_fixed(secs, 2) + " s" + first_failure};
}

Outcome pruning_efficacy() {
  // Noise is judged under the one-standard-error rule; the min-cv count is
  // reported alongside.
  int single = 0;
  int single_min_cv = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(555, seed));
    oracle::Matrix mat{300, 6, std::vector<double>(1800), std::vector<double>(300)};
    for (auto& v : mat.x) v = rng.uniform(1, 5);
    for (auto& v : mat.y) v = rng.normal();
    TreeParams params;
    params.min_leaf = 30;
    CvOptions cv;
    cv.seed = seed;
    if (cv_prune(mat.view(), names_for(6), params, cv).tree.leaf_count() == 1) ++single_min_cv;
    cv.rule = PruneRule::OneSe;
    if (cv_prune(mat.view(), names_for(6), params, cv).tree.leaf_count() == 1) ++single;
  }

  int better = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const double sigma = 0.5 * scenario::kLeafGap;
    BuildOptions opts;
    opts.rename_to_groups = true;
    const auto train = build_scored_matrix(planted_panel(100 + seed, sigma), scenario::selected_specs(), opts);
    opts.fitted = &train.scales;
    const auto test = build_scored_matrix(planted_panel(900 + seed, sigma), scenario::selected_specs(), opts);
    TreeParams params;
    params.min_leaf = 5;
    CvOptions cv;
    cv.seed = seed;
    const auto pruned = cv_prune(train.matrix, params, cv);
    auto mse = [&](const RegressionTree& t) {
      double s = 0;
      for (std::size_t r = 0; r < test.matrix.rows(); ++r) {
        const double e = test.matrix.response[r] - t.predict(test.matrix.row(r));
        s += e * e;
      }
      return s / static_cast<double>(test.matrix.rows());
    };
    if (mse(pruned.tree) <= mse(pruned.unpruned)) ++better;
  }
  return {single >= 16 && better >= 16, "noise pruned to a leaf in " + std::to_string(single) +
                                            "/20 (one-se), " + std::to_string(single_min_cv) +
                                            "/20 (min-cv); pruned holdout MSE no worse in " + std::to_string(better) + "/20"};
}

Outcome forest_importance() {
  const std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  int top = 0;
  double worst_noise = 0;
  double weakest_signal = 1e300;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(4242, seed));
    const std::size_t n = 3000;
    oracle::Matrix mat{n, 4, std::vector<double>(n * 4), std::vector<double>(n)};
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t f = 0; f < 4; ++f) mat.x[r * 4 + f] = 1.0 + 0.1 * static_cast<double>(rng.index(41));
      mat.y[r] = (mat.x[r * 4] < 3.0 ? 0.9 : 1.1) + 0.2 * rng.normal();
    }
    ForestParams params;
    params.n_trees = 500;
    params.seed = seed;
    params.jobs = jobs;
    const auto forest = grow_forest(mat.view(), names_for(4), params);
    const auto report = permutation_importance(forest, mat.view(), derive_seed(seed, 1), jobs);
    if (report.ranking().front() == "x0") ++top;
    weakest_signal = std::min(weakest_signal, report.features[0].pct_inc_mse);
    for (std::size_t f = 1; f < 4; ++f) {
      worst_noise = std::max(worst_noise, std::abs(report.features[f].pct_inc_mse));
    }
  }
  return {top >= 19 && worst_noise <= 2.0,
          "signal on top in " + std::to_string(top) + "/20 (lowest signal %IncMSE " +
              io::format_fixed(weakest_signal, 1) + "); largest |noise %IncMSE| " + io::format_fixed(worst_noise, 3)};
}

Outcome reference_selection() {
  ImportanceReport r;
  const std::vector<std::pair<const char*, double>> scores{
      {"Capt", 46.6},  {"Capt_x", 30.0},  {"Asts", 24.5},    {"Asts_x", 23.4}, {"Asts'_x", 22.7},
      {"Asts'", 20.1}, {"Mang", 21.6},    {"Mang'", 15.0},   {"Mang''", 12.0}, {"Mang'_x", 10.0},
      {"Ergs", 30.0},  {"Ergs'", 25.0},   {"Ergs_x", 42.6},  {"Ergs'_x", 20.0}, {"Liqt", 18.0},
      {"Liqt_x", 22.1}, {"Liqt'", 17.0},  {"Syst", 5.0}};
  for (const auto& [name, pct] : scores) r.features.push_back({name, pct, 0, 0});
  const auto chosen = select_proxies(r, default_catalog()).proxies();
  const std::vector<std::string> want{"Capt", "Asts", "Mang", "Ergs_x", "Liqt_x", "Syst"};
  std::string got;
  for (const auto& c : chosen) got += (got.empty() ? "" : ", ") + c;
  return {chosen == want, "{" + got + "}"};
}

Outcome eurozone_tree_fixture() {
  const auto tree = import_json(io::read_text(std::string(CHARTERSEG_TEST_DATA) + "/eurozone_tree.json"));
  const auto ex = extreme_leaves(tree);
  const auto verdicts = alignment_verdicts(tree, ex);
  std::string row;
  for (const auto& f : verdicts.factors) {
    row += (row.empty() ? "" : " ") + f.factor + ":" + std::string(verdict_label(f.verdict));
  }
  const std::string q_min = io::format_fixed(ex.min.mean, 3);
  const std::string q_max = io::format_fixed(ex.max.mean, 3);
  const bool ok = q_min == "0.887" && q_max == "1.079" && row == "C:No A:– M:– E:Yes L:Yes S:No" &&
                  describe_path(ex.min, tree.feature_names()) == "C < 1.986, S < 3.140, L >= 2.446, C < 1.650" &&
                  describe_path(ex.max, tree.feature_names()) == "C >= 1.986, E < 1.869";
  return {ok, "Q^Min " + q_min + ", Q^Max " + q_max + ", " + row};
}

Outcome ks_correctness() {
  Rng rng(8);
  int exact = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> a(1 + rng.index(60));
    std::vector<double> b(1 + rng.index(60));
    const bool coarse = trial % 2 == 1;
    for (auto& v : a) v = coarse ? static_cast<double>(rng.index(6)) : rng.normal();
    for (auto& v : b) v = coarse ? static_cast<double>(rng.index(6)) : 0.2 + 1.3 * rng.normal();
    if (ks_two_sample(a, b).d == oracle::brute_force_ks(a, b)) ++exact;
  }
  const std::vector<double> same{0.1, 0.4, 0.4, 0.9, 1.3};
  const double p_same = ks_two_sample(same, same).p;
  std::vector<double> lo(20);
  std::vector<double> hi(20);
  std::iota(lo.begin(), lo.end(), 0.0);
  std::iota(hi.begin(), hi.end(), 50.0);
  const auto apart = ks_two_sample(lo, hi);
  double worst = 0;
  for (double lambda = 0.05; lambda <= 3.0 + 1e-9; lambda += 0.005) {
    worst = std::max(worst, std::abs(kolmogorov_q(lambda) - oracle::kolmogorov_q_theta(lambda)));
  }
  const bool ok = exact == 1000 && p_same == 1.0 && apart.d == 1.0 && apart.p < 0.001 && worst < 1e-6;
  return {ok, std::to_string(exact) + "/1000 exact; p(identical) = " + io::format_double(p_same) +
                  "; p(D=1, 20 vs 20) = " + io::format_double(apart.p) +
                  "; series vs theta max gap " + io::format_double(worst)};
}

Outcome rescale_properties() {
  auto exact = [](const std::vector<double>& got, const std::vector<double>& want) {
    if (got.size() != want.size()) return false;
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (std::abs(got[i] - want[i]) > 1e-12) return false;
    }
    return true;
  };
  constexpr auto Inc = RiskDirection::IncreasingInRisk;
  constexpr auto Dec = RiskDirection::DecreasingInRisk;
  bool examples = exact(quantile_rescale(std::vector<double>{0, 1, 2, 3, 4}, Inc), {1, 2, 3, 4, 5}) &&
                  exact(threshold_rescale(std::vector<double>{0.02, 0.06, 0.10}, Dec, 0.06), {5, 2, 1}) &&
                  exact(threshold_rescale(std::vector<double>{0.30, 0.01, -0.05}, Dec, 0.01), {1, 2, 5});

  Rng rng(31);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(1 + rng.index(80));
    const bool coarse = trial % 3 == 0;
    for (auto& x : v) x = coarse ? 0.01 * static_cast<double>(rng.index(7)) : rng.uniform(-0.1, 0.3);
    const auto dir = trial % 2 == 0 ? Inc : Dec;
    const double u = v[rng.index(v.size())];
    for (int mode = 0; mode < 2; ++mode) {
      const auto s = mode == 0 ? quantile_rescale(v, dir) : threshold_rescale(v, dir, u);
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(s[i] >= 1.0 && s[i] <= 5.0)) ++violations;
        if (mode == 1 && v[i] == u && v.size() > 1 &&
            std::any_of(v.begin(), v.end(), [&](double x) { return x != v[0]; }) && s[i] != 2.0) {
          ++violations;
        }
        for (std::size_t j = 0; j < v.size(); ++j) {
          if (v[i] < v[j] && (dir == Inc ? s[i] > s[j] : s[i] < s[j])) ++violations;
        }
      }
    }
  }
  return {examples && violations == 0,
          std::string(examples ? "worked examples exact" : "worked examples differ") + ", " +
              std::to_string(violations) + " property violations in 1000 samples"};
}

int run(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> bundle(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = io::read_text(e.path());
  }
  return out;
}

Outcome determinism(const std::string& cli, const fs::path& work) {
  fs::remove_all(work);
  fs::create_directories(work);
  SyntheticOptions opts;
  opts.n = 600;
  opts.seed = 9;
  opts.noise_sigma = 0.02;
  io::write_text(work / "panel.csv", panel_csv(generate_synthetic_panel(scenario::planted_three_splits(), opts)));
  io::write_text(work / "run.json", R"({"data": {"path": "panel.csv"}, "selection": {"mode": "rf"},
    "forest": {"n_trees": 100}, "seed": 2024, "tree": {"relax_min_leaf": true}})");
  const std::string base = "\"" + cli + "\" study --config \"" + (work / "run.json").string() + "\"";
  int codes = 0;
  codes += run(base + " --jobs 1 --out \"" + (work / "run1").string() + "\" > /dev/null 2>&1");
  codes += run(base + " --jobs 1 --out \"" + (work / "run2").string() + "\" > /dev/null 2>&1");
  codes += run(base + " --jobs 8 --out \"" + (work / "run8").string() + "\" > /dev/null 2>&1");
  if (codes != 0) return {false, "study exited non-zero"};
  const auto a = bundle(work / "run1");
  const auto b = bundle(work / "run2");
  const auto c = bundle(work / "run8");
  return {a == b && a == c && !a.empty(),
          std::to_string(a.size()) + " files; rerun " + (a == b ? "identical" : "differs") +
              "; jobs 1 vs 8 " + (a == c ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  fs::path work = fs::temp_directory_path() / "charterseg_acceptance";
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--cli") cli = argv[i + 1];
    else if (flag == "--work") work = argv[i + 1];
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"split search matches exhaustive enumeration", split_oracle},
      {"SSE decomposition at every internal node", sse_decomposition},
      {"planted tree recovery", planted_recovery},
      {"pruning efficacy", pruning_efficacy},
      {"forest importance sanity", forest_importance},
      {"importance-based proxy selection fixture", reference_selection},
      {"whole-sample tree fixture: extremes and verdicts", eurozone_tree_fixture},
      {"Kolmogorov-Smirnov correctness", ks_correctness},
      {"rescaling properties", rescale_properties},
      {"end-to-end determinism", [&] {
         if (cli.empty()) return Outcome{false, "no --cli given"};
         return determinism(cli, work);
       }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << ". " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
