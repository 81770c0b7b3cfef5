#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hsd/errors.hpp"
#include "hsd/evaluation.hpp"
#include "support/synthetic.hpp"

using namespace hsd;
using enum ClassLabel;
namespace fs = std::filesystem;

namespace {

const fs::path kFixture = fs::path(HSD_FIXTURE_DIR) / "tiny_corpus.tsv";

// Ensemble (viii) counts, rows = true (N, R, S), with the Racism/Sexism rows
// and columns swapped relative to the row labels they were reported under.
ConfusionMatrix reference_viii() {
  return ConfusionMatrix::from_rows({{{35314416, 1430030, 5929},
                                      {2195711, 4357971, 3943},
                                      {24295, 5635, 10655320}}});
}

TrainConfig tiny_train() {
  TrainConfig c;
  c.hidden = 8;
  c.embedding_dim = 4;
  c.max_epochs = 4;
  c.batch_size = 8;
  c.max_len = 10;
  c.seed = 3;
  return c;
}

ExperimentPlan tiny_plan(const std::string& scheme, std::size_t folds, std::size_t runs) {
  ExperimentPlan p;
  p.scheme = find_scheme(scheme).value();
  p.folds = folds;
  p.runs = runs;
  p.seed = 17;
  p.train = tiny_train();
  return p;
}

}  // namespace

TEST_CASE("ensemble (viii) reference counts reproduce the reference per-class values") {
  const auto cm = reference_viii();
  CHECK(cm.total() == 15998ull * 15 * 15 * 15);
  CHECK(cm.row_sum(Neutral) == 10889ull * 3375);
  CHECK(cm.row_sum(Racism) == 1943ull * 3375);
  CHECK(cm.row_sum(Sexism) == 3166ull * 3375);
  const auto r = per_class_metrics(cm);
  CHECK(r[Racism].precision == doctest::Approx(4357971.0 / 5793636.0).epsilon(1e-15));
  CHECK(r[Racism].recall == doctest::Approx(4357971.0 / 6557625.0).epsilon(1e-15));
  CHECK(std::abs(r[Racism].precision - 0.7522) < 5e-4);
  CHECK(std::abs(r[Racism].recall - 0.6646) < 5e-4);
  CHECK(std::abs(r[Sexism].precision - 0.9991) < 5e-4);
  CHECK(std::abs(r[Neutral].recall - 0.9609) < 5e-4);
  CHECK(std::abs(r[Racism].f - 0.7057) < 5e-4);
  CHECK_FALSE(r.degenerate());
}

TEST_CASE("per-class metrics edge cases") {
  const auto diag = ConfusionMatrix::from_rows({{{5, 0, 0}, {0, 3, 0}, {0, 0, 2}}});
  const auto d = per_class_metrics(diag);
  for (const auto& m : d.per_class) {
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f == 1.0);
  }
  CHECK(d.weighted_f == 1.0);

  const auto no_racism_predicted = ConfusionMatrix::from_rows({{{5, 0, 1}, {2, 0, 1}, {0, 0, 4}}});
  const auto e = per_class_metrics(no_racism_predicted);
  CHECK(e[Racism].precision == 0.0);
  CHECK(e[Racism].precision_undefined);
  CHECK_FALSE(e[Racism].recall_undefined);
  CHECK(e.degenerate());
  CHECK_THROWS_AS(per_class_metrics(ConfusionMatrix{}), ValidationError);
}

TEST_CASE("overall precision and recall are support-weighted means") {
  const auto cm = ConfusionMatrix::from_rows({{{8, 1, 1}, {2, 3, 0}, {1, 0, 4}}});
  const auto r = per_class_metrics(cm);
  const double p = (10 * (8.0 / 11) + 5 * (3.0 / 4) + 5 * (4.0 / 5)) / 20;
  const double rec = (10 * 0.8 + 5 * 0.6 + 5 * 0.8) / 20;
  CHECK(r.precision == doctest::Approx(p).epsilon(1e-14));
  CHECK(r.recall == doctest::Approx(rec).epsilon(1e-14));
  CHECK(r.weighted_f == doctest::Approx(weighted_f(r, ClassValues{10, 5, 5})).epsilon(1e-14));
}

TEST_CASE("weighted F") {
  CHECK(weighted_f(ClassValues{0.7, 0.7, 0.7}, ClassValues{10889, 1943, 3166}) == doctest::Approx(0.7));
  CHECK(weighted_f(ClassValues{0.3, 0.9, 0.1}, ClassValues{1, 0, 0}) == 0.3);
  const double f = weighted_f(ClassValues{0.9508, 0.7057, 0.9981}, ClassValues{10889, 1943, 3166});
  CHECK(f == doctest::Approx((0.9508 * 10889 + 0.7057 * 1943 + 0.9981 * 3166) / 15998.0));
  CHECK(std::abs(f - 0.9308) <= 0.0015);
  CHECK_THROWS(weighted_f(ClassValues{0.1, 0.2, 0.3}, ClassValues{0, 0, 0}));
  CHECK_THROWS(weighted_f(ClassValues{0.1, 0.2, 0.3}, ClassValues{1, -1, 0}));
}

TEST_CASE("k-fold partition") {
  const auto folds = kfold_split(100, 10, 1);
  REQUIRE(folds.size() == 10);
  std::set<std::size_t> seen;
  for (const auto& f : folds) {
    CHECK(f.test.size() == 10);
    CHECK(f.train.size() == 90);
    for (auto i : f.test) CHECK(seen.insert(i).second);
    std::set<std::size_t> both(f.train.begin(), f.train.end());
    both.insert(f.test.begin(), f.test.end());
    CHECK(both.size() == 100);
  }
  CHECK(seen.size() == 100);
  const auto again = kfold_split(100, 10, 1);
  for (std::size_t f = 0; f < 10; ++f) CHECK(again[f].test == folds[f].test);
  CHECK(kfold_split(100, 10, 2)[0].test != folds[0].test);
}

TEST_CASE("k-fold sizes on the reference corpus size") {
  const auto folds = kfold_split(15998, 10, 7);
  std::size_t big = 0, small = 0;
  for (const auto& f : folds) {
    if (f.test.size() == 1600) ++big;
    if (f.test.size() == 1599) ++small;
  }
  CHECK(big == 8);
  CHECK(small == 2);
}

TEST_CASE("k-fold errors and stratification") {
  CHECK_THROWS_AS(kfold_split(5, 6, 1), ConfigError);
  CHECK_THROWS_AS(kfold_split(5, 1, 1), ConfigError);
  std::vector<ClassLabel> labels;
  for (int i = 0; i < 50; ++i) labels.push_back(i < 10 ? Racism : Neutral);
  for (const auto& f : kfold_split(50, 5, 3, labels)) {
    int racism = 0;
    for (auto i : f.test) racism += labels[i] == Racism;
    CHECK(racism == 2);
  }
}

TEST_CASE("plan arithmetic") {
  auto p = tiny_plan("viii", 10, 15);
  CHECK(p.enumeration_size() == 3375);
  p.scheme = find_scheme("xi").value();
  CHECK(p.enumeration_runs() == 5);
  CHECK(p.enumeration_size() == 3125);
  p.runs = 1;
  CHECK(p.enumeration_size() == 1);
  p.scheme.members.pop_back();
  p.scheme.members.pop_back();
  p.scheme.members.pop_back();
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK(tiny_plan("i", 10, 3).train_seed(0, FeatureCombination::O, 1) !=
        tiny_plan("i", 10, 3).train_seed(1, FeatureCombination::O, 1));
}

TEST_CASE("combinatorial bookkeeping on the fixture") {
  const auto corpus = resolve_dual_labels(load_corpus(kFixture));
  const auto res = run_experiment(tiny_plan("viii", 4, 2), corpus);
  CHECK(res.confusion.total() == 20 * 8);
  CHECK(res.combination_confusion.size() == 8);
  for (auto c : kAllLabels) CHECK(res.confusion.row_sum(c) == res.class_support[index_of(c)] * 8);
  ConfusionMatrix sum;
  for (const auto& cm : res.combination_confusion) {
    CHECK(cm.total() == 20);
    sum += cm;
  }
  CHECK(sum == res.confusion);
  CHECK(res.decided_by_vote + res.decided_by_confidence == 160);
  CHECK(res.convergence.size() == 8);
  CHECK(res.convergence.back() == doctest::Approx(res.f_mean));
  CHECK(res.predictions.size() == 4 * 3 * 2);
  for (const auto& m : res.members) CHECK(m.confusion.total() == 20 * 2);
}

TEST_CASE("single member, single run is the plain classifier") {
  const auto corpus = resolve_dual_labels(load_corpus(kFixture));
  auto plan = tiny_plan("viii", 2, 1);
  plan.scheme = single_classifier_scheme(FeatureCombination::NRS);
  const auto res = run_experiment(plan, corpus);
  CHECK(res.confusion.total() == 20);
  CHECK(res.members.size() == 1);
  CHECK(res.members[0].confusion == res.confusion);
  CHECK(res.f_std == 0.0);
}

TEST_CASE("experiments are deterministic and parallel jobs change nothing") {
  const auto corpus = testing::skewed_corpus(4, {8, 5, 0.8, 0.5});
  auto plan = tiny_plan("ii", 3, 2);
  const auto a = results_json(run_experiment(plan, corpus));
  plan.jobs = 3;
  const auto b = results_json(run_experiment(plan, corpus));
  CHECK(a == b);
}

TEST_CASE("report writes every file and refuses empty results") {
  const auto corpus = resolve_dual_labels(load_corpus(kFixture));
  const auto res = run_experiment(tiny_plan("x", 2, 1), corpus);
  const auto dir = fs::temp_directory_path() / "hsd_report_test";
  fs::remove_all(dir);
  report(res, dir);
  for (const char* f : {"results.json", "summary.txt", "confusion.tsv", "members.tsv", "convergence.tsv"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK(fs::exists(dir / "predictions" / "fold-01" / "NS-run-01.tsv"));
  std::ifstream summary(dir / "summary.txt");
  std::stringstream ss;
  ss << summary.rdbuf();
  CHECK(ss.str().find("overall") != std::string::npos);
  for (auto c : kAllLabels) CHECK(ss.str().find(std::string(to_string(c))) != std::string::npos);
  fs::remove_all(dir);
  CHECK_THROWS_AS(report(ExperimentResults{}, dir), DataError);
}
