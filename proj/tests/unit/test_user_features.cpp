#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hsd/data_io.hpp"
#include "hsd/errors.hpp"
#include "hsd/random.hpp"
#include "hsd/user_features.hpp"

using namespace hsd;

namespace {

const std::filesystem::path kFixture = std::filesystem::path(HSD_FIXTURE_DIR) / "tiny_corpus.tsv";

Corpus history(const std::string& user, std::initializer_list<ClassLabel> labels) {
  std::vector<LabeledTweet> t;
  int i = 0;
  for (auto l : labels) t.push_back({user + std::to_string(i++), user, "text", {l}});
  return Corpus(std::move(t));
}

void check_simplex(const TendencyProfile& p) {
  CHECK(p.neutral >= 0.0);
  CHECK(p.racism >= 0.0);
  CHECK(p.sexism >= 0.0);
  CHECK(std::abs(p.neutral + p.racism + p.sexism - 1.0) < 1e-9);
}

}  // namespace

using enum ClassLabel;

TEST_CASE("tendency of a history is the label share") {
  const auto c = history("u", {Neutral, Neutral, Racism, Sexism});
  CHECK(compute_tendencies("u", c) == TendencyProfile{0.5, 0.25, 0.25});
  const TendencyTable table(c);
  CHECK(table.profile("u") == TendencyProfile{0.5, 0.25, 0.25});
  CHECK(table.profile("u", Racism) == TendencyProfile{2.0 / 3.0, 0.0, 1.0 / 3.0});
  CHECK(compute_tendencies("u", c, std::string("u2")) == TendencyProfile{2.0 / 3.0, 0.0, 1.0 / 3.0});
}

TEST_CASE("unseen users get the training priors") {
  const auto table = TendencyTable::from_counts({{"someone", {10889, 1943, 3166}}});
  const auto p = table.profile("unseen");
  CHECK(p.neutral == doctest::Approx(10889.0 / 15998.0).epsilon(1e-15));
  CHECK(p.racism == doctest::Approx(1943.0 / 15998.0).epsilon(1e-15));
  CHECK(p.sexism == doctest::Approx(3166.0 / 15998.0).epsilon(1e-15));
  CHECK(std::abs(p.neutral - 0.6807) < 1e-4);
  CHECK(std::abs(p.racism - 0.1214) < 1e-4);
  CHECK(std::abs(p.sexism - 0.1979) < 1e-4);
}

TEST_CASE("a user whose only tweet is excluded falls back to priors") {
  std::vector<LabeledTweet> t{{"1", "solo", "x", {Racism}},
                              {"2", "other", "y", {Neutral}},
                              {"3", "other", "z", {Neutral}},
                              {"4", "other", "w", {Sexism}}};
  const Corpus c(t);
  const auto priors = TendencyProfile{0.5, 0.25, 0.25};
  CHECK(compute_tendencies("solo", c, std::string("1")) == priors);
  CHECK(TendencyTable(c).profile("solo", Racism) == priors);
  CHECK(TendencyTable(c).priors() == priors);
  CHECK_THROWS(TendencyTable(c).profile("solo", Sexism));
}

TEST_CASE("feature combinations") {
  CHECK(input_dimension(FeatureCombination::O) == 30);
  CHECK(input_dimension(FeatureCombination::NS) == 32);
  CHECK(input_dimension(FeatureCombination::NR) == 32);
  CHECK(input_dimension(FeatureCombination::RS) == 32);
  CHECK(input_dimension(FeatureCombination::NRS) == 33);
  CHECK(selected_features(FeatureCombination::RS) == std::vector<ClassLabel>{Racism, Sexism});
  CHECK(parse_combination("nrs") == FeatureCombination::NRS);
  CHECK_FALSE(parse_combination("SN").has_value());
  for (auto c : kAllCombinations) CHECK(parse_combination(to_string(c)) == c);
}

TEST_CASE("assemble_input picks features in N, R, S order") {
  const Eigen::VectorXi idx = Eigen::VectorXi::Constant(30, 5);
  const TendencyProfile p{0.5, 0.25, 0.25};
  const auto ns = assemble_input(idx, p, FeatureCombination::NS);
  REQUIRE(ns.features.size() == 2);
  CHECK(ns.features(0) == 0.5);
  CHECK(ns.features(1) == 0.25);
  CHECK(assemble_input(idx, p, FeatureCombination::O).features.size() == 0);
  const auto nrs = assemble_input(idx, {1, 0, 0}, FeatureCombination::NRS);
  CHECK(nrs.features == Eigen::Vector3d(1, 0, 0));
  CHECK(static_cast<std::size_t>(nrs.indices.size() + nrs.features.size()) ==
        input_dimension(FeatureCombination::NRS));
  const auto o2 = assemble_input(idx, {0, 0, 1}, FeatureCombination::O);
  CHECK(o2.indices == ns.indices);
}

TEST_CASE("property: every profile lies on the simplex") {
  Rng rng(8);
  std::vector<LabeledTweet> t;
  for (int i = 0; i < 600; ++i) {
    t.push_back({std::to_string(i), "u" + std::to_string(rng.below(40)), "x",
                 {label_from_index(rng.below(3))}});
  }
  const Corpus c(t);
  const TendencyTable table(c);
  for (const auto& u : c.users()) {
    check_simplex(table.profile(u));
    check_simplex(compute_tendencies(u, c));
  }
  for (const auto& tw : c.tweets()) {
    const auto a = table.profile(tw.user_id, tw.label());
    const auto b = compute_tendencies(tw.user_id, c, tw.tweet_id);
    check_simplex(a);
    CHECK(a.neutral == doctest::Approx(b.neutral).epsilon(1e-15));
    CHECK(a.racism == doctest::Approx(b.racism).epsilon(1e-15));
  }
}

TEST_CASE("property: labels outside the training partition never reach profiles") {
  const auto full = resolve_dual_labels(load_corpus(kFixture));
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < full.size(); ++i) (i % 4 == 0 ? test : train).push_back(i);
  const TendencyTable before(full.subset(train));

  std::vector<LabeledTweet> scrambled(full.tweets().begin(), full.tweets().end());
  for (auto i : test) scrambled[i].labels = {label_from_index((index_of(scrambled[i].label()) + 1) % 3)};
  const TendencyTable after(Corpus(scrambled).subset(train));
  for (const auto& u : full.users()) CHECK(before.profile(u) == after.profile(u));
  CHECK(before.counts() == after.counts());
}

TEST_CASE("profile export") {
  const auto c = history("u", {Neutral, Sexism});
  const auto path = std::filesystem::temp_directory_path() / "hsd_profiles.tsv";
  export_profiles(c, path);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "user_id\tt_N\tt_R\tt_S");
  CHECK(row == "u\t0.5\t0\t0.5");
  std::filesystem::remove(path);
}
