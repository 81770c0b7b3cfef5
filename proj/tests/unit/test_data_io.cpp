#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "hsd/data_io.hpp"
#include "hsd/errors.hpp"
#include "hsd/random.hpp"

using namespace hsd;

namespace {

const std::filesystem::path kFixture = std::filesystem::path(HSD_FIXTURE_DIR) / "tiny_corpus.tsv";

Corpus parse(const std::string& text) {
  std::istringstream in(text);
  return parse_corpus(in);
}

LabeledTweet tweet(std::string id, std::string user, ClassLabel label, std::string text = "x") {
  return {std::move(id), std::move(user), std::move(text), {label}};
}

// Leave-one-out author tendency vs label indicator, computed the long way with
// the single-pass Pearson formula.
std::optional<double> oracle_correlation(const Corpus& c, ClassLabel cls) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < c.size(); ++i) {
    double same = 0, others = 0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (j == i || c[j].user_id != c[i].user_id) continue;
      ++others;
      same += c[j].label() == cls;
    }
    if (others == 0) continue;
    x.push_back(same / others);
    y.push_back(c[i].label() == cls ? 1.0 : 0.0);
  }
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  const double den = std::sqrt(n * sxx - sx * sx) * std::sqrt(n * syy - sy * sy);
  if (n < 2 || !(den > 1e-12)) return std::nullopt;
  return (n * sxy - sx * sy) / den;
}

}  // namespace

TEST_CASE("two rows by one user") {
  const auto c = parse("1\tu1\tracism\tgo home\n2\tu1\tneutral\tnice day\n");
  CHECK(c.size() == 2);
  CHECK(c.user_count() == 1);
  CHECK(c[0].label() == ClassLabel::Racism);
  CHECK(c.tweets_of("u1").size() == 2);
  CHECK(c.find("2") == std::optional<std::size_t>(1));
}

TEST_CASE("text keeps embedded delimiters and the header is detected") {
  const auto c = parse("tweet_id\tuser_id\tlabel\ttext\n7\tu\tsexism\ta\tb\tc\n");
  REQUIRE(c.size() == 1);
  CHECK(c[0].text == "a\tb\tc");
}

TEST_CASE("malformed records report their line number") {
  try {
    parse("1\tu1\tneutral\tok\n2\tu1\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse("1\tu1\tneutral\t   \n"), ParseError);
}

TEST_CASE("unknown labels and duplicate ids are validation errors") {
  CHECK_THROWS_WITH_AS(parse("1\tu\thateful\tx\n"), doctest::Contains("line 1"), ValidationError);
  CHECK_THROWS_WITH_AS(parse("a1\tu\tneutral\tx\na1\tv\tracism\ty\n"), doctest::Contains("a1"),
                       ValidationError);
  CHECK_THROWS_AS(Corpus({tweet("a", "u", ClassLabel::Neutral), tweet("a", "v", ClassLabel::Neutral)}),
                  ValidationError);
}

TEST_CASE("missing file is a data error") {
  CHECK_THROWS_AS(load_corpus("/nonexistent/corpus.tsv"), DataError);
}

TEST_CASE("fixture corpus hand counts") {
  const auto raw = load_corpus(kFixture);
  CHECK(raw.size() == 20);
  CHECK(raw.user_count() == 7);
  CHECK_FALSE(raw.resolved());
  const auto c = resolve_dual_labels(raw);
  const auto s = corpus_stats(c);
  CHECK(s.size == 20);
  CHECK(s.class_counts == std::array<std::size_t, 3>{11, 4, 5});
  CHECK(s.dual_label_count == 2);
  CHECK(s.dual_label_breakdown.at("neutral+sexism") == 2);
  CHECK(s.correlation_sample == 20);
  for (auto cls : kAllLabels) {
    const auto expected = oracle_correlation(c, cls);
    REQUIRE(expected.has_value());
    CHECK(s.tendency_label_correlation[index_of(cls)].value() == doctest::Approx(*expected).epsilon(1e-12));
  }
}

TEST_CASE("dual-label policies") {
  const auto c = parse("1\tu\tneutral,sexism\tx\n2\tu\tracism+neutral\ty\n3\tv\tneutral\tz\n");
  const auto hateful = resolve_dual_labels(c, DualLabelPolicy::PreferHateful);
  CHECK(hateful[0].label() == ClassLabel::Sexism);
  CHECK(hateful[1].label() == ClassLabel::Racism);
  const auto neutral = resolve_dual_labels(c, DualLabelPolicy::PreferNeutral);
  CHECK(neutral[0].label() == ClassLabel::Neutral);
  const auto dropped = resolve_dual_labels(c, DualLabelPolicy::Drop);
  CHECK(dropped.size() == 1);
  const auto s = corpus_stats(dropped);
  CHECK(s.dropped == 2);
  CHECK(s.class_counts[0] + s.class_counts[1] + s.class_counts[2] == c.size() - s.dropped);
  REQUIRE(hateful.resolutions().size() == 2);
  CHECK(hateful.resolutions()[1].kept == ClassLabel::Racism);
}

TEST_CASE("racism with sexism, or three labels, is rejected") {
  CHECK_THROWS_AS(resolve_dual_labels(parse("1\tu\tracism|sexism\tx\n")), ValidationError);
  CHECK_THROWS_AS(resolve_dual_labels(parse("1\tu\tneutral,racism,sexism\tx\n")), ValidationError);
}

TEST_CASE("resolution is idempotent") {
  const auto once = resolve_dual_labels(load_corpus(kFixture));
  const auto twice = resolve_dual_labels(once);
  REQUIRE(twice.size() == once.size());
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i].labels == once[i].labels);
  CHECK(twice.resolutions().size() == once.resolutions().size());
}

TEST_CASE("users posting a single class correlate perfectly") {
  std::vector<LabeledTweet> t;
  const std::array<ClassLabel, 3> cls{ClassLabel::Neutral, ClassLabel::Racism, ClassLabel::Sexism};
  for (int u = 0; u < 6; ++u) {
    for (int k = 0; k < 3; ++k) {
      t.push_back(tweet(std::to_string(u * 10 + k), "u" + std::to_string(u), cls[u % 3]));
    }
  }
  const auto s = corpus_stats(Corpus(t));
  for (const auto& r : s.tendency_label_correlation) CHECK(r.value() == doctest::Approx(1.0));
}

TEST_CASE("labels independent of users give near-zero correlation") {
  Rng rng(2024);
  std::vector<LabeledTweet> t;
  for (int i = 0; i < 10000; ++i) {
    const auto label = label_from_index(rng.below(3));
    t.push_back(tweet(std::to_string(i), "u" + std::to_string(rng.below(500)), label));
  }
  const auto s = corpus_stats(Corpus(t));
  for (const auto& r : s.tendency_label_correlation) CHECK(std::abs(r.value()) < 0.05);
}

TEST_CASE("correlation is undefined for a single tweet or no variance") {
  CHECK_FALSE(corpus_stats(Corpus({tweet("1", "u", ClassLabel::Neutral)}))
                  .tendency_label_correlation[0]
                  .has_value());
  const auto s = corpus_stats(Corpus({tweet("1", "u", ClassLabel::Neutral), tweet("2", "u", ClassLabel::Neutral)}));
  for (const auto& r : s.tendency_label_correlation) CHECK_FALSE(r.has_value());
  CHECK(format_stats_kv(s).find("correlation.racism=nan") != std::string::npos);
}

TEST_CASE("correlation is invariant to tweet order") {
  const auto c = resolve_dual_labels(load_corpus(kFixture));
  std::vector<std::size_t> idx(c.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = idx.size() - 1 - i;
  Rng rng(5);
  rng.shuffle(idx);
  const auto a = corpus_stats(c), b = corpus_stats(c.subset(idx));
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(a.tendency_label_correlation[k].value() ==
          doctest::Approx(b.tendency_label_correlation[k].value()).epsilon(1e-12));
  }
}

TEST_CASE("write then load round-trips") {
  const auto c = load_corpus(kFixture);
  const auto path = std::filesystem::temp_directory_path() / "hsd_roundtrip.tsv";
  write_corpus(c, path);
  const auto back = load_corpus(path);
  REQUIRE(back.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(back[i].tweet_id == c[i].tweet_id);
    CHECK(back[i].labels == c[i].labels);
    CHECK(back[i].text == c[i].text);
  }
  std::filesystem::remove(path);
}

TEST_CASE("pearson edge cases") {
  const std::vector<double> x{1, 2, 3}, y{2, 4, 6}, flat{1, 1, 1};
  CHECK(pearson(x, y).value() == doctest::Approx(1.0));
  CHECK_FALSE(pearson(x, flat).has_value());
  CHECK_FALSE(pearson(std::span(x).first(1), std::span(y).first(1)).has_value());
}
