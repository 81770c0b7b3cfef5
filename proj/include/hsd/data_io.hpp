#ifndef HSD_DATA_IO_HPP
#define HSD_DATA_IO_HPP

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hsd/labels.hpp"

namespace hsd {

struct LabeledTweet {
  std::string tweet_id;
  std::string user_id;
  std::string text;
  // Sorted by ordinal, no duplicates. Singleton once the corpus is resolved.
  std::vector<ClassLabel> labels;

  bool resolved() const { return labels.size() == 1; }
  /// The single label of a resolved tweet. Throws ValidationError otherwise.
  ClassLabel label() const;
};

enum class DualLabelPolicy { PreferHateful, PreferNeutral, Drop };

std::optional<DualLabelPolicy> parse_policy(std::string_view text);
std::string_view to_string(DualLabelPolicy policy);

/// One dual-label resolution, kept so runs can report exactly what happened.
struct Resolution {
  std::string tweet_id;
  std::vector<ClassLabel> original;
  std::optional<ClassLabel> kept;  // nullopt when the tweet was dropped
};

/// Ordered tweets plus a per-user index. Immutable once built; safe to share.
class Corpus {
 public:
  Corpus() = default;
  /// Validates id uniqueness and non-empty text, then builds the user index.
  explicit Corpus(std::vector<LabeledTweet> tweets,
                  std::vector<Resolution> resolutions = {});

  std::span<const LabeledTweet> tweets() const { return tweets_; }
  const LabeledTweet& operator[](std::size_t i) const { return tweets_[i]; }
  std::size_t size() const { return tweets_.size(); }
  bool empty() const { return tweets_.empty(); }

  std::size_t user_count() const { return by_user_.size(); }
  /// Indices of the user's tweets, in corpus order. Empty for unknown users.
  std::span<const std::size_t> tweets_of(const std::string& user_id) const;
  /// Users in first-appearance order.
  const std::vector<std::string>& users() const { return user_order_; }

  std::optional<std::size_t> find(const std::string& tweet_id) const;

  bool resolved() const;
  const std::vector<Resolution>& resolutions() const { return resolutions_; }

  /// Sub-corpus made of the given tweet indices, in the given order.
  Corpus subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<LabeledTweet> tweets_;
  std::vector<Resolution> resolutions_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_user_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::vector<std::string> user_order_;
};

struct CorpusFormat {
  char delimiter = '\t';
  /// nullopt: auto-detect a header when the first row's label field does not
  /// parse as a label and its first field reads "tweet_id" or "id".
  std::optional<bool> has_header;
};

/// Reads a corpus with columns (tweet_id, user_id, label, text). The label
/// column holds one label or several joined by ',', '+' or '|'. Text is the
/// remainder of the line, so it may contain the delimiter.
Corpus load_corpus(const std::filesystem::path& path,
                   const CorpusFormat& format = {});
Corpus parse_corpus(std::istream& in, const CorpusFormat& format = {});

void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Collapses multi-label tweets to a single label according to `policy`.
/// Idempotent. Tweets carrying both Racism and Sexism, or three labels, are
/// rejected with ValidationError.
Corpus resolve_dual_labels(const Corpus& corpus,
                           DualLabelPolicy policy = DualLabelPolicy::PreferHateful);

struct CorpusStats {
  std::size_t size = 0;
  std::array<std::size_t, kNumClasses> class_counts{};
  std::size_t user_count = 0;
  std::size_t dual_label_count = 0;
  /// Resolution tallies keyed like "neutral+sexism".
  std::map<std::string, std::size_t> dual_label_breakdown;
  std::size_t dropped = 0;
  /// Pearson r between the author's leave-one-out tendency toward the class
  /// and the tweet's label indicator. Absent when undefined.
  std::array<std::optional<double>, kNumClasses> tendency_label_correlation{};
  /// Tweets whose author has at least one other tweet (the correlation base).
  std::size_t correlation_sample = 0;
};

/// Dataset summary over a resolved corpus. Tweets whose author has no other
/// tweet carry no tendency information and are left out of the correlation.
CorpusStats corpus_stats(const Corpus& corpus);

/// Human-readable table.
std::string format_stats(const CorpusStats& stats);
/// Machine-readable key=value lines, one statistic per line, fixed order.
std::string format_stats_kv(const CorpusStats& stats);

/// Pearson correlation; nullopt for fewer than two points or zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

}  // namespace hsd

#endif  // HSD_DATA_IO_HPP
