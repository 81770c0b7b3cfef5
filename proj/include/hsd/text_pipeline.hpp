#ifndef HSD_TEXT_PIPELINE_HPP
#define HSD_TEXT_PIPELINE_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace hsd {

using TokenSequence = std::vector<std::string>;

struct TokenizerOptions {
  bool lowercase = true;
};

/// Moses-style word splitter:
///  - splits on Unicode whitespace (ASCII space/tab/newline, NBSP, U+2000..U+200A,
///    U+2028/2029, U+202F, U+205F, U+3000, U+1680, U+0085);
///  - peels leading and trailing punctuation off each chunk, one character per
///    token; interior punctuation ("that's", "well-known", URLs) stays put;
///  - a leading '#' or '@' directly followed by a word character is a sigil and
///    stays attached ("#odd", "@user");
///  - lowercases ASCII and Latin-1 letters when enabled.
TokenSequence tokenize(std::string_view text, const TokenizerOptions& options = {});

/// Frequency-ranked token index. 0 is padding, 1 is out-of-vocabulary, real
/// tokens take 2..max_size+1 by descending count, ties lexicographic.
class Vocabulary {
 public:
  static constexpr std::int32_t kPadding = 0;
  static constexpr std::int32_t kUnknown = 1;
  static constexpr std::int32_t kFirstToken = 2;

  Vocabulary() = default;

  /// Tokens in rank order (index kFirstToken + position).
  Vocabulary(std::vector<std::string> ranked_tokens, std::size_t max_size);

  std::size_t max_size() const { return max_size_; }
  /// Number of real tokens held (<= max_size).
  std::size_t size() const { return tokens_.size(); }
  /// One past the largest index in use: kFirstToken + size().
  std::int32_t index_limit() const {
    return kFirstToken + static_cast<std::int32_t>(tokens_.size());
  }

  std::int32_t index_of(std::string_view token) const;
  /// Reverse map; "<pad>" and "<unk>" for the reserved slots.
  const std::string& token_at(std::int32_t index) const;
  const std::vector<std::string>& ranked_tokens() const { return tokens_; }

  /// Content hash over max_size and the ranked tokens.
  std::uint64_t hash() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.max_size_ == b.max_size_ && a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
  std::size_t max_size_ = 0;
};

/// Ranks tokens of the training tweets. Throws ConfigError for max_size == 0
/// and DataError for an empty training set.
Vocabulary build_vocabulary(std::span<const TokenSequence> training_tweets,
                            std::size_t max_size = 25000);

/// Fixed-length index vector: the first max_len tokens (unknown -> 1), zero
/// padded at the tail.
Eigen::VectorXi vectorize(const TokenSequence& tokens, const Vocabulary& vocab,
                          std::size_t max_len = 30);

/// Two-column text file "token<TAB>index" sorted by index, preceded by a
/// "%max_size<TAB>N" line. Rows 0 and 1 carry the reserved tokens.
void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary load_vocabulary(const std::filesystem::path& path);

std::string serialize_vocabulary(const Vocabulary& vocab);
Vocabulary deserialize_vocabulary(std::string_view text);

}  // namespace hsd

#endif  // HSD_TEXT_PIPELINE_HPP
