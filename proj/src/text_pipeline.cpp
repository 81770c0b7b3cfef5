#include "hsd/text_pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "hsd/errors.hpp"
#include "hsd/random.hpp"

namespace hsd {

namespace {

struct CodePoint {
  char32_t value;
  std::string_view bytes;
};

// Lenient UTF-8 decoding: an invalid byte becomes a one-byte code point with
// its raw value, so no input is ever rejected.
std::vector<CodePoint> decode(std::string_view s) {
  std::vector<CodePoint> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    char32_t cp = b0;
    if (b0 >= 0xC0 && b0 < 0xE0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if (b0 >= 0xE0 && b0 < 0xF0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if (b0 >= 0xF0 && b0 < 0xF8) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len == 1 || i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
      } else {
        cp = (cp << 6) | (b & 0x3F);
      }
    }
    if (!ok) {
      len = 1;
      cp = b0;
    }
    out.push_back({cp, s.substr(i, len)});
    i += len;
  }
  return out;
}

void encode(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

bool is_space(char32_t c) {
  switch (c) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
           (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
  }
  switch (c) {
    case 0xA1: case 0xAB: case 0xBB: case 0xBF:
    case 0x2013: case 0x2014: case 0x2018: case 0x2019:
    case 0x201C: case 0x201D: case 0x2026:
      return true;
    default:
      return false;
  }
}

bool is_word(char32_t c) { return !is_space(c) && (!is_punct(c) || c == U'_'); }

char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 0x20;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 0x20;
  return c;
}

std::string render(std::span<const CodePoint> cps, bool lowercase) {
  std::string out;
  for (const auto& cp : cps) {
    const char32_t low = lowercase ? to_lower(cp.value) : cp.value;
    if (low == cp.value) {
      out.append(cp.bytes);
    } else {
      encode(low, out);
    }
  }
  return out;
}

void split_chunk(std::span<const CodePoint> chunk, const TokenizerOptions& options,
                 TokenSequence& out) {
  std::size_t begin = 0, end = chunk.size();
  while (begin < end && is_punct(chunk[begin].value)) {
    const char32_t c = chunk[begin].value;
    const bool sigil = (c == U'#' || c == U'@') && begin + 1 < end &&
                       is_word(chunk[begin + 1].value);
    if (sigil) break;
    out.push_back(render(chunk.subspan(begin, 1), options.lowercase));
    ++begin;
  }
  std::size_t core_end = end;
  while (core_end > begin && is_punct(chunk[core_end - 1].value)) --core_end;
  // A bare sigil left over (e.g. "#!") is already handled: sigil requires a word char.
  if (core_end > begin) {
    out.push_back(render(chunk.subspan(begin, core_end - begin), options.lowercase));
  }
  for (std::size_t i = core_end; i < end; ++i) {
    out.push_back(render(chunk.subspan(i, 1), options.lowercase));
  }
}

const std::string kPadToken = "<pad>";
const std::string kUnkToken = "<unk>";

}  // namespace

TokenSequence tokenize(std::string_view text, const TokenizerOptions& options) {
  const auto cps = decode(text);
  TokenSequence tokens;
  std::size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && is_space(cps[i].value)) ++i;
    std::size_t j = i;
    while (j < cps.size() && !is_space(cps[j].value)) ++j;
    if (j > i) split_chunk(std::span(cps).subspan(i, j - i), options, tokens);
    i = j;
  }
  return tokens;
}

Vocabulary::Vocabulary(std::vector<std::string> ranked_tokens, std::size_t max_size)
    : tokens_(std::move(ranked_tokens)), max_size_(max_size) {
  if (tokens_.size() > max_size_) tokens_.resize(max_size_);
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw FormatError("vocabulary contains an empty token");
    if (!index_.emplace(tokens_[i], kFirstToken + static_cast<std::int32_t>(i)).second) {
      throw FormatError("vocabulary contains duplicate token '" + tokens_[i] + "'");
    }
  }
}

std::int32_t Vocabulary::index_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknown : it->second;
}

const std::string& Vocabulary::token_at(std::int32_t index) const {
  if (index == kPadding) return kPadToken;
  if (index == kUnknown) return kUnkToken;
  return tokens_.at(static_cast<std::size_t>(index - kFirstToken));
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = fnv1a(std::to_string(max_size_));
  for (const auto& t : tokens_) {
    h = fnv1a(t, h);
    h = fnv1a(std::string_view("\n"), h);
  }
  return h;
}

Vocabulary build_vocabulary(std::span<const TokenSequence> training_tweets,
                            std::size_t max_size) {
  if (max_size == 0) throw ConfigError("vocabulary max_size must be >= 1");
  if (training_tweets.empty()) throw DataError("cannot build a vocabulary from no tweets");
  std::map<std::string, std::size_t> counts;
  for (const auto& tweet : training_tweets) {
    for (const auto& token : tweet) ++counts[token];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // std::map iteration is lexicographic, so a stable sort on count keeps ties ordered.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size) ranked.resize(max_size);
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [token, n] : ranked) tokens.push_back(std::move(token));
  return Vocabulary(std::move(tokens), max_size);
}

Eigen::VectorXi vectorize(const TokenSequence& tokens, const Vocabulary& vocab,
                          std::size_t max_len) {
  Eigen::VectorXi out = Eigen::VectorXi::Zero(static_cast<Eigen::Index>(max_len));
  const std::size_t n = std::min(max_len, tokens.size());
  for (std::size_t i = 0; i < n; ++i) {
    out(static_cast<Eigen::Index>(i)) = vocab.index_of(tokens[i]);
  }
  return out;
}

std::string serialize_vocabulary(const Vocabulary& vocab) {
  std::ostringstream os;
  os << "%max_size\t" << vocab.max_size() << '\n';
  os << vocab.token_at(Vocabulary::kPadding) << '\t' << Vocabulary::kPadding << '\n';
  os << vocab.token_at(Vocabulary::kUnknown) << '\t' << Vocabulary::kUnknown << '\n';
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    os << vocab.ranked_tokens()[i] << '\t' << Vocabulary::kFirstToken + static_cast<int>(i)
       << '\n';
  }
  return os.str();
}

Vocabulary deserialize_vocabulary(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_size = 0;
  std::vector<std::string> tokens;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw FormatError("vocabulary line " + std::to_string(line_no) + ": missing tab");
    const std::string token = line.substr(0, tab);
    long long value = 0;
    try {
      value = std::stoll(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw FormatError("vocabulary line " + std::to_string(line_no) + ": bad index");
    }
    if (line_no == 1) {
      if (token != "%max_size" || value <= 0) throw FormatError("vocabulary: missing %max_size header");
      max_size = static_cast<std::size_t>(value);
      continue;
    }
    if (value < Vocabulary::kFirstToken) continue;
    if (value != Vocabulary::kFirstToken + static_cast<long long>(tokens.size())) {
      throw FormatError("vocabulary line " + std::to_string(line_no) + ": indices not contiguous");
    }
    tokens.push_back(token);
  }
  if (max_size == 0) throw FormatError("vocabulary: empty file");
  if (tokens.size() > max_size) throw FormatError("vocabulary: more tokens than max_size");
  return Vocabulary(std::move(tokens), max_size);
}

void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary " + path.string());
  out << serialize_vocabulary(vocab);
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vocabulary " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_vocabulary(buf.str());
}

}  // namespace hsd
