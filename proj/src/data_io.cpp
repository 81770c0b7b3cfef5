#include "hsd/data_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hsd/errors.hpp"

namespace hsd {

namespace {

std::string_view trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<ClassLabel> normalize(std::vector<ClassLabel> labels) {
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  return labels;
}

std::string join_labels(const std::vector<ClassLabel>& labels, char sep) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += sep;
    out += to_string(labels[i]);
  }
  return out;
}

// Parses the label column. Returns nullopt when any part is not a label.
std::optional<std::vector<ClassLabel>> parse_label_set(std::string_view field) {
  std::vector<ClassLabel> labels;
  std::size_t start = 0;
  while (start <= field.size()) {
    std::size_t end = field.find_first_of(",+|", start);
    if (end == std::string_view::npos) end = field.size();
    auto part = trim(field.substr(start, end - start));
    auto label = parse_label(part);
    if (!label) return std::nullopt;
    labels.push_back(*label);
    start = end + 1;
  }
  return normalize(std::move(labels));
}

}  // namespace

ClassLabel LabeledTweet::label() const {
  if (labels.size() != 1) {
    throw ValidationError("tweet " + tweet_id + " carries " +
                          std::to_string(labels.size()) +
                          " labels; resolve dual labels first");
  }
  return labels.front();
}

std::optional<DualLabelPolicy> parse_policy(std::string_view text) {
  const auto s = lower(text);
  if (s == "prefer-hateful") return DualLabelPolicy::PreferHateful;
  if (s == "prefer-neutral") return DualLabelPolicy::PreferNeutral;
  if (s == "drop") return DualLabelPolicy::Drop;
  return std::nullopt;
}

std::string_view to_string(DualLabelPolicy policy) {
  switch (policy) {
    case DualLabelPolicy::PreferHateful:
      return "prefer-hateful";
    case DualLabelPolicy::PreferNeutral:
      return "prefer-neutral";
    case DualLabelPolicy::Drop:
      return "drop";
  }
  return "?";
}

Corpus::Corpus(std::vector<LabeledTweet> tweets, std::vector<Resolution> resolutions)
    : tweets_(std::move(tweets)), resolutions_(std::move(resolutions)) {
  for (std::size_t i = 0; i < tweets_.size(); ++i) {
    auto& t = tweets_[i];
    if (t.labels.empty()) throw ValidationError("tweet " + t.tweet_id + " has no label");
    t.labels = normalize(std::move(t.labels));
    if (trim(t.text).empty()) throw ValidationError("tweet " + t.tweet_id + " has empty text");
    if (!by_id_.emplace(t.tweet_id, i).second) {
      throw ValidationError("duplicate tweet_id " + t.tweet_id);
    }
    auto [it, inserted] = by_user_.try_emplace(t.user_id);
    if (inserted) user_order_.push_back(t.user_id);
    it->second.push_back(i);
  }
}

std::span<const std::size_t> Corpus::tweets_of(const std::string& user_id) const {
  auto it = by_user_.find(user_id);
  if (it == by_user_.end()) return {};
  return it->second;
}

std::optional<std::size_t> Corpus::find(const std::string& tweet_id) const {
  auto it = by_id_.find(tweet_id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

bool Corpus::resolved() const {
  return std::all_of(tweets_.begin(), tweets_.end(),
                     [](const LabeledTweet& t) { return t.resolved(); });
}

Corpus Corpus::subset(std::span<const std::size_t> indices) const {
  std::vector<LabeledTweet> picked;
  picked.reserve(indices.size());
  for (auto i : indices) picked.push_back(tweets_.at(i));
  return Corpus(std::move(picked));
}

Corpus parse_corpus(std::istream& in, const CorpusFormat& format) {
  std::vector<LabeledTweet> tweets;
  std::unordered_map<std::string, std::size_t> first_seen;
  std::string line;
  std::size_t line_no = 0;
  bool first_record = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;

    std::array<std::string_view, 3> head;
    std::string_view rest = line;
    bool complete = true;
    for (auto& field : head) {
      auto pos = rest.find(format.delimiter);
      if (pos == std::string_view::npos) {
        complete = false;
        break;
      }
      field = rest.substr(0, pos);
      rest.remove_prefix(pos + 1);
    }

    if (first_record) {
      first_record = false;
      bool header = false;
      if (format.has_header) {
        header = *format.has_header;
      } else if (complete) {
        const auto id = lower(trim(head[0]));
        header = !parse_label_set(head[2]) && (id == "tweet_id" || id == "id");
      }
      if (header) continue;
    }

    if (!complete) {
      throw ParseError(line_no, "expected 4 fields (tweet_id, user_id, label, text)");
    }
    LabeledTweet t;
    t.tweet_id = std::string(trim(head[0]));
    t.user_id = std::string(trim(head[1]));
    t.text = std::string(rest);
    if (t.tweet_id.empty()) throw ParseError(line_no, "empty tweet_id");
    if (t.user_id.empty()) throw ParseError(line_no, "empty user_id");
    auto labels = parse_label_set(head[2]);
    if (!labels) {
      throw ValidationError("line " + std::to_string(line_no) + ": unknown label '" +
                            std::string(head[2]) + "'");
    }
    t.labels = std::move(*labels);
    if (trim(t.text).empty()) throw ParseError(line_no, "empty text");
    auto [it, inserted] = first_seen.emplace(t.tweet_id, line_no);
    if (!inserted) {
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate tweet_id " +
                            t.tweet_id + " (first seen on line " +
                            std::to_string(it->second) + ")");
    }
    tweets.push_back(std::move(t));
  }
  return Corpus(std::move(tweets));
}

Corpus load_corpus(const std::filesystem::path& path, const CorpusFormat& format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  return parse_corpus(in, format);
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file " + path.string());
  out << "tweet_id\tuser_id\tlabel\ttext\n";
  for (const auto& t : corpus.tweets()) {
    out << t.tweet_id << '\t' << t.user_id << '\t' << join_labels(t.labels, ',') << '\t'
        << t.text << '\n';
  }
}

Corpus resolve_dual_labels(const Corpus& corpus, DualLabelPolicy policy) {
  std::vector<LabeledTweet> kept;
  kept.reserve(corpus.size());
  auto log = corpus.resolutions();
  for (const auto& t : corpus.tweets()) {
    if (t.resolved()) {
      kept.push_back(t);
      continue;
    }
    const bool racism = std::count(t.labels.begin(), t.labels.end(), ClassLabel::Racism);
    const bool sexism = std::count(t.labels.begin(), t.labels.end(), ClassLabel::Sexism);
    if (t.labels.size() > 2 || (racism && sexism)) {
      throw ValidationError("tweet " + t.tweet_id + " has unsupported label set " +
                            join_labels(t.labels, '+'));
    }
    // Exactly Neutral plus one hateful class from here on.
    const ClassLabel hateful = racism ? ClassLabel::Racism : ClassLabel::Sexism;
    Resolution r{t.tweet_id, t.labels, std::nullopt};
    if (policy != DualLabelPolicy::Drop) {
      r.kept = policy == DualLabelPolicy::PreferHateful ? hateful : ClassLabel::Neutral;
      LabeledTweet copy = t;
      copy.labels = {*r.kept};
      kept.push_back(std::move(copy));
    }
    log.push_back(std::move(r));
  }
  return Corpus(std::move(kept), std::move(log));
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return std::nullopt;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  stats.size = corpus.size();
  stats.user_count = corpus.user_count();
  for (const auto& r : corpus.resolutions()) {
    ++stats.dual_label_count;
    ++stats.dual_label_breakdown[join_labels(r.original, '+')];
    if (!r.kept) ++stats.dropped;
  }
  for (const auto& t : corpus.tweets()) ++stats.class_counts[index_of(t.label())];

  // Leave-one-out tendency of each tweet's author, over the whole corpus.
  std::array<std::vector<double>, kNumClasses> tendency;
  std::array<std::vector<double>, kNumClasses> indicator;
  for (const auto& user : corpus.users()) {
    const auto idx = corpus.tweets_of(user);
    if (idx.size() < 2) continue;
    std::array<double, kNumClasses> counts{};
    for (auto i : idx) counts[index_of(corpus[i].label())] += 1.0;
    const double others = static_cast<double>(idx.size() - 1);
    for (auto i : idx) {
      const auto own = index_of(corpus[i].label());
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        const double is_c = own == c ? 1.0 : 0.0;
        tendency[c].push_back((counts[c] - is_c) / others);
        indicator[c].push_back(is_c);
      }
    }
  }
  stats.correlation_sample = tendency[0].size();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    stats.tendency_label_correlation[c] = pearson(tendency[c], indicator[c]);
  }
  return stats;
}

std::string format_stats(const CorpusStats& stats) {
  std::ostringstream os;
  os << "tweets        " << stats.size << '\n';
  os << "users         " << stats.user_count << '\n';
  os << "dual labels   " << stats.dual_label_count;
  if (stats.dropped) os << " (" << stats.dropped << " dropped)";
  os << '\n';
  for (const auto& [kind, n] : stats.dual_label_breakdown) {
    os << "  " << std::left << std::setw(16) << kind << n << '\n';
  }
  os << '\n' << std::left << std::setw(10) << "class" << std::right << std::setw(8) << "count"
     << std::setw(10) << "share" << std::setw(14) << "tendency r" << '\n';
  for (auto label : kAllLabels) {
    const auto c = index_of(label);
    const double share =
        stats.size ? static_cast<double>(stats.class_counts[c]) / static_cast<double>(stats.size)
                   : 0.0;
    os << std::left << std::setw(10) << to_string(label) << std::right << std::setw(8)
       << stats.class_counts[c] << std::setw(10) << std::fixed << std::setprecision(4) << share;
    if (stats.tendency_label_correlation[c]) {
      os << std::setw(14) << *stats.tendency_label_correlation[c];
    } else {
      os << std::setw(14) << "n/a";
    }
    os << '\n';
  }
  os << "(correlation over " << stats.correlation_sample
     << " tweets whose author has another tweet; leave-one-out tendency)\n";
  return os.str();
}

std::string format_stats_kv(const CorpusStats& stats) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "tweets=" << stats.size << '\n';
  os << "users=" << stats.user_count << '\n';
  os << "dual_labels=" << stats.dual_label_count << '\n';
  os << "dropped=" << stats.dropped << '\n';
  for (const auto& [kind, n] : stats.dual_label_breakdown) {
    os << "dual." << kind << '=' << n << '\n';
  }
  for (auto label : kAllLabels) {
    os << "count." << to_string(label) << '=' << stats.class_counts[index_of(label)] << '\n';
  }
  os << "correlation_sample=" << stats.correlation_sample << '\n';
  for (auto label : kAllLabels) {
    os << "correlation." << to_string(label) << '=';
    if (const auto& r = stats.tendency_label_correlation[index_of(label)]) {
      os << *r;
    } else {
      os << "nan";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace hsd
