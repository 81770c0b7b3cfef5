#include "hsd/user_features.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>

#include "hsd/errors.hpp"

namespace hsd {

std::string_view to_string(FeatureCombination combination) {
  switch (combination) {
    case FeatureCombination::O:
      return "O";
    case FeatureCombination::NS:
      return "NS";
    case FeatureCombination::NR:
      return "NR";
    case FeatureCombination::RS:
      return "RS";
    case FeatureCombination::NRS:
      return "NRS";
  }
  return "?";
}

std::optional<FeatureCombination> parse_combination(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  for (auto c : kAllCombinations) {
    if (upper == to_string(c)) return c;
  }
  return std::nullopt;
}

std::vector<ClassLabel> selected_features(FeatureCombination combination) {
  using enum ClassLabel;
  switch (combination) {
    case FeatureCombination::O:
      return {};
    case FeatureCombination::NS:
      return {Neutral, Sexism};
    case FeatureCombination::NR:
      return {Neutral, Racism};
    case FeatureCombination::RS:
      return {Racism, Sexism};
    case FeatureCombination::NRS:
      return {Neutral, Racism, Sexism};
  }
  return {};
}

std::size_t feature_count(FeatureCombination combination) {
  return selected_features(combination).size();
}

std::size_t input_dimension(FeatureCombination combination, std::size_t max_len) {
  return max_len + feature_count(combination);
}

ClassifierInput assemble_input(const Eigen::VectorXi& indices, const TendencyProfile& profile,
                               FeatureCombination combination) {
  const auto selected = selected_features(combination);
  ClassifierInput input{indices, Eigen::VectorXd(static_cast<Eigen::Index>(selected.size())),
                        combination};
  for (std::size_t i = 0; i < selected.size(); ++i) {
    input.features(static_cast<Eigen::Index>(i)) = profile[selected[i]];
  }
  return input;
}

TendencyTable::TendencyTable(const Corpus& training) {
  for (const auto& t : training.tweets()) {
    const auto c = index_of(t.label());
    ++counts_[t.user_id][c];
    ++class_totals_[c];
    ++total_;
  }
}

TendencyTable TendencyTable::from_counts(
    std::unordered_map<std::string, std::array<std::size_t, kNumClasses>> counts) {
  TendencyTable table;
  table.counts_ = std::move(counts);
  for (const auto& [user, row] : table.counts_) {
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      table.class_totals_[c] += row[c];
      table.total_ += row[c];
    }
  }
  return table;
}

TendencyProfile TendencyTable::priors() const {
  if (total_ == 0) return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  const double n = static_cast<double>(total_);
  return {static_cast<double>(class_totals_[0]) / n, static_cast<double>(class_totals_[1]) / n,
          static_cast<double>(class_totals_[2]) / n};
}

TendencyProfile TendencyTable::profile(const std::string& user_id,
                                       std::optional<ClassLabel> excluded) const {
  auto it = counts_.find(user_id);
  if (it == counts_.end()) return priors();
  auto row = it->second;
  if (excluded) {
    auto& slot = row[index_of(*excluded)];
    if (slot == 0) {
      throw ValidationError("user " + user_id + " has no " + std::string(to_string(*excluded)) +
                            " tweet to exclude");
    }
    --slot;
  }
  const std::size_t n = row[0] + row[1] + row[2];
  if (n == 0) return priors();
  const double d = static_cast<double>(n);
  return {static_cast<double>(row[0]) / d, static_cast<double>(row[1]) / d,
          static_cast<double>(row[2]) / d};
}

TendencyProfile compute_tendencies(const std::string& user_id, const Corpus& training_corpus,
                                   const std::optional<std::string>& exclude) {
  std::array<std::size_t, kNumClasses> row{};
  std::size_t n = 0;
  for (auto i : training_corpus.tweets_of(user_id)) {
    const auto& t = training_corpus[i];
    if (exclude && t.tweet_id == *exclude) continue;
    ++row[index_of(t.label())];
    ++n;
  }
  if (n == 0) return TendencyTable(training_corpus).priors();
  const double d = static_cast<double>(n);
  return {static_cast<double>(row[0]) / d, static_cast<double>(row[1]) / d,
          static_cast<double>(row[2]) / d};
}

void export_profiles(const Corpus& training_corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write profiles to " + path.string());
  const TendencyTable table(training_corpus);
  out << "user_id\tt_N\tt_R\tt_S\n" << std::setprecision(17);
  for (const auto& user : training_corpus.users()) {
    const auto p = table.profile(user);
    out << user << '\t' << p.neutral << '\t' << p.racism << '\t' << p.sexism << '\n';
  }
}

}  // namespace hsd
