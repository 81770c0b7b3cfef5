#ifndef HSD_USER_FEATURES_HPP
#define HSD_USER_FEATURES_HPP

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "hsd/data_io.hpp"
#include "hsd/labels.hpp"

namespace hsd {

/// A user's share of Neutral / Racism / Sexism posts. Lies on the simplex.
struct TendencyProfile {
  double neutral = 0.0;
  double racism = 0.0;
  double sexism = 0.0;

  double operator[](ClassLabel c) const {
    switch (c) {
      case ClassLabel::Neutral:
        return neutral;
      case ClassLabel::Racism:
        return racism;
      case ClassLabel::Sexism:
        return sexism;
    }
    return 0.0;
  }
  Eigen::Vector3d as_vector() const { return {neutral, racism, sexism}; }
  friend bool operator==(const TendencyProfile&, const TendencyProfile&) = default;
};

/// Which tendencies ride along with the token vector.
enum class FeatureCombination { O, NS, NR, RS, NRS };

inline constexpr std::array<FeatureCombination, 5> kAllCombinations{
    FeatureCombination::O, FeatureCombination::NS, FeatureCombination::NR,
    FeatureCombination::RS, FeatureCombination::NRS};

std::string_view to_string(FeatureCombination combination);
std::optional<FeatureCombination> parse_combination(std::string_view text);

/// Selected tendencies, always in (N, R, S) order.
std::vector<ClassLabel> selected_features(FeatureCombination combination);
std::size_t feature_count(FeatureCombination combination);
/// max_len + feature_count; 30/32/32/32/33 at the default tweet length.
std::size_t input_dimension(FeatureCombination combination, std::size_t max_len = 30);

struct ClassifierInput {
  Eigen::VectorXi indices;
  Eigen::VectorXd features;
  FeatureCombination combination = FeatureCombination::O;
};

ClassifierInput assemble_input(const Eigen::VectorXi& indices, const TendencyProfile& profile,
                               FeatureCombination combination);

/// Per-user label counts of one training partition, plus its class priors.
/// Profiles with self-exclusion are an O(1) lookup.
class TendencyTable {
 public:
  TendencyTable() = default;
  /// Counts every tweet of a resolved corpus.
  explicit TendencyTable(const Corpus& training);

  /// Profile of `user_id` from the counted history, minus one tweet labelled
  /// `excluded` when given. Falls back to the priors when nothing remains.
  TendencyProfile profile(const std::string& user_id,
                          std::optional<ClassLabel> excluded = std::nullopt) const;

  TendencyProfile priors() const;
  std::size_t total() const { return total_; }
  const std::unordered_map<std::string, std::array<std::size_t, kNumClasses>>& counts() const {
    return counts_;
  }

  /// Rebuilds a table from stored counts (model files).
  static TendencyTable from_counts(
      std::unordered_map<std::string, std::array<std::size_t, kNumClasses>> counts);

 private:
  std::unordered_map<std::string, std::array<std::size_t, kNumClasses>> counts_;
  std::array<std::size_t, kNumClasses> class_totals_{};
  std::size_t total_ = 0;
};

/// Tendency of `user_id` over `training_corpus`, leaving out `exclude` (the
/// tweet being classified) when it belongs to that corpus.
TendencyProfile compute_tendencies(const std::string& user_id, const Corpus& training_corpus,
                                   const std::optional<std::string>& exclude = std::nullopt);

/// TSV export "user_id<TAB>t_N<TAB>t_R<TAB>t_S", users in first-appearance order.
void export_profiles(const Corpus& training_corpus, const std::filesystem::path& path);

}  // namespace hsd

#endif  // HSD_USER_FEATURES_HPP
