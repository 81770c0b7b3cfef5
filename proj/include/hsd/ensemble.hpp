#ifndef HSD_ENSEMBLE_HPP
#define HSD_ENSEMBLE_HPP

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hsd/labels.hpp"
#include "hsd/user_features.hpp"

namespace hsd {

/// One of the eleven evaluated ensembles, (i) .. (xi).
struct EnsembleScheme {
  std::string id;  // roman numeral, lowercase
  std::vector<FeatureCombination> members;
};

/// Schemes (i)-(x) have three members, (xi) all five.
const std::vector<EnsembleScheme>& ensemble_schemes();
std::optional<EnsembleScheme> find_scheme(std::string_view id);

struct MemberVote {
  ClassLabel label;
  double confidence;
};

/// argmax and max of a distribution; ties go to the lower class ordinal.
MemberVote member_vote(const ClassDistribution& dist);

enum class DecisionMethod { Vote, Confidence };
std::string_view to_string(DecisionMethod method);

struct Decision {
  ClassLabel label;
  DecisionMethod method;
  std::vector<ClassDistribution> member_outputs;
};

/// The unique most frequent label if it occurs at least twice, otherwise
/// nullopt (no agreement, or a tie between the leaders).
std::optional<ClassLabel> vote_mode(std::span<const ClassLabel> labels);

/// Majority vote with confidence fallback: the mode of the members' argmax
/// labels when it exists, else the label of the most confident member (the
/// first one on equal confidence). Needs at least three members.
Decision combine(std::span<const ClassDistribution> member_outputs);

/// Same decision without copying the member outputs, for bulk evaluation.
struct FastDecision {
  ClassLabel label;
  DecisionMethod method;
};
FastDecision combine_votes(std::span<const MemberVote> votes);

}  // namespace hsd

#endif  // HSD_ENSEMBLE_HPP
