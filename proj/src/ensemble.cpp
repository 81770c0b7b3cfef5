#include "hsd/ensemble.hpp"

#include <array>

#include "hsd/errors.hpp"

namespace hsd {

const std::vector<EnsembleScheme>& ensemble_schemes() {
  using enum FeatureCombination;
  static const std::vector<EnsembleScheme> schemes = {
      {"i", {O, NRS, NR}},   {"ii", {O, NRS, NS}},   {"iii", {O, NRS, RS}},
      {"iv", {O, NS, RS}},   {"v", {O, NS, NR}},     {"vi", {O, RS, NR}},
      {"vii", {NRS, NR, RS}}, {"viii", {NRS, NR, NS}}, {"ix", {NRS, NS, RS}},
      {"x", {NS, RS, NR}},   {"xi", {O, NS, RS, NR, NRS}},
  };
  return schemes;
}

std::optional<EnsembleScheme> find_scheme(std::string_view id) {
  std::string key(id);
  for (auto& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  for (const auto& s : ensemble_schemes()) {
    if (s.id == key) return s;
  }
  return std::nullopt;
}

MemberVote member_vote(const ClassDistribution& dist) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (dist(static_cast<Eigen::Index>(c)) > dist(static_cast<Eigen::Index>(best))) best = c;
  }
  return {label_from_index(best), dist(static_cast<Eigen::Index>(best))};
}

std::string_view to_string(DecisionMethod method) {
  return method == DecisionMethod::Vote ? "vote" : "confidence";
}

std::optional<ClassLabel> vote_mode(std::span<const ClassLabel> labels) {
  std::array<std::size_t, kNumClasses> counts{};
  for (auto l : labels) ++counts[index_of(l)];
  std::size_t top = 0, leaders = 0, winner = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (counts[c] > top) {
      top = counts[c];
      leaders = 1;
      winner = c;
    } else if (counts[c] == top) {
      ++leaders;
    }
  }
  if (top < 2 || leaders != 1) return std::nullopt;
  return label_from_index(winner);
}

FastDecision combine_votes(std::span<const MemberVote> votes) {
  if (votes.size() < 3) {
    throw std::invalid_argument("an ensemble needs at least three members, got " +
                                std::to_string(votes.size()));
  }
  std::array<ClassLabel, 8> labels{};
  std::vector<ClassLabel> spill;
  std::span<const ClassLabel> view;
  if (votes.size() <= labels.size()) {
    for (std::size_t i = 0; i < votes.size(); ++i) labels[i] = votes[i].label;
    view = std::span<const ClassLabel>(labels.data(), votes.size());
  } else {
    for (const auto& v : votes) spill.push_back(v.label);
    view = spill;
  }
  if (auto m = vote_mode(view)) return {*m, DecisionMethod::Vote};
  std::size_t best = 0;
  for (std::size_t i = 1; i < votes.size(); ++i) {
    if (votes[i].confidence > votes[best].confidence) best = i;
  }
  return {votes[best].label, DecisionMethod::Confidence};
}

Decision combine(std::span<const ClassDistribution> member_outputs) {
  std::vector<MemberVote> votes;
  votes.reserve(member_outputs.size());
  for (const auto& d : member_outputs) votes.push_back(member_vote(d));
  const auto fast = combine_votes(votes);
  return {fast.label, fast.method, {member_outputs.begin(), member_outputs.end()}};
}

}  // namespace hsd
