#ifndef HSD_EVALUATION_HPP
#define HSD_EVALUATION_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hsd/classifier.hpp"
#include "hsd/data_io.hpp"
#include "hsd/ensemble.hpp"
#include "hsd/labels.hpp"

namespace hsd {

/// 3x3 counts, rows = true label, columns = predicted label.
class ConfusionMatrix {
 public:
  using Counts = Eigen::Matrix<std::uint64_t, 3, 3>;

  ConfusionMatrix() : counts_(Counts::Zero()) {}
  /// rows[t][p], in (N, R, S) order.
  static ConfusionMatrix from_rows(const std::array<std::array<std::uint64_t, 3>, 3>& rows);

  void add(ClassLabel truth, ClassLabel predicted, std::uint64_t n = 1) {
    counts_(static_cast<Eigen::Index>(index_of(truth)),
            static_cast<Eigen::Index>(index_of(predicted))) += n;
  }
  std::uint64_t operator()(ClassLabel truth, ClassLabel predicted) const {
    return counts_(static_cast<Eigen::Index>(index_of(truth)),
                   static_cast<Eigen::Index>(index_of(predicted)));
  }
  std::uint64_t row_sum(ClassLabel truth) const;
  std::uint64_t column_sum(ClassLabel predicted) const;
  std::uint64_t total() const { return counts_.sum(); }
  const Counts& counts() const { return counts_; }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    counts_ += other.counts_;
    return *this;
  }
  friend bool operator==(const ConfusionMatrix& a, const ConfusionMatrix& b) {
    return a.counts_ == b.counts_;
  }

 private:
  Counts counts_;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  // Set when the denominator was zero and the value was defined as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
};

struct MetricsReport {
  std::array<ClassMetrics, kNumClasses> per_class{};
  std::array<std::uint64_t, kNumClasses> support{};  // row sums
  /// Support-weighted means of the per-class values.
  double precision = 0.0;
  double recall = 0.0;
  double weighted_f = 0.0;

  const ClassMetrics& operator[](ClassLabel c) const { return per_class[index_of(c)]; }
  bool degenerate() const;
};

/// Per-class precision, recall and F plus support-weighted overall values.
/// Throws ValidationError on an empty matrix.
MetricsReport per_class_metrics(const ConfusionMatrix& cm);

using ClassValues = std::array<double, kNumClasses>;

/// (F_N * s_N + F_R * s_R + F_S * s_S) / (s_N + s_R + s_S). Supports must be
/// non-negative with a positive sum.
double weighted_f(const MetricsReport& report, const ClassValues& supports);
double weighted_f(const ClassValues& f, const ClassValues& supports);

struct Fold {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

/// Seeded partition of n items into k near-equal disjoint test folds. With
/// `labels` given, every class is spread evenly over the folds.
std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed,
                              std::span<const ClassLabel> labels = {});
std::vector<Fold> kfold_split(const Corpus& corpus, std::size_t k, std::uint64_t seed,
                              bool stratified = false);

struct ExperimentPlan {
  EnsembleScheme scheme;
  std::size_t folds = 10;
  std::size_t runs = 15;
  std::uint64_t seed = 1;
  bool stratified_folds = false;
  /// Count tendencies over the whole corpus instead of the training split.
  /// Leaks test labels; kept only for comparison runs.
  bool leaky_tendencies = false;
  std::size_t jobs = 1;
  TrainConfig train;

  /// Runs that enter the enumeration: all of them, but only the first five
  /// for ensembles of more than three members.
  std::size_t enumeration_runs() const;
  /// enumeration_runs() ^ members.
  std::uint64_t enumeration_size() const;
  /// Seed of one training job.
  std::uint64_t train_seed(std::size_t fold, FeatureCombination member, std::size_t run) const;
  std::uint64_t fold_seed() const;
  /// Throws ConfigError on an unusable plan.
  void validate() const;
};

/// A scheme with one member, for single-classifier evaluation.
EnsembleScheme single_classifier_scheme(FeatureCombination combination);

/// Class distributions of one trained run on one test fold.
struct RunPredictions {
  std::size_t fold = 0;
  FeatureCombination member = FeatureCombination::O;
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::size_t selected_epoch = 0;
  std::vector<std::string> ids;
  Eigen::MatrixXd probs;  // [3 x n]
};

struct MemberSummary {
  FeatureCombination member = FeatureCombination::O;
  ConfusionMatrix confusion;  // all runs, all folds
  MetricsReport metrics;
};

struct ExperimentResults {
  ExperimentPlan plan;
  std::size_t corpus_size = 0;
  std::array<std::uint64_t, kNumClasses> class_support{};
  std::vector<Fold> folds;
  ConfusionMatrix confusion;  // accumulated over combinations and folds
  MetricsReport metrics;
  std::vector<ConfusionMatrix> combination_confusion;  // one per enumerated combination
  std::vector<double> combination_f;
  double f_mean = 0.0;
  double f_std = 0.0;
  /// Cumulative mean of combination_f in enumeration order.
  std::vector<double> convergence;
  std::uint64_t decided_by_vote = 0;
  std::uint64_t decided_by_confidence = 0;
  std::vector<MemberSummary> members;
  std::vector<RunPredictions> predictions;  // fold-major, then member, then run

  bool empty() const { return confusion.total() == 0; }
};

struct ExperimentOptions {
  /// Receives every trained model; calls are serialised.
  std::function<void(const RunPredictions&, const TrainedModel&)> on_model;
  std::function<void(const std::string&)> log;
};

/// Cross-validated ensemble evaluation: per fold, builds the vocabulary and
/// tendencies from the training split, trains `runs` instances of every
/// member, predicts the test fold and pushes every run combination through
/// the ensemble combiner.
ExperimentResults run_experiment(const ExperimentPlan& plan, const Corpus& corpus,
                                 const ExperimentOptions& options = {});

/// Decides one combination of member votes: vote with confidence fallback for three or
/// more members, argmax for a single member.
FastDecision decide(std::span<const MemberVote> votes);

/// Mean and population standard deviation.
std::pair<double, double> mean_std(std::span<const double> values);

/// Writes results.json, summary.txt, confusion.tsv, members.tsv,
/// convergence.tsv and per-run prediction dumps under `dir`. Throws
/// DataError when the results are empty or the directory is unwritable.
void report(const ExperimentResults& results, const std::filesystem::path& dir);

/// Human-readable summary (overall row, per-class rows, confusion matrix).
std::string format_summary(const ExperimentResults& results);
std::string format_metrics_table(const MetricsReport& report, std::string_view name);
std::string format_confusion(const ConfusionMatrix& cm);

/// Machine-readable results, stable key order and number formatting.
std::string results_json(const ExperimentResults& results);

/// "tweet_id\tp_N\tp_R\tp_S" lines with a header.
void write_predictions(const std::vector<std::string>& ids, const Eigen::MatrixXd& probs,
                       const std::filesystem::path& path);

}  // namespace hsd

#endif  // HSD_EVALUATION_HPP
