#ifndef HSD_CLASSIFIER_HPP
#define HSD_CLASSIFIER_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "hsd/data_io.hpp"
#include "hsd/labels.hpp"
#include "hsd/nn/adam.hpp"
#include "hsd/nn/network.hpp"
#include "hsd/text_pipeline.hpp"
#include "hsd/user_features.hpp"

namespace hsd {

/// How tendencies reach the network.
///  Concat: appended to the final LSTM state, in front of the dense layer.
///  Tokens: quantised into 100 reserved embedding slots and appended to the
///          token sequence as pseudo-tokens (sequence length max_len + k).
enum class InputMode { Concat, Tokens };

std::string_view to_string(InputMode mode);
std::optional<InputMode> parse_input_mode(std::string_view text);

inline constexpr std::int32_t kTendencySlots = 100;

struct TrainConfig {
  std::size_t max_epochs = 100;
  std::size_t batch_size = 500;
  double validation_fraction = 0.15;
  std::size_t vocab_size = 25000;
  std::size_t max_len = 30;
  std::size_t hidden = 200;
  std::size_t embedding_dim = 16;
  nn::CellActivation activation = nn::CellActivation::Sigmoid;
  InputMode input_mode = InputMode::Concat;
  bool masking = true;
  bool lowercase = true;
  bool stratified_validation = true;
  /// Global-norm gradient clip; 0 disables.
  double clip_norm = 0.0;
  nn::AdamHyper adam;
  /// Selected epoch must have val_loss <= (1 + tolerance) * lowest val_loss.
  double selection_tolerance = 0.01;
  std::uint64_t seed = 1;

  /// Throws ConfigError on non-positive sizes or a fraction outside (0, 1).
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;  // running value over the epoch's batches
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

/// Picks the epoch with the highest validation accuracy among those whose
/// validation loss is within (1 + tolerance) of the lowest one; ties go to
/// the earliest epoch. Returns an index into `history`.
std::size_t select_epoch(std::span<const EpochRecord> history, double tolerance = 0.01);

/// Network inputs for a set of tweets, one column per tweet.
struct EncodedSet {
  Eigen::MatrixXi tokens;    // [sequence length x n]
  Eigen::MatrixXd features;  // [concatenated features x n]
  Eigen::VectorXi targets;   // class ordinals; empty when unlabelled
  std::vector<std::string> ids;

  Eigen::Index size() const { return tokens.cols(); }
};

/// Turns (index vector, tendency profile) pairs into network columns for one
/// feature combination and input mode.
class Encoder {
 public:
  Encoder(const Vocabulary& vocab, FeatureCombination combination, InputMode mode,
          std::size_t max_len, bool lowercase);

  FeatureCombination combination() const { return combination_; }
  Eigen::Index sequence_length() const;
  Eigen::Index concat_features() const;
  /// Embedding rows needed: vocabulary indices plus the tendency slots in Tokens mode.
  Eigen::Index embedding_rows() const;
  /// Embedding index of a tendency value in Tokens mode.
  std::int32_t tendency_slot(double value) const;

  ClassifierInput input(std::string_view text, const TendencyProfile& profile) const;
  void write_column(const ClassifierInput& input, EncodedSet& set, Eigen::Index col) const;

 private:
  const Vocabulary* vocab_;
  FeatureCombination combination_;
  InputMode mode_;
  std::size_t max_len_;
  TokenizerOptions tokenizer_;
};

/// What one fold's training partition provides to every run: tokenised
/// tweets, the vocabulary and the tendency counts.
struct TrainingContext {
  Corpus corpus;
  std::vector<TokenSequence> tokens;
  Vocabulary vocab;
  TendencyTable tendencies;
  /// tweet_id -> label of every tweet counted in `tendencies`. Those tweets
  /// leave themselves out of their author's history when encoded.
  std::unordered_map<std::string, ClassLabel> counted;
};

/// Builds the vocabulary and tendency table from `partition` only.
TrainingContext make_training_context(const Corpus& partition, const TrainConfig& config);

/// Replication-of-record variant that counts tendencies over `history`
/// (normally the whole labelled corpus). This leaks test labels into the
/// features and exists only to compare against the leak-free default.
TrainingContext make_training_context(const Corpus& partition, const Corpus& history,
                                      const TrainConfig& config);

class TrainedModel {
 public:
  TrainedModel() = default;
  TrainedModel(FeatureCombination combination, TrainConfig config, Vocabulary vocab,
               TendencyTable tendencies, nn::Network<double> network,
               std::vector<EpochRecord> history, std::size_t selected_epoch);

  FeatureCombination combination() const { return combination_; }
  const TrainConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const TendencyTable& tendencies() const { return tendencies_; }
  const nn::Network<double>& network() const { return network_; }
  const std::vector<EpochRecord>& history() const { return history_; }
  /// 1-based epoch whose snapshot these parameters are.
  std::size_t selected_epoch() const { return selected_epoch_; }
  std::size_t input_dimension() const;

  Encoder encoder() const;

  /// Builds the classifier input for a message by `user_id`, using the stored
  /// training history of that user (class priors when unseen).
  ClassifierInput make_input(std::string_view text, const std::string& user_id) const;
  ClassifierInput make_input(std::string_view text, const TendencyProfile& profile) const;

  /// Throws ConfigError when the input was assembled for another combination.
  ClassDistribution predict(const ClassifierInput& input) const;
  /// Probabilities [3 x n], evaluated in chunks of the configured batch size.
  Eigen::MatrixXd predict(const EncodedSet& set) const;

 private:
  FeatureCombination combination_ = FeatureCombination::O;
  TrainConfig config_;
  Vocabulary vocab_;
  TendencyTable tendencies_;
  nn::Network<double> network_;
  std::vector<EpochRecord> history_;
  std::size_t selected_epoch_ = 0;
};

struct TrainOptions {
  /// Called after every epoch (logging).
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Trains one classifier on the context's partition: seeded stratified
/// validation split, shuffled mini-batches, ADAM, epoch selection.
TrainedModel train(const TrainingContext& context, FeatureCombination combination,
                   const TrainConfig& config, const TrainOptions& options = {});
TrainedModel train(const Corpus& partition, FeatureCombination combination,
                   const TrainConfig& config, const TrainOptions& options = {});

/// Encodes tweets of `corpus` against a training context. Authors' tendencies
/// come from the context; a tweet that belongs to the context corpus is
/// excluded from its own author's history.
EncodedSet encode(const Corpus& corpus, std::span<const std::size_t> rows,
                  const TrainingContext& context, const Encoder& encoder);

/// Writes "epoch\ttrain_loss\ttrain_accuracy\tval_loss\tval_accuracy\tselected".
void write_history(const TrainedModel& model, const std::filesystem::path& path);

// Model container (see docs/model_format.md).
struct LoadOptions {
  std::optional<InputMode> expected_mode;
  std::optional<std::uint64_t> expected_vocab_hash;
};

void save_model(const TrainedModel& model, const std::filesystem::path& path);
/// Throws FormatError for corrupt or truncated files, unknown versions, and
/// an input-mode mismatch. A vocabulary-hash mismatch adds a warning.
TrainedModel load_model(const std::filesystem::path& path, const LoadOptions& options = {},
                        std::vector<std::string>* warnings = nullptr);

inline constexpr std::uint32_t kModelFormatVersion = 1;

}  // namespace hsd

#endif  // HSD_CLASSIFIER_HPP
