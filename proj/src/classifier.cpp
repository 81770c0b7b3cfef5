#include "hsd/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "hsd/errors.hpp"
#include "hsd/random.hpp"

namespace hsd {

std::string_view to_string(InputMode mode) {
  return mode == InputMode::Concat ? "concat" : "tokens";
}

std::optional<InputMode> parse_input_mode(std::string_view text) {
  if (text == "concat" || text == "A" || text == "a") return InputMode::Concat;
  if (text == "tokens" || text == "B" || text == "b") return InputMode::Tokens;
  return std::nullopt;
}

void TrainConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(max_epochs, "max_epochs");
  positive(batch_size, "batch_size");
  positive(vocab_size, "vocab_size");
  positive(max_len, "max_len");
  positive(hidden, "hidden");
  positive(embedding_dim, "embedding_dim");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in (0, 1)");
  }
  if (!(adam.learning_rate > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.epsilon > 0.0)) {
    throw ConfigError("invalid ADAM hyperparameters");
  }
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be >= 0");
  if (selection_tolerance < 0.0) throw ConfigError("selection_tolerance must be >= 0");
}

std::size_t select_epoch(std::span<const EpochRecord> history, double tolerance) {
  if (history.empty()) throw std::invalid_argument("select_epoch: empty history");
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& r : history) lowest = std::min(lowest, r.val_loss);
  const double bound = (1.0 + tolerance) * lowest;
  std::size_t best = history.size();
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].val_loss > bound) continue;
    if (best == history.size() || history[i].val_accuracy > history[best].val_accuracy) best = i;
  }
  return best;
}

// --- encoding ---------------------------------------------------------------

Encoder::Encoder(const Vocabulary& vocab, FeatureCombination combination, InputMode mode,
                 std::size_t max_len, bool lowercase)
    : vocab_(&vocab), combination_(combination), mode_(mode), max_len_(max_len),
      tokenizer_{lowercase} {}

Eigen::Index Encoder::sequence_length() const {
  const auto extra = mode_ == InputMode::Tokens ? feature_count(combination_) : 0;
  return static_cast<Eigen::Index>(max_len_ + extra);
}

Eigen::Index Encoder::concat_features() const {
  return mode_ == InputMode::Concat ? static_cast<Eigen::Index>(feature_count(combination_)) : 0;
}

Eigen::Index Encoder::embedding_rows() const {
  return vocab_->index_limit() + (mode_ == InputMode::Tokens ? kTendencySlots : 0);
}

std::int32_t Encoder::tendency_slot(double value) const {
  const auto bucket = static_cast<std::int32_t>(std::floor(std::clamp(value, 0.0, 1.0) * kTendencySlots));
  return vocab_->index_limit() + std::min(bucket, kTendencySlots - 1);
}

ClassifierInput Encoder::input(std::string_view text, const TendencyProfile& profile) const {
  return assemble_input(vectorize(tokenize(text, tokenizer_), *vocab_, max_len_), profile,
                        combination_);
}

void Encoder::write_column(const ClassifierInput& input, EncodedSet& set,
                           Eigen::Index col) const {
  const auto L = static_cast<Eigen::Index>(max_len_);
  set.tokens.col(col).head(L) = input.indices;
  if (mode_ == InputMode::Tokens) {
    for (Eigen::Index f = 0; f < input.features.size(); ++f) {
      set.tokens(L + f, col) = tendency_slot(input.features(f));
    }
  } else {
    set.features.col(col) = input.features;
  }
}

namespace {

EncodedSet allocate(const Encoder& encoder, Eigen::Index n) {
  EncodedSet set;
  set.tokens = Eigen::MatrixXi::Zero(encoder.sequence_length(), n);
  set.features = Eigen::MatrixXd::Zero(encoder.concat_features(), n);
  return set;
}

EncodedSet columns(const EncodedSet& set, std::span<const Eigen::Index> picks) {
  EncodedSet out;
  const auto n = static_cast<Eigen::Index>(picks.size());
  out.tokens.resize(set.tokens.rows(), n);
  out.features.resize(set.features.rows(), n);
  out.targets.resize(set.targets.size() ? n : 0);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto src = picks[static_cast<std::size_t>(j)];
    out.tokens.col(j) = set.tokens.col(src);
    out.features.col(j) = set.features.col(src);
    if (set.targets.size()) out.targets(j) = set.targets(src);
    if (!set.ids.empty()) out.ids.push_back(set.ids[static_cast<std::size_t>(src)]);
  }
  return out;
}

nn::NetworkShape network_shape(const Encoder& encoder, const TrainConfig& config) {
  nn::NetworkShape shape;
  shape.vocab_rows = encoder.embedding_rows();
  shape.embedding_dim = static_cast<Eigen::Index>(config.embedding_dim);
  shape.hidden = static_cast<Eigen::Index>(config.hidden);
  shape.extra_features = encoder.concat_features();
  shape.dense_width =
      static_cast<Eigen::Index>(input_dimension(encoder.combination(), config.max_len));
  shape.activation = config.activation;
  shape.masking = config.masking;
  return shape;
}

Eigen::MatrixXd predict_chunked(const nn::Network<double>& net, const EncodedSet& set,
                                std::size_t chunk) {
  const Eigen::Index n = set.size();
  Eigen::MatrixXd probs(3, n);
  const auto step = static_cast<Eigen::Index>(std::max<std::size_t>(chunk, 1));
  for (Eigen::Index start = 0; start < n; start += step) {
    const Eigen::Index len = std::min(step, n - start);
    probs.middleCols(start, len) =
        net.predict(set.tokens.middleCols(start, len), set.features.middleCols(start, len));
  }
  return probs;
}

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation evaluate(const nn::Network<double>& net, const EncodedSet& set, std::size_t chunk) {
  if (set.size() == 0) return {};
  const Eigen::MatrixXd probs = predict_chunked(net, set, chunk);
  Evaluation e;
  e.loss = nn::cross_entropy(probs, set.targets);
  std::size_t hits = 0;
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    Eigen::Index arg;
    probs.col(j).maxCoeff(&arg);
    hits += arg == set.targets(j);
  }
  e.accuracy = static_cast<double>(hits) / static_cast<double>(set.size());
  return e;
}

// Validation rows: a seeded share of each class (or of the whole set).
std::vector<Eigen::Index> validation_rows(const Eigen::VectorXi& targets, double fraction,
                                          bool stratified, Rng& rng) {
  std::vector<std::vector<Eigen::Index>> groups(stratified ? kNumClasses : 1);
  for (Eigen::Index j = 0; j < targets.size(); ++j) {
    groups[stratified ? static_cast<std::size_t>(targets(j)) : 0].push_back(j);
  }
  std::vector<Eigen::Index> picked;
  for (auto& g : groups) {
    rng.shuffle(g);
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(g.size())));
    picked.insert(picked.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(std::min(take, g.size())));
  }
  if (picked.empty() && targets.size() >= 2) {
    picked.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(targets.size()))));
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

// Pareto set of epoch snapshots that can still win selection.
class SnapshotKeeper {
 public:
  explicit SnapshotKeeper(double tolerance) : tolerance_(tolerance) {}

  void offer(const EpochRecord& r, const nn::NetworkParams<double>& params) {
    lowest_ = std::min(lowest_, r.val_loss);
    const bool dominated = std::any_of(kept_.begin(), kept_.end(), [&](const Entry& e) {
      return e.record.val_accuracy >= r.val_accuracy && e.record.val_loss <= r.val_loss;
    });
    std::erase_if(kept_, [&](const Entry& e) {
      return (r.val_accuracy > e.record.val_accuracy && r.val_loss <= e.record.val_loss) ||
             e.record.val_loss > (1.0 + tolerance_) * lowest_;
    });
    if (!dominated) kept_.push_back({r, params});
  }

  const std::pair<std::size_t, const nn::NetworkParams<double>*> best(
      std::span<const EpochRecord> history) const {
    const auto epoch = history[select_epoch(history, tolerance_)].epoch;
    for (const auto& e : kept_) {
      if (e.record.epoch == epoch) return {epoch, &e.params};
    }
    throw std::logic_error("selected epoch snapshot was discarded");
  }

 private:
  struct Entry {
    EpochRecord record;
    nn::NetworkParams<double> params;
  };
  double tolerance_;
  double lowest_ = std::numeric_limits<double>::infinity();
  std::vector<Entry> kept_;
};

}  // namespace

EncodedSet encode(const Corpus& corpus, std::span<const std::size_t> rows,
                  const TrainingContext& context, const Encoder& encoder) {
  EncodedSet set = allocate(encoder, static_cast<Eigen::Index>(rows.size()));
  const bool labelled = std::all_of(rows.begin(), rows.end(),
                                    [&](std::size_t r) { return corpus[r].resolved(); });
  if (labelled) set.targets.resize(static_cast<Eigen::Index>(rows.size()));
  set.ids.reserve(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const auto& t = corpus[rows[j]];
    std::optional<ClassLabel> self;
    if (auto it = context.counted.find(t.tweet_id); it != context.counted.end()) self = it->second;
    const auto profile = context.tendencies.profile(t.user_id, self);
    const auto col = static_cast<Eigen::Index>(j);
    encoder.write_column(encoder.input(t.text, profile), set, col);
    if (labelled) set.targets(col) = static_cast<int>(index_of(t.label()));
    set.ids.push_back(t.tweet_id);
  }
  return set;
}

TrainingContext make_training_context(const Corpus& partition, const Corpus& history,
                                      const TrainConfig& config) {
  if (partition.empty()) throw DataError("training partition is empty");
  TrainingContext ctx;
  ctx.corpus = partition;
  ctx.tokens.reserve(partition.size());
  const TokenizerOptions opts{config.lowercase};
  for (const auto& t : partition.tweets()) ctx.tokens.push_back(tokenize(t.text, opts));
  ctx.vocab = build_vocabulary(ctx.tokens, config.vocab_size);
  ctx.tendencies = TendencyTable(history);
  for (const auto& t : history.tweets()) ctx.counted.emplace(t.tweet_id, t.label());
  return ctx;
}

TrainingContext make_training_context(const Corpus& partition, const TrainConfig& config) {
  return make_training_context(partition, partition, config);
}

// --- model ------------------------------------------------------------------

TrainedModel::TrainedModel(FeatureCombination combination, TrainConfig config, Vocabulary vocab,
                           TendencyTable tendencies, nn::Network<double> network,
                           std::vector<EpochRecord> history, std::size_t selected_epoch)
    : combination_(combination), config_(std::move(config)), vocab_(std::move(vocab)),
      tendencies_(std::move(tendencies)), network_(std::move(network)),
      history_(std::move(history)), selected_epoch_(selected_epoch) {}

std::size_t TrainedModel::input_dimension() const {
  return hsd::input_dimension(combination_, config_.max_len);
}

Encoder TrainedModel::encoder() const {
  return Encoder(vocab_, combination_, config_.input_mode, config_.max_len, config_.lowercase);
}

ClassifierInput TrainedModel::make_input(std::string_view text, const std::string& user_id) const {
  return make_input(text, tendencies_.profile(user_id));
}

ClassifierInput TrainedModel::make_input(std::string_view text,
                                         const TendencyProfile& profile) const {
  return encoder().input(text, profile);
}

ClassDistribution TrainedModel::predict(const ClassifierInput& input) const {
  if (input.combination != combination_ ||
      static_cast<std::size_t>(input.features.size()) != feature_count(combination_)) {
    throw ConfigError("input assembled for combination " +
                      std::string(to_string(input.combination)) + ", model expects " +
                      std::string(to_string(combination_)));
  }
  if (static_cast<std::size_t>(input.indices.size()) != config_.max_len) {
    throw ShapeError("index vector length differs from the model's max_len");
  }
  const auto enc = encoder();
  EncodedSet one = allocate(enc, 1);
  enc.write_column(input, one, 0);
  return network_.predict(one.tokens, one.features).col(0);
}

Eigen::MatrixXd TrainedModel::predict(const EncodedSet& set) const {
  return predict_chunked(network_, set, config_.batch_size);
}

// --- training ---------------------------------------------------------------

TrainedModel train(const TrainingContext& context, FeatureCombination combination,
                   const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  if (context.corpus.size() < 2) throw DataError("need at least two tweets to train");
  const Encoder encoder(context.vocab, combination, config.input_mode, config.max_len,
                        config.lowercase);
  std::vector<std::size_t> all(context.corpus.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const EncodedSet full = encode(context.corpus, all, context, encoder);

  Rng split_rng(config.seed, "val-split");
  const auto val_rows =
      validation_rows(full.targets, config.validation_fraction, config.stratified_validation, split_rng);
  std::vector<Eigen::Index> train_rows;
  {
    std::vector<bool> is_val(static_cast<std::size_t>(full.size()), false);
    for (auto r : val_rows) is_val[static_cast<std::size_t>(r)] = true;
    for (Eigen::Index j = 0; j < full.size(); ++j) {
      if (!is_val[static_cast<std::size_t>(j)]) train_rows.push_back(j);
    }
  }
  if (train_rows.empty()) throw DataError("validation split left no training tweets");
  const EncodedSet val = columns(full, val_rows);

  Rng init_rng(config.seed, "init");
  auto net = nn::Network<double>::initialize(network_shape(encoder, config), init_rng);
  nn::AdamState<double> adam(net.shape(), config.adam);
  Rng shuffle_rng(config.seed, "shuffle");

  std::vector<EpochRecord> history;
  SnapshotKeeper keeper(config.selection_tolerance);
  std::vector<Eigen::Index> order = train_rows;
  const std::size_t batch = config.batch_size;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto len = std::min(batch, order.size() - start);
      const EncodedSet mb = columns(full, std::span(order).subspan(start, len));
      const auto cache = net.forward(mb.tokens, mb.features);
      const double loss = nn::cross_entropy(cache.probs, mb.targets);
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch starting " +
                            std::to_string(start) + " (combination " +
                            std::string(to_string(combination)) + ", seed " +
                            std::to_string(config.seed) + ")");
      }
      loss_sum += loss * static_cast<double>(len);
      for (Eigen::Index j = 0; j < cache.probs.cols(); ++j) {
        Eigen::Index arg;
        cache.probs.col(j).maxCoeff(&arg);
        hits += arg == mb.targets(j);
      }
      auto grads = net.backward(cache, mb.targets);
      if (config.clip_norm > 0.0) nn::clip_global_norm(grads, config.clip_norm);
      nn::adam_step(net.params(), grads, adam);
    }
    EpochRecord r;
    r.epoch = epoch;
    r.train_loss = loss_sum / static_cast<double>(order.size());
    r.train_accuracy = static_cast<double>(hits) / static_cast<double>(order.size());
    const auto v = evaluate(net, val, batch);
    r.val_loss = v.loss;
    r.val_accuracy = v.accuracy;
    if (!std::isfinite(r.val_loss)) {
      throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    history.push_back(r);
    keeper.offer(r, net.params());
    if (options.on_epoch) options.on_epoch(r);
  }

  const auto [epoch, params] = keeper.best(history);
  nn::Network<double> selected(net.shape(), *params);
  return TrainedModel(combination, config, context.vocab, context.tendencies, std::move(selected),
                      std::move(history), epoch);
}

TrainedModel train(const Corpus& partition, FeatureCombination combination,
                   const TrainConfig& config, const TrainOptions& options) {
  return train(make_training_context(partition, config), combination, config, options);
}

void write_history(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write history " + path.string());
  out << "epoch\ttrain_loss\ttrain_accuracy\tval_loss\tval_accuracy\tselected\n";
  out << std::setprecision(17);
  for (const auto& r : model.history()) {
    out << r.epoch << '\t' << r.train_loss << '\t' << r.train_accuracy << '\t' << r.val_loss << '\t'
        << r.val_accuracy << '\t' << (r.epoch == model.selected_epoch() ? 1 : 0) << '\n';
  }
}

}  // namespace hsd
