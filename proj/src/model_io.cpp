#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "hsd/classifier.hpp"
#include "hsd/errors.hpp"
#include "hsd/random.hpp"

namespace hsd {

static_assert(std::endian::native == std::endian::little,
              "model files store little-endian values");

namespace {

constexpr char kMagic[8] = {'H', 'S', 'D', 'M', 'O', 'D', 'E', 'L'};

using json = nlohmann::json;

json config_to_json(const TrainConfig& c) {
  return {{"max_epochs", c.max_epochs},
          {"batch_size", c.batch_size},
          {"validation_fraction", c.validation_fraction},
          {"vocab_size", c.vocab_size},
          {"max_len", c.max_len},
          {"hidden", c.hidden},
          {"embedding_dim", c.embedding_dim},
          {"activation", nn::to_string(c.activation)},
          {"input_mode", to_string(c.input_mode)},
          {"masking", c.masking},
          {"lowercase", c.lowercase},
          {"stratified_validation", c.stratified_validation},
          {"clip_norm", c.clip_norm},
          {"learning_rate", c.adam.learning_rate},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon},
          {"selection_tolerance", c.selection_tolerance},
          {"seed", c.seed}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  auto act = nn::parse_cell_activation(j.at("activation").get<std::string>());
  auto mode = parse_input_mode(j.at("input_mode").get<std::string>());
  if (!act || !mode) throw FormatError("model header: unknown activation or input mode");
  c.activation = *act;
  c.input_mode = *mode;
  c.masking = j.at("masking").get<bool>();
  c.lowercase = j.at("lowercase").get<bool>();
  c.stratified_validation = j.at("stratified_validation").get<bool>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.adam.learning_rate = j.at("learning_rate").get<double>();
  c.adam.beta1 = j.at("beta1").get<double>();
  c.adam.beta2 = j.at("beta2").get<double>();
  c.adam.epsilon = j.at("epsilon").get<double>();
  c.selection_tolerance = j.at("selection_tolerance").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  template <typename T>
  void pod(T v) {
    bytes(&v, sizeof v);
  }
  void str(std::string_view s) {
    pod<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  void bytes(void* p, std::size_t n) {
    if (n > data_.size() - pos_) throw FormatError("model file is truncated");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T pod() {
    T v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > data_.size() - pos_) throw FormatError("model file is truncated");
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  const auto& net = model.network();
  const auto& shape = net.shape();
  json header;
  header["format"] = "hsd-model";
  header["combination"] = to_string(model.combination());
  header["input_dimension"] = model.input_dimension();
  header["config"] = config_to_json(model.config());
  header["shape"] = {{"vocab_rows", shape.vocab_rows},         {"embedding_dim", shape.embedding_dim},
                     {"hidden", shape.hidden},                 {"extra_features", shape.extra_features},
                     {"dense_width", shape.dense_width},       {"classes", shape.classes},
                     {"activation", nn::to_string(shape.activation)}, {"masking", shape.masking}};
  header["vocab_hash"] = hex(model.vocabulary().hash());
  header["selected_epoch"] = model.selected_epoch();
  json hist = json::array();
  for (const auto& r : model.history()) {
    hist.push_back({r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy});
  }
  header["history"] = hist;
  json tendencies = json::object();  // sorted by user id
  for (const auto& [user, row] : model.tendencies().counts()) tendencies[user] = row;
  header["tendency_counts"] = tendencies;

  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.pod<std::uint32_t>(kModelFormatVersion);
  w.str(header.dump());
  w.str(serialize_vocabulary(model.vocabulary()));
  std::uint32_t blocks = 0;
  net.params().visit([&blocks](const char*, const nn::Mat<double>&) { ++blocks; });
  w.pod<std::uint32_t>(blocks);
  net.params().visit([&w](const char* name, const nn::Mat<double>& m) {
    w.str(name);
    w.pod<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    w.pod<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    w.bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  });
  w.pod<std::uint64_t>(fnv1a(w.buffer()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write model " + path.string());
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw DataError("failed writing model " + path.string());
}

TrainedModel load_model(const std::filesystem::path& path, const LoadOptions& options,
                        std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();
  if (data.size() < sizeof kMagic + 4 + 8 || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError(path.string() + " is not a model file");
  }
  std::uint64_t stored_sum;
  std::memcpy(&stored_sum, data.data() + data.size() - 8, 8);
  const std::string_view body(data.data(), data.size() - 8);

  Reader r(body);
  char magic[8];
  r.bytes(magic, sizeof magic);
  const auto version = r.pod<std::uint32_t>();
  if (version != kModelFormatVersion) {
    throw FormatError("model format version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kModelFormatVersion) + ")");
  }
  if (fnv1a(body) != stored_sum) throw FormatError(path.string() + ": checksum mismatch (corrupt or truncated)");

  json header;
  try {
    header = json::parse(r.str());
    auto vocab = deserialize_vocabulary(r.str());
    if (header.at("vocab_hash").get<std::string>() != hex(vocab.hash())) {
      throw FormatError("vocabulary does not match the hash in the model header");
    }
    const auto config = config_from_json(header.at("config"));
    if (options.expected_mode && *options.expected_mode != config.input_mode) {
      throw FormatError("model uses input mode '" + std::string(to_string(config.input_mode)) +
                        "' but the pipeline expects '" +
                        std::string(to_string(*options.expected_mode)) + "'");
    }
    if (options.expected_vocab_hash && *options.expected_vocab_hash != vocab.hash() && warnings) {
      warnings->push_back(path.string() + ": vocabulary hash " + hex(vocab.hash()) +
                          " differs from expected " + hex(*options.expected_vocab_hash));
    }
    auto combination = parse_combination(header.at("combination").get<std::string>());
    if (!combination) throw FormatError("model header: unknown feature combination");

    const auto& js = header.at("shape");
    nn::NetworkShape shape;
    shape.vocab_rows = js.at("vocab_rows").get<Eigen::Index>();
    shape.embedding_dim = js.at("embedding_dim").get<Eigen::Index>();
    shape.hidden = js.at("hidden").get<Eigen::Index>();
    shape.extra_features = js.at("extra_features").get<Eigen::Index>();
    shape.dense_width = js.at("dense_width").get<Eigen::Index>();
    shape.classes = js.at("classes").get<Eigen::Index>();
    shape.activation = config.activation;
    shape.masking = js.at("masking").get<bool>();

    auto params = nn::NetworkParams<double>::zeros(shape);
    const auto blocks = r.pod<std::uint32_t>();
    std::uint32_t seen = 0;
    params.visit([&](const char* name, nn::Mat<double>& m) {
      ++seen;
      if (seen > blocks) throw FormatError("model file has too few parameter blocks");
      const auto stored = r.str();
      const auto rows = r.pod<std::uint64_t>();
      const auto cols = r.pod<std::uint64_t>();
      if (stored != name || rows != static_cast<std::uint64_t>(m.rows()) ||
          cols != static_cast<std::uint64_t>(m.cols())) {
        throw FormatError("parameter block '" + stored + "' does not match expected '" + name +
                          "' " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
      }
      r.bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    });
    if (seen != blocks || r.remaining() != 0) throw FormatError("model file has trailing data");

    std::vector<EpochRecord> history;
    for (const auto& h : header.at("history")) {
      history.push_back({h.at(0).get<std::size_t>(), h.at(1).get<double>(), h.at(2).get<double>(),
                         h.at(3).get<double>(), h.at(4).get<double>()});
    }
    std::unordered_map<std::string, std::array<std::size_t, kNumClasses>> counts;
    for (const auto& [user, row] : header.at("tendency_counts").items()) {
      counts[user] = row.get<std::array<std::size_t, kNumClasses>>();
    }
    return TrainedModel(*combination, config, std::move(vocab),
                        TendencyTable::from_counts(std::move(counts)),
                        nn::Network<double>(shape, std::move(params)), std::move(history),
                        header.at("selected_epoch").get<std::size_t>());
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed model header (" + e.what() + ")");
  } catch (const ShapeError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace hsd
