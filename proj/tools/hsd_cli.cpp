// hsd: dataset statistics, training, prediction, evaluation and experiments.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsd/classifier.hpp"
#include "hsd/config.hpp"
#include "hsd/data_io.hpp"
#include "hsd/ensemble.hpp"
#include "hsd/errors.hpp"
#include "hsd/evaluation.hpp"
#include "hsd/random.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;
constexpr const char* kVersion = "1.0.0";

struct Common {
  std::string config_file;
  std::string preset_name;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string dual_labels;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "key = value config file");
  cmd->add_option("--preset", c.preset_name, "full (10 folds x 15 runs) or desk (5 x 3)")
      ->check(CLI::IsMember({"full", "desk"}));
  cmd->add_option("--set", c.overrides, "override one config key, key=value (repeatable)");
  cmd->add_option("--seed", c.seed, "root seed");
  cmd->add_option("--dual-labels", c.dual_labels, "prefer-hateful, prefer-neutral or drop");
  cmd->add_flag("-q,--quiet", c.quiet, "no progress output");
}

hsd::RunConfig resolve_config(const Common& c, hsd::RunConfig base) {
  if (!c.preset_name.empty()) base = hsd::preset(c.preset_name);
  if (!c.config_file.empty()) base = hsd::load_config(c.config_file, base);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw hsd::ConfigError("--set expects key=value, got '" + kv + "'");
    hsd::apply_setting(base, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) base.train.seed = *c.seed;
  if (!c.dual_labels.empty()) hsd::apply_setting(base, "dual_labels", c.dual_labels);
  return base;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw hsd::DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

ojson file_entry(const fs::path& path) {
  const auto bytes = read_file(path);
  return {{"path", path.string()}, {"fnv1a", hex(hsd::fnv1a(bytes))}, {"bytes", bytes.size()}};
}

ojson config_json(const hsd::RunConfig& config) {
  ojson j;
  for (const auto& [k, v] : hsd::config_entries(config)) j[k] = v;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw hsd::DataError("cannot write " + path.string());
  out << text;
  if (!out) throw hsd::DataError("failed writing " + path.string());
}

hsd::Corpus load_resolved(const fs::path& path, hsd::DualLabelPolicy policy) {
  return hsd::resolve_dual_labels(hsd::load_corpus(path), policy);
}

struct Logger {
  bool quiet;
  void operator()(const std::string& msg) const {
    if (!quiet) std::cerr << msg << '\n';
  }
};

// --- stats ------------------------------------------------------------------

struct StatsArgs {
  Common common;
  std::string corpus;
  std::string out;
};

int cmd_stats(const StatsArgs& a) {
  const auto config = resolve_config(a.common, hsd::full_preset());
  const auto corpus = load_resolved(a.corpus, config.dual_labels);
  const auto stats = hsd::corpus_stats(corpus);
  std::cout << hsd::format_stats(stats);
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_text(fs::path(a.out) / "stats.txt", hsd::format_stats(stats));
    write_text(fs::path(a.out) / "stats.kv", hsd::format_stats_kv(stats));
  }
  return 0;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string corpus;
  std::string combination;
  std::string out;
};

int cmd_train(const TrainArgs& a) {
  const auto started = timestamp();
  const auto config = resolve_config(a.common, hsd::full_preset());
  const auto combination = hsd::parse_combination(a.combination);
  if (!combination) throw hsd::ConfigError("unknown combination '" + a.combination + "'");
  const auto corpus = load_resolved(a.corpus, config.dual_labels);
  const Logger log{a.common.quiet};
  hsd::TrainOptions options;
  options.on_epoch = [&](const hsd::EpochRecord& r) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << "epoch " << r.epoch << " loss " << r.train_loss
       << " acc " << r.train_accuracy << " val_loss " << r.val_loss << " val_acc "
       << r.val_accuracy;
    log(os.str());
  };
  const auto model = hsd::train(corpus, *combination, config.train, options);
  const fs::path out = a.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  hsd::save_model(model, out);
  fs::path history = out;
  history += ".history.tsv";
  hsd::write_history(model, history);

  ojson manifest;
  manifest["tool"] = "hsd";
  manifest["version"] = kVersion;
  manifest["model_format"] = hsd::kModelFormatVersion;
  manifest["command"] = "train";
  manifest["combination"] = std::string(hsd::to_string(*combination));
  manifest["input_dimension"] = model.input_dimension();
  manifest["corpus"] = file_entry(a.corpus);
  manifest["config"] = config_json(config);
  manifest["config_text"] = hsd::serialize_config(config);
  manifest["seeds"] = {{"root", config.train.seed},
                       {"val-split", hsd::derive_seed(config.train.seed, "val-split")},
                       {"init", hsd::derive_seed(config.train.seed, "init")},
                       {"shuffle", hsd::derive_seed(config.train.seed, "shuffle")}};
  manifest["selected_epoch"] = model.selected_epoch();
  manifest["outputs"] = {out.string(), history.string()};
  manifest["started"] = started;
  manifest["finished"] = timestamp();
  fs::path manifest_path = out;
  manifest_path += ".manifest.json";
  write_text(manifest_path, manifest.dump(2) + "\n");

  std::cout << "model " << out.string() << " combination " << hsd::to_string(*combination)
            << " input_dimension " << model.input_dimension() << " selected_epoch "
            << model.selected_epoch() << '\n';
  return 0;
}

// --- predict / evaluate -----------------------------------------------------

struct PredictArgs {
  Common common;
  std::vector<std::string> models;
  std::string corpus;
  std::string text;
  std::string user;
  std::string user_history;
  std::string out;
};

std::vector<hsd::TrainedModel> load_models(const std::vector<std::string>& paths) {
  if (paths.size() == 2) {
    throw hsd::ConfigError("give one model or an ensemble of at least three, not two");
  }
  std::vector<hsd::TrainedModel> models;
  std::vector<std::string> warnings;
  for (const auto& p : paths) {
    hsd::LoadOptions opts;
    if (!models.empty()) {
      opts.expected_mode = models.front().config().input_mode;
      opts.expected_vocab_hash = models.front().vocabulary().hash();
    }
    models.push_back(hsd::load_model(p, opts, &warnings));
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return models;
}

hsd::EncodedSet encode_for(const hsd::TrainedModel& model, const hsd::Corpus& corpus) {
  const auto enc = model.encoder();
  const auto n = static_cast<Eigen::Index>(corpus.size());
  hsd::EncodedSet set;
  set.tokens = Eigen::MatrixXi::Zero(enc.sequence_length(), n);
  set.features = Eigen::MatrixXd::Zero(enc.concat_features(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& t = corpus[static_cast<std::size_t>(j)];
    enc.write_column(model.make_input(t.text, t.user_id), set, j);
    set.ids.push_back(t.tweet_id);
  }
  return set;
}

struct Predictions {
  std::vector<std::string> ids;
  std::vector<Eigen::MatrixXd> member_probs;
  std::vector<hsd::FastDecision> decisions;
};

Predictions predict_corpus(const std::vector<hsd::TrainedModel>& models, const hsd::Corpus& corpus) {
  Predictions p;
  for (const auto& t : corpus.tweets()) p.ids.push_back(t.tweet_id);
  for (const auto& m : models) p.member_probs.push_back(m.predict(encode_for(m, corpus)));
  std::vector<hsd::MemberVote> votes(models.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (std::size_t j = 0; j < models.size(); ++j) {
      votes[j] = hsd::member_vote(p.member_probs[j].col(static_cast<Eigen::Index>(i)));
    }
    p.decisions.push_back(hsd::decide(votes));
  }
  return p;
}

std::string prediction_table(const Predictions& p, std::size_t members) {
  std::ostringstream os;
  os << "tweet_id\tlabel\tmethod";
  for (std::size_t j = 0; j < members; ++j) os << "\tmember" << j + 1;
  os << '\n';
  for (std::size_t i = 0; i < p.ids.size(); ++i) {
    os << p.ids[i] << '\t' << hsd::to_string(p.decisions[i].label) << '\t'
       << hsd::to_string(p.decisions[i].method);
    for (std::size_t j = 0; j < members; ++j) {
      const auto v = hsd::member_vote(p.member_probs[j].col(static_cast<Eigen::Index>(i)));
      os << '\t' << hsd::short_code(v.label) << ':' << std::fixed << std::setprecision(4)
         << v.confidence;
    }
    os << '\n';
  }
  return os.str();
}

int cmd_predict(const PredictArgs& a) {
  const auto config = resolve_config(a.common, hsd::full_preset());
  const auto models = load_models(a.models);
  if (!a.text.empty()) {
    std::optional<hsd::TendencyProfile> profile;
    if (!a.user_history.empty()) {
      const auto history = load_resolved(a.user_history, config.dual_labels);
      if (history.empty()) throw hsd::DataError("user history is empty");
      const auto user = a.user.empty() ? history[0].user_id : a.user;
      profile = hsd::compute_tendencies(user, history);
    }
    std::vector<hsd::ClassDistribution> outputs;
    for (const auto& m : models) {
      const auto input = profile ? m.make_input(a.text, *profile) : m.make_input(a.text, a.user);
      outputs.push_back(m.predict(input));
    }
    std::vector<hsd::MemberVote> votes;
    for (const auto& d : outputs) votes.push_back(hsd::member_vote(d));
    const auto d = hsd::decide(votes);
    std::cout << hsd::to_string(d.label) << '\t' << hsd::to_string(d.method);
    for (const auto& v : votes) {
      std::cout << '\t' << hsd::short_code(v.label) << ':' << std::fixed << std::setprecision(4)
                << v.confidence;
    }
    std::cout << '\n';
    return 0;
  }
  if (a.corpus.empty()) throw hsd::ConfigError("predict needs --corpus or --text");
  const auto corpus = load_resolved(a.corpus, config.dual_labels);
  const auto p = predict_corpus(models, corpus);
  const auto table = prediction_table(p, models.size());
  if (a.out.empty()) {
    std::cout << table;
  } else {
    write_text(a.out, table);
  }
  return 0;
}

int cmd_evaluate(const PredictArgs& a) {
  const auto config = resolve_config(a.common, hsd::full_preset());
  const auto models = load_models(a.models);
  const auto corpus = load_resolved(a.corpus, config.dual_labels);
  if (corpus.empty()) throw hsd::DataError("evaluation corpus is empty");
  const auto p = predict_corpus(models, corpus);
  hsd::ConfusionMatrix cm;
  for (std::size_t i = 0; i < corpus.size(); ++i) cm.add(corpus[i].label(), p.decisions[i].label);
  const auto report = hsd::per_class_metrics(cm);
  std::cout << hsd::format_metrics_table(report, models.size() == 1 ? "single" : "ensemble") << '\n'
            << hsd::format_confusion(cm);
  if (!a.out.empty()) {
    const fs::path dir = a.out;
    fs::create_directories(dir);
    ojson j;
    ojson rows = ojson::array();
    for (Eigen::Index t = 0; t < 3; ++t) {
      rows.push_back({cm.counts()(t, 0), cm.counts()(t, 1), cm.counts()(t, 2)});
    }
    j["models"] = a.models;
    j["corpus"] = file_entry(a.corpus);
    j["confusion"] = rows;
    j["precision"] = report.precision;
    j["recall"] = report.recall;
    j["weighted_f"] = report.weighted_f;
    for (auto c : hsd::kAllLabels) {
      j["classes"][std::string(hsd::to_string(c))] = {
          {"precision", report[c].precision}, {"recall", report[c].recall}, {"f", report[c].f}};
    }
    write_text(dir / "evaluation.json", j.dump(2) + "\n");
    write_text(dir / "predictions.tsv", prediction_table(p, models.size()));
  }
  return 0;
}

// --- experiment -------------------------------------------------------------

struct ExperimentArgs {
  Common common;
  std::string corpus;
  std::string scheme;
  std::optional<std::size_t> folds;
  std::optional<std::size_t> runs;
  std::optional<std::size_t> jobs;
  std::string out;
  std::string manifest;
  bool leaky = false;
};

fs::path default_results_dir(const hsd::RunConfig& config) {
  fs::path root = "results";
  if (const char* env = std::getenv("HSD_RESULTS_ROOT"); env && *env) root = env;
  return root / (config.scheme + "-seed" + std::to_string(config.train.seed));
}

int cmd_experiment(ExperimentArgs a) {
  const auto started = timestamp();
  hsd::RunConfig base = hsd::desk_preset();
  if (!a.manifest.empty()) {
    const auto m = ojson::parse(read_file(a.manifest));
    std::istringstream text(m.at("config_text").get<std::string>());
    base = hsd::parse_config(text, hsd::full_preset());
    if (a.corpus.empty()) a.corpus = m.at("corpus").at("path").get<std::string>();
    const auto recorded = m.at("corpus").at("fnv1a").get<std::string>();
    if (file_entry(a.corpus).at("fnv1a").get<std::string>() != recorded) {
      std::cerr << "warning: corpus " << a.corpus << " differs from the one in the manifest\n";
    }
  }
  if (a.corpus.empty()) throw hsd::ConfigError("experiment needs a corpus");
  auto config = resolve_config(a.common, base);
  if (!a.scheme.empty()) config.scheme = a.scheme;
  if (a.folds) config.folds = *a.folds;
  if (a.runs) config.runs = *a.runs;
  if (a.jobs) config.jobs = *a.jobs;
  if (a.leaky) config.leaky_tendencies = true;
  const auto plan = hsd::make_plan(config);
  plan.validate();
  const auto corpus = load_resolved(a.corpus, config.dual_labels);
  const fs::path out = a.out.empty() ? default_results_dir(config) : fs::path(a.out);
  fs::create_directories(out);

  const Logger log{a.common.quiet};
  hsd::ExperimentOptions options;
  options.log = log;
  std::vector<std::string> model_files;
  if (config.save_models) {
    options.on_model = [&](const hsd::RunPredictions& pr, const hsd::TrainedModel& model) {
      std::ostringstream name;
      name << "fold-" << std::setw(2) << std::setfill('0') << pr.fold + 1;
      const auto dir = out / "models" / name.str();
      fs::create_directories(dir);
      std::ostringstream file;
      file << hsd::to_string(pr.member) << "-run-" << std::setw(2) << std::setfill('0')
           << pr.run + 1 << ".model";
      hsd::save_model(model, dir / file.str());
      fs::path history = dir / file.str();
      history += ".history.tsv";
      hsd::write_history(model, history);
      model_files.push_back((dir / file.str()).string());
    };
  }
  log("experiment: scheme " + plan.scheme.id + ", " + std::to_string(plan.folds) + " folds, " +
      std::to_string(plan.runs) + " runs, " + std::to_string(corpus.size()) + " tweets");
  const auto results = hsd::run_experiment(plan, corpus, options);
  hsd::report(results, out);

  ojson manifest;
  manifest["tool"] = "hsd";
  manifest["version"] = kVersion;
  manifest["model_format"] = hsd::kModelFormatVersion;
  manifest["command"] = "experiment";
  manifest["corpus"] = file_entry(a.corpus);
  manifest["config"] = config_json(config);
  manifest["config_text"] = hsd::serialize_config(config);
  ojson train_seeds = ojson::array();
  for (const auto& pr : results.predictions) {
    train_seeds.push_back({{"fold", pr.fold + 1},
                           {"combination", std::string(hsd::to_string(pr.member))},
                           {"run", pr.run + 1},
                           {"seed", pr.seed}});
  }
  manifest["seeds"] = {{"root", plan.seed}, {"folds", plan.fold_seed()}, {"train", train_seeds}};
  std::sort(model_files.begin(), model_files.end());
  manifest["models"] = model_files;
  manifest["started"] = started;
  manifest["finished"] = timestamp();
  write_text(out / "manifest.json", manifest.dump(2) + "\n");

  std::cout << hsd::format_summary(results) << "\nresults written to " << out.string() << '\n';
  return 0;
}

// --- report -----------------------------------------------------------------

struct ReportArgs {
  std::string dir;
  std::string out;
};

int cmd_report(const ReportArgs& a) {
  const fs::path dir = a.dir;
  ojson j;
  try {
    j = ojson::parse(read_file(dir / "results.json"));
  } catch (const ojson::exception& e) {
    throw hsd::FormatError((dir / "results.json").string() + ": " + e.what());
  }
  auto matrix = [](const ojson& rows) {
    std::array<std::array<std::uint64_t, 3>, 3> r{};
    for (std::size_t t = 0; t < 3; ++t) {
      for (std::size_t p = 0; p < 3; ++p) r[t][p] = rows.at(t).at(p).get<std::uint64_t>();
    }
    return hsd::ConfusionMatrix::from_rows(r);
  };
  std::ostringstream os;
  const auto cm = matrix(j.at("confusion"));
  if (cm.total() == 0) throw hsd::DataError("results are empty");
  os << "scheme " << j.at("plan").at("scheme").get<std::string>() << '\n'
     << hsd::format_metrics_table(hsd::per_class_metrics(cm), "ensemble") << '\n'
     << hsd::format_confusion(cm);
  for (const auto& m : j.at("members")) {
    os << '\n'
       << hsd::format_metrics_table(hsd::per_class_metrics(matrix(m.at("confusion"))),
                                    m.at("combination").get<std::string>());
  }
  if (a.out.empty()) {
    std::cout << os.str();
  } else {
    write_text(a.out, os.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hate-speech detection with LSTM ensembles and user tendencies"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  StatsArgs stats;
  auto* s = app.add_subcommand("stats", "dataset summary");
  s->add_option("corpus", stats.corpus, "corpus TSV")->required();
  s->add_option("--out", stats.out, "directory for stats.txt and stats.kv");
  add_common(s, stats.common);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train one classifier");
  t->add_option("corpus", train.corpus, "corpus TSV")->required();
  t->add_option("--combination", train.combination, "O, NS, NR, RS or NRS")->required();
  t->add_option("--out", train.out, "model file")->required();
  add_common(t, train.common);

  PredictArgs predict;
  auto* p = app.add_subcommand("predict", "label tweets with one model or an ensemble");
  p->add_option("models", predict.models, "model files")->required();
  p->add_option("--corpus", predict.corpus, "tweets to label");
  p->add_option("--text", predict.text, "a single message");
  p->add_option("--user", predict.user, "author id of --text");
  p->add_option("--user-history", predict.user_history, "labelled history of the author");
  p->add_option("--out", predict.out, "write the table here instead of stdout");
  add_common(p, predict.common);

  PredictArgs evaluate;
  auto* e = app.add_subcommand("evaluate", "metrics of models on a labelled corpus");
  e->add_option("models", evaluate.models, "model files")->required();
  e->add_option("--corpus", evaluate.corpus, "labelled corpus")->required();
  e->add_option("--out", evaluate.out, "directory for evaluation.json");
  add_common(e, evaluate.common);

  ExperimentArgs experiment;
  auto* x = app.add_subcommand("experiment", "cross-validated ensemble experiment");
  x->add_option("corpus", experiment.corpus, "corpus TSV");
  x->add_option("--scheme", experiment.scheme, "i..xi, or a combination for a single classifier");
  x->add_option("--folds", experiment.folds, "cross-validation folds");
  x->add_option("--runs", experiment.runs, "training runs per member");
  x->add_option("--jobs", experiment.jobs, "parallel training jobs");
  x->add_option("--out", experiment.out, "results directory");
  x->add_option("--manifest", experiment.manifest, "rerun the configuration of a manifest");
  x->add_flag("--leaky-tendencies", experiment.leaky, "count tendencies over the whole corpus");
  add_common(x, experiment.common);

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "render the summary of a results directory");
  r->add_option("dir", rep.dir, "results directory")->required();
  r->add_option("--out", rep.out, "write here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*s) return cmd_stats(stats);
    if (*t) return cmd_train(train);
    if (*p) return cmd_predict(predict);
    if (*e) return cmd_evaluate(evaluate);
    if (*x) return cmd_experiment(experiment);
    if (*r) return cmd_report(rep);
  } catch (const hsd::ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const hsd::DataError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitData;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
