#include <atomic>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "hsd/config.hpp"
#include "hsd/errors.hpp"
#include "hsd/evaluation.hpp"
#include "hsd/random.hpp"

namespace hsd {

std::size_t ExperimentPlan::enumeration_runs() const {
  return scheme.members.size() > 3 ? std::min<std::size_t>(runs, 5) : runs;
}

std::uint64_t ExperimentPlan::enumeration_size() const {
  std::uint64_t n = 1;
  for (std::size_t i = 0; i < scheme.members.size(); ++i) n *= enumeration_runs();
  return n;
}

std::uint64_t ExperimentPlan::fold_seed() const { return derive_seed(seed, "folds"); }

std::uint64_t ExperimentPlan::train_seed(std::size_t fold, FeatureCombination member,
                                         std::size_t run) const {
  return derive_seed(seed, "train/fold" + std::to_string(fold) + "/" +
                               std::string(to_string(member)) + "/run" + std::to_string(run));
}

void ExperimentPlan::validate() const {
  const auto m = scheme.members.size();
  if (m == 0 || m == 2) {
    throw ConfigError("scheme '" + scheme.id + "' must have one member or at least three");
  }
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (runs == 0) throw ConfigError("runs must be positive");
  if (jobs == 0) throw ConfigError("jobs must be positive");
  train.validate();
}

EnsembleScheme single_classifier_scheme(FeatureCombination combination) {
  return {std::string(to_string(combination)), {combination}};
}

FastDecision decide(std::span<const MemberVote> votes) {
  if (votes.size() == 1) return {votes[0].label, DecisionMethod::Vote};
  return combine_votes(votes);
}

namespace {

struct Job {
  std::size_t member;
  std::size_t run;
};

template <typename F>
void run_parallel(std::size_t count, std::size_t jobs, F&& work) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        work(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = std::min(jobs, count);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

ExperimentResults run_experiment(const ExperimentPlan& plan, const Corpus& corpus,
                                 const ExperimentOptions& options) {
  plan.validate();
  if (!corpus.resolved()) throw ValidationError("experiment needs a resolved corpus");
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };

  ExperimentResults res;
  res.plan = plan;
  res.corpus_size = corpus.size();
  for (const auto& t : corpus.tweets()) ++res.class_support[index_of(t.label())];
  res.folds = kfold_split(corpus, plan.folds, plan.fold_seed(), plan.stratified_folds);

  const auto& members = plan.scheme.members;
  const std::size_t m = members.size();
  const std::size_t er = plan.enumeration_runs();
  const std::uint64_t combos = plan.enumeration_size();
  res.combination_confusion.assign(combos, ConfusionMatrix{});
  res.members.resize(m);
  for (std::size_t j = 0; j < m; ++j) res.members[j].member = members[j];
  std::mutex model_mutex;

  for (std::size_t f = 0; f < res.folds.size(); ++f) {
    const auto& fold = res.folds[f];
    const Corpus partition = corpus.subset(fold.train);
    const TrainingContext context = plan.leaky_tendencies
                                        ? make_training_context(partition, corpus, plan.train)
                                        : make_training_context(partition, plan.train);
    std::vector<Job> jobs;
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t r = 0; r < plan.runs; ++r) jobs.push_back({j, r});
    }
    std::vector<RunPredictions> outputs(jobs.size());
    run_parallel(jobs.size(), plan.jobs, [&](std::size_t i) {
      const auto [j, r] = jobs[i];
      TrainConfig cfg = plan.train;
      cfg.seed = plan.train_seed(f, members[j], r);
      const TrainedModel model = train(context, members[j], cfg);
      auto& out = outputs[i];
      out.fold = f;
      out.member = members[j];
      out.run = r;
      out.seed = cfg.seed;
      out.selected_epoch = model.selected_epoch();
      const EncodedSet test = encode(corpus, fold.test, context, model.encoder());
      out.ids = test.ids;
      out.probs = model.predict(test);
      if (options.on_model) {
        std::lock_guard lock(model_mutex);
        options.on_model(out, model);
      }
    });
    for (const auto& out : outputs) {
      log("fold " + std::to_string(f + 1) + "/" + std::to_string(res.folds.size()) + " " +
          std::string(to_string(out.member)) + " run " + std::to_string(out.run + 1) +
          ": selected epoch " + std::to_string(out.selected_epoch));
    }

    // votes[(j * runs + r) * n + t]
    const std::size_t n = fold.test.size();
    std::vector<MemberVote> votes(m * plan.runs * n);
    std::vector<ClassLabel> truth(n);
    for (std::size_t t = 0; t < n; ++t) truth[t] = corpus[fold.test[t]].label();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      const auto [j, r] = jobs[i];
      for (std::size_t t = 0; t < n; ++t) {
        const auto v = member_vote(outputs[i].probs.col(static_cast<Eigen::Index>(t)));
        votes[(j * plan.runs + r) * n + t] = v;
        res.members[j].confusion.add(truth[t], v.label);
      }
    }

    std::vector<std::size_t> pick(m, 0);
    std::vector<MemberVote> current(m);
    for (std::uint64_t e = 0; e < combos; ++e) {
      auto rest = e;
      for (std::size_t j = m; j-- > 0;) {
        pick[j] = static_cast<std::size_t>(rest % er);
        rest /= er;
      }
      auto& cm = res.combination_confusion[e];
      for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t j = 0; j < m; ++j) current[j] = votes[(j * plan.runs + pick[j]) * n + t];
        const auto d = decide(current);
        cm.add(truth[t], d.label);
        ++(d.method == DecisionMethod::Vote ? res.decided_by_vote : res.decided_by_confidence);
      }
    }
    for (auto& out : outputs) res.predictions.push_back(std::move(out));
  }

  for (const auto& cm : res.combination_confusion) {
    res.confusion += cm;
    res.combination_f.push_back(per_class_metrics(cm).weighted_f);
  }
  res.metrics = per_class_metrics(res.confusion);
  std::tie(res.f_mean, res.f_std) = mean_std(res.combination_f);
  double acc = 0.0;
  for (std::size_t i = 0; i < res.combination_f.size(); ++i) {
    acc += res.combination_f[i];
    res.convergence.push_back(acc / static_cast<double>(i + 1));
  }
  for (auto& s : res.members) s.metrics = per_class_metrics(s.confusion);
  return res;
}

// --- reporting --------------------------------------------------------------

namespace {

using ojson = nlohmann::ordered_json;

ojson confusion_json(const ConfusionMatrix& cm) {
  ojson rows = ojson::array();
  for (Eigen::Index t = 0; t < 3; ++t) {
    rows.push_back({cm.counts()(t, 0), cm.counts()(t, 1), cm.counts()(t, 2)});
  }
  return rows;
}

ojson metrics_json(const MetricsReport& r) {
  ojson j;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["weighted_f"] = r.weighted_f;
  ojson classes;
  for (auto c : kAllLabels) {
    const auto& m = r[c];
    classes[std::string(to_string(c))] = {{"precision", m.precision},
                                          {"recall", m.recall},
                                          {"f", m.f},
                                          {"support", r.support[index_of(c)]},
                                          {"precision_undefined", m.precision_undefined},
                                          {"recall_undefined", m.recall_undefined}};
  }
  j["classes"] = classes;
  return j;
}

std::string run_label(std::uint64_t e, std::size_t members, std::size_t runs) {
  std::vector<std::size_t> pick(members);
  for (std::size_t j = members; j-- > 0;) {
    pick[j] = static_cast<std::size_t>(e % runs) + 1;
    e /= runs;
  }
  std::string s;
  for (std::size_t j = 0; j < members; ++j) s += (j ? "-" : "") + std::to_string(pick[j]);
  return s;
}

std::string two_digits(std::size_t v) {
  std::ostringstream os;
  os << std::setw(2) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

std::string results_json(const ExperimentResults& res) {
  const auto& p = res.plan;
  ojson j;
  ojson plan;
  plan["scheme"] = p.scheme.id;
  ojson members = ojson::array();
  for (auto c : p.scheme.members) members.push_back(std::string(to_string(c)));
  plan["members"] = members;
  plan["folds"] = p.folds;
  plan["runs"] = p.runs;
  plan["enumeration_runs"] = p.enumeration_runs();
  plan["enumeration_size"] = p.enumeration_size();
  plan["seed"] = p.seed;
  plan["stratified_folds"] = p.stratified_folds;
  plan["leaky_tendencies"] = p.leaky_tendencies;
  RunConfig rc;
  rc.train = p.train;
  ojson train;
  for (const auto& [k, v] : config_entries(rc)) {
    if (k == "scheme" || k == "folds" || k == "runs" || k == "stratified_folds" ||
        k == "leaky_tendencies" || k == "jobs" || k == "dual_labels" || k == "save_models") {
      continue;
    }
    train[k] = v;
  }
  plan["train"] = train;
  j["plan"] = plan;
  j["corpus_size"] = res.corpus_size;
  j["class_support"] = res.class_support;
  j["confusion"] = confusion_json(res.confusion);
  j["metrics"] = metrics_json(res.metrics);
  j["f_mean"] = res.f_mean;
  j["f_std"] = res.f_std;
  j["decided_by_vote"] = res.decided_by_vote;
  j["decided_by_confidence"] = res.decided_by_confidence;
  ojson mem = ojson::array();
  for (const auto& s : res.members) {
    mem.push_back({{"combination", std::string(to_string(s.member))},
                   {"confusion", confusion_json(s.confusion)},
                   {"metrics", metrics_json(s.metrics)}});
  }
  j["members"] = mem;
  ojson folds = ojson::array();
  for (std::size_t f = 0; f < res.folds.size(); ++f) {
    ojson runs = ojson::array();
    for (const auto& pr : res.predictions) {
      if (pr.fold != f) continue;
      runs.push_back({{"combination", std::string(to_string(pr.member))},
                      {"run", pr.run + 1},
                      {"seed", pr.seed},
                      {"selected_epoch", pr.selected_epoch}});
    }
    folds.push_back({{"fold", f + 1},
                     {"train_size", res.folds[f].train.size()},
                     {"test_size", res.folds[f].test.size()},
                     {"runs", runs}});
  }
  j["folds"] = folds;
  return j.dump(2) + "\n";
}

std::string format_metrics_table(const MetricsReport& r, std::string_view name) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << std::left << std::setw(12) << "class" << std::right << std::setw(10) << "precision"
     << std::setw(10) << "recall" << std::setw(10) << "F" << '\n';
  os << std::left << std::setw(12) << name << std::right << std::setw(10) << r.precision
     << std::setw(10) << r.recall << std::setw(10) << r.weighted_f << '\n';
  for (auto c : kAllLabels) {
    const auto& m = r[c];
    os << std::left << std::setw(12) << to_string(c) << std::right << std::setw(10) << m.precision
       << std::setw(10) << m.recall << std::setw(10) << m.f;
    if (m.precision_undefined || m.recall_undefined) os << "  (undefined, set to 0)";
    os << '\n';
  }
  return os.str();
}

std::string format_confusion(const ConfusionMatrix& cm) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "true\\pred";
  for (auto c : kAllLabels) os << std::right << std::setw(14) << to_string(c);
  os << '\n';
  for (auto t : kAllLabels) {
    os << std::left << std::setw(12) << to_string(t);
    for (auto p : kAllLabels) os << std::right << std::setw(14) << cm(t, p);
    os << '\n';
  }
  return os.str();
}

std::string format_summary(const ExperimentResults& res) {
  const auto& p = res.plan;
  std::ostringstream os;
  os << "scheme " << p.scheme.id << ":";
  for (auto c : p.scheme.members) os << ' ' << to_string(c);
  os << "\nfolds " << p.folds << ", runs " << p.runs << ", combinations " << p.enumeration_size()
     << ", tweets " << res.corpus_size << ", seed " << p.seed
     << (p.leaky_tendencies ? ", corpus-wide tendencies" : "") << "\n\n";
  os << "ensemble\n" << format_metrics_table(res.metrics, "overall") << '\n';
  os << std::fixed << std::setprecision(4) << "F over combinations: mean " << res.f_mean << ", std "
     << res.f_std << "\n";
  os << "decisions by vote " << res.decided_by_vote << ", by confidence "
     << res.decided_by_confidence << "\n\n";
  os << "confusion (total " << res.confusion.total() << ")\n" << format_confusion(res.confusion);
  for (const auto& s : res.members) {
    os << "\nsingle classifier " << to_string(s.member) << " (all runs)\n"
       << format_metrics_table(s.metrics, "overall");
  }
  return os.str();
}

void write_predictions(const std::vector<std::string>& ids, const Eigen::MatrixXd& probs,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "tweet_id\tp_neutral\tp_racism\tp_sexism\n" << std::setprecision(17);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    out << ids[i] << '\t' << probs(0, c) << '\t' << probs(1, c) << '\t' << probs(2, c) << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

void report(const ExperimentResults& res, const std::filesystem::path& dir) {
  if (res.empty()) throw DataError("no results to report");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / name).string());
    out << text;
    if (!out) throw DataError("failed writing " + (dir / name).string());
  };
  write("results.json", results_json(res));
  write("summary.txt", format_summary(res));

  std::ostringstream cm;
  cm << "true\\pred\tneutral\tracism\tsexism\n";
  for (auto t : kAllLabels) {
    cm << to_string(t);
    for (auto p : kAllLabels) cm << '\t' << res.confusion(t, p);
    cm << '\n';
  }
  write("confusion.tsv", cm.str());

  std::ostringstream mem;
  mem << std::setprecision(17) << "combination\tprecision\trecall\tf\tf_neutral\tf_racism\tf_sexism\n";
  for (const auto& s : res.members) {
    mem << to_string(s.member) << '\t' << s.metrics.precision << '\t' << s.metrics.recall << '\t'
        << s.metrics.weighted_f;
    for (const auto& c : s.metrics.per_class) mem << '\t' << c.f;
    mem << '\n';
  }
  write("members.tsv", mem.str());

  std::ostringstream conv;
  conv << std::setprecision(17) << "combination\truns\tf\tcumulative_mean_f\n";
  const auto er = res.plan.enumeration_runs();
  for (std::size_t e = 0; e < res.combination_f.size(); ++e) {
    conv << e + 1 << '\t' << run_label(e, res.plan.scheme.members.size(), er) << '\t'
         << res.combination_f[e] << '\t' << res.convergence[e] << '\n';
  }
  write("convergence.tsv", conv.str());

  for (const auto& pr : res.predictions) {
    const auto fold_dir = dir / "predictions" / ("fold-" + two_digits(pr.fold + 1));
    std::filesystem::create_directories(fold_dir, ec);
    if (ec) throw DataError("cannot create " + fold_dir.string() + ": " + ec.message());
    write_predictions(pr.ids, pr.probs,
                      fold_dir / (std::string(to_string(pr.member)) + "-run-" +
                                  two_digits(pr.run + 1) + ".tsv"));
  }
}

}  // namespace hsd
