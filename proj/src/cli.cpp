#include "xkgat/cli.hpp"

#include <algorithm>
#include <csignal>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "xkgat/checkpoint.hpp"
#include "xkgat/config.hpp"
#include "xkgat/evaluator.hpp"
#include "xkgat/explainer.hpp"
#include "xkgat/kg_store.hpp"
#include "xkgat/parallel.hpp"
#include "xkgat/review.hpp"
#include "xkgat/rule_miner.hpp"
#include "xkgat/synthetic.hpp"
#include "xkgat/trainer.hpp"

namespace xkgat {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::string out;
};

struct Paths {
  std::string triples;
  std::string targets;
  std::string data;
  std::string checkpoint;
  std::string explanations;
  std::string rules;
  std::string predictions;
  std::string log;
  std::string static_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
};

RunConfig resolve_config(const CommonOptions& common) {
  auto config = common.config.empty() ? default_config(common.overrides)
                                      : load_config(common.config, common.overrides);
  if (common.seed) config.seed = *common.seed;
  if (common.workers) config.workers = *common.workers;
  config.propagate_seed();
  config.validate();
  return config;
}

fs::path output_dir(const CommonOptions& common) {
  fs::path dir = common.out.empty() ? fs::path(".") : fs::path(common.out);
  fs::create_directories(dir);
  return dir;
}

Split load_augmented_split(const std::string& dir) {
  if (dir.empty()) throw DataError("--data is required");
  auto split = load_split(dir);
  split.train = augment_inverses(split.train);
  return split;
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << v;
  return out.str();
}

int cmd_synth(const CommonOptions& common, std::ostream& out) {
  const auto config = resolve_config(common);
  if (config.synth.rules.empty()) throw DataError("synth needs at least one [ruleN] section");
  const auto kg = generate_synthetic(config.synth);
  const auto dir = output_dir(common);
  write_triples(dir / "triples.tsv", kg.store.triples(), kg.store.vocab());
  std::string targets;
  for (auto r : kg.target_relations) targets += kg.store.vocab().relation_name(r) + "\n";
  write_file_atomic(dir / "targets.txt", targets);
  std::string planted;
  for (const auto& rule : kg.planted) planted += format_rule(rule, kg.store.vocab()) + "\n";
  write_file_atomic(dir / "planted_rules.txt", planted);
  write_file_atomic(dir / "config.ini", render_config(config));
  out << "synth: " << kg.store.size() << " triples, " << kg.store.vocab().num_entities()
      << " entities, " << kg.planted.size() << " planted rules -> " << dir.string() << "\n";
  return 0;
}

int cmd_split(const CommonOptions& common, const Paths& paths, std::ostream& out) {
  const auto config = resolve_config(common);
  if (paths.triples.empty()) throw DataError("--triples is required");
  const auto store = load_triples(paths.triples);
  std::vector<RelationId> targets;
  if (!paths.targets.empty()) {
    targets = read_target_relations(paths.targets, store.vocab());
  } else if (!config.targets.empty()) {
    for (const auto& name : config.targets) targets.push_back(store.vocab().relation_id(name));
  } else {
    for (RelationId r = 0; r < store.vocab().num_relations(); ++r) targets.push_back(r);
  }
  const auto split = split_dataset(store, targets, config.split);
  const auto dir = output_dir(common);
  save_split(split, dir);
  out << "split: train " << split.train.size() << ", valid " << split.valid.size() << ", test "
      << split.test.size() << " -> " << dir.string() << "\n";
  return 0;
}

int cmd_train(const CommonOptions& common, const Paths& paths, std::ostream& out) {
  auto config = resolve_config(common);
  const auto split = load_augmented_split(paths.data);
  const auto dir = output_dir(common);
  write_file_atomic(dir / "config.ini", render_config(config));

  std::string log = std::string(kTrainLogHeader) + "\n";
  TrainCallbacks callbacks;
  callbacks.on_epoch = [&](const EpochRecord& r) {
    log += format_log_line(r) + "\n";
    write_file_atomic(dir / "train_log.csv", log);
    out << "epoch " << r.epoch << ": loss " << fixed(r.mean_loss) << ", valid MRR "
        << fixed(r.valid_mrr) << "\n";
  };
  auto train_config = config.train;
  train_config.workers = config.workers;

  TrainResult result;
  if (config.kind == ModelKind::transe) {
    result = pretrain_transe(split, config.model, train_config, callbacks);
  } else {
    if (config.pretrain_epochs > 0) {
      auto warm = train_config;
      warm.max_epochs = config.pretrain_epochs;
      log += "# transe warm start\n";
      const auto pretrained = pretrain_transe(split, config.model, warm, callbacks);
      save_checkpoint(pretrained.best, dir / "pretrain");
      train_config.init = InitMode::checkpoint;
      train_config.init_checkpoint = dir / "pretrain";
      log += "# attention\n";
    }
    result = train(split, config.model, train_config, callbacks);
  }
  write_file_atomic(dir / "train_log.csv", log);
  save_checkpoint(result.best, dir / "checkpoint");
  out << "train: best epoch " << result.best_epoch << " -> " << (dir / "checkpoint").string() << "\n";
  return 0;
}

int cmd_eval(const CommonOptions& common, const Paths& paths, std::ostream& out) {
  const auto config = resolve_config(common);
  if (paths.checkpoint.empty()) throw DataError("--checkpoint is required");
  const auto checkpoint = load_checkpoint(paths.checkpoint);
  const auto split = load_augmented_split(paths.data);
  PlpOptions options;
  options.head_side = config.head_side;
  options.workers = config.workers;
  const auto report = run_plp(split, checkpoint, checkpoint.model, options);
  const auto dir = output_dir(common);
  const std::string metrics = format_metrics(report);
  write_file_atomic(dir / "report.txt", metrics);
  write_file_atomic(dir / "report.tsv", format_metrics_table(report, to_string(checkpoint.kind)));
  std::ostringstream ranks;
  ranks << "head\trelation\ttail\traw_rank\tfiltered_rank\n";
  const auto& vocab = split.train.vocab();
  for (const auto& r : report.ranks) {
    ranks << vocab.entity_name(r.triple.head) << '\t' << vocab.relation_name(r.triple.relation) << '\t'
          << vocab.entity_name(r.triple.tail) << '\t' << r.raw_rank << '\t' << r.filtered_rank << '\n';
  }
  write_file_atomic(dir / "ranks.tsv", ranks.str());
  out << metrics;
  return 0;
}

std::vector<Triple> explain_targets(const Split& split, ExplainSource source) {
  if (source == ExplainSource::test) return split.test;
  std::vector<Triple> out;
  for (const auto& t : split.train.triples()) {
    if (std::find(split.target_relations.begin(), split.target_relations.end(), t.relation) !=
        split.target_relations.end()) {
      out.push_back(t);
    }
  }
  return out;
}

std::string explanation_summary(const ExplanationReport& report) {
  std::string s = "k\t" + std::to_string(report.k) + "\n";
  s += "triples\t" + std::to_string(report.n_triples) + "\n";
  s += "explained\t" + std::to_string(report.n_explained) + "\n";
  s += "recall\t" + fixed(report.recall) + "\n";
  s += "avg_support\t" + (report.avg_support ? fixed(*report.avg_support) : std::string("undefined")) + "\n";
  return s;
}

int cmd_explain(const CommonOptions& common, const Paths& paths, std::ostream& out) {
  const auto config = resolve_config(common);
  if (paths.checkpoint.empty()) throw DataError("--checkpoint is required");
  const auto checkpoint = load_checkpoint(paths.checkpoint);
  const auto split = load_augmented_split(paths.data);
  const auto targets = explain_targets(split, config.explain_source);
  const auto report = explanation_report(targets, checkpoint, split.train, config.k, config.workers);
  const auto dir = output_dir(common);
  write_explanations_jsonl(dir / "explanations.jsonl", report.details, split.train.vocab());
  const auto summary = explanation_summary(report);
  write_file_atomic(dir / "explain_report.txt", summary);
  out << summary;
  return 0;
}

int cmd_mine(const CommonOptions& common, const Paths& paths, std::ostream& out) {
  const auto config = resolve_config(common);
  const auto split = load_augmented_split(paths.data);
  const auto& vocab = split.train.vocab();
  const auto dir = output_dir(common);

  std::vector<ExplainedTriple> explained;
  if (!paths.explanations.empty()) {
    explained = read_explanations_jsonl(paths.explanations, vocab);
  } else {
    if (paths.checkpoint.empty()) throw DataError("mine needs --checkpoint or --explanations");
    const auto checkpoint = load_checkpoint(paths.checkpoint);
    auto report = explanation_report(explain_targets(split, config.explain_source), checkpoint,
                                     split.train, config.k, config.workers);
    write_explanations_jsonl(dir / "explanations.jsonl", report.details, vocab);
    explained = std::move(report.details);
  }
  std::vector<Explanation> all;
  for (const auto& d : explained) all.insert(all.end(), d.top.begin(), d.top.end());
  const auto counts = aggregate_rules(all, vocab, config.open_endpoint);
  const auto scored = score_rules(counts, split.train, config.workers);
  const auto filtered = filter_rules(scored, config.thresholds);
  std::vector<Rule> high;
  for (const auto& r : filtered.high_quality) high.push_back(r.rule);
  const auto inferred = apply_rules(high, split.train);

  write_rules(dir / "rules.tsv", scored, vocab);
  write_rules(dir / "quality_rules.tsv", filtered.quality, vocab);
  write_rules(dir / "high_quality_rules.tsv", filtered.high_quality, vocab);
  write_triples(dir / "inferred.tsv", inferred, vocab);
  std::string summary = "explanations\t" + std::to_string(all.size()) + "\n";
  summary += "rules\t" + std::to_string(scored.size()) + "\n";
  summary += "quality_rules\t" + std::to_string(filtered.quality.size()) + "\n";
  summary += "high_quality_rules\t" + std::to_string(filtered.high_quality.size()) + "\n";
  summary += "inferred_triples\t" + std::to_string(inferred.size()) + "\n";
  write_file_atomic(dir / "mine_report.txt", summary);
  out << summary;
  return 0;
}

NamedTriple named(const Triple& t, const Vocabulary& vocab) {
  return {vocab.entity_name(t.head), vocab.relation_name(t.relation), vocab.entity_name(t.tail)};
}

int cmd_infer(const CommonOptions& common, const Paths& paths, std::ostream& out) {
  const auto config = resolve_config(common);
  const auto split = load_augmented_split(paths.data);
  const auto& vocab = split.train.vocab();
  if (paths.checkpoint.empty() && paths.rules.empty()) {
    throw DataError("infer needs --checkpoint and/or --rules");
  }
  std::optional<Checkpoint> checkpoint;
  std::optional<TailScorer> scorer;
  if (!paths.checkpoint.empty()) {
    checkpoint = load_checkpoint(paths.checkpoint);
    check_compatible(*checkpoint, vocab);
    scorer.emplace(split.train, checkpoint->params, checkpoint->model, checkpoint->kind);
  }

  std::vector<std::pair<Triple, PredictionSource>> predicted;
  std::set<Triple> seen;
  if (!paths.rules.empty()) {
    std::vector<Rule> rules;
    for (const auto& r : read_rules(paths.rules, vocab)) rules.push_back(r.rule);
    for (const auto& t : apply_rules(rules, split.train)) {
      if (seen.insert(t).second) predicted.emplace_back(t, PredictionSource::rule);
    }
  }
  if (scorer) {
    const auto known = make_filter_set({split.train.triples(), split.valid});
    std::set<std::pair<EntityId, RelationId>> queries;
    for (const auto& t : split.test) queries.emplace(t.head, t.relation);
    for (const auto& [h, r] : queries) {
      const auto scores = scorer->score_tails(h, r);
      std::vector<EntityId> order;
      for (EntityId e = 0; e < scores.size(); ++e) {
        if (!known.contains({h, r, e})) order.push_back(e);
      }
      const auto n = std::min(config.top_n, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                        [&](EntityId a, EntityId b) {
                          return scores[a] != scores[b] ? scores[a] < scores[b] : a < b;
                        });
      for (std::size_t i = 0; i < n; ++i) {
        const Triple t{h, r, order[i]};
        if (seen.insert(t).second) predicted.emplace_back(t, PredictionSource::model);
      }
    }
  }

  std::vector<double> scores(predicted.size(), 0.0);
  if (scorer) {
    parallel_for(predicted.size(), config.workers,
                 [&](std::size_t i) { scores[i] = scorer->score(predicted[i].first); });
  }
  const auto dir = output_dir(common);
  std::string lines;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    lines += format_prediction_line({named(predicted[i].first, vocab), scores[i], predicted[i].second}) + "\n";
  }
  write_file_atomic(dir / "predictions.jsonl", lines);
  if (checkpoint && !predicted.empty()) {
    std::vector<Triple> targets;
    for (const auto& p : predicted) targets.push_back(p.first);
    const auto report = explanation_report(targets, *checkpoint, split.train, config.k, config.workers);
    write_explanations_jsonl(dir / "explanations.jsonl", report.details, vocab);
  }
  out << "infer: " << predicted.size() << " predictions -> " << (dir / "predictions.jsonl").string()
      << "\n";
  return 0;
}

ReviewServer* active_server = nullptr;

extern "C" void stop_active_server(int) {
  if (active_server) active_server->stop();
}

int cmd_serve(const CommonOptions& common, const Paths& paths, std::ostream& out) {
  if (paths.predictions.empty()) throw DataError("--predictions is required");
  std::optional<fs::path> explanations;
  if (!paths.explanations.empty()) explanations = paths.explanations;
  auto predictions = load_queue(paths.predictions, explanations);
  const fs::path log = paths.log.empty() ? output_dir(common) / "decisions.jsonl" : fs::path(paths.log);
  ReviewQueue queue(std::move(predictions), log);
  std::optional<fs::path> static_dir;
  if (!paths.static_dir.empty()) static_dir = paths.static_dir;
  ReviewServer server(queue, static_dir);
  const int port = server.bind(paths.host, paths.port);
  out << "serving " << queue.stats().total << " predictions on http://" << paths.host << ":" << port
      << " (log " << log.string() << ")" << std::endl;
  active_server = &server;
  std::signal(SIGINT, stop_active_server);
  std::signal(SIGTERM, stop_active_server);
  server.listen();
  active_server = nullptr;
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Explainable knowledge-graph attention toolkit", "xkgat"};
  app.require_subcommand(1);
  CommonOptions common;
  Paths paths;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "INI configuration file");
    sub->add_option("--set", common.overrides, "Override a setting: section.key=value");
    sub->add_option("--seed", common.seed, "Seed for every random stream");
    sub->add_option("--workers", common.workers, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", common.out, "Output directory");
  };
  auto* synth = app.add_subcommand("synth", "Generate a knowledge graph with planted rules");
  add_common(synth);
  auto* split = app.add_subcommand("split", "Split a triple file into train/valid/test");
  add_common(split);
  split->add_option("--triples", paths.triples, "Triple TSV file")->required();
  split->add_option("--targets", paths.targets, "Target relation names, one per line");
  auto* train_cmd = app.add_subcommand("train", "Train a model on a split");
  add_common(train_cmd);
  train_cmd->add_option("--data", paths.data, "Split directory")->required();
  auto* eval = app.add_subcommand("eval", "Partial link prediction on the test set");
  add_common(eval);
  eval->add_option("--data", paths.data, "Split directory")->required();
  eval->add_option("--checkpoint", paths.checkpoint, "Checkpoint directory")->required();
  auto* explain_cmd = app.add_subcommand("explain", "Top-k attention explanations");
  add_common(explain_cmd);
  explain_cmd->add_option("--data", paths.data, "Split directory")->required();
  explain_cmd->add_option("--checkpoint", paths.checkpoint, "Checkpoint directory")->required();
  auto* mine = app.add_subcommand("mine", "Induce rules from explanations");
  add_common(mine);
  mine->add_option("--data", paths.data, "Split directory")->required();
  mine->add_option("--checkpoint", paths.checkpoint, "Checkpoint directory");
  mine->add_option("--explanations", paths.explanations, "Explanations JSONL file");
  auto* infer = app.add_subcommand("infer", "Predict new triples from rules and/or a model");
  add_common(infer);
  infer->add_option("--data", paths.data, "Split directory")->required();
  infer->add_option("--checkpoint", paths.checkpoint, "Checkpoint directory");
  infer->add_option("--rules", paths.rules, "Rule file");
  auto* serve = app.add_subcommand("serve", "Serve predictions for review");
  add_common(serve);
  serve->add_option("--predictions", paths.predictions, "Predictions JSONL file")->required();
  serve->add_option("--explanations", paths.explanations, "Explanations JSONL file");
  serve->add_option("--log", paths.log, "Decision log (default <out>/decisions.jsonl)");
  serve->add_option("--static", paths.static_dir, "Directory with the review UI");
  serve->add_option("--host", paths.host, "Bind address");
  serve->add_option("--port", paths.port, "Port (0 picks a free one)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "xkgat: " << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(common, out);
    if (split->parsed()) return cmd_split(common, paths, out);
    if (train_cmd->parsed()) return cmd_train(common, paths, out);
    if (eval->parsed()) return cmd_eval(common, paths, out);
    if (explain_cmd->parsed()) return cmd_explain(common, paths, out);
    if (mine->parsed()) return cmd_mine(common, paths, out);
    if (infer->parsed()) return cmd_infer(common, paths, out);
    if (serve->parsed()) return cmd_serve(common, paths, out);
  } catch (const DataError& e) {
    err << "xkgat: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    err << "xkgat: numeric failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "xkgat: " << e.what() << "\n";
    return 2;
  }
  err << app.help();
  return 1;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace xkgat
