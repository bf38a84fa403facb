#include "bglm/cli.hpp"

#include <cstdio>
#include <map>
#include <ostream>

#include "CLI11.hpp"
#include "bglm/checkpoint.hpp"
#include "bglm/config.hpp"
#include "bglm/metrics_io.hpp"

namespace bglm {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

fs::path sibling(const fs::path& p, const std::string& suffix) { return fs::path(p.string() + suffix); }

fs::path require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw DataError("missing file: " + p.string());
  return p;
}

LmData lm_data(const CorpusDir& c) {
  return LmData{c.vocab.size(), c.train.stream(), c.valid.stream(), c.test.stream()};
}

std::optional<BehaviorNet> maybe_behavior(const std::string& path, const Vocab& vocab) {
  if (path.empty()) return std::nullopt;
  return behavior_from_checkpoint(load_checkpoint(require_file(path), vocab.hash()));
}

int cmd_synth(const std::string& config, const fs::path& out_dir, std::ostream& out) {
  const auto cfg = load_config(config).synth;
  cfg.validate();
  const auto corpus = synth_generate(cfg);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());
  save_vocab(out_dir / "vocab.txt", corpus.vocab);
  for (const Corpus* c : {&corpus.train, &corpus.valid, &corpus.test}) {
    const std::string name(split_name(c->split));
    save_corpus_text(out_dir / (name + ".txt"), *c, corpus.vocab);
    save_labels(out_dir / (name + ".labels"), c->labels);
  }
  const auto bounds = entropy_oracle(cfg);
  out << "sequences train/valid/test: " << corpus.train.sequences.size() << " / "
      << corpus.valid.sequences.size() << " / " << corpus.test.sequences.size() << "\n"
      << "vocab size: " << corpus.vocab.size() << "\n"
      << "h_given_B: " << fixed(bounds.h_given_B, 6) << " nats  ppl_bound_conditional: "
      << fixed(bounds.ppl_bound_conditional, 4) << "\n"
      << "h_marginal: " << fixed(bounds.h_marginal, 6) << " nats  ppl_bound_marginal: "
      << fixed(bounds.ppl_bound_marginal, 4) << "\n";
  return kExitOk;
}

int cmd_build_vocab(const fs::path& corpus_dir, std::size_t min_count, std::size_t max_size,
                    std::ostream& out) {
  const auto stream = load_ptb_format(require_file(corpus_dir / "train.txt"));
  const auto vocab = build_vocab(stream, min_count, max_size);
  save_vocab(corpus_dir / "vocab.txt", vocab);
  out << "vocab size: " << vocab.size() << " (" << (corpus_dir / "vocab.txt").string() << ")\n";
  return kExitOk;
}

int cmd_train_behavior(const std::string& config, const fs::path& corpus_dir, const fs::path& out_path,
                       std::ostream& out) {
  const auto cfg = load_config(config);
  cfg.behavior.validate();
  const auto data = load_corpus_dir(corpus_dir, true);
  const BehaviorDims dims{data.vocab.size(), cfg.beh_embed_dim, cfg.beh_hidden_dim};
  auto res = train_behavior(dims, data.train, data.valid, cfg.behavior);

  BehaviorRunSummary summary;
  summary.best_epoch = res.best_epoch;
  summary.valid = eval_behavior(res.best, data.valid);
  if (data.test.has_labels()) summary.test = eval_behavior(res.best, data.test);

  save_checkpoint(out_path, make_checkpoint(res.best, data.vocab));
  write_file(sibling(out_path, ".metrics.jsonl"),
             [&](std::ostream& s) { write_behavior_metrics(s, res.history, summary); });
  write_file(sibling(out_path, ".timing.jsonl"), [&](std::ostream& s) { write_behavior_timing(s, res.history); });

  out << "epoch  lr        train_bce  valid_bce  valid_macro_f1\n";
  for (const auto& e : res.history) {
    out << e.epoch << "  " << fixed(e.lr, 6) << "  " << fixed(e.train_bce, 5) << "  " << fixed(e.valid_bce, 5)
        << "  " << fixed(e.valid_macro_f1, 4) << "\n";
  }
  out << "best epoch: " << res.best_epoch << "  valid macro-F1: " << fixed(summary.valid.macro_f1, 4);
  if (data.test.has_labels()) out << "  test macro-F1: " << fixed(summary.test.macro_f1, 4);
  out << "\n";
  return kExitOk;
}

int cmd_train_lm(const std::string& config, const fs::path& corpus_dir, const std::string& behavior_ckpt,
                 const fs::path& out_path, std::ostream& out) {
  const auto cfg = load_config(config).train;
  cfg.validate();
  if (cfg.gating_enabled && behavior_ckpt.empty()) {
    throw ConfigError("gating_enabled = true requires --behavior-ckpt");
  }
  const auto data = load_corpus_dir(corpus_dir, false);
  const auto behavior = cfg.gating_enabled ? maybe_behavior(behavior_ckpt, data.vocab) : std::nullopt;
  auto res = train_lm(cfg, lm_data(data), behavior ? &*behavior : nullptr);

  save_checkpoint(out_path, make_checkpoint(res.model, data.vocab, cfg.batch_size, cfg.bptt_len));
  write_file(sibling(out_path, ".metrics.jsonl"), [&](std::ostream& s) { write_run_metrics(s, res.metrics); });
  write_file(sibling(out_path, ".timing.jsonl"), [&](std::ostream& s) { write_run_timing(s, res.metrics); });

  const auto& m = res.metrics;
  out << "epoch  lr        train_ppl  valid_ppl\n";
  for (const auto& e : m.epochs) {
    out << e.epoch << "  " << fixed(e.lr, 6) << "  " << fixed(e.train_ppl, 4) << "  " << fixed(e.valid_ppl, 4)
        << "\n";
  }
  out << "best epoch: " << m.best_epoch << "  valid ppl: " << fixed(m.best_valid_ppl, 4)
      << "  test ppl: " << fixed(m.test_ppl, 4) << "\n"
      << "params: " << m.param_count << " (trainable " << m.trainable_count << ")\n";
  if (cfg.gating_enabled) {
    out << "frozen checksum before: " << m.frozen_checksum_before << "\n"
        << "frozen checksum after:  " << m.frozen_checksum_after << "\n";
  }
  return kExitOk;
}

int cmd_eval(const fs::path& ckpt_path, const fs::path& corpus_dir, const std::string& split, std::ostream& out) {
  const auto data = load_corpus_dir(corpus_dir, false);
  auto ckpt = load_checkpoint(require_file(ckpt_path), data.vocab.hash());
  const auto batch = ckpt.meta.eval_batch;
  const auto bptt = ckpt.meta.eval_bptt;
  const auto model = lm_from_checkpoint(std::move(ckpt));
  const Corpus* c = split == "train" ? &data.train : split == "valid" ? &data.valid : &data.test;
  const auto res = evaluate_perplexity(model, c->stream(), batch, bptt);
  out << fixed(res.ppl, 4) << "\n";
  return kExitOk;
}

int cmd_grid(const fs::path& grid_config, const fs::path& corpus_dir, const std::string& behavior_ckpt,
             const fs::path& out_dir, std::ostream& out) {
  const auto spec = load_grid(grid_config);
  spec.validate();
  const auto data = load_corpus_dir(corpus_dir, false);
  const auto behavior = maybe_behavior(behavior_ckpt, data.vocab);
  const auto res = grid_search(spec, lm_data(data), behavior ? &*behavior : nullptr);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());
  for (const auto& row : res.ranked) {
    const auto stem = out_dir / ("cell_" + std::to_string(row.index));
    write_file(sibling(stem, ".metrics.jsonl"), [&](std::ostream& s) { write_run_metrics(s, row.metrics); });
    write_file(sibling(stem, ".timing.jsonl"), [&](std::ostream& s) { write_run_timing(s, row.metrics); });
  }

  out << "rank  cell  valid_ppl  test_ppl  params";
  for (const auto& [key, _] : spec.axes) out << "  " << key;
  out << "  seed\n";
  for (std::size_t r = 0; r < res.ranked.size(); ++r) {
    const auto& row = res.ranked[r];
    const auto items = train_config_items(row.metrics.config);
    const std::map<std::string, std::string> lookup(items.begin(), items.end());
    out << r + 1 << "  " << row.index << "  " << fixed(row.metrics.best_valid_ppl, 4) << "  "
        << fixed(row.metrics.test_ppl, 4) << "  " << row.metrics.param_count;
    for (const auto& [key, _] : spec.axes) out << "  " << lookup.at(key);
    out << "  " << row.metrics.config.seed << "\n";
  }
  out << "best config:\n";
  for (const auto& [k, v] : train_config_items(res.best)) out << "  " << k << " = " << v << "\n";
  return kExitOk;
}

}  // namespace

CorpusDir load_corpus_dir(const fs::path& dir, bool require_labels) {
  if (!fs::is_directory(dir)) throw DataError("corpus directory not found: " + dir.string());
  CorpusDir c;
  const auto vocab_path = dir / "vocab.txt";
  c.vocab = fs::exists(vocab_path) ? load_vocab(vocab_path)
                                   : build_vocab(load_ptb_format(require_file(dir / "train.txt")));
  auto load = [&](Split split, bool labels_required) {
    const std::string name(split_name(split));
    const auto labels = dir / (name + ".labels");
    if (labels_required) require_file(labels);
    std::optional<fs::path> sidecar;
    if (fs::exists(labels)) sidecar = labels;
    return load_corpus(require_file(dir / (name + ".txt")), c.vocab, sidecar, split);
  };
  c.train = load(Split::Train, require_labels);
  c.valid = load(Split::Valid, require_labels);
  c.test = load(Split::Test, false);
  return c;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Behavior-gated LSTM language models: synthetic corpora, training, evaluation"};
  app.require_subcommand(1);

  std::string config, corpus, out_path, behavior_ckpt, ckpt, grid_config, split = "test";
  fs::path out_dir = "grid_runs";
  std::size_t min_count = 1, max_size = 0;

  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic corpus");
  synth->add_option("--config", config, "Config file")->required();
  synth->add_option("--out-dir", out_dir, "Output directory")->required();

  auto* vocab = app.add_subcommand("build-vocab", "Write vocab.txt from a corpus directory's train.txt");
  vocab->add_option("--corpus", corpus, "Corpus directory")->required();
  vocab->add_option("--min-count", min_count, "Minimum token count");
  vocab->add_option("--max-size", max_size, "Maximum number of regular tokens (0 = no cap)");

  auto* beh = app.add_subcommand("train-behavior", "Pre-train the behavior classifier");
  beh->add_option("--config", config, "Config file")->required();
  beh->add_option("--corpus", corpus, "Corpus directory with label sidecars")->required();
  beh->add_option("--out", out_path, "Checkpoint path")->required();

  auto* lm = app.add_subcommand("train-lm", "Train a baseline or behavior-gated language model");
  lm->add_option("--config", config, "Config file")->required();
  lm->add_option("--corpus", corpus, "Corpus directory")->required();
  lm->add_option("--behavior-ckpt", behavior_ckpt, "Behavior checkpoint (required when gating)");
  lm->add_option("--out", out_path, "Checkpoint path")->required();

  auto* ev = app.add_subcommand("eval", "Print the perplexity of a checkpoint on a corpus split");
  ev->add_option("--ckpt", ckpt, "Language model checkpoint")->required();
  ev->add_option("--corpus", corpus, "Corpus directory")->required();
  ev->add_option("--split", split, "train, valid or test")->check(CLI::IsMember({"train", "valid", "test"}));

  auto* grid = app.add_subcommand("grid", "Grid search over language-model hyperparameters");
  grid->add_option("--grid-config", grid_config, "Grid file")->required();
  grid->add_option("--corpus", corpus, "Corpus directory")->required();
  grid->add_option("--behavior-ckpt", behavior_ckpt, "Behavior checkpoint");
  grid->add_option("--out-dir", out_dir, "Directory for per-cell metrics");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(config, out_dir, out);
    if (*vocab) return cmd_build_vocab(corpus, min_count, max_size, out);
    if (*beh) return cmd_train_behavior(config, corpus, out_path, out);
    if (*lm) return cmd_train_lm(config, corpus, behavior_ckpt, out_path, out);
    if (*ev) return cmd_eval(ckpt, corpus, split, out);
    if (*grid) return cmd_grid(grid_config, corpus, behavior_ckpt, out_dir, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DomainError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitData;
  } catch (const LoadError& e) {
    err << "load error: " << e.what() << "\n";
    return kExitData;
  } catch (const IndexError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}

}  // namespace bglm
