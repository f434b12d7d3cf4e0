#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lmstyle/checkpoint.h"
#include "lmstyle/config.h"
#include "lmstyle/dataset.h"
#include "lmstyle/errors.h"
#include "lmstyle/gradcheck.h"
#include "lmstyle/inference.h"
#include "lmstyle/metrics.h"
#include "lmstyle/pretrain.h"
#include "lmstyle/trainer.h"

namespace {

using namespace lmstyle;

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_file, "key = value config file");
  cmd->add_option("-s,--set", opts.overrides, "override one config key (key=value), repeatable");
}

TrainConfig resolve(const CommonOptions& opts) {
  TrainConfig config;
  if (!opts.config_file.empty()) config.apply_file(opts.config_file);
  for (const std::string& kv : opts.overrides) {
    const auto eq = kv.find('=');
    LMS_REQUIRE(eq != std::string::npos, "--set expects key=value, got " + kv);
    config.apply_text(kv);
  }
  config.validate();
  return config;
}

int cmd_gen_data(const TrainConfig& config, const std::string& out) {
  const std::string dir = out.empty() ? config.data_dir : out;
  GeneratedData data = generate_data(config);
  write_data(dir, data);
  std::printf("wrote %zu + %zu training sentences to %s (cipher entries: %zu)\n", data.train_x.size(),
              data.train_y.size(), dir.c_str(), data.cipher.size());
  return 0;
}

int cmd_pretrain(const TrainConfig& config, const std::string& out, const std::string& metrics_path) {
  DataSet data = load_data(config.data_dir, config.min_count, config.train_limit);
  MetricsWriter metrics(metrics_path, config.run_id + "-lm", false);
  PretrainResult r = pretrain_lms(config, data, &metrics);
  const std::string path = out.empty() ? config.lm_checkpoint : out;
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  write_checkpoint(path, pretrain_checkpoint(*r.models, data.vocab, config.dims(data.vocab.size())));
  std::printf("lm_x dev ppl %.4f (%d epochs), lm_y dev ppl %.4f (%d epochs), classifier dev accuracy %.4f\n",
              r.lm_x.best_dev_ppl, r.lm_x.epochs_run, r.lm_y.best_dev_ppl, r.lm_y.epochs_run, r.clf.dev_accuracy);
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

int cmd_train(const TrainConfig& config, bool resume) {
  DataSet data = load_data(config.data_dir, config.min_count, config.train_limit);
  std::unique_ptr<Checkpoint> lms;
  if (std::filesystem::exists(config.lm_checkpoint))
    lms = std::make_unique<Checkpoint>(read_checkpoint(config.lm_checkpoint));
  Trainer trainer(config, data, lms.get());
  const std::string last = config.run_dir + "/last.ckpt";
  if (resume) {
    LMS_REQUIRE(std::filesystem::exists(last), "nothing to resume: " + last + " is missing");
    trainer.resume(read_checkpoint(last));
    std::printf("resuming at epoch %d\n", trainer.next_epoch());
  }
  TrainSummary s = trainer.run();
  for (size_t e = 0; e < s.dev_bleu.size(); ++e) std::printf("epoch %zu dev BLEU %.2f\n", e, s.dev_bleu[e]);
  std::printf("best epoch %d dev BLEU %.2f, warnings %d, generator updates %lld, LM updates %lld%s\n", s.best_epoch,
              s.best_dev_bleu, s.divergence_warnings, static_cast<long long>(s.gen_updates),
              static_cast<long long>(s.lm_updates), s.early_stopped ? " (early stop)" : "");
  return 0;
}

int cmd_transfer(const std::string& ckpt_path, const std::string& input, const std::string& output,
                 const std::string& direction, const std::string& decode, uint64_t seed) {
  auto tm = load_transfer_model(read_checkpoint(ckpt_path));
  LMS_REQUIRE(direction == "x2y" || direction == "y2x", "direction must be x2y or y2x");
  LMS_REQUIRE(decode == "greedy" || decode == "sample", "decode must be greedy or sample");
  const Style source = direction == "x2y" ? Style::kX : Style::kY;
  const TextCorpus text = read_corpus(input);
  std::vector<Sentence> ids;
  int unknown = 0;
  for (const TextSentence& s : text) {
    LMS_REQUIRE(!s.empty(), "empty input line");
    LMS_REQUIRE(static_cast<int>(s.size()) <= kMaxSentenceLength, "input line longer than 16 tokens");
    ids.push_back(tm->vocab.encode(s, &unknown));
  }
  const std::vector<Sentence> out =
      transfer_sentences(tm->model, ids, source, decode == "sample" ? DiscreteMode::kSample : DiscreteMode::kGreedy, seed);
  TextCorpus out_text;
  for (const Sentence& s : out) out_text.push_back(tm->vocab.decode(s));
  write_corpus(output, out_text);
  std::fprintf(stderr, "transferred %zu sentences; %d unknown tokens mapped to <unk>\n", out.size(), unknown);
  return 0;
}

int cmd_evaluate(const TrainConfig& config, const std::string& ckpt_path, const std::string& split,
                 const std::string& metrics_path) {
  auto tm = load_transfer_model(read_checkpoint(ckpt_path));
  DataSet data = load_data(config.data_dir, tm->vocab, config.train_limit);
  LMS_REQUIRE(split == "dev" || split == "test", "split must be dev or test");
  const bool dev = split == "dev";
  const StyleCorpus& xs = dev ? data.dev_x : data.test_x;
  const StyleCorpus& ys = dev ? data.dev_y : data.test_y;
  const TextCorpus* rx = data.parallel ? (dev ? &data.dev_x_text : &data.test_x_text) : nullptr;
  const TextCorpus* ry = data.parallel ? (dev ? &data.dev_y_text : &data.test_y_text) : nullptr;
  if (!data.parallel) std::printf("notice: no parallel references in %s; BLEU skipped\n", config.data_dir.c_str());
  if (!tm->eval) std::printf("notice: checkpoint has no eval models; perplexity and accuracy skipped\n");
  const EvaluationReport r = evaluate_transfer(*tm, xs.sentences, ys.sentences, rx, ry);
  MetricsWriter metrics(metrics_path, config.run_id, true);
  log_evaluation(metrics, r, 0, 0, split);
  for (const MetricRecord& m : metrics.records()) std::printf("%s %s %.6f\n", split.c_str(), m.name.c_str(), m.value);
  return 0;
}

int cmd_grad_check() {
  bool ok = true;
  for (const GradCheckResult& r : run_gradient_checks()) {
    std::printf("%-28s max rel error %.3e over %lld coords  %s\n", r.name.c_str(), r.max_rel_error,
                static_cast<long long>(r.coordinates), r.passed ? "ok" : "FAIL");
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Style transfer with language-model discriminators"};
  app.require_subcommand(1);

  CommonOptions gen_opts, pre_opts, train_opts, eval_opts;
  std::string gen_out, pre_out, pre_metrics, ckpt, input, output, direction = "y2x", decode = "greedy";
  std::string eval_ckpt, split = "test", eval_metrics;
  uint64_t seed = 0;
  bool resume = false;

  auto* gen = app.add_subcommand("gen-data", "generate toy corpora, cipher and parallel dev/test");
  add_common(gen, gen_opts);
  gen->add_option("-o,--out", gen_out, "output directory (default paths.data_dir)");

  auto* pre = app.add_subcommand("pretrain-lm", "train the per-style language models and eval classifier");
  add_common(pre, pre_opts);
  pre->add_option("-o,--out", pre_out, "checkpoint path (default paths.lm_checkpoint)");
  pre->add_option("--metrics", pre_metrics, "JSON-lines metrics file");

  auto* train = app.add_subcommand("train", "train the encoder and generator");
  add_common(train, train_opts);
  train->add_flag("--resume", resume, "continue from run_dir/last.ckpt");

  auto* transfer = app.add_subcommand("transfer", "transfer a file of sentences");
  transfer->add_option("--checkpoint", ckpt, "run checkpoint")->required();
  transfer->add_option("-i,--input", input, "input corpus")->required();
  transfer->add_option("-o,--output", output, "output corpus")->required();
  transfer->add_option("-d,--direction", direction, "x2y or y2x");
  transfer->add_option("--decode", decode, "greedy or sample");
  transfer->add_option("--seed", seed, "sampling seed");

  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on dev or test");
  add_common(evaluate, eval_opts);
  evaluate->add_option("--checkpoint", eval_ckpt, "run checkpoint")->required();
  evaluate->add_option("--split", split, "dev or test");
  evaluate->add_option("--metrics", eval_metrics, "JSON-lines metrics file to append to");

  auto* grad = app.add_subcommand("grad-check", "finite-difference gradient checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen_data(resolve(gen_opts), gen_out);
    if (*pre) return cmd_pretrain(resolve(pre_opts), pre_out, pre_metrics);
    if (*train) return cmd_train(resolve(train_opts), resume);
    if (*transfer) return cmd_transfer(ckpt, input, output, direction, decode, seed);
    if (*evaluate) return cmd_evaluate(resolve(eval_opts), eval_ckpt, split, eval_metrics);
    if (*grad) return cmd_grad_check();
  } catch (const NumericalDivergence& e) {
    std::fprintf(stderr, "numerical divergence: %s\n", e.what());
    return 2;
  } catch (const ContractViolation& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
