#include "lmstyle/pretrain.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lmstyle/adam.h"
#include "lmstyle/errors.h"
#include "lmstyle/eval.h"
#include "lmstyle/graph.h"
#include "lmstyle/objectives.h"

namespace lmstyle {
namespace {

std::vector<size_t> shuffled_order(size_t n, uint64_t seed) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::vector<Tensor> snapshot(std::span<Parameter* const> params) {
  std::vector<Tensor> out;
  for (const Parameter* p : params) out.push_back(p->value);
  return out;
}

void restore(std::span<Parameter* const> params, const std::vector<Tensor>& values) {
  for (size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace

LmTrainReport train_language_model(const LanguageModel& lm, std::span<const Sentence> train,
                                   std::span<const Sentence> dev, const TrainConfig& config, uint64_t seed,
                                   MetricsWriter* metrics, const std::string& label) {
  LMS_REQUIRE(!train.empty() && !dev.empty(), "language model needs train and dev sentences");
  std::vector<Parameter*> params = lm.parameters();
  AdamState opt = AdamState::for_params(params, AdamConfig{config.learning_rate});
  LmTrainReport report;
  std::vector<Tensor> best = snapshot(params);
  int bad = 0;
  int64_t step = 0;
  const auto bs = static_cast<size_t>(config.lm_batch_size);
  for (int epoch = 0; epoch < config.lm_epochs; ++epoch) {
    const std::vector<size_t> order = shuffled_order(train.size(), derive_seed(seed, static_cast<uint64_t>(epoch)));
    for (size_t start = 0; start < order.size(); start += bs) {
      const size_t end = std::min(order.size(), start + bs);
      std::vector<Sentence> batch;
      for (size_t i = start; i < end; ++i) batch.push_back(train[order[i]]);
      PaddedBatch padded(batch);
      Graph g;
      LanguageModel::Vars vars = lm.bind(g, true);
      Var loss = g.mean(lm_score_discrete(g, vars, padded));
      for (Parameter* p : params) p->zero_grad();
      g.backward(loss);
      clip_grad_norm(params, config.clip_norm);
      adam_step(params, opt);
      ++step;
    }
    const double ppl = perplexity(lm, dev).ppl;
    if (!std::isfinite(ppl)) throw NumericalDivergence(label + " dev perplexity is not finite at epoch " +
                                                       std::to_string(epoch));
    report.dev_ppl.push_back(ppl);
    if (metrics != nullptr) metrics->write(epoch, step, "dev", label + "_ppl", ppl);
    report.epochs_run = epoch + 1;
    if (epoch == 0 || ppl < report.best_dev_ppl) {
      report.best_dev_ppl = ppl;
      report.best_epoch = epoch;
      best = snapshot(params);
      bad = 0;
    } else if (config.lm_patience > 0 && ++bad >= config.lm_patience) {
      break;
    }
  }
  restore(params, best);
  return report;
}

ClassifierTrainReport train_style_classifier(Classifier& clf, const DataSet& data, const TrainConfig& config,
                                             uint64_t seed, MetricsWriter* metrics) {
  std::vector<Parameter*> params = clf.parameters();
  AdamState opt = AdamState::for_params(params, AdamConfig{config.learning_rate});
  clf.frozen = false;
  const int half = std::max(1, config.lm_batch_size / 2);
  BatchIterator batches(data.train_x, data.train_y, 2 * half, seed);
  int64_t step = 0;
  for (int epoch = 0; epoch < config.clf_epochs; ++epoch) {
    for (const PairedBatch& b : batches.epoch(epoch)) {
      Graph g;
      Classifier::Vars vars = clf.bind(g, true);
      // "real" is style y, "fake" is style x.
      AdversarialLosses l = classifier_losses_from_logits(g, classifier_logit(g, vars, PaddedBatch(b.y)),
                                                          classifier_logit(g, vars, PaddedBatch(b.x)));
      for (Parameter* p : params) p->zero_grad();
      g.backward(l.disc);
      clip_grad_norm(params, config.clip_norm);
      adam_step(params, opt);
      ++step;
    }
  }
  clf.frozen = true;
  ClassifierTrainReport report;
  report.dev_accuracy = 0.5 * (transfer_accuracy(clf, data.dev_x.sentences, Style::kX) +
                               transfer_accuracy(clf, data.dev_y.sentences, Style::kY));
  if (metrics != nullptr) metrics->write(config.clf_epochs, step, "dev", "clf_accuracy", report.dev_accuracy);
  return report;
}

PretrainResult pretrain_lms(const TrainConfig& config, const DataSet& data, MetricsWriter* metrics) {
  config.validate();
  const ModelDims dims = config.dims(data.vocab.size());
  PretrainResult r;
  r.models = std::make_unique<EvalModels>(dims, derive_seed(config.seed, 0x1a));
  r.lm_x = train_language_model(r.models->lm_x, data.train_x.sentences, data.dev_x.sentences, config,
                                derive_seed(config.seed, 0x1b), metrics, "lm_x");
  r.lm_y = train_language_model(r.models->lm_y, data.train_y.sentences, data.dev_y.sentences, config,
                                derive_seed(config.seed, 0x1c), metrics, "lm_y");
  r.clf = train_style_classifier(r.models->clf, data, config, derive_seed(config.seed, 0x1d), metrics);
  return r;
}

void put_model_meta(Checkpoint& ckpt, const Vocabulary& vocab, const ModelDims& dims) {
  ckpt.meta["vocab"] = vocab_to_text(vocab);
  ckpt.meta["model.vocab_size"] = std::to_string(dims.vocab_size);
  ckpt.meta["model.embed_dim"] = std::to_string(dims.embed_dim);
  ckpt.meta["model.hidden_dim"] = std::to_string(dims.hidden_dim);
  ckpt.meta["model.style_dim"] = std::to_string(dims.style_dim);
}

Checkpoint pretrain_checkpoint(const EvalModels& models, const Vocabulary& vocab, const ModelDims& dims) {
  Checkpoint ckpt;
  put_model_meta(ckpt, vocab, dims);
  ckpt.add_parameters(models.params);
  return ckpt;
}

std::unique_ptr<EvalModels> load_eval_models(const Checkpoint& ckpt, const ModelDims& dims) {
  LMS_REQUIRE(ckpt.meta_at("model.vocab_size") == std::to_string(dims.vocab_size) &&
                  ckpt.meta_at("model.embed_dim") == std::to_string(dims.embed_dim) &&
                  ckpt.meta_at("model.hidden_dim") == std::to_string(dims.hidden_dim),
              "language model checkpoint sizes differ from the configured model");
  auto models = std::make_unique<EvalModels>(dims, 0);
  ckpt.load_parameters(models->params);
  models->clf.frozen = true;
  return models;
}

}  // namespace lmstyle
