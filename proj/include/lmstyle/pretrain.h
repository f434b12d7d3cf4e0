#ifndef LMSTYLE_PRETRAIN_H_
#define LMSTYLE_PRETRAIN_H_

#include <memory>
#include <span>
#include <string>

#include "lmstyle/checkpoint.h"
#include "lmstyle/config.h"
#include "lmstyle/dataset.h"
#include "lmstyle/inference.h"
#include "lmstyle/metrics.h"

namespace lmstyle {

struct LmTrainReport {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_dev_ppl = 0.0;
  std::vector<double> dev_ppl;  // one per epoch
};

// Trains lm on its own style's sentences with Adam, early stopping on dev
// perplexity, and restores the best parameters. Logs "lm_<style>_ppl".
LmTrainReport train_language_model(const LanguageModel& lm, std::span<const Sentence> train,
                                   std::span<const Sentence> dev, const TrainConfig& config, uint64_t seed,
                                   MetricsWriter* metrics, const std::string& label);

struct ClassifierTrainReport {
  double dev_accuracy = 0.0;  // mean of per-style accuracies
};

// Style classifier: sigmoid output is P(style = y). Marks it frozen.
ClassifierTrainReport train_style_classifier(Classifier& clf, const DataSet& data, const TrainConfig& config,
                                             uint64_t seed, MetricsWriter* metrics);

struct PretrainResult {
  std::unique_ptr<EvalModels> models;
  LmTrainReport lm_x, lm_y;
  ClassifierTrainReport clf;
};

// Trains both language models and the evaluation classifier.
PretrainResult pretrain_lms(const TrainConfig& config, const DataSet& data, MetricsWriter* metrics);

// Checkpoint with the eval_* parameters, the vocabulary and model sizes.
Checkpoint pretrain_checkpoint(const EvalModels& models, const Vocabulary& vocab, const ModelDims& dims);
std::unique_ptr<EvalModels> load_eval_models(const Checkpoint& ckpt, const ModelDims& dims);

void put_model_meta(Checkpoint& ckpt, const Vocabulary& vocab, const ModelDims& dims);

}  // namespace lmstyle

#endif  // LMSTYLE_PRETRAIN_H_
