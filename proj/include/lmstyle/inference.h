#ifndef LMSTYLE_INFERENCE_H_
#define LMSTYLE_INFERENCE_H_

#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lmstyle/checkpoint.h"
#include "lmstyle/config.h"
#include "lmstyle/corpus.h"
#include "lmstyle/eval.h"
#include "lmstyle/metrics.h"
#include "lmstyle/models.h"

namespace lmstyle {

// Encodes with source style and decodes with the other style, one output
// token per input token.
std::vector<Sentence> transfer_sentences(const Seq2SeqModel& model, std::span<const Sentence> inputs, Style source,
                                         DiscreteMode mode = DiscreteMode::kGreedy, uint64_t seed = 0,
                                         int batch_size = 128);

// Greedy same-style decoding compared position by position with the input.
double reconstruction_accuracy(const Seq2SeqModel& model, std::span<const Sentence> inputs, Style style,
                               int batch_size = 128);

// Fraction of positions where round-trip x -> y -> x reproduces the input.
double roundtrip_accuracy(const Seq2SeqModel& model, std::span<const Sentence> inputs, Style source,
                          int batch_size = 128);

// Frozen language models and style classifier used for metrics.
struct EvalModels {
  EvalModels(const ModelDims& dims, uint64_t seed, const std::string& prefix = "eval_");
  ParameterSet params;
  LanguageModel lm_x;
  LanguageModel lm_y;
  Classifier clf;

  const LanguageModel& lm(Style s) const { return s == Style::kX ? lm_x : lm_y; }

 private:
  EvalModels(const ModelDims& dims, const std::string& prefix, std::mt19937_64&& rng);
};

// A trained (or freshly initialized) transfer model with its vocabulary.
struct TransferModel {
  TransferModel(Vocabulary vocab, const ModelDims& dims, uint64_t seed);
  Vocabulary vocab;
  ModelDims dims;
  ParameterSet params;
  Seq2SeqModel model;
  std::unique_ptr<EvalModels> eval;  // present when the checkpoint carries eval models

 private:
  TransferModel(Vocabulary vocab, const ModelDims& dims, std::mt19937_64&& rng);
};

// Loads encoder/generator (and eval_* models when present) from a run checkpoint.
std::unique_ptr<TransferModel> load_transfer_model(const Checkpoint& ckpt);

struct EvaluationReport {
  std::optional<BleuReport> bleu_y2x;  // transferred cipher vs plaintext
  std::optional<BleuReport> bleu_x2y;
  std::optional<BleuReport> copy;
  std::optional<PerplexityReport> ppl_x2y;  // under the y eval LM
  std::optional<PerplexityReport> ppl_y2x;
  std::optional<double> accuracy_x2y;  // transfer accuracy under the eval classifier
  std::optional<double> accuracy_y2x;
};

// Scores transfers of (inputs_x, inputs_y). BLEU needs parallel references
// (refs_y doubles as the copy-baseline input); perplexity and accuracy need
// eval models.
EvaluationReport evaluate_transfer(const TransferModel& tm, std::span<const Sentence> inputs_x,
                                   std::span<const Sentence> inputs_y, const TextCorpus* refs_x,
                                   const TextCorpus* refs_y);

void log_evaluation(MetricsWriter& metrics, const EvaluationReport& report, int epoch, int64_t step,
                    const std::string& split);

}  // namespace lmstyle

#endif  // LMSTYLE_INFERENCE_H_
