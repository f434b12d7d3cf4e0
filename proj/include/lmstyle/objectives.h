#ifndef LMSTYLE_OBJECTIVES_H_
#define LMSTYLE_OBJECTIVES_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>

#include "lmstyle/graph.h"
#include "lmstyle/models.h"
#include "lmstyle/sequence.h"

namespace lmstyle {

// Scalar values of one training step's losses, for logging.
struct LossReport {
  double rec_x = 0.0;
  double rec_y = 0.0;
  double lm_transfer_x = 0.0;  // LM_x on sentences transferred y -> x
  double lm_transfer_y = 0.0;  // LM_y on sentences transferred x -> y
  double disc_lm_x = 0.0;
  double disc_lm_y = 0.0;
  std::optional<double> clf_disc;
  std::optional<double> clf_gen;

  bool all_finite() const;
};

struct ObjectiveWeights {
  double lambda = 1.0;             // weight of the LM transfer terms
  double classifier_weight = 0.0;  // weight of the classifier generator loss
};

// Per-sentence -log p_G(s | z_s, v_s) with teacher forcing (batch x 1).
Var reconstruction_nll(Graph& g, const Seq2SeqModel::Vars& m, const PaddedBatch& batch, Style style);

// Mean reconstruction NLL over the x batch plus that over the y batch.
Var reconstruction_loss(Graph& g, const Seq2SeqModel::Vars& m, const PaddedBatch& batch_x,
                        const PaddedBatch& batch_y);

struct LmDiscriminatorOptions {
  double gamma = 0.0;
  // Per-token cap (nats) on negative-sample NLL; <= 0 disables the cap.
  double nll_cap = 0.0;
};

// mean NLL(real) - gamma * mean NLL(fake). fake may be null when gamma is 0.
// Fake sentences are discrete ids, so no gradient reaches the generator.
Var lm_discriminator_loss(Graph& g, const LanguageModel::Vars& lm, const PaddedBatch& real,
                          const PaddedBatch* fake, const LmDiscriminatorOptions& options);

struct TransferLoss {
  Var loss;          // scalar: batch mean of length-normalized relaxed LM loss
  Var per_sentence;  // (batch x 1) un-normalized relaxed LM loss
  RelaxedSequence relaxed;
};

// Encodes with the source style, decodes with the other style for exactly
// each input's length, and scores the relaxed output with target_lm.
TransferLoss generator_transfer_loss(Graph& g, const Seq2SeqModel::Vars& m, const LanguageModel::Vars& target_lm,
                                     const PaddedBatch& batch, Style source, const RelaxedDecodeOptions& decode);

using GradientMap = std::map<std::string, Tensor>;

// Score-function estimate of d/d(theta_E, theta_G) of the expected
// length-normalized NLL of discrete transfers under target_lm:
//   mean over samples of (NLL(x~)/T) * grad log p_G(x~ | z, v_target).
// Overwrites the gradient accumulators of the seq2seq parameters.
GradientMap reinforce_gradient(const Seq2SeqModel& model, const LanguageModel& target_lm,
                               std::span<const Sentence> batch, Style source, int n_samples, uint64_t seed);

struct AdversarialLosses {
  Var disc;  // mean[-log D(real)] + mean[-log(1 - D(fake))]
  Var gen;   // mean[-log D(fake)]
};

// Same losses from precomputed logits (rows x 1 each).
AdversarialLosses classifier_losses_from_logits(Graph& g, Var real_logits, Var fake_logits);

AdversarialLosses adversarial_classifier_loss(Graph& g, const Classifier::Vars& clf, const PaddedBatch& real,
                                              const RelaxedSequence& fake);

struct GeneratorTerms {
  Var rec;
  Var lm_transfer_x;  // optional (invalid Var when unused)
  Var lm_transfer_y;
  Var clf_gen;        // optional
};

// rec + lambda * (lm_transfer_x + lm_transfer_y) + classifier_weight * clf_gen
Var assemble_generator_objective(Graph& g, const GeneratorTerms& terms, const ObjectiveWeights& weights);
double assemble_generator_objective(const LossReport& losses, const ObjectiveWeights& weights);

}  // namespace lmstyle

#endif  // LMSTYLE_OBJECTIVES_H_
