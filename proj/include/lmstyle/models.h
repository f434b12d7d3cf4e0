#ifndef LMSTYLE_MODELS_H_
#define LMSTYLE_MODELS_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lmstyle/graph.h"
#include "lmstyle/gru.h"
#include "lmstyle/parameters.h"
#include "lmstyle/sequence.h"

namespace lmstyle {

struct ModelDims {
  int vocab_size = 0;
  int embed_dim = 32;
  int hidden_dim = 64;
  int style_dim = 16;

  void validate() const;
};

// Style-conditioned encoder E and generator G. Parameters live under
// "encoder." and "generator."; the token embedding table is shared by both.
class Seq2SeqModel {
 public:
  struct Vars {
    Var embedding, style;
    Var enc_init_w, enc_init_b;
    Var gen_init_w, gen_init_b;
    Var out_w, out_b;
    GruVars encoder, generator;
    int vocab_size = 0;
    int hidden_dim = 0;
  };

  Seq2SeqModel(ParameterSet& params, const ModelDims& dims, std::mt19937_64& rng);

  Vars bind(Graph& g, bool trainable = true) const;
  const ModelDims& dims() const { return dims_; }
  std::vector<Parameter*> parameters() const;

 private:
  ModelDims dims_;
  Parameter* embedding_;
  Parameter* style_;
  Parameter* enc_init_w_;
  Parameter* enc_init_b_;
  Parameter* gen_init_w_;
  Parameter* gen_init_b_;
  Parameter* out_w_;
  Parameter* out_b_;
  GruParams encoder_;
  GruParams generator_;
};

// Final encoder hidden state per sentence (batch x hidden). The initial
// state is an affine map of the style embedding.
Var encode(Graph& g, const Seq2SeqModel::Vars& m, const PaddedBatch& batch, Style style);

// Generator logits under teacher forcing. Step t consumes <start> for t = 0
// and targets[t-1] afterwards; one (batch x |V|) matrix per target step.
std::vector<Var> decode_teacher_forced(Graph& g, const Seq2SeqModel::Vars& m, Var z, Style style,
                                       const PaddedBatch& targets);

// Per-sentence teacher-forced NLL (batch x 1); padded steps are masked out.
Var sequence_nll(Graph& g, std::span<const Var> logits, const PaddedBatch& targets);

// Logit offset that keeps pad, start, end and unknown out of free-running
// decodes.
inline constexpr double kReservedPenalty = 1e4;

enum class NoiseMode { kGumbel, kNone };

struct RelaxedDecodeOptions {
  double tau = 1.0;
  uint64_t seed = 0;
  NoiseMode noise = NoiseMode::kGumbel;
};

// Gumbel-softmax decoding of exactly max(lengths) content tokens (reserved
// ids are masked out). The first input is the one-hot start token; later
// inputs are expected embeddings under the previous step's relaxed sample.
RelaxedSequence decode_relaxed(Graph& g, const Seq2SeqModel::Vars& m, Var z, Style style,
                               std::span<const int> lengths, const RelaxedDecodeOptions& options);

enum class DiscreteMode { kGreedy, kSample };

struct DiscreteDecode {
  std::vector<Sentence> tokens;
  // Per-step log-probabilities (batch x |V|) that produced the tokens.
  std::vector<Var> log_probs;
};

// Discrete decoding of fixed lengths over content tokens, feeding the chosen
// token back in.
DiscreteDecode decode_discrete(Graph& g, const Seq2SeqModel::Vars& m, Var z, Style style,
                               std::span<const int> lengths, DiscreteMode mode, uint64_t seed = 0);

// Per-style GRU language model under the given prefix ("lm_x." / "lm_y.").
class LanguageModel {
 public:
  struct Vars {
    Var embedding, out_w, out_b;
    GruVars gru;
    int vocab_size = 0;
    int hidden_dim = 0;
  };

  LanguageModel(ParameterSet& params, const std::string& prefix, const ModelDims& dims, std::mt19937_64& rng);

  Vars bind(Graph& g, bool trainable = true) const;
  const std::string& prefix() const { return prefix_; }
  std::vector<Parameter*> parameters() const;
  int vocab_size() const { return vocab_size_; }

 private:
  std::string prefix_;
  int vocab_size_;
  Parameter* embedding_;
  Parameter* out_w_;
  Parameter* out_b_;
  GruParams gru_;
};

// Per-step token NLL (batch x 1 each, zero past a sentence's end) for
// max_len + 1 steps; the last scored token of each sentence is kEndId.
std::vector<Var> lm_token_nll(Graph& g, const LanguageModel::Vars& lm, const PaddedBatch& sentences);

// Per-sentence -log p_LM(s), end token included (batch x 1).
Var lm_score_discrete(Graph& g, const LanguageModel::Vars& lm, const PaddedBatch& sentences);

// Per-sentence sum_t CE(p_t, log phat_t) where phat_t is the LM's prediction
// after consuming <start>, W_e p_1, ..., W_e p_{t-1} (batch x 1).
Var lm_score_relaxed(Graph& g, const LanguageModel::Vars& lm, const RelaxedSequence& seq);

// Scalar convenience wrappers that build a private graph.
double sentence_nll(const LanguageModel& lm, const Sentence& sentence);

// Binary real/fake (or style) classifier: GRU over embeddings, affine to one logit.
class Classifier {
 public:
  struct Vars {
    Var embedding, out_w, out_b;
    GruVars gru;
  };

  Classifier(ParameterSet& params, const std::string& prefix, const ModelDims& dims, std::mt19937_64& rng);

  Vars bind(Graph& g, bool trainable = true) const;
  std::vector<Parameter*> parameters() const;
  const std::string& prefix() const { return prefix_; }

  // Evaluation classifiers must be frozen before they are used as metrics.
  bool frozen = false;

 private:
  std::string prefix_;
  Parameter* embedding_;
  Parameter* out_w_;
  Parameter* out_b_;
  GruParams gru_;
};

Var classifier_logit(Graph& g, const Classifier::Vars& clf, const PaddedBatch& batch);
Var classifier_logit(Graph& g, const Classifier::Vars& clf, const RelaxedSequence& seq);

// sigmoid(logit) for a single discrete sentence.
double classify_real(const Classifier& clf, const Sentence& sentence);

}  // namespace lmstyle

#endif  // LMSTYLE_MODELS_H_
