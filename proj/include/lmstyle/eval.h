#ifndef LMSTYLE_EVAL_H_
#define LMSTYLE_EVAL_H_

#include <array>
#include <cstdint>
#include <span>

#include "lmstyle/corpus.h"
#include "lmstyle/models.h"

namespace lmstyle {

struct BleuReport {
  double bleu = 0.0;  // in [0, 100]
  int max_n = 4;
  std::array<double, 4> precisions{};  // entries past max_n stay 0
  std::array<int64_t, 4> matches{};
  std::array<int64_t, 4> totals{};
  double brevity_penalty = 1.0;
  int64_t hyp_length = 0;
  int64_t ref_length = 0;
  bool bleu1() const { return max_n == 1; }
};

// Corpus-level, unsmoothed, single-reference BLEU with clipped counts.
// max_n = 1 gives BLEU-1.
BleuReport bleu(std::span<const TextSentence> hypotheses, std::span<const TextSentence> references, int max_n = 4);
BleuReport bleu(std::span<const Sentence> hypotheses, std::span<const Sentence> references, int max_n = 4);

// Ciphered inputs scored directly against their plaintext references.
BleuReport copy_baseline(std::span<const TextSentence> cipher_inputs, std::span<const TextSentence> references);

struct PerplexityReport {
  double ppl = 0.0;
  int64_t tokens = 0;  // end tokens included
  double total_nll = 0.0;
};

PerplexityReport perplexity(const LanguageModel& lm, std::span<const Sentence> corpus, int batch_size = 64);

// Fraction of sentences the frozen classifier assigns to target. The
// classifier's sigmoid output is read as P(style = y).
double transfer_accuracy(const Classifier& classifier, std::span<const Sentence> corpus, Style target,
                         int batch_size = 64);

}  // namespace lmstyle

#endif  // LMSTYLE_EVAL_H_
