#include "lmstyle/eval.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "lmstyle/errors.h"
#include "lmstyle/graph.h"

namespace lmstyle {
namespace {

template <typename Tok>
BleuReport bleu_impl(std::span<const std::vector<Tok>> hyps, std::span<const std::vector<Tok>> refs, int max_n) {
  LMS_REQUIRE(!hyps.empty(), "empty hypothesis set");
  LMS_REQUIRE(hyps.size() == refs.size(), "hypothesis and reference counts differ");
  LMS_REQUIRE(max_n >= 1 && max_n <= 4, "max_n must lie in [1, 4]");
  BleuReport r;
  r.max_n = max_n;
  for (size_t s = 0; s < hyps.size(); ++s) {
    const auto& h = hyps[s];
    const auto& ref = refs[s];
    r.hyp_length += static_cast<int64_t>(h.size());
    r.ref_length += static_cast<int64_t>(ref.size());
    for (int n = 1; n <= max_n; ++n) {
      std::map<std::vector<Tok>, int64_t> ref_counts, hyp_counts;
      for (size_t i = 0; i + n <= ref.size(); ++i) ++ref_counts[std::vector<Tok>(ref.begin() + i, ref.begin() + i + n)];
      for (size_t i = 0; i + n <= h.size(); ++i) ++hyp_counts[std::vector<Tok>(h.begin() + i, h.begin() + i + n)];
      for (const auto& [gram, c] : hyp_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) r.matches[n - 1] += std::min(c, it->second);
        r.totals[n - 1] += c;
      }
    }
  }
  double log_sum = 0.0;
  bool zero = false;
  for (int n = 0; n < max_n; ++n) {
    r.precisions[n] = r.totals[n] > 0 ? static_cast<double>(r.matches[n]) / static_cast<double>(r.totals[n]) : 0.0;
    if (r.precisions[n] == 0.0) zero = true;
    else log_sum += std::log(r.precisions[n]);
  }
  if (r.hyp_length < r.ref_length) {
    r.brevity_penalty =
        r.hyp_length == 0 ? 0.0 : std::exp(1.0 - static_cast<double>(r.ref_length) / static_cast<double>(r.hyp_length));
  }
  r.bleu = zero ? 0.0 : 100.0 * r.brevity_penalty * std::exp(log_sum / max_n);
  return r;
}

}  // namespace

BleuReport bleu(std::span<const TextSentence> hypotheses, std::span<const TextSentence> references, int max_n) {
  return bleu_impl<std::string>(hypotheses, references, max_n);
}

BleuReport bleu(std::span<const Sentence> hypotheses, std::span<const Sentence> references, int max_n) {
  return bleu_impl<int>(hypotheses, references, max_n);
}

BleuReport copy_baseline(std::span<const TextSentence> cipher_inputs, std::span<const TextSentence> references) {
  return bleu(cipher_inputs, references);
}

PerplexityReport perplexity(const LanguageModel& lm, std::span<const Sentence> corpus, int batch_size) {
  LMS_REQUIRE(batch_size >= 1, "batch size must be positive");
  PerplexityReport r;
  for (size_t start = 0; start < corpus.size(); start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(corpus.size(), start + static_cast<size_t>(batch_size));
    PaddedBatch batch(corpus.subspan(start, end - start));
    Graph g;
    LanguageModel::Vars vars = lm.bind(g, false);
    const Tensor& nll = lm_score_discrete(g, vars, batch).value();
    for (int b = 0; b < batch.batch_size(); ++b) {
      r.total_nll += nll[b];
      r.tokens += batch.length(b) + 1;
    }
  }
  LMS_REQUIRE(r.tokens > 0, "empty corpus");
  r.ppl = std::exp(r.total_nll / static_cast<double>(r.tokens));
  return r;
}

double transfer_accuracy(const Classifier& classifier, std::span<const Sentence> corpus, Style target,
                         int batch_size) {
  LMS_REQUIRE(classifier.frozen, "evaluation classifier must be frozen");
  LMS_REQUIRE(!corpus.empty(), "empty corpus");
  LMS_REQUIRE(batch_size >= 1, "batch size must be positive");
  int64_t hits = 0;
  for (size_t start = 0; start < corpus.size(); start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(corpus.size(), start + static_cast<size_t>(batch_size));
    PaddedBatch batch(corpus.subspan(start, end - start));
    Graph g;
    Classifier::Vars vars = classifier.bind(g, false);
    const Tensor& logits = classifier_logit(g, vars, batch).value();
    for (int b = 0; b < batch.batch_size(); ++b) {
      const Style predicted = logits[b] > 0.0 ? Style::kY : Style::kX;
      if (predicted == target) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(corpus.size());
}

}  // namespace lmstyle
