#include "lmstyle/inference.h"

#include <algorithm>

#include "lmstyle/dataset.h"
#include "lmstyle/errors.h"
#include "lmstyle/graph.h"

namespace lmstyle {
namespace {

template <typename Fn>
void for_batches(size_t n, int batch_size, Fn fn) {
  LMS_REQUIRE(batch_size >= 1, "batch size must be positive");
  for (size_t start = 0; start < n; start += static_cast<size_t>(batch_size))
    fn(start, std::min(n, start + static_cast<size_t>(batch_size)));
}

int meta_int(const Checkpoint& ckpt, const std::string& key) { return std::stoi(ckpt.meta_at(key)); }

}  // namespace

std::vector<Sentence> transfer_sentences(const Seq2SeqModel& model, std::span<const Sentence> inputs, Style source,
                                         DiscreteMode mode, uint64_t seed, int batch_size) {
  std::vector<Sentence> out;
  out.reserve(inputs.size());
  for_batches(inputs.size(), batch_size, [&](size_t a, size_t b) {
    PaddedBatch batch(inputs.subspan(a, b - a));
    Graph g;
    Seq2SeqModel::Vars m = model.bind(g, false);
    Var z = encode(g, m, batch, source);
    DiscreteDecode d = decode_discrete(g, m, z, other_style(source), batch.lengths(), mode, derive_seed(seed, a));
    for (Sentence& s : d.tokens) out.push_back(std::move(s));
  });
  return out;
}

double reconstruction_accuracy(const Seq2SeqModel& model, std::span<const Sentence> inputs, Style style,
                               int batch_size) {
  LMS_REQUIRE(!inputs.empty(), "empty corpus");
  int64_t hits = 0, total = 0;
  for_batches(inputs.size(), batch_size, [&](size_t a, size_t b) {
    PaddedBatch batch(inputs.subspan(a, b - a));
    Graph g;
    Seq2SeqModel::Vars m = model.bind(g, false);
    Var z = encode(g, m, batch, style);
    DiscreteDecode d = decode_discrete(g, m, z, style, batch.lengths(), DiscreteMode::kGreedy);
    for (size_t i = 0; i < d.tokens.size(); ++i) {
      const Sentence& ref = inputs[a + i];
      for (size_t t = 0; t < ref.size(); ++t) hits += d.tokens[i][t] == ref[t];
      total += static_cast<int64_t>(ref.size());
    }
  });
  return static_cast<double>(hits) / static_cast<double>(total);
}

double roundtrip_accuracy(const Seq2SeqModel& model, std::span<const Sentence> inputs, Style source,
                          int batch_size) {
  LMS_REQUIRE(!inputs.empty(), "empty corpus");
  std::vector<Sentence> there = transfer_sentences(model, inputs, source, DiscreteMode::kGreedy, 0, batch_size);
  std::vector<Sentence> back =
      transfer_sentences(model, there, other_style(source), DiscreteMode::kGreedy, 0, batch_size);
  int64_t hits = 0, total = 0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (size_t t = 0; t < inputs[i].size(); ++t) hits += back[i][t] == inputs[i][t];
    total += static_cast<int64_t>(inputs[i].size());
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

EvalModels::EvalModels(const ModelDims& dims, uint64_t seed, const std::string& prefix)
    : EvalModels(dims, prefix, std::mt19937_64(seed)) {}

EvalModels::EvalModels(const ModelDims& dims, const std::string& prefix, std::mt19937_64&& rng)
    : lm_x(params, prefix + "lm_x.", dims, rng),
      lm_y(params, prefix + "lm_y.", dims, rng),
      clf(params, prefix + "clf.", dims, rng) {}

TransferModel::TransferModel(Vocabulary v, const ModelDims& d, uint64_t seed)
    : TransferModel(std::move(v), d, std::mt19937_64(seed)) {}

TransferModel::TransferModel(Vocabulary v, const ModelDims& d, std::mt19937_64&& rng)
    : vocab(std::move(v)), dims(d), model(params, d, rng) {
  LMS_REQUIRE(dims.vocab_size == vocab.size(), "model vocabulary size differs from the vocabulary");
}

std::unique_ptr<TransferModel> load_transfer_model(const Checkpoint& ckpt) {
  ModelDims dims;
  dims.vocab_size = meta_int(ckpt, "model.vocab_size");
  dims.embed_dim = meta_int(ckpt, "model.embed_dim");
  dims.hidden_dim = meta_int(ckpt, "model.hidden_dim");
  dims.style_dim = meta_int(ckpt, "model.style_dim");
  auto tm = std::make_unique<TransferModel>(vocab_from_text(ckpt.meta_at("vocab")), dims, 0);
  ckpt.load_parameters(tm->params);
  if (ckpt.find_tensor("eval_lm_x.out_b") != nullptr) {
    tm->eval = std::make_unique<EvalModels>(dims, 0);
    ckpt.load_parameters(tm->eval->params);
    tm->eval->clf.frozen = true;
  }
  return tm;
}

EvaluationReport evaluate_transfer(const TransferModel& tm, std::span<const Sentence> inputs_x,
                                   std::span<const Sentence> inputs_y, const TextCorpus* refs_x,
                                   const TextCorpus* refs_y) {
  EvaluationReport r;
  const std::vector<Sentence> x2y = transfer_sentences(tm.model, inputs_x, Style::kX);
  const std::vector<Sentence> y2x = transfer_sentences(tm.model, inputs_y, Style::kY);
  auto to_text = [&](const std::vector<Sentence>& s) {
    TextCorpus t;
    for (const Sentence& x : s) t.push_back(tm.vocab.decode(x));
    return t;
  };
  if (refs_x != nullptr && !y2x.empty()) {
    LMS_REQUIRE(refs_x->size() == y2x.size(), "reference count differs from input count");
    r.bleu_y2x = bleu(to_text(y2x), *refs_x);
  }
  if (refs_y != nullptr && !x2y.empty()) {
    LMS_REQUIRE(refs_y->size() == x2y.size(), "reference count differs from input count");
    r.bleu_x2y = bleu(to_text(x2y), *refs_y);
  }
  // The parallel y references are the raw ciphered inputs; scoring them
  // directly keeps out-of-vocabulary tokens intact.
  if (refs_x != nullptr && refs_y != nullptr && !refs_x->empty()) r.copy = copy_baseline(*refs_y, *refs_x);
  if (tm.eval) {
    if (!x2y.empty()) {
      r.ppl_x2y = perplexity(tm.eval->lm_y, x2y);
      r.accuracy_x2y = transfer_accuracy(tm.eval->clf, x2y, Style::kY);
    }
    if (!y2x.empty()) {
      r.ppl_y2x = perplexity(tm.eval->lm_x, y2x);
      r.accuracy_y2x = transfer_accuracy(tm.eval->clf, y2x, Style::kX);
    }
  }
  return r;
}

void log_evaluation(MetricsWriter& metrics, const EvaluationReport& r, int epoch, int64_t step,
                    const std::string& split) {
  if (r.bleu_y2x) metrics.write(epoch, step, split, "bleu", r.bleu_y2x->bleu);
  if (r.bleu_x2y) metrics.write(epoch, step, split, "bleu_x2y", r.bleu_x2y->bleu);
  if (r.copy) metrics.write(epoch, step, split, "copy_bleu", r.copy->bleu);
  if (r.ppl_x2y) metrics.write(epoch, step, split, "ppl_x2y", r.ppl_x2y->ppl);
  if (r.ppl_y2x) metrics.write(epoch, step, split, "ppl_y2x", r.ppl_y2x->ppl);
  if (r.accuracy_x2y) metrics.write(epoch, step, split, "accuracy_x2y", *r.accuracy_x2y);
  if (r.accuracy_y2x) metrics.write(epoch, step, split, "accuracy_y2x", *r.accuracy_y2x);
}

}  // namespace lmstyle
