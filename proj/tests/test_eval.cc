#include <algorithm>
#include <cmath>
#include <random>

#include <doctest.h>

#include "lmstyle/config.h"
#include "lmstyle/dataset.h"
#include "lmstyle/errors.h"
#include "lmstyle/eval.h"
#include "lmstyle/pretrain.h"
#include "test_util.h"

using namespace lmstyle;

namespace {

const TextSentence kHyp{"the", "cat", "sat", "on", "the", "mat"};
const TextSentence kRef{"the", "cat", "is", "on", "the", "mat"};

// Context-free LM: every weight zero except the output bias, so each step
// predicts softmax(out_b) regardless of history.
void make_unigram_lm(ParameterSet& ps, const LanguageModel& lm, const std::vector<double>& out_b) {
  testing::fill_all(ps, 0.0);
  Parameter& b = ps.at(lm.prefix() + "out_b");
  for (size_t j = 0; j < out_b.size(); ++j) b.value[static_cast<int64_t>(j)] = out_b[j];
}

TrainConfig small_data_config(Task task, double fraction) {
  TrainConfig c = TrainConfig::desk();
  c.task = task;
  c.train_size = 600;
  c.dev_size = 200;
  c.test_size = 200;
  c.cipher_fraction = fraction;
  if (task == Task::kSentiment) c.markov.max_length = 10;
  return c;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("BLEU hand example matches n-gram counts") {
  const TextCorpus h{kHyp}, r{kRef};
  const BleuReport b = bleu(h, r);
  const double expected_p[4] = {5.0 / 6.0, 3.0 / 5.0, 1.0 / 4.0, 0.0 / 3.0};
  const int64_t expected_m[4] = {5, 3, 1, 0}, expected_t[4] = {6, 5, 4, 3};
  for (int n = 0; n < 4; ++n) {
    CHECK(std::abs(b.precisions[static_cast<size_t>(n)] - expected_p[n]) < 1e-6);
    CHECK(b.matches[static_cast<size_t>(n)] == expected_m[n]);
    CHECK(b.totals[static_cast<size_t>(n)] == expected_t[n]);
  }
  CHECK(b.brevity_penalty == 1.0);
  CHECK(b.bleu == 0.0);

  const BleuReport b1 = bleu(h, r, 1);
  CHECK(b1.bleu1());
  CHECK(std::abs(b1.bleu - 100.0 * 5.0 / 6.0) < 1e-6);
  CHECK(std::abs(b1.bleu - 83.33) < 0.005);
}

TEST_CASE("BLEU with all precisions positive is BP times the geometric mean") {
  const TextCorpus h{{"a", "b", "c", "d", "e"}, {"x", "y", "z"}};
  const TextCorpus r{{"a", "b", "c", "d", "f"}, {"x", "y", "z", "w", "v"}};
  const BleuReport b = bleu(h, r);
  // Counts by hand: unigrams 7/8, bigrams 5/6, trigrams 3/4, 4-grams 1/2.
  const double gm = std::pow((7.0 / 8.0) * (5.0 / 6.0) * (3.0 / 4.0) * (1.0 / 2.0), 0.25);
  const double bp = std::exp(1.0 - 10.0 / 8.0);
  CHECK(std::abs(b.brevity_penalty - bp) < 1e-12);
  CHECK(std::abs(b.bleu - 100.0 * bp * gm) < 1e-9);
}

TEST_CASE("BLEU clips repeated n-grams") {
  const TextCorpus h{{"the", "the", "the", "the"}}, r{{"the", "cat", "the", "dog"}};
  const BleuReport b = bleu(h, r, 1);
  CHECK(b.matches[0] == 2);
  CHECK(b.totals[0] == 4);
  CHECK(std::abs(b.bleu - 50.0) < 1e-12);
}

TEST_CASE("BLEU identity and zero overlap") {
  std::mt19937_64 rng(2);
  const std::vector<Sentence> s = testing::random_sentences(50, 30, 4, 12, rng);
  CHECK(bleu(s, s).bleu == doctest::Approx(100.0).epsilon(1e-12));
  std::vector<Sentence> shifted = s;
  for (Sentence& x : shifted)
    for (int& t : x) t += 100;
  CHECK(bleu(shifted, s).bleu == 0.0);
  CHECK(bleu(shifted, s).precisions[0] == 0.0);
}

TEST_CASE("BLEU is not symmetric") {
  const TextCorpus h{kHyp}, r{{"the", "cat", "is", "on", "the", "mat", "today"}};
  const BleuReport forward = bleu(h, r, 1);
  const BleuReport backward = bleu(r, h, 1);
  // forward: 5/6 with BP exp(1 - 7/6); backward: 5/7 with BP 1.
  CHECK(std::abs(forward.bleu - 100.0 * (5.0 / 6.0) * std::exp(1.0 - 7.0 / 6.0)) < 1e-9);
  CHECK(std::abs(backward.bleu - 100.0 * 5.0 / 7.0) < 1e-9);
  CHECK(forward.bleu != backward.bleu);
  const TextCorpus hk{kHyp}, rk{kRef};
  CHECK(bleu(rk, hk).bleu == 0.0);
  CHECK(std::abs(bleu(rk, hk, 1).bleu - 100.0 * 5.0 / 6.0) < 1e-9);
}

TEST_CASE("BLEU contract violations") {
  const TextCorpus empty, one{kHyp}, two{kHyp, kRef};
  CHECK_THROWS_AS(bleu(empty, empty), ContractViolation);
  CHECK_THROWS_AS(bleu(one, two), ContractViolation);
  CHECK_THROWS_AS(bleu(one, one, 5), ContractViolation);
}

TEST_CASE("uniform LM perplexity equals the vocabulary size") {
  std::mt19937_64 rng(3);
  ParameterSet ps;
  LanguageModel lm(ps, "lm.", testing::small_dims(10), rng);
  testing::fill_all(ps, 0.0);
  const std::vector<Sentence> corpus = testing::random_sentences(37, 10, 1, 16, rng);
  const PerplexityReport r = perplexity(lm, corpus, 8);
  int64_t tokens = 0;
  for (const Sentence& s : corpus) tokens += static_cast<int64_t>(s.size()) + 1;
  CHECK(r.tokens == tokens);
  CHECK(std::abs(r.ppl - 10.0) < 1e-12);
  CHECK(std::abs(r.total_nll - static_cast<double>(tokens) * std::log(10.0)) < 1e-9);
}

TEST_CASE("an LM that is certain of every observed token has perplexity 1") {
  // One-hot embeddings, a saturated update gate and an identity candidate
  // map make the hidden state encode the previous token; the output layer
  // then maps <s> -> 4, 4 -> 5, 5 -> </s> with a large margin.
  std::mt19937_64 rng(4);
  ParameterSet ps;
  LanguageModel lm(ps, "lm.", testing::small_dims(6, 6, 6, 1), rng);
  testing::fill_all(ps, 0.0);
  for (int i = 0; i < 6; ++i) {
    ps.at("lm.embedding").value.at(i, i) = 1.0;
    ps.at("lm.gru.w").value.at(i, 12 + i) = 3.0;
    ps.at("lm.gru.b").value.at(0, i) = 50.0;
  }
  Tensor& out_w = ps.at("lm.out_w").value;
  out_w.at(kStartId, 4) = 60.0;
  out_w.at(4, 5) = 60.0;
  out_w.at(5, kEndId) = 60.0;
  const std::vector<Sentence> corpus{{4, 5}, {4, 5}};
  const PerplexityReport r = perplexity(lm, corpus);
  CHECK(r.tokens == 6);
  CHECK(std::abs(r.ppl - 1.0) < 1e-12);
}

TEST_CASE("two-sentence perplexity matches hand arithmetic") {
  std::mt19937_64 rng(5);
  ParameterSet ps;
  LanguageModel lm(ps, "lm.", testing::small_dims(6), rng);
  // p(4) = 1/2, p(5) = 1/4, p(</s>) = 1/4, other ids underflow to zero.
  make_unigram_lm(ps, lm, {-1e3, -1e3, std::log(0.25), -1e3, std::log(0.5), std::log(0.25)});
  const std::vector<Sentence> corpus{{4, 5}, {4, 4, 5}};
  const PerplexityReport r = perplexity(lm, corpus);
  const double nll = -(std::log(0.5) + std::log(0.25) + std::log(0.25)) -
                     (2.0 * std::log(0.5) + std::log(0.25) + std::log(0.25));
  CHECK(r.tokens == 7);
  CHECK(std::abs(r.total_nll - nll) < 1e-12);
  CHECK(std::abs(r.ppl - std::exp(nll / 7.0)) < 1e-12);
}

TEST_CASE("perplexity does not depend on sentence order or batch size") {
  std::mt19937_64 rng(6);
  ParameterSet ps;
  LanguageModel lm(ps, "lm.", testing::small_dims(20), rng);
  testing::randomize(ps, 0.4, rng);
  std::vector<Sentence> corpus = testing::random_sentences(60, 20, 1, 16, rng);
  const PerplexityReport a = perplexity(lm, corpus, 64);
  std::shuffle(corpus.begin(), corpus.end(), rng);
  const PerplexityReport b = perplexity(lm, corpus, 7);
  CHECK(a.tokens == b.tokens);
  CHECK(std::abs(a.ppl - b.ppl) < 1e-12 * a.ppl);
  CHECK(a.ppl > 1.0);
}

TEST_CASE("transfer accuracy against a trained style classifier") {
  TrainConfig config = small_data_config(Task::kSentiment, 0.0);
  config.learning_rate = 1e-2;
  const DataSet data = make_dataset(generate_data(config), 1);
  std::mt19937_64 rng(7);
  ParameterSet ps;
  Classifier clf(ps, "clf.", config.dims(data.vocab.size()), rng);

  CHECK_THROWS_AS(transfer_accuracy(clf, data.dev_y.sentences, Style::kY), ContractViolation);
  const ClassifierTrainReport report = train_style_classifier(clf, data, config, 11, nullptr);
  REQUIRE(clf.frozen);
  CHECK(report.dev_accuracy > 0.9);

  // Per-sentence reference path through the scalar wrapper.
  auto held_out = [&](const std::vector<Sentence>& s, Style style) {
    int hits = 0;
    for (const Sentence& x : s) hits += (classify_real(clf, x) > 0.5) == (style == Style::kY);
    return static_cast<double>(hits) / static_cast<double>(s.size());
  };
  const double acc_y = held_out(data.dev_y.sentences, Style::kY);
  const double acc_x = held_out(data.dev_x.sentences, Style::kX);
  CHECK(acc_y > 0.9);
  CHECK(transfer_accuracy(clf, data.dev_y.sentences, Style::kY) == doctest::Approx(acc_y).epsilon(1e-12));
  CHECK(transfer_accuracy(clf, data.dev_x.sentences, Style::kY) == doctest::Approx(1.0 - acc_x).epsilon(1e-12));
  CHECK(transfer_accuracy(clf, data.dev_x.sentences, Style::kX) +
            transfer_accuracy(clf, data.dev_x.sentences, Style::kY) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(transfer_accuracy(clf, std::vector<Sentence>{}, Style::kY), ContractViolation);
}

TEST_CASE("copy baseline anchors and monotonicity in the cipher fraction") {
  double previous = 101.0;
  for (double f : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    const GeneratedData d = generate_data(small_data_config(Task::kDecipher, f));
    const double b = copy_baseline(d.test_y, d.test_x).bleu;
    CAPTURE(f);
    CHECK(b <= previous);
    previous = b;
    if (f == 0.0) CHECK(b == 100.0);
    if (f == 0.2) {
      CHECK(b > 0.0);
      CHECK(b < 100.0);
    }
    if (f == 1.0) CHECK(b == 0.0);
  }
}

TEST_CASE("an LM trained on one style prefers held-out text of that style") {
  TrainConfig config = small_data_config(Task::kDecipher, 0.2);
  config.learning_rate = 1e-2;
  config.lm_epochs = 4;
  const DataSet data = make_dataset(generate_data(config), 1);
  std::mt19937_64 rng(8);
  ParameterSet ps;
  const ModelDims dims = config.dims(data.vocab.size());
  LanguageModel lm_y(ps, "lm_y.", dims, rng), lm_x(ps, "lm_x.", dims, rng);
  const LmTrainReport ry = train_language_model(lm_y, data.train_y.sentences, data.dev_y.sentences, config, 1,
                                                nullptr, "lm_y");
  const LmTrainReport rx = train_language_model(lm_x, data.train_x.sentences, data.dev_x.sentences, config, 2,
                                                nullptr, "lm_x");
  CHECK(ry.dev_ppl.front() < data.vocab.size());
  CHECK(rx.dev_ppl.front() < data.vocab.size());
  CHECK(perplexity(lm_y, data.test_y.sentences).ppl < perplexity(lm_y, data.test_x.sentences).ppl);
  CHECK(perplexity(lm_x, data.test_x.sentences).ppl < perplexity(lm_x, data.test_y.sentences).ppl);
}

}  // TEST_SUITE
