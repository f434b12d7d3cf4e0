#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "lmstyle/adam.h"
#include "lmstyle/corpus.h"
#include "lmstyle/errors.h"
#include "lmstyle/gru.h"
#include "lmstyle/models.h"
#include "lmstyle/objectives.h"
#include "test_util.h"

using namespace lmstyle;
using namespace lmstyle::testing;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct ScalarGru {
  double wu, wr, wc, uu, ur, uc, bu, br, bc;
  double step(double x, double h) const {
    const double u = sigmoid(wu * x + uu * h + bu);
    const double r = sigmoid(wr * x + ur * h + br);
    const double c = std::tanh(wc * x + uc * (r * h) + bc);
    return (1.0 - u) * h + u * c;
  }
};

void set_scalar_gru(const GruParams& p, const ScalarGru& s) {
  p.w->value = Tensor({1, 3}, std::vector<double>{s.wu, s.wr, s.wc});
  p.u_gates->value = Tensor({1, 2}, std::vector<double>{s.uu, s.ur});
  p.u_cand->value = Tensor({1, 1}, std::vector<double>{s.uc});
  p.b->value = Tensor({1, 3}, std::vector<double>{s.bu, s.br, s.bc});
}

double run_gru(const GruParams& p, const Tensor& x, const Tensor& h) {
  Graph g;
  return g.value(gru_step(g, g.constant(x), g.constant(h), bind(g, p, false))).item();
}

bool is_simplex_matrix(const Tensor& p, double tol) {
  for (int64_t r = 0; r < p.rows(); ++r) {
    double total = 0.0;
    for (int64_t c = 0; c < p.cols(); ++c) {
      if (p.at(r, c) < 0.0) return false;
      total += p.at(r, c);
    }
    if (std::abs(total - 1.0) > tol) return false;
  }
  return true;
}

RelaxedSequence constant_sequence(Graph& g, const std::vector<Tensor>& steps, std::vector<int> lengths) {
  RelaxedSequence seq;
  for (const Tensor& t : steps) seq.steps.push_back(g.constant(t));
  seq.lengths = std::move(lengths);
  return seq;
}

Tensor random_simplex(int rows, int cols, std::mt19937_64& rng) {
  Tensor t = Tensor::matrix(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double total = 0.0;
    for (int c = 0; c < cols; ++c) total += t.at(r, c) = uniform01(rng) + 1e-3;
    for (int c = 0; c < cols; ++c) t.at(r, c) /= total;
  }
  return t;
}

}  // namespace

TEST_SUITE("neural-seq") {

TEST_CASE("zero-weight GRU closed forms") {
  ParameterSet ps;
  std::mt19937_64 rng(1);
  GruParams p = GruParams::create(ps, "g.", 3, 4, rng);
  fill_all(ps, 0.0);
  const Tensor x({1, 3}, std::vector<double>{0.4, -1.0, 2.0});
  const Tensor h({1, 4}, std::vector<double>{1.0, -0.5, 0.25, 2.0});
  Graph g;
  const Tensor out = g.value(gru_step(g, g.constant(x), g.constant(h), bind(g, p, false)));
  for (int i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(0.5 * h[i]).epsilon(1e-15));
  const Tensor zero_out = g.value(gru_step(g, g.constant(x), g.constant(Tensor::matrix(1, 4)), bind(g, p, false)));
  for (double v : zero_out.values()) CHECK(v == 0.0);
}

TEST_CASE("scalar GRU matches a hand-rolled oracle") {
  ParameterSet ps;
  std::mt19937_64 rng(2);
  GruParams p = GruParams::create(ps, "g.", 1, 1, rng);
  const ScalarGru s{0.7, -0.3, 1.1, 0.4, -0.9, 0.6, 0.1, -0.2, 0.05};
  set_scalar_gru(p, s);
  double h = 0.3;
  for (double x : {0.5, -1.5, 2.0, 0.0}) {
    const double got = run_gru(p, Tensor::matrix(1, 1, x), Tensor::matrix(1, 1, h));
    const double want = s.step(x, h);
    CHECK(std::abs(got - want) < 1e-12);
    h = want;
  }
}

TEST_CASE("GRU rejects mismatched inputs") {
  ParameterSet ps;
  std::mt19937_64 rng(3);
  GruParams p = GruParams::create(ps, "g.", 3, 4, rng);
  Graph g;
  GruVars v = bind(g, p, false);
  CHECK_THROWS_AS(gru_step(g, g.constant(Tensor::matrix(1, 2)), g.constant(Tensor::matrix(1, 4)), v),
                  ContractViolation);
  CHECK_THROWS_AS(gru_step(g, g.constant(Tensor::matrix(1, 3)), g.constant(Tensor::matrix(2, 4)), v),
                  ContractViolation);
}

TEST_CASE("encode is deterministic with the configured width") {
  std::mt19937_64 rng(4);
  ParameterSet ps;
  Seq2SeqModel model(ps, small_dims(12), rng);
  for (int len = 1; len <= kMaxSentenceLength; ++len) {
    std::vector<Sentence> s = random_sentences(2, 12, len, len, rng);
    Graph g;
    Seq2SeqModel::Vars m = model.bind(g, false);
    const Tensor a = g.value(encode(g, m, PaddedBatch(s), Style::kX));
    const Tensor b = g.value(encode(g, m, PaddedBatch(s), Style::kX));
    CHECK(a.rows() == 2);
    CHECK(a.cols() == 8);
    CHECK(a.storage() == b.storage());
  }
}

TEST_CASE("encode of a padded batch equals encoding each sentence alone") {
  std::mt19937_64 rng(5);
  ParameterSet ps;
  Seq2SeqModel model(ps, small_dims(12), rng);
  std::vector<Sentence> s = {{4, 5, 6, 7, 8}, {9, 10}};
  Graph g;
  Seq2SeqModel::Vars m = model.bind(g, false);
  const Tensor both = g.value(encode(g, m, PaddedBatch(s), Style::kY));
  for (int i = 0; i < 2; ++i) {
    std::vector<Sentence> one{s[static_cast<size_t>(i)]};
    const Tensor alone = g.value(encode(g, m, PaddedBatch(one), Style::kY));
    for (int j = 0; j < 8; ++j) CHECK(std::abs(alone[j] - both.at(i, j)) < 1e-14);
  }
}

TEST_CASE("zero-weight encoder gives a zero content vector") {
  std::mt19937_64 rng(6);
  ParameterSet ps;
  Seq2SeqModel model(ps, small_dims(12), rng);
  for (Parameter* p : ps.with_prefix("encoder.")) p->value.fill(0.0);
  std::vector<Sentence> s = {{7}};
  Graph g;
  Seq2SeqModel::Vars m = model.bind(g, false);
  for (double v : g.value(encode(g, m, PaddedBatch(s), Style::kX)).values()) CHECK(v == 0.0);
}

TEST_CASE("encode rejects empty sentences and bad ids") {
  std::mt19937_64 rng(7);
  ParameterSet ps;
  Seq2SeqModel model(ps, small_dims(12), rng);
  Graph g;
  Seq2SeqModel::Vars m = model.bind(g, false);
  std::vector<Sentence> empty = {{}};
  CHECK_THROWS_AS(encode(g, m, PaddedBatch(empty), Style::kX), ContractViolation);
  std::vector<Sentence> bad = {{4, 12}};
  CHECK_THROWS_AS(encode(g, m, PaddedBatch(bad), Style::kX), ContractViolation);
}

TEST_CASE("teacher-forced decoding shape and NLL consistency") {
  std::mt19937_64 rng(8);
  ParameterSet ps;
  Seq2SeqModel model(ps, small_dims(12), rng);
  randomize(ps, 0.5, rng);
  std::vector<Sentence> s = {{4, 5, 6}, {7, 8, 9, 10, 11}};
  const PaddedBatch src(s);
  const PaddedBatch targets = PaddedBatch::with_end(s);
  Graph g;
  Seq2SeqModel::Vars m = model.bind(g, false);
  Var z = encode(g, m, src, Style::kX);
  std::vector<Var> logits = decode_teacher_forced(g, m, z, Style::kX, targets);
  CHECK(static_cast<int>(logits.size()) == targets.max_len());
  const Tensor rec = g.value(reconstruction_nll(g, m, src, Style::kX));
  for (int b = 0; b < 2; ++b) {
    double total = 0.0;
    for (int t = 0; t < targets.length(b); ++t) {
      const Tensor& l = logits[static_cast<size_t>(t)].value();
      double mx = l.at(b, 0), denom = 0.0;
      for (int64_t j = 1; j < l.cols(); ++j) mx = std::max(mx, l.at(b, j));
      for (int64_t j = 0; j < l.cols(); ++j) denom += std::exp(l.at(b, j) - mx);
      total -= l.at(b, targets.token(t, b)) - mx - std::log(denom);
    }
    CHECK(std::abs(total - column(rec, b)) < 1e-10);
  }
}

TEST_CASE("overfitting one sentence drives per-token CE down") {
  std::mt19937_64 rng(9);
  ParameterSet ps;
  Seq2SeqModel model(ps, small_dims(16, 8, 16, 4), rng);
  std::vector<Sentence> s = {{4, 9, 13, 5, 11}};
  const PaddedBatch batch(s);
  std::vector<Parameter*> params = model.parameters();
  AdamState opt = AdamState::for_params(params, {0.05, 0.9, 0.999, 1e-8});
  double loss = 0.0;
  for (int step = 0; step < 50; ++step) {
    Graph g;
    Var l = g.mean(reconstruction_nll(g, model.bind(g, true), batch, Style::kX));
    loss = l.value().item();
    ps.zero_grad();
    g.backward(l);
    clip_grad_norm(params, 5.0);
    adam_step(params, opt);
  }
  Graph g;
  const double final_loss = g.mean(reconstruction_nll(g, model.bind(g, false), batch, Style::kX)).value().item();
  CAPTURE(loss);
  CHECK(final_loss / 6.0 < 0.05);
}

TEST_CASE("relaxed decoding stays on the simplex and is seeded") {
  std::mt19937_64 rng(10);
  ParameterSet ps;
  Seq2SeqModel model(ps, small_dims(12), rng);
  randomize(ps, 0.5, rng);
  std::vector<Sentence> s = {{4, 5, 6}, {7, 8, 9, 10}};
  const PaddedBatch batch(s);
  auto run = [&](uint64_t seed, double tau) {
    Graph g;
    Seq2SeqModel::Vars m = model.bind(g, false);
    RelaxedSequence seq = decode_relaxed(g, m, encode(g, m, batch, Style::kX), Style::kY, batch.lengths(),
                                         {tau, seed, NoiseMode::kGumbel});
    std::vector<Tensor> out;
    for (Var v : seq.steps) out.push_back(v.value());
    return out;
  };
  const auto a = run(1, 0.7), b = run(1, 0.7), c = run(2, 0.7);
  REQUIRE(a.size() == 4);
  bool differs = false;
  for (size_t t = 0; t < a.size(); ++t) {
    CHECK(is_simplex_matrix(a[t], 1e-6));
    CHECK(a[t].storage() == b[t].storage());
    differs = differs || a[t].storage() != c[t].storage();
  }
  CHECK(differs);
  for (const Tensor& p : run(3, 1e-6))
    for (int64_t r = 0; r < p.rows(); ++r) {
      double mx = 0.0;
      for (int64_t j = 0; j < p.cols(); ++j) mx = std::max(mx, p.at(r, j));
      CHECK(mx > 1.0 - 1e-4);
    }
}

TEST_CASE("relaxed decoding length equals the requested length") {
  std::mt19937_64 rng(11);
  ParameterSet ps;
  Seq2SeqModel model(ps, small_dims(12), rng);
  for (int len = 1; len <= kMaxSentenceLength; ++len) {
    std::vector<Sentence> s = random_sentences(1, 12, len, len, rng);
    const PaddedBatch batch(s);
    Graph g;
    Seq2SeqModel::Vars m = model.bind(g, false);
    RelaxedSequence seq =
        decode_relaxed(g, m, encode(g, m, batch, Style::kX), Style::kY, batch.lengths(), {0.5, 1, NoiseMode::kGumbel});
    CHECK(seq.length() == len);
    CHECK(seq.argmax_tokens()[0].size() == static_cast<size_t>(len));
  }
  Graph g;
  Seq2SeqModel::Vars m = model.bind(g, false);
  std::vector<Sentence> s = {{4}};
  Var z = encode(g, m, PaddedBatch(s), Style::kX);
  std::vector<int> len{1};
  CHECK_THROWS_AS(decode_relaxed(g, m, z, Style::kY, len, {0.0, 1, NoiseMode::kGumbel}), ContractViolation);
}

TEST_CASE("uniform LM scores every token at ln|V|") {
  std::mt19937_64 rng(12);
  ParameterSet ps;
  LanguageModel lm(ps, "lm.", small_dims(10), rng);
  fill_all(ps, 0.0);
  CHECK(sentence_nll(lm, {4, 5, 6}) == doctest::Approx(4.0 * std::log(10.0)).epsilon(1e-12));

  Graph g;
  LanguageModel::Vars v = lm.bind(g, false);
  std::vector<Tensor> steps;
  for (int t = 0; t < 5; ++t) steps.push_back(random_simplex(3, 10, rng));
  RelaxedSequence seq = constant_sequence(g, steps, {5, 5, 5});
  const Tensor scores = g.value(lm_score_relaxed(g, v, seq));
  for (int b = 0; b < 3; ++b) CHECK(column(scores, b) == doctest::Approx(5.0 * std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("discrete LM score is the sum of token NLLs") {
  std::mt19937_64 rng(13);
  ParameterSet ps;
  LanguageModel lm(ps, "lm.", small_dims(14), rng);
  randomize(ps, 0.6, rng);
  std::vector<Sentence> s = random_sentences(5, 14, 1, 9, rng);
  const PaddedBatch batch(s);
  Graph g;
  LanguageModel::Vars v = lm.bind(g, false);
  const Tensor total = g.value(lm_score_discrete(g, v, batch));
  std::vector<Var> steps = lm_token_nll(g, v, batch);
  for (int b = 0; b < 5; ++b) {
    double acc = 0.0;
    for (Var t : steps) acc += t.value().at(b, 0);
    CHECK(std::abs(acc - column(total, b)) < 1e-12);
    CHECK(std::abs(sentence_nll(lm, s[static_cast<size_t>(b)]) - column(total, b)) < 1e-12);
  }
}

TEST_CASE("two-token LM matches a scalar oracle") {
  // One-unit embedding and hidden state, so the whole forward pass is scalar
  // arithmetic. Tokens 4 and 5 are the only content tokens.
  std::mt19937_64 rng(14);
  ParameterSet ps;
  const ModelDims dims = small_dims(6, 1, 1, 1);
  LanguageModel lm(ps, "lm.", dims, rng);
  fill_all(ps, 0.0);
  const double emb[6] = {0.0, 0.3, 0.0, 0.0, 1.0, -1.0};
  for (int i = 0; i < 6; ++i) ps.at("lm.embedding").value[i] = emb[i];
  const ScalarGru s{0.8, 0.5, 1.7, -0.4, 0.3, 0.9, 0.2, 0.1, -0.1};
  GruParams gp;
  gp.w = &ps.at("lm.gru.w");
  gp.u_gates = &ps.at("lm.gru.u_gates");
  gp.u_cand = &ps.at("lm.gru.u_cand");
  gp.b = &ps.at("lm.gru.b");
  set_scalar_gru(gp, s);
  const double out_w[6] = {0.0, 0.0, -1.0, 0.0, 2.0, -2.0};
  const double out_b[6] = {-30.0, -30.0, 0.5, -30.0, 0.1, 0.0};
  for (int i = 0; i < 6; ++i) {
    ps.at("lm.out_w").value[i] = out_w[i];
    ps.at("lm.out_b").value[i] = out_b[i];
  }

  const Sentence sentence = {4, 5, 5};
  double h = 0.0, nll = 0.0;
  int prev = kStartId;
  std::vector<int> targets(sentence);
  targets.push_back(kEndId);
  for (int tok : targets) {
    h = s.step(emb[prev], h);
    double denom = 0.0;
    for (int j = 0; j < 6; ++j) denom += std::exp(h * out_w[j] + out_b[j]);
    nll -= h * out_w[tok] + out_b[tok] - std::log(denom);
    prev = tok;
  }
  CHECK(std::abs(sentence_nll(lm, sentence) - nll) < 1e-12);
}

TEST_CASE("one-hot relaxed scoring reduces to discrete scoring") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    ParameterSet ps;
    LanguageModel lm(ps, "lm.", small_dims(15), rng);
    randomize(ps, 0.8, rng);
    std::vector<Sentence> s = random_sentences(4, 15, 1, kMaxSentenceLength - 1, rng);
    Graph g;
    LanguageModel::Vars v = lm.bind(g, false);
    const Tensor discrete = g.value(lm_score_discrete(g, v, PaddedBatch(s)));
    const Tensor relaxed = g.value(lm_score_relaxed(g, v, one_hot_sequence(g, s, 15)));
    for (int b = 0; b < 4; ++b) CHECK(std::abs(column(discrete, b) - column(relaxed, b)) < 1e-9);
  }
}

TEST_CASE("relaxed LM scoring rejects rows off the simplex") {
  std::mt19937_64 rng(16);
  ParameterSet ps;
  LanguageModel lm(ps, "lm.", small_dims(10), rng);
  Graph g;
  Tensor bad = random_simplex(1, 10, rng);
  bad[0] += 0.01;
  RelaxedSequence seq = constant_sequence(g, {bad}, {1});
  CHECK_THROWS_AS(lm_score_relaxed(g, lm.bind(g, false), seq), ContractViolation);
}

TEST_CASE("zero-weight classifier is undecided") {
  std::mt19937_64 rng(17);
  ParameterSet ps;
  Classifier clf(ps, "clf.", small_dims(10), rng);
  fill_all(ps, 0.0);
  for (const Sentence& s : random_sentences(10, 10, 1, 12, rng)) CHECK(classify_real(clf, s) == 0.5);
}

TEST_CASE("one-hot relaxed classifier input matches discrete input") {
  std::mt19937_64 rng(18);
  ParameterSet ps;
  Classifier clf(ps, "clf.", small_dims(12), rng);
  randomize(ps, 0.7, rng);
  std::vector<Sentence> s = random_sentences(6, 12, 1, 10, rng);
  Graph g;
  Classifier::Vars v = clf.bind(g, false);
  const Tensor d = g.value(classifier_logit(g, v, PaddedBatch(s)));
  const Tensor r = g.value(classifier_logit(g, v, one_hot_sequence(g, s, 12, false)));
  for (int b = 0; b < 6; ++b) CHECK(std::abs(column(d, b) - column(r, b)) < 1e-9);
}

TEST_CASE("classifier separates structurally distinct sentences") {
  // Real: ascending runs. Fake: the same tokens in descending order.
  std::mt19937_64 rng(19);
  const int vocab = 20;
  auto make = [&](int n, bool ascending) {
    std::vector<Sentence> out;
    std::uniform_int_distribution<int> start(kNumReserved, vocab - 6), len(3, 6);
    for (int i = 0; i < n; ++i) {
      Sentence s;
      const int a = start(rng), l = len(rng);
      for (int k = 0; k < l; ++k) s.push_back(a + k);
      if (!ascending) std::reverse(s.begin(), s.end());
      out.push_back(s);
    }
    return out;
  };
  const std::vector<Sentence> real = make(100, true), fake = make(100, false);
  const std::vector<Sentence> real_test = make(100, true), fake_test = make(100, false);

  ParameterSet ps;
  Classifier clf(ps, "clf.", small_dims(vocab, 8, 16, 4), rng);
  std::vector<Parameter*> params = clf.parameters();
  AdamState opt = AdamState::for_params(params, {1e-2, 0.9, 0.999, 1e-8});
  for (int step = 0; step < 200; ++step) {
    Graph g;
    Classifier::Vars v = clf.bind(g, true);
    AdversarialLosses l = classifier_losses_from_logits(g, classifier_logit(g, v, PaddedBatch(real)),
                                                        classifier_logit(g, v, PaddedBatch(fake)));
    ps.zero_grad();
    g.backward(l.disc);
    clip_grad_norm(params, 5.0);
    adam_step(params, opt);
  }
  int correct = 0;
  for (const Sentence& s : real_test) correct += classify_real(clf, s) > 0.5;
  for (const Sentence& s : fake_test) correct += classify_real(clf, s) < 0.5;
  CHECK(correct / 200.0 > 0.9);
}

TEST_CASE("relaxed consumers pass gradient to the generator") {
  std::mt19937_64 rng(20);
  ParameterSet ps;
  const ModelDims dims = small_dims(12);
  Seq2SeqModel model(ps, dims, rng);
  LanguageModel lm(ps, "lm.", dims, rng);
  Classifier clf(ps, "clf.", dims, rng);
  randomize(ps, 0.5, rng);
  std::vector<Sentence> s = random_sentences(3, 12, 2, 6, rng);
  const PaddedBatch batch(s);
  std::vector<Parameter*> gen = model.parameters();

  for (int which = 0; which < 2; ++which) {
    ps.zero_grad();
    Graph g;
    Seq2SeqModel::Vars m = model.bind(g, true);
    RelaxedSequence seq = decode_relaxed(g, m, encode(g, m, batch, Style::kX), Style::kY, batch.lengths(),
                                         {0.8, 5, NoiseMode::kGumbel});
    Var loss = which == 0 ? g.sum(lm_score_relaxed(g, lm.bind(g, false), seq))
                          : g.sum(classifier_logit(g, clf.bind(g, false), seq));
    g.backward(loss);
    CHECK(global_grad_norm(gen) > 1e-8);
    CHECK(global_grad_norm(lm.parameters()) == 0.0);
    CHECK(global_grad_norm(clf.parameters()) == 0.0);
  }
}

}  // TEST_SUITE
