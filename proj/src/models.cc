#include "lmstyle/models.h"

#include <algorithm>
#include <cmath>
#include <functional>

#include "lmstyle/errors.h"
#include "lmstyle/gumbel.h"

namespace lmstyle {
namespace {

Tensor length_mask(std::span<const int> lengths, int t, int64_t cols) {
  Tensor m = Tensor::matrix(static_cast<int64_t>(lengths.size()), cols);
  for (size_t b = 0; b < lengths.size(); ++b) {
    const double v = t < lengths[b] ? 1.0 : 0.0;
    for (int64_t j = 0; j < cols; ++j) m.at(static_cast<int64_t>(b), j) = v;
  }
  return m;
}

bool any_ended(std::span<const int> lengths, int t) {
  return std::any_of(lengths.begin(), lengths.end(), [t](int len) { return t >= len; });
}

// Runs the GRU over `steps` inputs, freezing each row's state once its
// sentence has ended so the result is the state after its last token.
Var run_masked(Graph& g, const GruVars& gru, Var h, int steps, std::span<const int> lengths,
               const std::function<Var(int)>& input_at) {
  for (int t = 0; t < steps; ++t) {
    Var next = gru_step(g, input_at(t), h, gru);
    if (any_ended(lengths, t)) {
      Var mask = g.constant(length_mask(lengths, t, gru.hidden_size));
      h = g.add(h, g.mul(mask, g.sub(next, h)));
    } else {
      h = next;
    }
  }
  return h;
}

Var style_rows(Graph& g, Var style_table, Style style, int batch) {
  std::vector<int> ids(static_cast<size_t>(batch), static_cast<int>(style));
  return g.gather_rows(style_table, ids);
}

Var start_embedding(Graph& g, Var embedding, int batch) {
  std::vector<int> ids(static_cast<size_t>(batch), kStartId);
  return g.gather_rows(embedding, ids);
}

Var generator_init(Graph& g, const Seq2SeqModel::Vars& m, Var z, Style style) {
  const int batch = static_cast<int>(z.value().rows());
  LMS_REQUIRE(z.value().cols() == m.hidden_dim, "content vector has the wrong size");
  Var v = style_rows(g, m.style, style, batch);
  std::vector<Var> parts{z, v};
  return g.add(g.matmul(g.concat_cols(parts), m.gen_init_w), m.gen_init_b);
}

Var project(Graph& g, Var h, Var w, Var b) { return g.add(g.matmul(h, w), b); }

// Free-running decodes have a fixed length, so every position holds a
// content token; reserved ids are pushed out of reach.
Var content_logits(Graph& g, Var logits) {
  Tensor penalty = Tensor::matrix(1, logits.value().cols());
  for (int j = 0; j < kNumReserved; ++j) penalty[j] = -kReservedPenalty;
  return g.add(logits, g.constant(std::move(penalty)));
}

void check_ids(std::span<const int> ids, int vocab_size) {
  for (int id : ids) LMS_REQUIRE(id >= 0 && id < vocab_size, "token id " + std::to_string(id) + " out of range");
}

void check_simplex_rows(const Tensor& p) {
  if (!p.all_finite()) throw NumericalDivergence("relaxed step is not finite");
  const int64_t r = p.rows(), c = p.cols();
  for (int64_t i = 0; i < r; ++i) {
    double mass = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      LMS_REQUIRE(p.at(i, j) >= -1e-6, "relaxed step has a negative entry");
      mass += p.at(i, j);
    }
    LMS_REQUIRE(std::abs(mass - 1.0) <= 1e-6, "relaxed step is off the simplex");
  }
}

}  // namespace

void ModelDims::validate() const {
  LMS_REQUIRE(vocab_size > kNumReserved - 1, "vocabulary too small");
  LMS_REQUIRE(embed_dim > 0 && hidden_dim > 0 && style_dim > 0, "model sizes must be positive");
}

// ---------------------------------------------------------------------------
// Seq2Seq

Seq2SeqModel::Seq2SeqModel(ParameterSet& params, const ModelDims& dims, std::mt19937_64& rng) : dims_(dims) {
  dims.validate();
  const int v = dims.vocab_size, e = dims.embed_dim, h = dims.hidden_dim, s = dims.style_dim;
  embedding_ = &params.add_uniform("encoder.embedding", {v, e}, kInitScale, rng);
  style_ = &params.add_uniform("encoder.style", {2, s}, kInitScale, rng);
  enc_init_w_ = &params.add_uniform("encoder.init_w", {s, h}, kInitScale, rng);
  enc_init_b_ = &params.add_zeros("encoder.init_b", {1, h});
  encoder_ = GruParams::create(params, "encoder.gru.", e, h, rng);
  gen_init_w_ = &params.add_uniform("generator.init_w", {h + s, h}, kInitScale, rng);
  gen_init_b_ = &params.add_zeros("generator.init_b", {1, h});
  generator_ = GruParams::create(params, "generator.gru.", e, h, rng);
  out_w_ = &params.add_uniform("generator.out_w", {h, v}, kInitScale, rng);
  out_b_ = &params.add_zeros("generator.out_b", {1, v});
}

Seq2SeqModel::Vars Seq2SeqModel::bind(Graph& g, bool trainable) const {
  Vars m;
  m.embedding = g.param(*embedding_, trainable);
  m.style = g.param(*style_, trainable);
  m.enc_init_w = g.param(*enc_init_w_, trainable);
  m.enc_init_b = g.param(*enc_init_b_, trainable);
  m.gen_init_w = g.param(*gen_init_w_, trainable);
  m.gen_init_b = g.param(*gen_init_b_, trainable);
  m.out_w = g.param(*out_w_, trainable);
  m.out_b = g.param(*out_b_, trainable);
  m.encoder = lmstyle::bind(g, encoder_, trainable);
  m.generator = lmstyle::bind(g, generator_, trainable);
  m.vocab_size = dims_.vocab_size;
  m.hidden_dim = dims_.hidden_dim;
  return m;
}

std::vector<Parameter*> Seq2SeqModel::parameters() const {
  return {embedding_,  style_,      enc_init_w_,         enc_init_b_,       encoder_.w,
          encoder_.u_gates, encoder_.u_cand, encoder_.b, gen_init_w_,       gen_init_b_,
          generator_.w, generator_.u_gates, generator_.u_cand, generator_.b, out_w_,
          out_b_};
}

Var encode(Graph& g, const Seq2SeqModel::Vars& m, const PaddedBatch& batch, Style style) {
  LMS_REQUIRE(batch.batch_size() > 0 && batch.max_len() > 0, "cannot encode an empty sentence");
  const int b = batch.batch_size();
  Var h0 = g.add(g.matmul(style_rows(g, m.style, style, b), m.enc_init_w), m.enc_init_b);
  return run_masked(g, m.encoder, h0, batch.max_len(), batch.lengths(), [&](int t) {
    check_ids(batch.step(t), m.vocab_size);
    return g.gather_rows(m.embedding, batch.step(t));
  });
}

std::vector<Var> decode_teacher_forced(Graph& g, const Seq2SeqModel::Vars& m, Var z, Style style,
                                       const PaddedBatch& targets) {
  LMS_REQUIRE(targets.max_len() > 0, "empty target");
  const int b = targets.batch_size();
  LMS_REQUIRE(z.value().rows() == b, "content batch differs from target batch");
  Var h = generator_init(g, m, z, style);
  std::vector<Var> logits;
  for (int t = 0; t < targets.max_len(); ++t) {
    check_ids(targets.step(t), m.vocab_size);
    Var x = t == 0 ? start_embedding(g, m.embedding, b) : g.gather_rows(m.embedding, targets.step(t - 1));
    h = gru_step(g, x, h, m.generator);
    logits.push_back(project(g, h, m.out_w, m.out_b));
  }
  return logits;
}

Var sequence_nll(Graph& g, std::span<const Var> logits, const PaddedBatch& targets) {
  LMS_REQUIRE(static_cast<int>(logits.size()) == targets.max_len(), "logit steps differ from target length");
  Var total;
  for (int t = 0; t < targets.max_len(); ++t) {
    const int vocab = static_cast<int>(logits[static_cast<size_t>(t)].value().cols());
    Var ce = g.cross_entropy(g.constant(one_hot_rows(targets.step(t), vocab)),
                             g.log_softmax(logits[static_cast<size_t>(t)]));
    if (targets.has_padding_at(t)) ce = g.mul(ce, g.constant(targets.step_mask(t)));
    total = t == 0 ? ce : g.add(total, ce);
  }
  return total;
}

RelaxedSequence decode_relaxed(Graph& g, const Seq2SeqModel::Vars& m, Var z, Style style,
                               std::span<const int> lengths, const RelaxedDecodeOptions& options) {
  LMS_REQUIRE(options.tau > 0.0, "temperature must be positive");
  LMS_REQUIRE(!lengths.empty(), "no lengths given");
  const int b = static_cast<int>(lengths.size());
  LMS_REQUIRE(z.value().rows() == b, "content batch differs from lengths");
  for (int len : lengths) LMS_REQUIRE(len >= 1, "relaxed length must be at least 1");
  const int steps = *std::max_element(lengths.begin(), lengths.end());

  RelaxedSequence seq;
  seq.lengths.assign(lengths.begin(), lengths.end());
  Var h = generator_init(g, m, z, style);
  Var x = start_embedding(g, m.embedding, b);
  for (int t = 0; t < steps; ++t) {
    h = gru_step(g, x, h, m.generator);
    Var logits = content_logits(g, project(g, h, m.out_w, m.out_b));
    Tensor noise = options.noise == NoiseMode::kGumbel
                       ? sample_gumbel({b, m.vocab_size}, derive_seed(options.seed, static_cast<uint64_t>(t)))
                       : Tensor::matrix(b, m.vocab_size);
    Var p = gumbel_softmax(g, logits, options.tau, noise);
    seq.steps.push_back(p);
    if (t + 1 < steps) x = g.weighted_embedding(p, m.embedding);
  }
  return seq;
}

DiscreteDecode decode_discrete(Graph& g, const Seq2SeqModel::Vars& m, Var z, Style style,
                               std::span<const int> lengths, DiscreteMode mode, uint64_t seed) {
  LMS_REQUIRE(!lengths.empty(), "no lengths given");
  const int b = static_cast<int>(lengths.size());
  LMS_REQUIRE(z.value().rows() == b, "content batch differs from lengths");
  const int steps = *std::max_element(lengths.begin(), lengths.end());

  DiscreteDecode out;
  out.tokens.resize(static_cast<size_t>(b));
  Var h = generator_init(g, m, z, style);
  Var x = start_embedding(g, m.embedding, b);
  for (int t = 0; t < steps; ++t) {
    h = gru_step(g, x, h, m.generator);
    Var logp = g.log_softmax(content_logits(g, project(g, h, m.out_w, m.out_b)));
    out.log_probs.push_back(logp);
    const Tensor& lp = logp.value();
    Tensor noise = mode == DiscreteMode::kSample
                       ? sample_gumbel({b, m.vocab_size}, derive_seed(seed, static_cast<uint64_t>(t)))
                       : Tensor::matrix(b, m.vocab_size);
    std::vector<int> chosen(static_cast<size_t>(b));
    for (int r = 0; r < b; ++r) {
      int best = 0;
      double best_v = lp.at(r, 0) + noise.at(r, 0);
      for (int j = 1; j < m.vocab_size; ++j) {
        const double v = lp.at(r, j) + noise.at(r, j);
        if (v > best_v) {
          best_v = v;
          best = j;
        }
      }
      chosen[static_cast<size_t>(r)] = best;
      if (t < lengths[static_cast<size_t>(r)]) out.tokens[static_cast<size_t>(r)].push_back(best);
    }
    if (t + 1 < steps) x = g.gather_rows(m.embedding, chosen);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Language model

LanguageModel::LanguageModel(ParameterSet& params, const std::string& prefix, const ModelDims& dims,
                             std::mt19937_64& rng)
    : prefix_(prefix), vocab_size_(dims.vocab_size) {
  dims.validate();
  embedding_ = &params.add_uniform(prefix + "embedding", {dims.vocab_size, dims.embed_dim}, kInitScale, rng);
  gru_ = GruParams::create(params, prefix + "gru.", dims.embed_dim, dims.hidden_dim, rng);
  out_w_ = &params.add_uniform(prefix + "out_w", {dims.hidden_dim, dims.vocab_size}, kInitScale, rng);
  out_b_ = &params.add_zeros(prefix + "out_b", {1, dims.vocab_size});
}

LanguageModel::Vars LanguageModel::bind(Graph& g, bool trainable) const {
  Vars v;
  v.embedding = g.param(*embedding_, trainable);
  v.out_w = g.param(*out_w_, trainable);
  v.out_b = g.param(*out_b_, trainable);
  v.gru = lmstyle::bind(g, gru_, trainable);
  v.vocab_size = vocab_size_;
  v.hidden_dim = gru_.hidden_size;
  return v;
}

std::vector<Parameter*> LanguageModel::parameters() const {
  return {embedding_, gru_.w, gru_.u_gates, gru_.u_cand, gru_.b, out_w_, out_b_};
}

std::vector<Var> lm_token_nll(Graph& g, const LanguageModel::Vars& lm, const PaddedBatch& sentences) {
  const int b = sentences.batch_size();
  LMS_REQUIRE(b > 0 && sentences.max_len() > 0, "empty sentence");
  const int steps = sentences.max_len() + 1;
  std::vector<int> scored_len(sentences.lengths());
  for (int& len : scored_len) len += 1;

  std::vector<Var> out;
  Var h = g.constant(Tensor::matrix(b, lm.hidden_dim));
  for (int t = 0; t < steps; ++t) {
    Var x;
    if (t == 0) {
      x = start_embedding(g, lm.embedding, b);
    } else {
      check_ids(sentences.step(t - 1), lm.vocab_size);
      x = g.gather_rows(lm.embedding, sentences.step(t - 1));
    }
    h = gru_step(g, x, h, lm.gru);
    Var logp = g.log_softmax(project(g, h, lm.out_w, lm.out_b));
    std::vector<int> target(static_cast<size_t>(b), kPadId);
    for (int r = 0; r < b; ++r) {
      const int len = sentences.length(r);
      if (t < len) target[static_cast<size_t>(r)] = sentences.token(t, r);
      else if (t == len) target[static_cast<size_t>(r)] = kEndId;
    }
    Var ce = g.cross_entropy(g.constant(one_hot_rows(target, lm.vocab_size)), logp);
    if (any_ended(scored_len, t)) ce = g.mul(ce, g.constant(length_mask(scored_len, t, 1)));
    out.push_back(ce);
  }
  return out;
}

Var lm_score_discrete(Graph& g, const LanguageModel::Vars& lm, const PaddedBatch& sentences) {
  std::vector<Var> per_step = lm_token_nll(g, lm, sentences);
  Var total = per_step[0];
  for (size_t t = 1; t < per_step.size(); ++t) total = g.add(total, per_step[t]);
  return total;
}

Var lm_score_relaxed(Graph& g, const LanguageModel::Vars& lm, const RelaxedSequence& seq) {
  LMS_REQUIRE(seq.length() > 0 && seq.batch_size() > 0, "empty relaxed sequence");
  const int b = seq.batch_size();
  Var h = g.constant(Tensor::matrix(b, lm.hidden_dim));
  Var total;
  for (int t = 0; t < seq.length(); ++t) {
    Var p = seq.steps[static_cast<size_t>(t)];
    LMS_REQUIRE(p.value().rows() == b && p.value().cols() == lm.vocab_size, "relaxed step has the wrong shape");
    check_simplex_rows(p.value());
    Var x = t == 0 ? start_embedding(g, lm.embedding, b)
                   : g.weighted_embedding(seq.steps[static_cast<size_t>(t - 1)], lm.embedding);
    h = gru_step(g, x, h, lm.gru);
    Var logp = g.log_softmax(project(g, h, lm.out_w, lm.out_b));
    Var ce = g.cross_entropy(p, logp);
    if (any_ended(seq.lengths, t)) ce = g.mul(ce, g.constant(length_mask(seq.lengths, t, 1)));
    total = t == 0 ? ce : g.add(total, ce);
  }
  return total;
}

double sentence_nll(const LanguageModel& lm, const Sentence& sentence) {
  Graph g;
  LanguageModel::Vars v = lm.bind(g, false);
  std::vector<Sentence> one{sentence};
  return lm_score_discrete(g, v, PaddedBatch(one)).value().item();
}

// ---------------------------------------------------------------------------
// Classifier

Classifier::Classifier(ParameterSet& params, const std::string& prefix, const ModelDims& dims,
                       std::mt19937_64& rng)
    : prefix_(prefix) {
  dims.validate();
  embedding_ = &params.add_uniform(prefix + "embedding", {dims.vocab_size, dims.embed_dim}, kInitScale, rng);
  gru_ = GruParams::create(params, prefix + "gru.", dims.embed_dim, dims.hidden_dim, rng);
  out_w_ = &params.add_uniform(prefix + "out_w", {dims.hidden_dim, 1}, kInitScale, rng);
  out_b_ = &params.add_zeros(prefix + "out_b", {1, 1});
}

Classifier::Vars Classifier::bind(Graph& g, bool trainable) const {
  return Vars{g.param(*embedding_, trainable), g.param(*out_w_, trainable), g.param(*out_b_, trainable),
              lmstyle::bind(g, gru_, trainable)};
}

std::vector<Parameter*> Classifier::parameters() const {
  return {embedding_, gru_.w, gru_.u_gates, gru_.u_cand, gru_.b, out_w_, out_b_};
}

Var classifier_logit(Graph& g, const Classifier::Vars& clf, const PaddedBatch& batch) {
  LMS_REQUIRE(batch.batch_size() > 0 && batch.max_len() > 0, "empty input");
  const int vocab = static_cast<int>(clf.embedding.value().rows());
  Var h0 = g.constant(Tensor::matrix(batch.batch_size(), clf.gru.hidden_size));
  Var h = run_masked(g, clf.gru, h0, batch.max_len(), batch.lengths(), [&](int t) {
    check_ids(batch.step(t), vocab);
    return g.gather_rows(clf.embedding, batch.step(t));
  });
  return project(g, h, clf.out_w, clf.out_b);
}

Var classifier_logit(Graph& g, const Classifier::Vars& clf, const RelaxedSequence& seq) {
  LMS_REQUIRE(seq.length() > 0 && seq.batch_size() > 0, "empty input");
  Var h0 = g.constant(Tensor::matrix(seq.batch_size(), clf.gru.hidden_size));
  Var h = run_masked(g, clf.gru, h0, seq.length(), seq.lengths, [&](int t) {
    return g.weighted_embedding(seq.steps[static_cast<size_t>(t)], clf.embedding);
  });
  return project(g, h, clf.out_w, clf.out_b);
}

double classify_real(const Classifier& clf, const Sentence& sentence) {
  Graph g;
  Classifier::Vars v = clf.bind(g, false);
  std::vector<Sentence> one{sentence};
  const double logit = classifier_logit(g, v, PaddedBatch(one)).value().item();
  return 1.0 / (1.0 + std::exp(-logit));
}

}  // namespace lmstyle
