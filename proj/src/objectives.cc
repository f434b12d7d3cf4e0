#include "lmstyle/objectives.h"

#include <cmath>

#include "lmstyle/errors.h"

namespace lmstyle {
namespace {

Tensor inverse_lengths(std::span<const int> lengths) {
  Tensor t = Tensor::matrix(static_cast<int64_t>(lengths.size()), 1);
  for (size_t i = 0; i < lengths.size(); ++i) t[static_cast<int64_t>(i)] = 1.0 / lengths[i];
  return t;
}

// log sigmoid(l) and log(1 - sigmoid(l)) as the two columns of log_softmax([l, 0]).
Var log_sigmoid_pair(Graph& g, Var logits) {
  Tensor zeros = Tensor::matrix(logits.value().rows(), 1);
  std::vector<Var> parts{logits, g.constant(std::move(zeros))};
  return g.log_softmax(g.concat_cols(parts));
}

}  // namespace

bool LossReport::all_finite() const {
  auto ok = [](double v) { return std::isfinite(v); };
  return ok(rec_x) && ok(rec_y) && ok(lm_transfer_x) && ok(lm_transfer_y) && ok(disc_lm_x) && ok(disc_lm_y) &&
         (!clf_disc || ok(*clf_disc)) && (!clf_gen || ok(*clf_gen));
}

Var reconstruction_nll(Graph& g, const Seq2SeqModel::Vars& m, const PaddedBatch& batch, Style style) {
  Var z = encode(g, m, batch, style);
  std::vector<Sentence> sentences = batch.sentences();
  PaddedBatch targets = PaddedBatch::with_end(sentences);
  std::vector<Var> logits = decode_teacher_forced(g, m, z, style, targets);
  return sequence_nll(g, logits, targets);
}

Var reconstruction_loss(Graph& g, const Seq2SeqModel::Vars& m, const PaddedBatch& batch_x,
                        const PaddedBatch& batch_y) {
  Var rx = g.mean(reconstruction_nll(g, m, batch_x, Style::kX));
  Var ry = g.mean(reconstruction_nll(g, m, batch_y, Style::kY));
  return g.add(rx, ry);
}

Var lm_discriminator_loss(Graph& g, const LanguageModel::Vars& lm, const PaddedBatch& real,
                          const PaddedBatch* fake, const LmDiscriminatorOptions& options) {
  LMS_REQUIRE(options.gamma >= 0.0, "gamma must be non-negative");
  Var real_loss = g.mean(lm_score_discrete(g, lm, real));
  if (options.gamma == 0.0) return real_loss;
  LMS_REQUIRE(fake != nullptr, "gamma > 0 needs negative samples");

  std::vector<Var> per_step = lm_token_nll(g, lm, *fake);
  Var fake_total;
  for (size_t t = 0; t < per_step.size(); ++t) {
    Var nll = per_step[t];
    if (options.nll_cap > 0.0) {
      // min(nll, cap): tokens above the cap contribute the constant cap.
      const Tensor& v = nll.value();
      Tensor keep = Tensor::matrix(v.rows(), 1), capped = Tensor::matrix(v.rows(), 1);
      for (int64_t i = 0; i < v.rows(); ++i) {
        const bool over = v[i] > options.nll_cap;
        keep[i] = over ? 0.0 : 1.0;
        capped[i] = over ? options.nll_cap : 0.0;
      }
      nll = g.add(g.mul(nll, g.constant(std::move(keep))), g.constant(std::move(capped)));
    }
    fake_total = t == 0 ? nll : g.add(fake_total, nll);
  }
  return g.sub(real_loss, g.scale(g.mean(fake_total), options.gamma));
}

TransferLoss generator_transfer_loss(Graph& g, const Seq2SeqModel::Vars& m, const LanguageModel::Vars& target_lm,
                                     const PaddedBatch& batch, Style source, const RelaxedDecodeOptions& decode) {
  LMS_REQUIRE(decode.tau > 0.0, "temperature must be positive");
  TransferLoss out;
  Var z = encode(g, m, batch, source);
  out.relaxed = decode_relaxed(g, m, z, other_style(source), batch.lengths(), decode);
  out.per_sentence = lm_score_relaxed(g, target_lm, out.relaxed);
  Var normalized = g.mul(out.per_sentence, g.constant(inverse_lengths(batch.lengths())));
  out.loss = g.mean(normalized);
  return out;
}

GradientMap reinforce_gradient(const Seq2SeqModel& model, const LanguageModel& target_lm,
                               std::span<const Sentence> batch, Style source, int n_samples, uint64_t seed) {
  LMS_REQUIRE(n_samples >= 1, "need at least one sample");
  LMS_REQUIRE(!batch.empty(), "empty batch");
  std::vector<Parameter*> params = model.parameters();
  for (Parameter* p : params) p->zero_grad();

  PaddedBatch padded(batch);
  const int b = padded.batch_size();
  for (int s = 0; s < n_samples; ++s) {
    Graph g;
    Seq2SeqModel::Vars m = model.bind(g, true);
    Var z = encode(g, m, padded, source);
    DiscreteDecode sample = decode_discrete(g, m, z, other_style(source), padded.lengths(), DiscreteMode::kSample,
                                            derive_seed(seed, static_cast<uint64_t>(s)));

    // Rewards come from a separate graph: the LM is fixed here.
    Graph lm_graph;
    LanguageModel::Vars lm = target_lm.bind(lm_graph, false);
    RelaxedSequence onehots = one_hot_sequence(lm_graph, sample.tokens, target_lm.vocab_size(), false);
    const Tensor& nll = lm_score_relaxed(lm_graph, lm, onehots).value();

    // Surrogate: sum_b (c_b / B) * log p_G(x~_b), c_b = NLL_b / T_b.
    Var surrogate;
    for (size_t t = 0; t < sample.log_probs.size(); ++t) {
      Tensor weight = Tensor::matrix(b, target_lm.vocab_size());
      for (int r = 0; r < b; ++r) {
        const Sentence& toks = sample.tokens[static_cast<size_t>(r)];
        if (t >= toks.size()) continue;
        const double c = nll[r] / static_cast<double>(toks.size());
        weight.at(r, toks[t]) = c / (static_cast<double>(b) * n_samples);
      }
      // cross_entropy(weight, logp) = -sum_j weight_j * logp_j.
      Var term = g.sum(g.cross_entropy(g.constant(std::move(weight)), sample.log_probs[t]));
      surrogate = t == 0 ? term : g.add(surrogate, term);
    }
    g.backward(g.scale(surrogate, -1.0));  // d/dtheta of sum c * log p_G
  }

  GradientMap out;
  for (Parameter* p : params) {
    out.emplace(p->name, p->grad);
    p->zero_grad();
  }
  return out;
}

AdversarialLosses classifier_losses_from_logits(Graph& g, Var real_logits, Var fake_logits) {
  Var real_pair = log_sigmoid_pair(g, real_logits);
  Var fake_pair = log_sigmoid_pair(g, fake_logits);
  Var real_term = g.scale(g.mean(g.slice_cols(real_pair, 0, 1)), -1.0);
  Var fake_term = g.scale(g.mean(g.slice_cols(fake_pair, 1, 2)), -1.0);
  AdversarialLosses out;
  out.disc = g.add(real_term, fake_term);
  out.gen = g.scale(g.mean(g.slice_cols(fake_pair, 0, 1)), -1.0);
  return out;
}

AdversarialLosses adversarial_classifier_loss(Graph& g, const Classifier::Vars& clf, const PaddedBatch& real,
                                              const RelaxedSequence& fake) {
  return classifier_losses_from_logits(g, classifier_logit(g, clf, real), classifier_logit(g, clf, fake));
}

Var assemble_generator_objective(Graph& g, const GeneratorTerms& terms, const ObjectiveWeights& weights) {
  LMS_REQUIRE(terms.rec.valid(), "reconstruction term is required");
  LMS_REQUIRE(weights.lambda >= 0.0 && weights.classifier_weight >= 0.0, "weights must be non-negative");
  Var total = terms.rec;
  if (weights.lambda != 0.0) {
    LMS_REQUIRE(terms.lm_transfer_x.valid() && terms.lm_transfer_y.valid(), "lambda > 0 needs both LM terms");
    total = g.add(total, g.scale(g.add(terms.lm_transfer_x, terms.lm_transfer_y), weights.lambda));
  }
  if (weights.classifier_weight != 0.0) {
    LMS_REQUIRE(terms.clf_gen.valid(), "classifier weight > 0 needs the classifier term");
    total = g.add(total, g.scale(terms.clf_gen, weights.classifier_weight));
  }
  return total;
}

double assemble_generator_objective(const LossReport& losses, const ObjectiveWeights& weights) {
  double total = losses.rec_x + losses.rec_y;
  if (weights.lambda != 0.0) total += weights.lambda * (losses.lm_transfer_x + losses.lm_transfer_y);
  if (weights.classifier_weight != 0.0) {
    LMS_REQUIRE(losses.clf_gen.has_value(), "classifier weight > 0 needs the classifier loss");
    total += weights.classifier_weight * *losses.clf_gen;
  }
  return total;
}

}  // namespace lmstyle
