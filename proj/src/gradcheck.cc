#include "lmstyle/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lmstyle/gru.h"
#include "lmstyle/gumbel.h"
#include "lmstyle/models.h"
#include "lmstyle/objectives.h"

namespace lmstyle {
namespace {

Tensor random_tensor(Shape shape, double scale, std::mt19937_64& rng) {
  Tensor t(std::move(shape), 0.0);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = scale * (2.0 * uniform01(rng) - 1.0);
  return t;
}

Tensor random_simplex_rows(int64_t rows, int64_t cols, std::mt19937_64& rng) {
  Tensor t = Tensor::matrix(rows, cols);
  for (int64_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (int64_t c = 0; c < cols; ++c) total += t.at(r, c) = 0.1 + uniform01(rng);
    for (int64_t c = 0; c < cols; ++c) t.at(r, c) /= total;
  }
  return t;
}

// sum(out * w) for a fixed random w, so every output entry matters.
Var weighted_sum(Graph& g, Var out, uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor w = random_tensor(out.value().shape(), 1.0, rng);
  return g.sum(g.mul(out, g.constant(std::move(w))));
}

void randomize(ParameterSet& params, double scale, std::mt19937_64& rng) {
  for (Parameter* p : params.all()) p->value = random_tensor(p->value.shape(), scale, rng);
}

}  // namespace

GradCheckResult check_gradients(const std::string& name, ParameterSet& params,
                                const std::function<Var(Graph&)>& loss, const GradCheckOptions& options,
                                uint64_t seed) {
  GradCheckResult result;
  result.name = name;
  params.zero_grad();
  {
    Graph g;
    g.backward(loss(g));
  }
  auto evaluate = [&] {
    Graph g;
    return loss(g).value().item();
  };
  std::mt19937_64 rng(seed);
  for (Parameter* p : params.all()) {
    const Tensor analytic = p->grad;
    std::vector<int64_t> coords(static_cast<size_t>(p->value.size()));
    std::iota(coords.begin(), coords.end(), int64_t{0});
    std::shuffle(coords.begin(), coords.end(), rng);
    if (static_cast<int64_t>(coords.size()) > options.max_coords_per_param)
      coords.resize(static_cast<size_t>(options.max_coords_per_param));
    for (int64_t i : coords) {
      const double saved = p->value[i];
      auto at = [&](double offset) {
        p->value[i] = saved + offset;
        const double v = evaluate();
        p->value[i] = saved;
        return v;
      };
      const double h = options.step;
      const double numeric = options.five_point
                                 ? (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h)
                                 : (at(h) - at(-h)) / (2.0 * h);
      const double a = analytic[i];
      const double scale = std::max(std::abs(a), std::abs(numeric));
      const double err = scale < options.abs_floor ? std::abs(a - numeric) : std::abs(a - numeric) / scale;
      result.max_rel_error = std::max(result.max_rel_error, err);
      ++result.coordinates;
    }
  }
  params.zero_grad();
  result.passed = result.max_rel_error < options.tolerance;
  return result;
}

std::vector<GradCheckResult> run_gradient_checks(const GradCheckOptions& options, uint64_t seed) {
  std::vector<GradCheckResult> out;
  std::mt19937_64 rng(seed);

  // Elementwise and matrix ops on two parameters a (3x4) and b (3x4), plus
  // m (4x5) and a broadcast row r (1x4).
  ParameterSet ps;
  Parameter& a = ps.add("a", random_tensor({3, 4}, 1.0, rng));
  Parameter& b = ps.add("b", random_tensor({3, 4}, 1.0, rng));
  Parameter& m = ps.add("m", random_tensor({4, 5}, 1.0, rng));
  Parameter& r = ps.add("r", random_tensor({1, 4}, 1.0, rng));
  const Tensor target = random_simplex_rows(3, 4, rng);
  const std::vector<int> ids = {2, 0, 3, 3, 1};

  struct Case {
    const char* name;
    std::function<Var(Graph&)> fn;
  };
  const uint64_t ws = seed + 1;
  const std::vector<Case> cases = {
      {"matmul", [&](Graph& g) { return weighted_sum(g, g.matmul(g.param(a), g.param(m)), ws); }},
      {"add", [&](Graph& g) { return weighted_sum(g, g.add(g.param(a), g.param(b)), ws); }},
      {"add_broadcast", [&](Graph& g) { return weighted_sum(g, g.add(g.param(a), g.param(r)), ws); }},
      {"sub", [&](Graph& g) { return weighted_sum(g, g.sub(g.param(a), g.param(b)), ws); }},
      {"mul", [&](Graph& g) { return weighted_sum(g, g.mul(g.param(a), g.param(b)), ws); }},
      {"scale", [&](Graph& g) { return weighted_sum(g, g.scale(g.param(a), -1.7), ws); }},
      {"add_scalar", [&](Graph& g) { return weighted_sum(g, g.mul(g.add_scalar(g.param(a), 0.3), g.param(b)), ws); }},
      {"sigmoid", [&](Graph& g) { return weighted_sum(g, g.sigmoid(g.param(a)), ws); }},
      {"tanh", [&](Graph& g) { return weighted_sum(g, g.tanh(g.param(a)), ws); }},
      {"softmax", [&](Graph& g) { return weighted_sum(g, g.softmax(g.param(a)), ws); }},
      {"log_softmax", [&](Graph& g) { return weighted_sum(g, g.log_softmax(g.param(a)), ws); }},
      {"gather_rows", [&](Graph& g) { return weighted_sum(g, g.gather_rows(g.param(m), ids), ws); }},
      {"weighted_embedding",
       [&](Graph& g) { return weighted_sum(g, g.weighted_embedding(g.softmax(g.param(a)), g.param(m)), ws); }},
      {"concat_cols",
       [&](Graph& g) {
         std::vector<Var> parts{g.param(a), g.param(b)};
         return weighted_sum(g, g.concat_cols(parts), ws);
       }},
      {"slice_cols", [&](Graph& g) { return weighted_sum(g, g.slice_cols(g.param(m), 1, 4), ws); }},
      {"slice_rows", [&](Graph& g) { return weighted_sum(g, g.slice_rows(g.param(m), 1, 3), ws); }},
      {"sum", [&](Graph& g) { return g.sum(g.mul(g.param(a), g.param(a))); }},
      {"mean", [&](Graph& g) { return g.mean(g.mul(g.param(a), g.param(b))); }},
      {"cross_entropy",
       [&](Graph& g) {
         return g.sum(g.cross_entropy(g.constant(target), g.log_softmax(g.param(a)), true));
       }},
      {"cross_entropy_soft_target",
       [&](Graph& g) { return g.sum(g.cross_entropy(g.softmax(g.param(b)), g.log_softmax(g.param(a)))); }},
      {"gumbel_softmax",
       [&](Graph& g) {
         return weighted_sum(g, gumbel_softmax(g, g.param(a), 0.7, sample_gumbel({3, 4}, seed + 2)), ws);
       }},
  };
  for (const Case& c : cases) out.push_back(check_gradients(c.name, ps, c.fn, options, seed));

  GradCheckOptions model_options = options;
  model_options.step = options.model_step;
  model_options.five_point = true;

  {
    ParameterSet gp;
    GruParams gru = GruParams::create(gp, "gru.", 4, 5, rng);
    Parameter& x = gp.add("x", random_tensor({3, 4}, 1.0, rng));
    Parameter& h = gp.add("h", random_tensor({3, 5}, 1.0, rng));
    randomize(gp, 0.6, rng);
    out.push_back(check_gradients(
        "gru_step", gp,
        [&](Graph& g) { return weighted_sum(g, gru_step(g, g.param(x), g.param(h), bind(g, gru, true)), ws); },
        model_options, seed));
  }

  // Full relaxed path: encode -> Gumbel-softmax decode -> LM score, plus
  // the teacher-forced reconstruction loss and the classifier on the
  // relaxed output.
  {
    ModelDims dims;
    dims.vocab_size = 7;
    dims.embed_dim = 4;
    dims.hidden_dim = 5;
    dims.style_dim = 3;
    ParameterSet mp;
    Seq2SeqModel model(mp, dims, rng);
    LanguageModel lm(mp, "lm.", dims, rng);
    Classifier clf(mp, "clf.", dims, rng);
    randomize(mp, 0.5, rng);
    const std::vector<Sentence> sentences = {{4, 5, 6}, {6, 4}};
    const PaddedBatch batch(sentences);
    const RelaxedDecodeOptions decode{0.8, seed + 3, NoiseMode::kGumbel};

    out.push_back(check_gradients(
        "relaxed_pipeline", mp,
        [&](Graph& g) {
          Seq2SeqModel::Vars mv = model.bind(g, true);
          LanguageModel::Vars lv = lm.bind(g, true);
          return generator_transfer_loss(g, mv, lv, batch, Style::kX, decode).loss;
        },
        model_options, seed));
    out.push_back(check_gradients(
        "reconstruction", mp,
        [&](Graph& g) {
          Seq2SeqModel::Vars mv = model.bind(g, true);
          return reconstruction_loss(g, mv, batch, batch);
        },
        model_options, seed));
    out.push_back(check_gradients(
        "lm_score_discrete", mp,
        [&](Graph& g) { return g.mean(lm_score_discrete(g, lm.bind(g, true), batch)); }, model_options, seed));
    out.push_back(check_gradients(
        "classifier_relaxed", mp,
        [&](Graph& g) {
          Seq2SeqModel::Vars mv = model.bind(g, true);
          Var z = encode(g, mv, batch, Style::kY);
          RelaxedSequence fake = decode_relaxed(g, mv, z, Style::kX, batch.lengths(), decode);
          return adversarial_classifier_loss(g, clf.bind(g, true), batch, fake).disc;
        },
        model_options, seed));
  }
  return out;
}

}  // namespace lmstyle
