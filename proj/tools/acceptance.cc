// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.
// Exit status is 0 only when every selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <unsupported/Eigen/SpecialFunctions>

#include "lmstyle/checkpoint.h"
#include "lmstyle/config.h"
#include "lmstyle/dataset.h"
#include "lmstyle/eval.h"
#include "lmstyle/gradcheck.h"
#include "lmstyle/gumbel.h"
#include "lmstyle/inference.h"
#include "lmstyle/metrics.h"
#include "lmstyle/objectives.h"
#include "lmstyle/pretrain.h"
#include "lmstyle/trainer.h"

namespace {

using namespace lmstyle;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
  json data = json::object();
};

// One decipherment task: generated data, pre-trained LMs and a training run.
struct DecipherRun {
  double fraction = 0.0;
  TrainConfig config;
  DataSet data;
  PretrainResult pretrain;
  Checkpoint lms;
  TrainSummary summary;
  double pretrain_seconds = 0.0;
  double train_seconds = 0.0;
  double test_bleu = 0.0;
  double test_copy = 0.0;
};

class Acceptance {
 public:
  explicit Acceptance(fs::path work) : work_(std::move(work)) { fs::create_directories(work_); }

  Outcome end_to_end();
  Outcome copy_anchor();
  Outcome gradients();
  Outcome one_hot_reduction();
  Outcome argmax_law();
  Outcome estimator_agreement();
  Outcome discriminator_premise();
  Outcome autoencoder();
  Outcome stability();
  Outcome determinism();
  Outcome metric_oracles();

 private:
  DecipherRun& decipher(double fraction);
  TrainConfig data_config(double fraction, const std::string& name) const;

  fs::path work_;
  std::map<int, std::unique_ptr<DecipherRun>> runs_;  // keyed by percent
};

TrainConfig Acceptance::data_config(double fraction, const std::string& name) const {
  TrainConfig c = TrainConfig::desk();
  c.cipher_fraction = fraction;
  c.data_dir = (work_ / name / "data").string();
  c.lm_checkpoint = (work_ / name / "lms.ckpt").string();
  c.run_dir = (work_ / name / "run").string();
  c.run_id = name;
  c.patience = 0;
  return c;
}

DecipherRun& Acceptance::decipher(double fraction) {
  const int percent = static_cast<int>(std::lround(fraction * 100.0));
  auto it = runs_.find(percent);
  if (it != runs_.end()) return *it->second;
  auto run = std::make_unique<DecipherRun>();
  DecipherRun& r = *run;
  r.fraction = fraction;
  r.config = data_config(fraction, "decipher" + std::to_string(percent));
  fs::remove_all(fs::path(r.config.run_dir).parent_path());
  write_data(r.config.data_dir, generate_data(r.config));
  r.data = load_data(r.config.data_dir, r.config.min_count);

  auto t0 = Clock::now();
  r.pretrain = pretrain_lms(r.config, r.data, nullptr);
  r.lms = pretrain_checkpoint(*r.pretrain.models, r.data.vocab, r.config.dims(r.data.vocab.size()));
  write_checkpoint(r.config.lm_checkpoint, r.lms);
  r.pretrain_seconds = seconds_since(t0);

  t0 = Clock::now();
  Trainer trainer(r.config, r.data, &r.lms);
  r.summary = trainer.run();
  r.train_seconds = seconds_since(t0);

  const auto best = load_transfer_model(read_checkpoint(r.config.run_dir + "/best.ckpt"));
  const EvaluationReport report = evaluate_transfer(*best, r.data.test_x.sentences, r.data.test_y.sentences,
                                                    &r.data.test_x_text, &r.data.test_y_text);
  r.test_bleu = report.bleu_y2x->bleu;
  r.test_copy = report.copy->bleu;
  std::fprintf(stderr, "  [%d%% cipher] pretrain %.0fs, train %.0fs, best dev epoch %d, test BLEU %.2f, copy %.2f\n",
               percent, r.pretrain_seconds, r.train_seconds, r.summary.best_epoch, r.test_bleu, r.test_copy);
  runs_.emplace(percent, std::move(run));
  return r;
}

Outcome Acceptance::end_to_end() {
  const DecipherRun& r20 = decipher(0.2);
  const DecipherRun& r60 = decipher(0.6);
  const DecipherRun& r100 = decipher(1.0);
  const double minutes = (r20.pretrain_seconds + r20.train_seconds) / 60.0;
  const double gain = r20.test_bleu - r20.test_copy;
  const bool epochs_ok = r20.summary.last_epoch + 1 <= 20;
  const bool monotone = r20.test_bleu >= r60.test_bleu && r60.test_bleu >= r100.test_bleu;
  Outcome o;
  o.pass = gain >= 20.0 && minutes <= 30.0 && epochs_ok && monotone;
  o.detail = fmt("20%%: test BLEU %.2f vs copy %.2f (%+.2f, need >= +20) in %d epochs, %.1f min; "
                 "BLEU 20/60/100%% = %.2f / %.2f / %.2f (%s)",
                 r20.test_bleu, r20.test_copy, gain, r20.summary.last_epoch + 1, minutes, r20.test_bleu,
                 r60.test_bleu, r100.test_bleu, monotone ? "monotone" : "not monotone");
  for (const DecipherRun* r : {&r20, &r60, &r100}) {
    o.data["runs"].push_back({{"fraction", r->fraction},
                              {"test_bleu", r->test_bleu},
                              {"copy_bleu", r->test_copy},
                              {"best_epoch", r->summary.best_epoch},
                              {"dev_bleu", r->summary.dev_bleu},
                              {"pretrain_seconds", r->pretrain_seconds},
                              {"train_seconds", r->train_seconds}});
  }
  return o;
}

Outcome Acceptance::copy_anchor() {
  const GeneratedData full = generate_data(data_config(1.0, "copy"));
  const GeneratedData none = generate_data(data_config(0.0, "copy"));
  const double b100 = copy_baseline(full.test_y, full.test_x).bleu;
  const double b0 = copy_baseline(none.test_y, none.test_x).bleu;
  Outcome o;
  o.pass = b100 == 0.0 && b0 == 100.0;
  o.detail = fmt("copy BLEU at 100%% cipher %.17g, at 0%% cipher %.17g", b100, b0);
  o.data = {{"copy_100", b100}, {"copy_0", b0}};
  return o;
}

Outcome Acceptance::gradients() {
  const auto t0 = Clock::now();
  const std::vector<GradCheckResult> results = run_gradient_checks();
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  bool all = true;
  std::set<std::string> names;
  Outcome o;
  for (const GradCheckResult& r : results) {
    all = all && r.passed && r.max_rel_error < 1e-4;
    names.insert(r.name);
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = r.name;
    }
    o.data["checks"].push_back({{"name", r.name}, {"max_rel_error", r.max_rel_error}, {"passed", r.passed}});
  }
  const bool covered = names.count("gru_step") && names.count("relaxed_pipeline");
  o.pass = all && covered && secs < 120.0;
  o.detail = fmt("%zu checks, worst relative error %.2e (%s), %.1f s", results.size(), worst, worst_name.c_str(), secs);
  return o;
}

Outcome Acceptance::one_hot_reduction() {
  std::mt19937_64 rng(404);
  ModelDims dims;
  dims.vocab_size = 30;
  dims.embed_dim = 8;
  dims.hidden_dim = 12;
  dims.style_dim = 4;
  std::uniform_int_distribution<int> len(1, kMaxSentenceLength), tok(kNumReserved, dims.vocab_size - 1);
  double worst = 0.0;
  for (int pair = 0; pair < 1000; ++pair) {
    ParameterSet ps;
    LanguageModel lm(ps, "lm.", dims, rng);
    for (Parameter* p : ps.all())
      for (double& v : p->value.values()) v = 2.0 * uniform01(rng) - 1.0;
    std::vector<Sentence> s(1);
    for (int t = len(rng); t > 0; --t) s[0].push_back(tok(rng));
    Graph g;
    const LanguageModel::Vars vars = lm.bind(g, false);
    const double discrete = g.value(lm_score_discrete(g, vars, PaddedBatch(s))).item();
    const double relaxed = g.value(lm_score_relaxed(g, vars, one_hot_sequence(g, s, dims.vocab_size))).item();
    worst = std::max(worst, std::abs(discrete - relaxed));
  }
  Outcome o;
  o.pass = worst <= 1e-9;
  o.detail = fmt("max |relaxed - discrete| over 1000 random pairs %.2e (need <= 1e-9)", worst);
  o.data = {{"max_abs_diff", worst}};
  return o;
}

Outcome Acceptance::argmax_law() {
  const int draws = 100000, k = 5;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(0.0, 1.0);
  double min_p = 1.0;
  int rejected = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> logits(k);
    double denom = 0.0;
    for (double& v : logits) {
      v = normal(rng);
      denom += std::exp(v);
    }
    Tensor tiled = Tensor::matrix(draws, k);
    for (int r = 0; r < draws; ++r)
      for (int j = 0; j < k; ++j) tiled.at(r, j) = logits[static_cast<size_t>(j)];
    const Tensor noise = sample_gumbel({draws, k}, derive_seed(5, static_cast<uint64_t>(trial)));
    for (double tau : {0.1, 1.0}) {
      Graph g;
      const Tensor p = g.value(gumbel_softmax(g, g.constant(tiled), tau, noise));
      std::vector<double> counts(k, 0.0);
      for (int r = 0; r < draws; ++r) {
        int best = 0;
        for (int j = 1; j < k; ++j)
          if (p.at(r, j) > p.at(r, best)) best = j;
        counts[static_cast<size_t>(best)] += 1.0;
      }
      double chi2 = 0.0;
      for (int j = 0; j < k; ++j) {
        const double expected = draws * std::exp(logits[static_cast<size_t>(j)]) / denom;
        const double d = counts[static_cast<size_t>(j)] - expected;
        chi2 += d * d / expected;
      }
      const double pv = Eigen::numext::igammac(0.5 * (k - 1), 0.5 * chi2);
      min_p = std::min(min_p, pv);
      rejected += pv <= 0.01;
    }
  }
  Outcome o;
  o.pass = rejected == 0;
  o.detail = fmt("40 chi-square tests (20 logit vectors x tau {0.1, 1}), %d with p <= 0.01, min p %.3f", rejected,
                 min_p);
  o.data = {{"rejected", rejected}, {"min_p", min_p}};
  return o;
}

// One-token transfer over three content tokens (reserved ids masked), so the
// expectation can be enumerated exactly.
struct ThreeOutcomes {
  static constexpr int kVocab = kNumReserved + 3;
  std::mt19937_64 rng{31};
  ParameterSet ps;
  ModelDims dims;
  std::unique_ptr<Seq2SeqModel> model;
  std::unique_ptr<LanguageModel> lm;
  std::vector<Sentence> input{{5}};

  ThreeOutcomes() {
    dims.vocab_size = kVocab;
    dims.embed_dim = 3;
    dims.hidden_dim = 4;
    dims.style_dim = 2;
    model = std::make_unique<Seq2SeqModel>(ps, dims, rng);
    lm = std::make_unique<LanguageModel>(ps, "lm.", dims, rng);
    for (Parameter* p : ps.all())
      for (double& v : p->value.values()) v = 0.8 * (2.0 * uniform01(rng) - 1.0);
    Tensor& b = ps.at("generator.out_b").value;
    for (int j = 0; j < kNumReserved; ++j) b[j] = -40.0;
    b[4] = 0.4;
    b[5] = -0.3;
    b[6] = 0.1;
  }

  DiscreteDecode decode(Graph& g, bool trainable) const {
    const Seq2SeqModel::Vars m = model->bind(g, trainable);
    const PaddedBatch batch(input);
    const std::vector<int> len{1};
    return decode_discrete(g, m, encode(g, m, batch, Style::kX), Style::kY, len, DiscreteMode::kGreedy);
  }

  // p_G(k) and the length-normalized LM cost of outcome k.
  void outcomes(double p[3], double c[3]) const {
    Graph g;
    const DiscreteDecode d = decode(g, false);
    for (int k = 0; k < 3; ++k) {
      p[k] = std::exp(d.log_probs[0].value().at(0, kNumReserved + k));
      Graph lg;
      const std::vector<Sentence> one{{kNumReserved + k}};
      c[k] = lm_score_relaxed(lg, lm->bind(lg, false), one_hot_sequence(lg, one, kVocab, false)).value().item();
    }
  }

  GradientMap score(int k) {
    ps.zero_grad();
    Graph g;
    const DiscreteDecode d = decode(g, true);
    Tensor pick = Tensor::matrix(1, kVocab);
    pick[kNumReserved + k] = -1.0;
    g.backward(g.sum(g.cross_entropy(g.constant(pick), d.log_probs[0])));
    GradientMap out;
    for (Parameter* p : model->parameters()) out.emplace(p->name, p->grad);
    ps.zero_grad();
    return out;
  }

  GradientMap relaxed(int n, double tau, uint64_t seed) {
    const std::vector<Sentence> copies(static_cast<size_t>(n), input[0]);
    ps.zero_grad();
    Graph g;
    const Seq2SeqModel::Vars m = model->bind(g, true);
    const TransferLoss l = generator_transfer_loss(g, m, lm->bind(g, false), PaddedBatch(copies), Style::kX,
                                                   {tau, seed, NoiseMode::kGumbel});
    g.backward(l.loss);
    GradientMap out;
    for (Parameter* p : model->parameters()) out.emplace(p->name, p->grad);
    ps.zero_grad();
    return out;
  }
};

Outcome Acceptance::estimator_agreement() {
  ThreeOutcomes w;
  const int n = 50000;
  double p[3], c[3];
  w.outcomes(p, c);
  const GradientMap s[3] = {w.score(0), w.score(1), w.score(2)};
  const GradientMap rf = reinforce_gradient(*w.model, *w.lm, w.input, Style::kX, n, 2024);
  const GradientMap rel = w.relaxed(n, 0.01, 2025);

  double max_abs = 0.0;
  for (const auto& [name, t] : s[0])
    for (int64_t i = 0; i < t.size(); ++i) {
      double e = 0.0;
      for (int k = 0; k < 3; ++k) e += p[k] * c[k] * s[k].at(name)[i];
      max_abs = std::max(max_abs, std::abs(e));
    }
  // Coordinates whose exact gradient is numerically zero (e.g. masked
  // reserved-id biases) carry no sign.
  const double floor = 1e-6 * max_abs;
  int coords = 0, sign_rf = 0, sign_rel = 0, outside = 0;
  double worst_z = 0.0;
  for (const auto& [name, t] : s[0]) {
    for (int64_t i = 0; i < t.size(); ++i) {
      double exact = 0.0, second = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double est = c[k] * s[k].at(name)[i];
        exact += p[k] * est;
        second += p[k] * est * est;
      }
      if (std::abs(exact) <= floor) continue;
      ++coords;
      const double se = std::sqrt(std::max(0.0, second - exact * exact) / n);
      const double r = rf.at(name)[i], x = rel.at(name)[i];
      sign_rf += (r > 0) == (exact > 0);
      sign_rel += (x > 0) == (exact > 0);
      const double z = std::abs(r - exact) / se;
      worst_z = std::max(worst_z, z);
      outside += z > 2.0;
    }
  }
  Outcome o;
  o.pass = coords > 0 && sign_rf == coords && sign_rel == coords && outside == 0;
  o.detail = fmt("%d coordinates: REINFORCE sign %d/%d, relaxed sign %d/%d, REINFORCE beyond 2 SE %d "
                 "(max |z| %.2f)",
                 coords, sign_rf, coords, sign_rel, coords, outside, worst_z);
  o.data = {{"coordinates", coords}, {"sign_reinforce", sign_rf}, {"sign_relaxed", sign_rel},
            {"beyond_2se", outside}, {"max_z", worst_z}};
  return o;
}

Outcome Acceptance::discriminator_premise() {
  const DecipherRun& r = decipher(0.2);
  const double yy = perplexity(r.pretrain.models->lm_y, r.data.test_y.sentences).ppl;
  const double yx = perplexity(r.pretrain.models->lm_y, r.data.test_x.sentences).ppl;
  const double xx = perplexity(r.pretrain.models->lm_x, r.data.test_x.sentences).ppl;
  const double xy = perplexity(r.pretrain.models->lm_x, r.data.test_y.sentences).ppl;
  Outcome o;
  o.pass = yx >= 1.5 * yy && xy >= 1.5 * xx;
  o.detail = fmt("LM_y: held-out y %.2f vs x %.2f (x%.2f); LM_x: held-out x %.2f vs y %.2f (x%.2f); need x1.5", yy,
                 yx, yx / yy, xx, xy, xy / xx);
  o.data = {{"lm_y_on_y", yy}, {"lm_y_on_x", yx}, {"lm_x_on_x", xx}, {"lm_x_on_y", xy}};
  return o;
}

Outcome Acceptance::autoencoder() {
  TrainConfig c = data_config(0.2, "autoencoder");
  c.train_size = 100;  // per style, 200 sentences in all
  c.lambda = 0.0;
  c.epochs = 30;
  c.batch_size = 4;
  c.learning_rate = 5e-3;
  // The summed per-sentence loss keeps gradient norms above 5, and clipping
  // every step stalls memorization around 95% token accuracy.
  c.clip_norm = 50.0;
  fs::remove_all(fs::path(c.run_dir).parent_path());
  // The memorized corpus is also the dev set, so the per-epoch dev
  // reconstruction accuracy measures memorization.
  DataSet data = make_dataset(generate_data(c), c.min_count);
  data.dev_x = data.train_x;
  data.dev_y = data.train_y;
  data.parallel = false;
  Trainer trainer(c, data, nullptr);
  const TrainSummary s = trainer.run();

  std::vector<double> per_epoch;
  for (const MetricRecord& r : read_metrics(c.run_dir + "/metrics.jsonl"))
    if (r.name == "rec_accuracy") per_epoch.push_back(r.value);
  int first = -1;
  for (size_t e = 0; e < per_epoch.size(); ++e)
    if (per_epoch[e] >= 0.99) {
      first = static_cast<int>(e);
      break;
    }
  const double best = per_epoch.empty() ? 0.0 : *std::max_element(per_epoch.begin(), per_epoch.end());
  Outcome o;
  o.pass = first >= 0 && s.epochs_run <= 30;
  o.detail = fmt("lambda=0, %d sentences per style, %d epochs: best reconstruction accuracy %.4f, first >= 0.99 at "
                 "epoch %d, final %.4f",
                 c.train_size, s.epochs_run, best, first, per_epoch.empty() ? 0.0 : per_epoch.back());
  o.data = {{"rec_accuracy", per_epoch}, {"first_epoch", first}, {"sentences_per_style", c.train_size}};
  return o;
}

Outcome Acceptance::stability() {
  const DecipherRun& base = decipher(0.2);
  Outcome o;
  int gamma0_warnings = 0;
  std::string table;
  for (double gamma : {0.0, 0.5}) {
    for (uint64_t seed : {1, 2, 3}) {
      TrainSummary s;
      if (gamma == 0.0 && seed == base.config.seed) {
        s = base.summary;
      } else {
        TrainConfig c = base.config;
        c.gamma = gamma;
        c.mode = gamma > 0.0 ? DiscriminatorMode::kLmAdv : DiscriminatorMode::kLm;
        c.seed = seed;
        c.run_dir = (work_ / "stability" / fmt("gamma%.1f_seed%llu", gamma, static_cast<unsigned long long>(seed))).string();
        c.run_id = fmt("stability-g%.1f-s%llu", gamma, static_cast<unsigned long long>(seed));
        fs::remove_all(c.run_dir);
        Trainer t(c, base.data, &base.lms);
        s = t.run();
      }
      const double final_bleu = s.dev_bleu.empty() ? -1.0 : s.dev_bleu.back();
      if (gamma == 0.0) gamma0_warnings += s.divergence_warnings;
      table += fmt(" [g=%.1f s=%llu: final %.1f, best %.1f, warnings %d]", gamma,
                   static_cast<unsigned long long>(seed), final_bleu, s.best_dev_bleu, s.divergence_warnings);
      o.data["runs"].push_back({{"gamma", gamma},
                                {"seed", seed},
                                {"final_dev_bleu", final_bleu},
                                {"best_dev_bleu", s.best_dev_bleu},
                                {"dev_bleu", s.dev_bleu},
                                {"divergence_warnings", s.divergence_warnings},
                                {"lm_updates", s.lm_updates}});
    }
  }
  o.pass = gamma0_warnings == 0 && o.data["runs"].size() == 6;
  o.detail = fmt("gamma=0 warnings %d (need 0);", gamma0_warnings) + table;
  return o;
}

Outcome Acceptance::determinism() {
  const DecipherRun& base = decipher(0.2);
  Outcome o;
  std::vector<std::string> failures;
  for (double gamma : {0.0, 0.5}) {
    auto config = [&](const std::string& name, int epochs) {
      TrainConfig c = base.config;
      c.gamma = gamma;
      c.mode = gamma > 0.0 ? DiscriminatorMode::kLmAdv : DiscriminatorMode::kLm;
      c.train_limit = 500;
      c.epochs = epochs;
      c.run_dir = (work_ / "determinism" / fmt("g%.1f_%s", gamma, name.c_str())).string();
      c.run_id = "determinism";
      fs::remove_all(c.run_dir);
      return c;
    };
    const DataSet data = load_data(base.config.data_dir, base.config.min_count, 500);
    const TrainConfig full = config("full", 4), again = config("again", 4);
    TrainConfig part = config("part", 2);
    Trainer(full, data, &base.lms).run();
    Trainer(again, data, &base.lms).run();
    Trainer(part, data, &base.lms).run();
    part.epochs = 4;
    Trainer resumed(part, data, &base.lms);
    resumed.resume(read_checkpoint(part.run_dir + "/last.ckpt"));
    resumed.run();

    const std::string m_full = slurp(full.run_dir + "/metrics.jsonl");
    const bool same_seed = m_full == slurp(again.run_dir + "/metrics.jsonl");
    const bool resume_metrics = m_full == slurp(part.run_dir + "/metrics.jsonl");
    const Checkpoint cf = read_checkpoint(full.run_dir + "/last.ckpt");
    const Checkpoint cr = read_checkpoint(part.run_dir + "/last.ckpt");
    bool resume_params = cf.tensors.size() == cr.tensors.size();
    for (size_t i = 0; resume_params && i < cf.tensors.size(); ++i)
      resume_params = cf.tensors[i].name == cr.tensors[i].name &&
                      cf.tensors[i].value.storage() == cr.tensors[i].value.storage();

    // Save -> load -> evaluate against the in-memory trainer.
    Trainer live(config("live", 2), data, &base.lms);
    live.run();
    const std::string path = (work_ / "determinism" / fmt("g%.1f_roundtrip.ckpt", gamma)).string();
    write_checkpoint(path, live.snapshot());
    const auto loaded = load_transfer_model(read_checkpoint(path));
    const EvaluationReport a = evaluate_transfer(live.transfer_model(), data.test_x.sentences,
                                                 data.test_y.sentences, &data.test_x_text, &data.test_y_text);
    const EvaluationReport b = evaluate_transfer(*loaded, data.test_x.sentences, data.test_y.sentences,
                                                 &data.test_x_text, &data.test_y_text);
    MetricsWriter ma, mb;
    log_evaluation(ma, a, 0, 0, "test");
    log_evaluation(mb, b, 0, 0, "test");
    bool roundtrip = ma.records().size() == mb.records().size() && ma.records().size() >= 6;
    for (size_t i = 0; roundtrip && i < ma.records().size(); ++i)
      roundtrip = metric_to_json(ma.records()[i]) == metric_to_json(mb.records()[i]);

    const std::string tag = fmt("gamma=%.1f", gamma);
    if (!same_seed) failures.push_back(tag + " metrics differ between identical runs");
    if (!resume_metrics) failures.push_back(tag + " resumed metrics differ");
    if (!resume_params) failures.push_back(tag + " resumed parameters differ");
    if (!roundtrip) failures.push_back(tag + " checkpoint roundtrip changes metrics");
    o.data["gamma_" + fmt("%.1f", gamma)] = {{"identical_seed_metrics", same_seed},
                                             {"resume_metrics", resume_metrics},
                                             {"resume_parameters", resume_params},
                                             {"checkpoint_roundtrip", roundtrip}};
  }
  o.pass = failures.empty();
  if (o.pass) {
    o.detail = "gamma 0 and 0.5: save/load metrics bit-equal, 2+2 epoch resume equals 4 epochs (metrics and "
               "parameters), identical seeds give byte-identical metrics files";
  } else {
    for (const std::string& f : failures) o.detail += (o.detail.empty() ? "" : "; ") + f;
  }
  return o;
}

Outcome Acceptance::metric_oracles() {
  const TextCorpus hyp{{"the", "cat", "sat", "on", "the", "mat"}};
  const TextCorpus ref{{"the", "cat", "is", "on", "the", "mat"}};
  const BleuReport b = bleu(hyp, ref);
  const BleuReport b1 = bleu(hyp, ref, 1);
  const double expected[4] = {5.0 / 6.0, 3.0 / 5.0, 1.0 / 4.0, 0.0};
  double worst = std::abs(b.bleu - 0.0);
  for (int n = 0; n < 4; ++n) worst = std::max(worst, std::abs(b.precisions[static_cast<size_t>(n)] - expected[n]));
  worst = std::max(worst, std::abs(b1.bleu - 100.0 * 5.0 / 6.0));

  std::mt19937_64 rng(11);
  ModelDims dims;
  dims.vocab_size = 10;
  dims.embed_dim = 4;
  dims.hidden_dim = 5;
  dims.style_dim = 2;
  ParameterSet ps;
  LanguageModel lm(ps, "lm.", dims, rng);
  for (Parameter* p : ps.all()) p->value.fill(0.0);
  std::vector<Sentence> corpus(50);
  std::uniform_int_distribution<int> len(1, kMaxSentenceLength), tok(kNumReserved, dims.vocab_size - 1);
  for (Sentence& s : corpus)
    for (int t = len(rng); t > 0; --t) s.push_back(tok(rng));
  const double ppl = perplexity(lm, corpus).ppl;

  // exp(log 10) is not 10 in double precision, so "exactly" means within a
  // few ulps.
  const double ulps = std::abs(ppl - 10.0) / (10.0 - std::nextafter(10.0, 0.0));
  Outcome o;
  o.pass = worst <= 1e-6 && ulps <= 4.0;
  o.detail = fmt("BLEU hand example max deviation %.1e (BLEU %.4f, BLEU-1 %.4f); uniform LM perplexity over |V|=10 "
                 "is %.17g (%.0f ulp from 10)",
                 worst, b.bleu, b1.bleu, ppl, ulps);
  o.data = {{"bleu_max_deviation", worst}, {"bleu1", b1.bleu}, {"uniform_ppl", ppl}, {"uniform_ppl_ulps", ulps}};
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  app.add_option("-w,--work-dir", work, "scratch directory for data, checkpoints and the JSON report");
  app.add_option("-c,--criteria", only, "run only these criteria (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  Acceptance acc{fs::path(work)};
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"end-to-end decipherment", [&] { return acc.end_to_end(); }},
      {"copy baseline anchor", [&] { return acc.copy_anchor(); }},
      {"gradient soundness", [&] { return acc.gradients(); }},
      {"one-hot reduction", [&] { return acc.one_hot_reduction(); }},
      {"Gumbel argmax law", [&] { return acc.argmax_law(); }},
      {"estimator agreement", [&] { return acc.estimator_agreement(); }},
      {"discriminator premise", [&] { return acc.discriminator_premise(); }},
      {"autoencoder sanity", [&] { return acc.autoencoder(); }},
      {"stability ablation", [&] { return acc.stability(); }},
      {"determinism and persistence", [&] { return acc.determinism(); }},
      {"metric oracles", [&] { return acc.metric_oracles(); }},
  };

  // Criterion 1 trains the shared 20% model, so cheaper criteria run first
  // and the shared runs are built on demand.
  const std::vector<int> order = {2, 3, 4, 5, 6, 11, 8, 1, 7, 9, 10};
  json report = json::object();
  bool all = true;
  for (int id : order) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto& [name, run] = criteria[static_cast<size_t>(id - 1)];
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    all = all && o.pass;
    std::printf("%s criterion %d (%s): %s [%.0fs]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
    report[std::to_string(id)] = {{"name", name}, {"pass", o.pass}, {"detail", o.detail}, {"data", o.data}};
  }
  std::ofstream(fs::path(work) / "acceptance.json") << report.dump(2) << "\n";
  return all ? 0 : 1;
}
