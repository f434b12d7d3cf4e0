#include "lmstyle/trainer.h"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "lmstyle/errors.h"
#include "lmstyle/graph.h"
#include "lmstyle/gumbel.h"
#include "lmstyle/pretrain.h"

namespace lmstyle {
namespace {

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  LMS_REQUIRE(ec == std::errc() && ptr == s.data() + s.size(), "bad number in checkpoint: " + s);
  return v;
}

double scalar(Var v) { return v.value().item(); }

void zero(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

OptimizerRecord record(const std::string& name, std::span<Parameter* const> params, const AdamState& state) {
  OptimizerRecord r;
  r.name = name;
  for (const Parameter* p : params) r.param_names.push_back(p->name);
  r.state = state;
  return r;
}

void restore_optimizer(const Checkpoint& ckpt, const std::string& name, std::span<Parameter* const> params,
                       AdamState& state) {
  const OptimizerRecord* r = ckpt.find_optimizer(name);
  LMS_REQUIRE(r != nullptr, "checkpoint lacks optimizer " + name);
  LMS_REQUIRE(r->param_names.size() == params.size(), "optimizer " + name + " covers a different parameter list");
  for (size_t i = 0; i < params.size(); ++i)
    LMS_REQUIRE(r->param_names[i] == params[i]->name, "optimizer " + name + " parameter order differs");
  state = r->state;
}

}  // namespace

struct Trainer::Discriminators {
  ParameterSet params;
  std::unique_ptr<LanguageModel> lm_x, lm_y;
  std::unique_ptr<Classifier> clf_x, clf_y;
  AdamState lm_opt, clf_opt;

  std::vector<Parameter*> lm_params() const {
    std::vector<Parameter*> out = lm_x->parameters();
    for (Parameter* p : lm_y->parameters()) out.push_back(p);
    return out;
  }
  std::vector<Parameter*> clf_params() const {
    std::vector<Parameter*> out = clf_x->parameters();
    for (Parameter* p : clf_y->parameters()) out.push_back(p);
    return out;
  }
};

Trainer::Trainer(const TrainConfig& config, const DataSet& data, const Checkpoint* pretrained)
    : config_(config), data_(data), disc_(std::make_unique<Discriminators>()) {
  config_.validate();
  const ModelDims dims = config_.dims(data.vocab.size());
  tm_ = std::make_unique<TransferModel>(data.vocab, dims, derive_seed(config_.seed, 0x2a));
  if (pretrained != nullptr) tm_->eval = load_eval_models(*pretrained, dims);

  std::mt19937_64 rng(derive_seed(config_.seed, 0x2b));
  const bool need_lm = config_.uses_lm() && (config_.lambda > 0.0 || config_.gamma > 0.0);
  if (need_lm) {
    LMS_REQUIRE(pretrained != nullptr, "language model discriminators need a pre-trained checkpoint");
    disc_->lm_x = std::make_unique<LanguageModel>(disc_->params, "lm_x.", dims, rng);
    disc_->lm_y = std::make_unique<LanguageModel>(disc_->params, "lm_y.", dims, rng);
    pretrained->load_parameters(disc_->params, "lm_x.", "eval_lm_x.");
    pretrained->load_parameters(disc_->params, "lm_y.", "eval_lm_y.");
    if (config_.gamma > 0.0)
      disc_->lm_opt = AdamState::for_params(disc_->lm_params(), AdamConfig{config_.learning_rate});
  }
  if (config_.uses_classifier()) {
    disc_->clf_x = std::make_unique<Classifier>(disc_->params, "clf_x.", dims, rng);
    disc_->clf_y = std::make_unique<Classifier>(disc_->params, "clf_y.", dims, rng);
    disc_->clf_opt = AdamState::for_params(disc_->clf_params(), AdamConfig{config_.learning_rate});
  }
  gen_opt_ = AdamState::for_params(generator_params(), AdamConfig{config_.learning_rate});
}

Trainer::~Trainer() = default;

std::vector<Parameter*> Trainer::generator_params() const { return tm_->model.parameters(); }

const LanguageModel* Trainer::discriminator_lm(Style s) const {
  return s == Style::kX ? disc_->lm_x.get() : disc_->lm_y.get();
}

LossReport Trainer::train_step(const PairedBatch& batch, double tau, uint64_t seed) {
  PaddedBatch bx(batch.x), by(batch.y);
  LossReport rep;
  const DiscreteMode neg_mode = config_.sample_negatives ? DiscreteMode::kSample : DiscreteMode::kGreedy;
  const bool lm_adv = config_.gamma > 0.0 && disc_->lm_x != nullptr;

  for (int d = 0; d < config_.disc_steps && (lm_adv || config_.uses_classifier()); ++d) {
    // Negatives: x~ from y -> x scores against LM_x, and vice versa.
    const uint64_t neg_seed = derive_seed(seed, 0x10, static_cast<uint64_t>(d));
    const std::vector<Sentence> neg_x = transfer_sentences(tm_->model, batch.y, Style::kY, neg_mode, neg_seed);
    const std::vector<Sentence> neg_y =
        transfer_sentences(tm_->model, batch.x, Style::kX, neg_mode, derive_seed(neg_seed, 1));
    const PaddedBatch px(neg_x), py(neg_y);

    if (lm_adv) {
      Graph g;
      LanguageModel::Vars lx = disc_->lm_x->bind(g, true), ly = disc_->lm_y->bind(g, true);
      const LmDiscriminatorOptions opts{config_.gamma, config_.nll_cap};
      Var dx = lm_discriminator_loss(g, lx, bx, &px, opts);
      Var dy = lm_discriminator_loss(g, ly, by, &py, opts);
      rep.disc_lm_x = scalar(dx);
      rep.disc_lm_y = scalar(dy);
      if (!std::isfinite(rep.disc_lm_x) || !std::isfinite(rep.disc_lm_y))
        throw NumericalDivergence("language model discriminator loss is not finite");
      const std::vector<Parameter*> params = disc_->lm_params();
      zero(params);
      g.backward(g.add(dx, dy));
      clip_grad_norm(params, config_.clip_norm);
      adam_step(params, disc_->lm_opt);
      ++lm_updates_;
    }
    if (config_.uses_classifier()) {
      Graph g;
      Classifier::Vars cx = disc_->clf_x->bind(g, true), cy = disc_->clf_y->bind(g, true);
      AdversarialLosses ax = classifier_losses_from_logits(g, classifier_logit(g, cx, bx), classifier_logit(g, cx, px));
      AdversarialLosses ay = classifier_losses_from_logits(g, classifier_logit(g, cy, by), classifier_logit(g, cy, py));
      Var loss = g.add(ax.disc, ay.disc);
      rep.clf_disc = scalar(loss);
      if (!std::isfinite(*rep.clf_disc)) throw NumericalDivergence("classifier discriminator loss is not finite");
      const std::vector<Parameter*> params = disc_->clf_params();
      zero(params);
      g.backward(loss);
      clip_grad_norm(params, config_.clip_norm);
      adam_step(params, disc_->clf_opt);
      ++clf_updates_;
    }
  }

  Graph g;
  Seq2SeqModel::Vars m = tm_->model.bind(g, true);
  Var rx = g.mean(reconstruction_nll(g, m, bx, Style::kX));
  Var ry = g.mean(reconstruction_nll(g, m, by, Style::kY));
  rep.rec_x = scalar(rx);
  rep.rec_y = scalar(ry);
  GeneratorTerms terms;
  terms.rec = g.add(rx, ry);

  const RelaxedDecodeOptions to_x{tau, derive_seed(seed, 0x20), NoiseMode::kGumbel};
  const RelaxedDecodeOptions to_y{tau, derive_seed(seed, 0x21), NoiseMode::kGumbel};
  RelaxedSequence fake_x, fake_y;
  const bool lm_term = config_.uses_lm() && config_.lambda > 0.0;
  if (lm_term) {
    LanguageModel::Vars lx = disc_->lm_x->bind(g, false), ly = disc_->lm_y->bind(g, false);
    TransferLoss tx = generator_transfer_loss(g, m, lx, by, Style::kY, to_x);
    TransferLoss ty = generator_transfer_loss(g, m, ly, bx, Style::kX, to_y);
    terms.lm_transfer_x = tx.loss;
    terms.lm_transfer_y = ty.loss;
    rep.lm_transfer_x = scalar(tx.loss);
    rep.lm_transfer_y = scalar(ty.loss);
    fake_x = std::move(tx.relaxed);
    fake_y = std::move(ty.relaxed);
  }
  if (config_.uses_classifier()) {
    if (!lm_term) {
      fake_x = decode_relaxed(g, m, encode(g, m, by, Style::kY), Style::kX, by.lengths(), to_x);
      fake_y = decode_relaxed(g, m, encode(g, m, bx, Style::kX), Style::kY, bx.lengths(), to_y);
    }
    Classifier::Vars cx = disc_->clf_x->bind(g, false), cy = disc_->clf_y->bind(g, false);
    AdversarialLosses ax = adversarial_classifier_loss(g, cx, bx, fake_x);
    AdversarialLosses ay = adversarial_classifier_loss(g, cy, by, fake_y);
    terms.clf_gen = g.add(ax.gen, ay.gen);
    rep.clf_gen = scalar(terms.clf_gen);
  }
  const ObjectiveWeights weights{lm_term ? config_.lambda : 0.0,
                                 config_.uses_classifier() ? config_.classifier_weight : 0.0};
  Var total = assemble_generator_objective(g, terms, weights);
  if (!rep.all_finite() || !std::isfinite(scalar(total))) throw NumericalDivergence("generator loss is not finite");
  const std::vector<Parameter*> params = generator_params();
  zero(params);
  g.backward(total);
  clip_grad_norm(params, config_.clip_norm);
  adam_step(params, gen_opt_);
  ++gen_updates_;
  return rep;
}

Trainer::DevReport Trainer::evaluate_dev() const {
  DevReport r;
  const bool parallel = data_.parallel;
  r.eval = evaluate_transfer(*tm_, data_.dev_x.sentences, data_.dev_y.sentences,
                             parallel ? &data_.dev_x_text : nullptr, parallel ? &data_.dev_y_text : nullptr);
  if (r.eval.bleu_y2x) r.bleu = r.eval.bleu_y2x->bleu;
  r.rec_accuracy = 0.5 * (reconstruction_accuracy(tm_->model, data_.dev_x.sentences, Style::kX) +
                          reconstruction_accuracy(tm_->model, data_.dev_y.sentences, Style::kY));
  return r;
}

void Trainer::write_epoch_metrics(int epoch, const LossReport& mean, double tau, const DevReport& dev) {
  MetricsWriter& w = *metrics_;
  w.write(epoch, step_, "train", "tau", tau);
  w.write(epoch, step_, "train", "rec_x", mean.rec_x);
  w.write(epoch, step_, "train", "rec_y", mean.rec_y);
  if (config_.uses_lm() && config_.lambda > 0.0) {
    w.write(epoch, step_, "train", "lm_transfer_x", mean.lm_transfer_x);
    w.write(epoch, step_, "train", "lm_transfer_y", mean.lm_transfer_y);
  }
  if (config_.gamma > 0.0) {
    w.write(epoch, step_, "train", "disc_lm_x", mean.disc_lm_x);
    w.write(epoch, step_, "train", "disc_lm_y", mean.disc_lm_y);
  }
  if (mean.clf_disc) w.write(epoch, step_, "train", "clf_disc", *mean.clf_disc);
  if (mean.clf_gen) w.write(epoch, step_, "train", "clf_gen", *mean.clf_gen);
  w.write(epoch, step_, "train", "lm_updates", static_cast<double>(lm_updates_));
  w.write(epoch, step_, "train", "gen_updates", static_cast<double>(gen_updates_));
  log_evaluation(w, dev.eval, epoch, step_, "dev");
  w.write(epoch, step_, "dev", "rec_accuracy", dev.rec_accuracy);
}

TrainSummary Trainer::run() {
  namespace fs = std::filesystem;
  fs::create_directories(config_.run_dir);
  const std::string metrics_path = config_.run_dir + "/metrics.jsonl";
  {
    std::ofstream cfg(config_.run_dir + "/config.txt", std::ios::trunc);
    cfg << config_.to_text();
  }
  truncate_metrics(metrics_path, next_epoch_);
  metrics_ = std::make_unique<MetricsWriter>(metrics_path, config_.run_id, true);

  TrainSummary summary;
  BatchIterator batches(data_.train_x, data_.train_y, config_.batch_size, derive_seed(config_.seed, 0x3b));
  LMS_REQUIRE(batches.batches_per_epoch() > 0, "training corpora are smaller than half a batch");
  for (int epoch = next_epoch_; epoch < config_.epochs; ++epoch) {
    if (config_.patience > 0 && bad_epochs_ >= config_.patience) {
      summary.early_stopped = true;
      break;
    }
    const double tau = anneal(epoch, config_.anneal);
    LossReport mean;
    const std::vector<PairedBatch> epoch_batches = batches.epoch(epoch);
    const double n = static_cast<double>(epoch_batches.size());
    for (size_t k = 0; k < epoch_batches.size(); ++k) {
      LossReport r;
      try {
        r = train_step(epoch_batches[k], tau, derive_seed(config_.seed, 0x4c, static_cast<uint64_t>(epoch), k));
      } catch (const NumericalDivergence& e) {
        dump_and_throw(e.what());
      }
      ++step_;
      mean.rec_x += r.rec_x / n;
      mean.rec_y += r.rec_y / n;
      mean.lm_transfer_x += r.lm_transfer_x / n;
      mean.lm_transfer_y += r.lm_transfer_y / n;
      mean.disc_lm_x += r.disc_lm_x / n;
      mean.disc_lm_y += r.disc_lm_y / n;
      if (r.clf_disc) mean.clf_disc = mean.clf_disc.value_or(0.0) + *r.clf_disc / n;
      if (r.clf_gen) mean.clf_gen = mean.clf_gen.value_or(0.0) + *r.clf_gen / n;
    }

    const DevReport dev = evaluate_dev();
    // Without parallel dev data the last epoch is kept.
    const double selection = data_.parallel ? dev.bleu : static_cast<double>(epoch);
    bleu_history_.push_back(dev.bleu);
    next_epoch_ = epoch + 1;
    write_epoch_metrics(epoch, mean, tau, dev);

    if (data_.parallel) {
      if (peak_bleu_ >= 0.0 && dev.bleu < peak_bleu_ - config_.divergence_drop) {
        ++warnings_;
        std::cerr << "warning: dev BLEU " << dev.bleu << " at epoch " << epoch << " is more than "
                  << config_.divergence_drop << " below the peak " << peak_bleu_ << "\n";
        metrics_->write(epoch, step_, "dev", "divergence_warning", 1.0);
      }
      peak_bleu_ = std::max(peak_bleu_, dev.bleu);
    }
    if (best_epoch_ < 0 || selection > best_bleu_) {
      best_bleu_ = selection;
      best_epoch_ = epoch;
      bad_epochs_ = 0;
      write_checkpoint(config_.run_dir + "/best.ckpt", snapshot());
    } else {
      ++bad_epochs_;
    }
    write_checkpoint(config_.run_dir + "/last.ckpt", snapshot());
    ++summary.epochs_run;
  }
  if (config_.patience > 0 && bad_epochs_ >= config_.patience && next_epoch_ < config_.epochs)
    summary.early_stopped = true;

  summary.last_epoch = next_epoch_ - 1;
  summary.best_epoch = best_epoch_;
  summary.best_dev_bleu = data_.parallel ? best_bleu_ : -1.0;
  summary.dev_bleu = bleu_history_;
  summary.divergence_warnings = warnings_;
  summary.lm_updates = lm_updates_;
  summary.gen_updates = gen_updates_;
  metrics_.reset();
  return summary;
}

Checkpoint Trainer::snapshot() const {
  Checkpoint ckpt;
  put_model_meta(ckpt, tm_->vocab, tm_->dims);
  ckpt.meta["config"] = config_.to_text();
  ckpt.meta["state.next_epoch"] = std::to_string(next_epoch_);
  ckpt.meta["state.step"] = std::to_string(step_);
  ckpt.meta["state.lm_updates"] = std::to_string(lm_updates_);
  ckpt.meta["state.gen_updates"] = std::to_string(gen_updates_);
  ckpt.meta["state.clf_updates"] = std::to_string(clf_updates_);
  ckpt.meta["state.best_bleu"] = fmt(best_bleu_);
  ckpt.meta["state.best_epoch"] = std::to_string(best_epoch_);
  ckpt.meta["state.peak_bleu"] = fmt(peak_bleu_);
  ckpt.meta["state.bad_epochs"] = std::to_string(bad_epochs_);
  ckpt.meta["state.warnings"] = std::to_string(warnings_);
  ckpt.meta["state.tau"] = fmt(anneal(std::max(0, next_epoch_ - 1), config_.anneal));
  std::string history;
  for (double b : bleu_history_) history += (history.empty() ? "" : ",") + fmt(b);
  ckpt.meta["state.bleu_history"] = history;

  ckpt.add_parameters(tm_->params);
  if (tm_->eval) ckpt.add_parameters(tm_->eval->params);
  ckpt.add_parameters(disc_->params);
  ckpt.optimizers.push_back(record("generator", generator_params(), gen_opt_));
  if (config_.gamma > 0.0 && disc_->lm_x) ckpt.optimizers.push_back(record("lm", disc_->lm_params(), disc_->lm_opt));
  if (disc_->clf_x) ckpt.optimizers.push_back(record("clf", disc_->clf_params(), disc_->clf_opt));
  return ckpt;
}

void Trainer::resume(const Checkpoint& ckpt) {
  LMS_REQUIRE(ckpt.meta_at("vocab") == vocab_to_text(tm_->vocab), "checkpoint vocabulary differs from the data");
  ckpt.load_parameters(tm_->params);
  if (tm_->eval) ckpt.load_parameters(tm_->eval->params);
  ckpt.load_parameters(disc_->params);
  restore_optimizer(ckpt, "generator", generator_params(), gen_opt_);
  if (config_.gamma > 0.0 && disc_->lm_x) restore_optimizer(ckpt, "lm", disc_->lm_params(), disc_->lm_opt);
  if (disc_->clf_x) restore_optimizer(ckpt, "clf", disc_->clf_params(), disc_->clf_opt);
  next_epoch_ = std::stoi(ckpt.meta_at("state.next_epoch"));
  step_ = std::stoll(ckpt.meta_at("state.step"));
  lm_updates_ = std::stoll(ckpt.meta_at("state.lm_updates"));
  gen_updates_ = std::stoll(ckpt.meta_at("state.gen_updates"));
  clf_updates_ = std::stoll(ckpt.meta_at("state.clf_updates"));
  best_bleu_ = parse_double(ckpt.meta_at("state.best_bleu"));
  best_epoch_ = std::stoi(ckpt.meta_at("state.best_epoch"));
  peak_bleu_ = parse_double(ckpt.meta_at("state.peak_bleu"));
  bad_epochs_ = std::stoi(ckpt.meta_at("state.bad_epochs"));
  warnings_ = std::stoi(ckpt.meta_at("state.warnings"));
  bleu_history_.clear();
  const std::string& h = ckpt.meta_at("state.bleu_history");
  for (size_t pos = 0; pos < h.size();) {
    size_t comma = h.find(',', pos);
    if (comma == std::string::npos) comma = h.size();
    bleu_history_.push_back(parse_double(h.substr(pos, comma - pos)));
    pos = comma + 1;
  }
}

void Trainer::dump_and_throw(const std::string& what) const {
  const std::string path = config_.run_dir + "/diverged.ckpt";
  try {
    std::filesystem::create_directories(config_.run_dir);
    write_checkpoint(path, snapshot());
  } catch (const std::exception& e) {
    std::cerr << "could not dump run state: " << e.what() << "\n";
  }
  throw NumericalDivergence(what + " at step " + std::to_string(step_) + "; state dumped to " + path);
}

}  // namespace lmstyle
