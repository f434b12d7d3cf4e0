#ifndef LMSTYLE_TRAINER_H_
#define LMSTYLE_TRAINER_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lmstyle/adam.h"
#include "lmstyle/checkpoint.h"
#include "lmstyle/config.h"
#include "lmstyle/dataset.h"
#include "lmstyle/inference.h"
#include "lmstyle/metrics.h"
#include "lmstyle/objectives.h"

namespace lmstyle {

struct TrainSummary {
  int epochs_run = 0;  // epochs completed by this call
  int last_epoch = -1;
  int best_epoch = -1;
  double best_dev_bleu = -1.0;
  std::vector<double> dev_bleu;  // per epoch, including earlier runs when resumed
  int divergence_warnings = 0;
  bool early_stopped = false;
  int64_t lm_updates = 0;
  int64_t gen_updates = 0;
};

// Alternating training: per batch, an optional discriminator update (LMs
// when gamma > 0, classifiers in classifier modes), then one encoder and
// generator update on the relaxed objective. Files go to config.run_dir:
// config.txt, metrics.jsonl, last.ckpt, best.ckpt.
class Trainer {
 public:
  // pretrained supplies the language models (and eval classifier); it may
  // be null only in classifier mode or when lambda = 0.
  Trainer(const TrainConfig& config, const DataSet& data, const Checkpoint* pretrained);
  ~Trainer();

  // Restores parameters, optimizer state, counters and the epoch cursor.
  void resume(const Checkpoint& ckpt);

  // Runs the remaining epochs up to config.epochs.
  TrainSummary run();

  // One batch of the alternating loop. Non-finite losses throw
  // NumericalDivergence; run() dumps the state before rethrowing.
  LossReport train_step(const PairedBatch& batch, double tau, uint64_t seed);

  Checkpoint snapshot() const;

  const TransferModel& transfer_model() const { return *tm_; }
  const LanguageModel* discriminator_lm(Style s) const;
  int next_epoch() const { return next_epoch_; }
  int64_t lm_updates() const { return lm_updates_; }
  int64_t gen_updates() const { return gen_updates_; }

  struct DevReport {
    double bleu = -1.0;  // -1 when dev is not parallel
    double rec_accuracy = 0.0;
    EvaluationReport eval;
  };
  DevReport evaluate_dev() const;

 private:
  struct Discriminators;

  std::vector<Parameter*> generator_params() const;
  void write_epoch_metrics(int epoch, const LossReport& mean, double tau, const DevReport& dev);
  [[noreturn]] void dump_and_throw(const std::string& what) const;

  TrainConfig config_;
  const DataSet& data_;
  std::unique_ptr<TransferModel> tm_;
  std::unique_ptr<Discriminators> disc_;
  AdamState gen_opt_;
  std::unique_ptr<MetricsWriter> metrics_;

  int next_epoch_ = 0;
  int64_t step_ = 0;
  int64_t lm_updates_ = 0;
  int64_t gen_updates_ = 0;
  int64_t clf_updates_ = 0;
  double best_bleu_ = -1.0;
  int best_epoch_ = -1;
  double peak_bleu_ = -1.0;
  int bad_epochs_ = 0;
  int warnings_ = 0;
  std::vector<double> bleu_history_;
};

}  // namespace lmstyle

#endif  // LMSTYLE_TRAINER_H_
