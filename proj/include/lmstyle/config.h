#ifndef LMSTYLE_CONFIG_H_
#define LMSTYLE_CONFIG_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lmstyle/corpus.h"
#include "lmstyle/gumbel.h"
#include "lmstyle/models.h"

namespace lmstyle {

enum class DiscriminatorMode { kLm, kLmAdv, kClassifier, kLmClassifier };
const char* mode_name(DiscriminatorMode mode);
DiscriminatorMode parse_mode(const std::string& name);

enum class Task { kDecipher, kSentiment };

// Everything a run needs, as one flat key = value namespace. The text form
// is what `train` writes beside its metrics.
struct TrainConfig {
  std::string profile = "desk";

  // Data generation.
  Task task = Task::kDecipher;
  MarkovSpec markov;
  int train_size = 5000;  // sentences per style
  int dev_size = 500;
  int test_size = 500;
  double cipher_fraction = 0.2;
  uint64_t data_seed = 1;
  int min_count = 1;

  // Model sizes; vocab_size comes from the data.
  int embed_dim = 32;
  int hidden_dim = 64;
  int style_dim = 16;

  // Style transfer training.
  DiscriminatorMode mode = DiscriminatorMode::kLm;
  double lambda = 0.1;
  double gamma = 0.0;
  double learning_rate = 3e-3;
  int batch_size = 8;  // half from each style
  int epochs = 20;
  int patience = 5;      // epochs without a dev BLEU gain; 0 disables
  double clip_norm = 5.0;
  double nll_cap = 10.0;  // per-token cap on negative-sample NLL; <= 0 disables
  int disc_steps = 1;     // discriminator updates per generator update
  double classifier_weight = 1.0;
  bool sample_negatives = false;  // greedy negatives unless set
  AnnealSchedule anneal;
  uint64_t seed = 1;
  int train_limit = 0;  // use only the first n training sentences per style; 0 = all
  double divergence_drop = 20.0;

  // Language model and evaluation classifier pre-training.
  int lm_epochs = 20;
  int lm_patience = 3;
  int lm_batch_size = 64;
  int clf_epochs = 3;

  // Paths.
  std::string data_dir = "data";
  std::string lm_checkpoint = "lms.ckpt";
  std::string run_dir = "run";
  std::string run_id = "run";

  static TrainConfig desk();
  static TrainConfig full();
  static TrainConfig for_profile(const std::string& name);

  ModelDims dims(int vocab_size) const;
  bool uses_lm() const { return mode != DiscriminatorMode::kClassifier; }
  bool uses_classifier() const {
    return mode == DiscriminatorMode::kClassifier || mode == DiscriminatorMode::kLmClassifier;
  }

  // Unknown keys and unparsable values are contract violations.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  std::vector<std::string> keys() const;

  // "key = value" lines; '#' starts a comment.
  void apply_text(const std::string& text);
  void apply_file(const std::string& path);
  std::string to_text() const;

  void validate() const;

 private:
  struct Field {
    const char* key;
    std::function<std::string(const TrainConfig&)> get;
    std::function<void(TrainConfig&, const std::string&)> set;
  };
  static const std::vector<Field>& fields();
};

}  // namespace lmstyle

#endif  // LMSTYLE_CONFIG_H_
