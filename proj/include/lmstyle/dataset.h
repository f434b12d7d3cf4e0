#ifndef LMSTYLE_DATASET_H_
#define LMSTYLE_DATASET_H_

#include <string>

#include "lmstyle/config.h"
#include "lmstyle/corpus.h"

namespace lmstyle {

// On-disk layout written by generate_data:
//   train.x train.y dev.x dev.y test.x test.y   corpus files
//   cipher.tsv                                  decipherment task only
// For decipherment dev/test are parallel: line i of *.y is line i of *.x
// under the cipher.
struct DataFiles {
  explicit DataFiles(std::string dir) : dir(std::move(dir)) {}
  std::string dir;
  std::string path(const std::string& name) const { return dir + "/" + name; }
};

struct GeneratedData {
  TextCorpus train_x, train_y, dev_x, dev_y, test_x, test_y;
  CipherDictionary cipher;  // empty for the sentiment task
  bool parallel = false;    // dev/test pairs aligned (decipherment)
};

// Pure function of the data fields of config.
GeneratedData generate_data(const TrainConfig& config);
void write_data(const std::string& dir, const GeneratedData& data);

struct DataSet {
  Vocabulary vocab;
  StyleCorpus train_x, train_y, dev_x, dev_y, test_x, test_y;
  TextCorpus dev_x_text, dev_y_text, test_x_text, test_y_text;
  bool parallel = false;
  int unknown_tokens = 0;  // in dev/test under the training vocabulary
};

// Builds the vocabulary from the two training files.
DataSet load_data(const std::string& dir, int min_count, int train_limit = 0);
// Uses a fixed vocabulary (e.g. from a checkpoint).
DataSet load_data(const std::string& dir, const Vocabulary& vocab, int train_limit = 0);
DataSet make_dataset(const GeneratedData& data, int min_count, int train_limit = 0);

// Vocabulary serialized as newline-separated non-reserved tokens.
std::string vocab_to_text(const Vocabulary& vocab);
Vocabulary vocab_from_text(const std::string& text);

}  // namespace lmstyle

#endif  // LMSTYLE_DATASET_H_
