#include "lmstyle/dataset.h"

#include <filesystem>
#include <sstream>

#include "lmstyle/errors.h"
#include "lmstyle/parameters.h"

namespace lmstyle {
namespace {

enum Stream : uint64_t { kTrainX = 1, kTrainY, kDev, kTest, kCipher, kChain };

TextCorpus take_first(const TextCorpus& c, int limit) {
  if (limit <= 0 || static_cast<size_t>(limit) >= c.size()) return c;
  return TextCorpus(c.begin(), c.begin() + limit);
}

DataSet encode_all(const TextCorpus& tx, const TextCorpus& ty, const TextCorpus& dx, const TextCorpus& dy,
                   const TextCorpus& sx, const TextCorpus& sy, Vocabulary vocab, bool parallel) {
  DataSet d;
  d.vocab = std::move(vocab);
  d.parallel = parallel;
  d.train_x = encode_corpus(tx, d.vocab, Style::kX, Split::kTrain);
  d.train_y = encode_corpus(ty, d.vocab, Style::kY, Split::kTrain);
  d.dev_x = encode_corpus(dx, d.vocab, Style::kX, Split::kDev, &d.unknown_tokens);
  d.dev_y = encode_corpus(dy, d.vocab, Style::kY, Split::kDev, &d.unknown_tokens);
  d.test_x = encode_corpus(sx, d.vocab, Style::kX, Split::kTest, &d.unknown_tokens);
  d.test_y = encode_corpus(sy, d.vocab, Style::kY, Split::kTest, &d.unknown_tokens);
  d.dev_x_text = dx;
  d.dev_y_text = dy;
  d.test_x_text = sx;
  d.test_y_text = sy;
  return d;
}

}  // namespace

GeneratedData generate_data(const TrainConfig& config) {
  config.markov.validate();
  const uint64_t s = config.data_seed;
  MarkovChain chain(config.markov, derive_seed(s, kChain));
  GeneratedData out;
  if (config.task == Task::kDecipher) {
    out.parallel = true;
    std::vector<std::string> plain;
    for (int i = 0; i < config.markov.vocab_size; ++i) plain.push_back(MarkovChain::token_name(i));
    out.cipher = make_cipher(plain, config.cipher_fraction, derive_seed(s, kCipher));
    out.train_x = generate_toy_corpus(chain, config.train_size, derive_seed(s, kTrainX));
    out.train_y = apply_cipher(generate_toy_corpus(chain, config.train_size, derive_seed(s, kTrainY)), out.cipher);
    out.dev_x = generate_toy_corpus(chain, config.dev_size, derive_seed(s, kDev));
    out.dev_y = apply_cipher(out.dev_x, out.cipher);
    out.test_x = generate_toy_corpus(chain, config.test_size, derive_seed(s, kTest));
    out.test_y = apply_cipher(out.test_x, out.cipher);
  } else {
    out.train_x = generate_sentiment_corpus(chain, config.train_size, Style::kX, derive_seed(s, kTrainX));
    out.train_y = generate_sentiment_corpus(chain, config.train_size, Style::kY, derive_seed(s, kTrainY));
    out.dev_x = generate_sentiment_corpus(chain, config.dev_size, Style::kX, derive_seed(s, kDev, 1));
    out.dev_y = generate_sentiment_corpus(chain, config.dev_size, Style::kY, derive_seed(s, kDev, 2));
    out.test_x = generate_sentiment_corpus(chain, config.test_size, Style::kX, derive_seed(s, kTest, 1));
    out.test_y = generate_sentiment_corpus(chain, config.test_size, Style::kY, derive_seed(s, kTest, 2));
  }
  return out;
}

void write_data(const std::string& dir, const GeneratedData& data) {
  std::filesystem::create_directories(dir);
  DataFiles f(dir);
  write_corpus(f.path("train.x"), data.train_x);
  write_corpus(f.path("train.y"), data.train_y);
  write_corpus(f.path("dev.x"), data.dev_x);
  write_corpus(f.path("dev.y"), data.dev_y);
  write_corpus(f.path("test.x"), data.test_x);
  write_corpus(f.path("test.y"), data.test_y);
  if (data.parallel) write_cipher(f.path("cipher.tsv"), data.cipher);
}

DataSet make_dataset(const GeneratedData& data, int min_count, int train_limit) {
  TextCorpus tx = take_first(data.train_x, train_limit), ty = take_first(data.train_y, train_limit);
  const TextCorpus* corpora[] = {&tx, &ty};
  Vocabulary vocab = Vocabulary::build(corpora, min_count);
  return encode_all(tx, ty, data.dev_x, data.dev_y, data.test_x, data.test_y, std::move(vocab), data.parallel);
}

DataSet load_data(const std::string& dir, int min_count, int train_limit) {
  DataFiles f(dir);
  TextCorpus tx = take_first(read_corpus(f.path("train.x")), train_limit);
  TextCorpus ty = take_first(read_corpus(f.path("train.y")), train_limit);
  const TextCorpus* corpora[] = {&tx, &ty};
  return load_data(dir, Vocabulary::build(corpora, min_count), train_limit);
}

DataSet load_data(const std::string& dir, const Vocabulary& vocab, int train_limit) {
  DataFiles f(dir);
  const bool parallel = std::filesystem::exists(f.path("cipher.tsv"));
  return encode_all(take_first(read_corpus(f.path("train.x")), train_limit),
                    take_first(read_corpus(f.path("train.y")), train_limit), read_corpus(f.path("dev.x")),
                    read_corpus(f.path("dev.y")), read_corpus(f.path("test.x")), read_corpus(f.path("test.y")), vocab,
                    parallel);
}

std::string vocab_to_text(const Vocabulary& vocab) {
  std::string out;
  for (const std::string& t : vocab.plain_tokens()) out += t + "\n";
  return out;
}

Vocabulary vocab_from_text(const std::string& text) {
  Vocabulary v;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LMS_REQUIRE(!v.contains(line), "duplicate vocabulary token " + line);
    v.add(line);
  }
  return v;
}

}  // namespace lmstyle
