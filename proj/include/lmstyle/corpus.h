#ifndef LMSTYLE_CORPUS_H_
#define LMSTYLE_CORPUS_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lmstyle/sequence.h"

namespace lmstyle {

using TextSentence = std::vector<std::string>;
using TextCorpus = std::vector<TextSentence>;

inline constexpr int kMaxSentenceLength = 16;

// Token <-> id map. Ids 0..3 are <pad>, <s>, </s>, <unk>; other ids are
// dense in [4, size()) in insertion order.
class Vocabulary {
 public:
  Vocabulary();

  // Returns the id of token, inserting it if new.
  int add(const std::string& token);
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  // kUnkId for unknown tokens.
  int id(const std::string& token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  // Non-reserved tokens in id order.
  std::vector<std::string> plain_tokens() const;

  Sentence encode(const TextSentence& sentence, int* unknown = nullptr) const;
  TextSentence decode(const Sentence& sentence) const;

  // Tokens seen at least min_count times across corpora, in first-seen order.
  static Vocabulary build(std::span<const TextCorpus* const> corpora, int min_count);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Parameters of the synthetic order-k Markov source.
struct MarkovSpec {
  int vocab_size = 100;
  int order = 2;
  double concentration = 0.5;  // Dirichlet concentration of each transition row
  int branching = 4;           // successors per previous token
  int min_length = 4;
  int max_length = 12;

  void validate() const;
};

// Order-k chain over tokens "w0".."w{V-1}". The support of a row is the
// successor set of the last context token; weights depend on the full
// context. Rows are derived on demand from (seed, context).
class MarkovChain {
 public:
  MarkovChain(const MarkovSpec& spec, uint64_t seed);

  const MarkovSpec& spec() const { return spec_; }
  // Next-token distribution for a context of exactly `order` token indices.
  std::vector<std::pair<int, double>> transitions(std::span<const int> context) const;
  static std::string token_name(int index) { return "w" + std::to_string(index); }

 private:
  MarkovSpec spec_;
  uint64_t seed_;
  std::vector<std::vector<int>> successors_;
};

// Sentences cut from one continuous run of the chain, so token frequencies
// follow its stationary distribution. Lengths uniform in the spec bounds.
TextCorpus generate_toy_corpus(const MarkovChain& chain, int n_sentences, uint64_t seed);

// Two-lexicon templated corpus: a chain sentence followed by "is <attr>",
// where <attr> comes from "pos0".."pos4" for style x and "neg0".."neg4" for y.
TextCorpus generate_sentiment_corpus(const MarkovChain& chain, int n_sentences, Style style, uint64_t seed);

inline constexpr const char* kCipherSuffix = "@";

// Injective plain -> cipher map over a sampled fraction of the vocabulary.
struct CipherDictionary {
  std::map<std::string, std::string> forward;
  double fraction = 0.0;

  CipherDictionary inverse() const;
  size_t size() const { return forward.size(); }
};

// Samples ceil(f * |plain vocab|) plain tokens uniformly without replacement.
CipherDictionary make_cipher(const Vocabulary& vocab, double fraction, uint64_t seed);
CipherDictionary make_cipher(std::span<const std::string> plain_tokens, double fraction, uint64_t seed);

TextCorpus apply_cipher(const TextCorpus& corpus, const CipherDictionary& dict);

enum class Split { kTrain, kDev, kTest };
const char* split_name(Split s);

struct StyleCorpus {
  Style style = Style::kX;
  Split split = Split::kTrain;
  std::vector<Sentence> sentences;
};

// Encodes with vocab; sentences longer than max_len are truncated.
StyleCorpus encode_corpus(const TextCorpus& text, const Vocabulary& vocab, Style style, Split split,
                          int* unknown = nullptr, int max_len = kMaxSentenceLength);

// One sentence per line, tokens separated by single spaces.
TextCorpus read_corpus(const std::string& path);
void write_corpus(const std::string& path, const TextCorpus& corpus);
TextSentence split_tokens(const std::string& line);
std::string join_tokens(const TextSentence& sentence);

// Two tab-separated columns: plain, cipher.
void write_cipher(const std::string& path, const CipherDictionary& dict);
CipherDictionary read_cipher(const std::string& path);

struct PairedBatch {
  std::vector<Sentence> x;
  std::vector<Sentence> y;
};

// Epoch-wise shuffled half-batches from each style. Partial final batches
// are dropped; epoch order is a pure function of (seed, epoch).
class BatchIterator {
 public:
  BatchIterator(const StyleCorpus& x, const StyleCorpus& y, int batch_size, uint64_t seed);

  int batches_per_epoch() const;
  std::vector<PairedBatch> epoch(int index) const;

 private:
  const StyleCorpus* x_;
  const StyleCorpus* y_;
  int half_;
  uint64_t seed_;
};

}  // namespace lmstyle

#endif  // LMSTYLE_CORPUS_H_
