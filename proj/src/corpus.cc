#include "lmstyle/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "lmstyle/errors.h"
#include "lmstyle/parameters.h"

namespace lmstyle {

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<s>", "</s>", "<unk>"}) add(t);
}

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int id = size();
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
  LMS_REQUIRE(id >= 0 && id < size(), "token id out of range");
  return tokens_[static_cast<size_t>(id)];
}

std::vector<std::string> Vocabulary::plain_tokens() const {
  return std::vector<std::string>(tokens_.begin() + kNumReserved, tokens_.end());
}

Sentence Vocabulary::encode(const TextSentence& sentence, int* unknown) const {
  Sentence out;
  out.reserve(sentence.size());
  for (const std::string& t : sentence) {
    const int i = id(t);
    if (i == kUnkId && unknown != nullptr) ++*unknown;
    out.push_back(i);
  }
  return out;
}

TextSentence Vocabulary::decode(const Sentence& sentence) const {
  TextSentence out;
  out.reserve(sentence.size());
  for (int i : sentence) out.push_back(token(i));
  return out;
}

Vocabulary Vocabulary::build(std::span<const TextCorpus* const> corpora, int min_count) {
  std::unordered_map<std::string, int> counts;
  std::vector<std::string> order;
  for (const TextCorpus* c : corpora) {
    for (const TextSentence& s : *c) {
      for (const std::string& t : s) {
        if (counts[t]++ == 0) order.push_back(t);
      }
    }
  }
  Vocabulary v;
  for (const std::string& t : order)
    if (counts[t] >= min_count) v.add(t);
  return v;
}

// ---------------------------------------------------------------------------
// Markov source

void MarkovSpec::validate() const {
  LMS_REQUIRE(vocab_size >= 2, "vocab_size must be at least 2");
  LMS_REQUIRE(order >= 1, "order must be at least 1");
  LMS_REQUIRE(concentration > 0.0, "concentration must be positive");
  LMS_REQUIRE(branching >= 1 && branching <= vocab_size, "branching must lie in [1, vocab_size]");
  LMS_REQUIRE(1 <= min_length && min_length <= max_length && max_length <= kMaxSentenceLength,
              "length bounds must satisfy 1 <= min <= max <= 16");
}

MarkovChain::MarkovChain(const MarkovSpec& spec, uint64_t seed) : spec_(spec), seed_(seed) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(seed, 0x50cc));
  const int v = spec.vocab_size;
  successors_.resize(static_cast<size_t>(v));
  std::vector<int> pool(static_cast<size_t>(v));
  for (int a = 0; a < v; ++a) {
    // (a + 1) mod V is always a successor, which makes the chain irreducible.
    std::vector<int>& succ = successors_[static_cast<size_t>(a)];
    succ.push_back((a + 1) % v);
    std::iota(pool.begin(), pool.end(), 0);
    std::shuffle(pool.begin(), pool.end(), rng);
    for (int cand : pool) {
      if (static_cast<int>(succ.size()) >= spec.branching) break;
      if (cand != succ.front()) succ.push_back(cand);
    }
    std::sort(succ.begin(), succ.end());
  }
}

std::vector<std::pair<int, double>> MarkovChain::transitions(std::span<const int> context) const {
  LMS_REQUIRE(static_cast<int>(context.size()) == spec_.order, "context length must equal the chain order");
  uint64_t key = 0;
  for (int c : context) {
    LMS_REQUIRE(c >= 0 && c < spec_.vocab_size, "context token out of range");
    key = key * static_cast<uint64_t>(spec_.vocab_size) + static_cast<uint64_t>(c);
  }
  std::mt19937_64 rng(derive_seed(seed_, 0x7a11, key));
  std::gamma_distribution<double> gamma(spec_.concentration, 1.0);
  const std::vector<int>& succ = successors_[static_cast<size_t>(context.back())];
  std::vector<std::pair<int, double>> row;
  double total = 0.0;
  for (int s : succ) {
    // Floor keeps every listed successor reachable.
    const double w = std::max(gamma(rng), 1e-3);
    row.emplace_back(s, w);
    total += w;
  }
  for (auto& [s, w] : row) w /= total;
  return row;
}

namespace {

int draw(const std::vector<std::pair<int, double>>& row, std::mt19937_64& rng) {
  double u = uniform01(rng);
  for (const auto& [tok, p] : row) {
    if (u < p) return tok;
    u -= p;
  }
  return row.back().first;
}

class ChainRunner {
 public:
  ChainRunner(const MarkovChain& chain, uint64_t seed) : chain_(chain), rng_(seed) {
    const int order = chain.spec().order;
    std::uniform_int_distribution<int> pick(0, chain.spec().vocab_size - 1);
    for (int i = 0; i < order; ++i) context_.push_back(pick(rng_));
    for (int i = 0; i < 1000; ++i) next();
  }

  int next() {
    const int tok = draw(chain_.transitions(context_), rng_);
    context_.erase(context_.begin());
    context_.push_back(tok);
    return tok;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  const MarkovChain& chain_;
  std::mt19937_64 rng_;
  std::vector<int> context_;
};

}  // namespace

TextCorpus generate_toy_corpus(const MarkovChain& chain, int n_sentences, uint64_t seed) {
  LMS_REQUIRE(n_sentences >= 1, "need at least one sentence");
  const MarkovSpec& spec = chain.spec();
  ChainRunner run(chain, seed);
  std::uniform_int_distribution<int> length(spec.min_length, spec.max_length);
  TextCorpus out;
  out.reserve(static_cast<size_t>(n_sentences));
  for (int i = 0; i < n_sentences; ++i) {
    const int len = length(run.rng());
    TextSentence s;
    for (int t = 0; t < len; ++t) s.push_back(MarkovChain::token_name(run.next()));
    out.push_back(std::move(s));
  }
  return out;
}

TextCorpus generate_sentiment_corpus(const MarkovChain& chain, int n_sentences, Style style, uint64_t seed) {
  const MarkovSpec& spec = chain.spec();
  LMS_REQUIRE(spec.max_length + 2 <= kMaxSentenceLength, "templated sentences would exceed the length limit");
  TextCorpus out = generate_toy_corpus(chain, n_sentences, seed);
  std::mt19937_64 rng(derive_seed(seed, 0x5e47));
  std::uniform_int_distribution<int> pick(0, 4);
  const std::string stem = style == Style::kX ? "pos" : "neg";
  for (TextSentence& s : out) {
    s.push_back("is");
    s.push_back(stem + std::to_string(pick(rng)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cipher

CipherDictionary CipherDictionary::inverse() const {
  CipherDictionary inv;
  inv.fraction = fraction;
  for (const auto& [p, c] : forward) {
    LMS_REQUIRE(!inv.forward.count(c), "cipher is not injective");
    inv.forward[c] = p;
  }
  return inv;
}

CipherDictionary make_cipher(const Vocabulary& vocab, double fraction, uint64_t seed) {
  std::vector<std::string> plain = vocab.plain_tokens();
  return make_cipher(plain, fraction, seed);
}

CipherDictionary make_cipher(std::span<const std::string> plain_tokens, double fraction, uint64_t seed) {
  LMS_REQUIRE(fraction >= 0.0 && fraction <= 1.0, "fraction must lie in [0, 1]");
  const auto n = static_cast<double>(plain_tokens.size());
  const auto count = static_cast<size_t>(std::ceil(fraction * n - 1e-9));
  std::vector<std::string> pool(plain_tokens.begin(), plain_tokens.end());
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  CipherDictionary dict;
  dict.fraction = fraction;
  for (size_t i = 0; i < count; ++i) dict.forward[pool[i]] = pool[i] + kCipherSuffix;
  return dict;
}

TextCorpus apply_cipher(const TextCorpus& corpus, const CipherDictionary& dict) {
  TextCorpus out = corpus;
  for (TextSentence& s : out) {
    for (std::string& t : s) {
      auto it = dict.forward.find(t);
      if (it != dict.forward.end()) t = it->second;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Style corpora and I/O

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kDev:
      return "dev";
    case Split::kTest:
      return "test";
  }
  return "?";
}

StyleCorpus encode_corpus(const TextCorpus& text, const Vocabulary& vocab, Style style, Split split, int* unknown,
                          int max_len) {
  StyleCorpus out;
  out.style = style;
  out.split = split;
  for (const TextSentence& s : text) {
    if (s.empty()) continue;
    Sentence ids = vocab.encode(s, unknown);
    if (static_cast<int>(ids.size()) > max_len) ids.resize(static_cast<size_t>(max_len));
    out.sentences.push_back(std::move(ids));
  }
  return out;
}

TextSentence split_tokens(const std::string& line) {
  TextSentence out;
  std::istringstream is(line);
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

std::string join_tokens(const TextSentence& sentence) {
  std::string out;
  for (size_t i = 0; i < sentence.size(); ++i) {
    if (i) out += ' ';
    out += sentence[i];
  }
  return out;
}

TextCorpus read_corpus(const std::string& path) {
  std::ifstream in(path);
  LMS_REQUIRE(in.good(), "cannot open corpus " + path);
  TextCorpus out;
  std::string line;
  while (std::getline(in, line)) out.push_back(split_tokens(line));
  return out;
}

void write_corpus(const std::string& path, const TextCorpus& corpus) {
  std::ofstream out(path, std::ios::trunc);
  LMS_REQUIRE(out.good(), "cannot write " + path);
  for (const TextSentence& s : corpus) out << join_tokens(s) << '\n';
}

void write_cipher(const std::string& path, const CipherDictionary& dict) {
  std::ofstream out(path, std::ios::trunc);
  LMS_REQUIRE(out.good(), "cannot write " + path);
  for (const auto& [p, c] : dict.forward) out << p << '\t' << c << '\n';
}

CipherDictionary read_cipher(const std::string& path) {
  std::ifstream in(path);
  LMS_REQUIRE(in.good(), "cannot open cipher " + path);
  CipherDictionary dict;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    LMS_REQUIRE(tab != std::string::npos, "cipher line without a tab: " + line);
    dict.forward[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return dict;
}

// ---------------------------------------------------------------------------
// Batching

BatchIterator::BatchIterator(const StyleCorpus& x, const StyleCorpus& y, int batch_size, uint64_t seed)
    : x_(&x), y_(&y), half_(batch_size / 2), seed_(seed) {
  LMS_REQUIRE(batch_size > 0 && batch_size % 2 == 0, "batch size must be positive and even");
}

int BatchIterator::batches_per_epoch() const {
  return static_cast<int>(std::min(x_->sentences.size(), y_->sentences.size()) / static_cast<size_t>(half_));
}

std::vector<PairedBatch> BatchIterator::epoch(int index) const {
  auto shuffled = [&](const StyleCorpus& c, uint64_t salt) {
    std::vector<size_t> order(c.sentences.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::mt19937_64 rng(derive_seed(seed_, static_cast<uint64_t>(index), salt));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
  };
  const std::vector<size_t> ox = shuffled(*x_, 1), oy = shuffled(*y_, 2);
  std::vector<PairedBatch> out(static_cast<size_t>(batches_per_epoch()));
  for (size_t k = 0; k < out.size(); ++k) {
    for (int i = 0; i < half_; ++i) {
      const size_t pos = k * static_cast<size_t>(half_) + static_cast<size_t>(i);
      out[k].x.push_back(x_->sentences[ox[pos]]);
      out[k].y.push_back(y_->sentences[oy[pos]]);
    }
  }
  return out;
}

}  // namespace lmstyle
