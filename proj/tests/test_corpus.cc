#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <doctest.h>

#include "lmstyle/corpus.h"
#include "lmstyle/errors.h"
#include "lmstyle/models.h"
#include "test_util.h"

using namespace lmstyle;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("lmstyle_corpus_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> plain_names(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(MarkovChain::token_name(i));
  return out;
}

// Stationary distribution of the last-token marginal, by power iteration
// over the order-2 context pairs. The lazy update (pi + pi P) / 2 has the
// same fixed point and converges even if the chain is periodic.
std::vector<double> stationary_unigram(const MarkovChain& chain) {
  const int v = chain.spec().vocab_size;
  const size_t states = static_cast<size_t>(v) * static_cast<size_t>(v);
  std::vector<std::vector<std::pair<int, double>>> rows(states);
  for (int a = 0; a < v; ++a)
    for (int b = 0; b < v; ++b) {
      const int ctx[2] = {a, b};
      rows[static_cast<size_t>(a * v + b)] = chain.transitions(ctx);
    }
  std::vector<double> pi(states, 1.0 / static_cast<double>(states)), next(states);
  for (int it = 0; it < 3000; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (size_t s = 0; s < states; ++s) {
      if (pi[s] == 0.0) continue;
      const int b = static_cast<int>(s) % v;
      for (const auto& [c, p] : rows[s]) next[static_cast<size_t>(b * v + c)] += pi[s] * p;
    }
    double delta = 0.0;
    for (size_t s = 0; s < states; ++s) {
      const double updated = 0.5 * (pi[s] + next[s]);
      delta += std::abs(updated - pi[s]);
      pi[s] = updated;
    }
    if (delta < 1e-13) break;
  }
  std::vector<double> unigram(static_cast<size_t>(v), 0.0);
  for (size_t s = 0; s < states; ++s) unigram[s % static_cast<size_t>(v)] += pi[s];
  return unigram;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("vocabulary reserves the first four ids") {
  Vocabulary v;
  CHECK(v.size() == kNumReserved);
  CHECK(v.token(kPadId) == "<pad>");
  CHECK(v.token(kStartId) == "<s>");
  CHECK(v.token(kEndId) == "</s>");
  CHECK(v.token(kUnkId) == "<unk>");
  CHECK(v.id("never-seen") == kUnkId);
  CHECK_THROWS_AS(v.token(4), ContractViolation);
  CHECK(v.plain_tokens().empty());
}

TEST_CASE("vocabulary ids are dense and bijective under any insertion order") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::string> tokens = plain_names(30 + trial);
    std::shuffle(tokens.begin(), tokens.end(), rng);
    Vocabulary v;
    for (const std::string& t : tokens) v.add(t);
    for (const std::string& t : tokens) CHECK(v.add(t) == v.id(t));
    CHECK(v.size() == kNumReserved + static_cast<int>(tokens.size()));
    std::set<int> seen;
    for (const std::string& t : tokens) {
      const int id = v.id(t);
      CHECK(id >= kNumReserved);
      CHECK(id < v.size());
      CHECK(v.token(id) == t);
      seen.insert(id);
    }
    CHECK(seen.size() == tokens.size());
    CHECK(v.plain_tokens() == tokens);
  }
}

TEST_CASE("vocabulary build applies the count threshold") {
  const TextCorpus a{{"a", "b", "a"}, {"c"}};
  const TextCorpus b{{"b", "d"}};
  const TextCorpus* both[] = {&a, &b};
  const Vocabulary all = Vocabulary::build(both, 1);
  CHECK(all.plain_tokens() == std::vector<std::string>{"a", "b", "c", "d"});
  const Vocabulary frequent = Vocabulary::build(both, 2);
  CHECK(frequent.plain_tokens() == std::vector<std::string>{"a", "b"});
  int unknown = 0;
  const Sentence ids = frequent.encode({"a", "c", "d", "b"}, &unknown);
  CHECK(unknown == 2);
  CHECK(ids == Sentence{4, kUnkId, kUnkId, 5});
  CHECK(frequent.decode(ids) == TextSentence{"a", "<unk>", "<unk>", "b"});
}

TEST_CASE("Markov transition rows lie on the simplex") {
  const MarkovChain chain(MarkovSpec{}, 3);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> tok(0, 99);
  for (int i = 0; i < 200; ++i) {
    const int ctx[2] = {tok(rng), tok(rng)};
    const auto row = chain.transitions(ctx);
    CHECK(row.size() == 4);
    double total = 0.0;
    for (const auto& [s, p] : row) {
      CHECK(p > 0.0);
      CHECK(s >= 0);
      CHECK(s < 100);
      total += p;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    CHECK(row == chain.transitions(ctx));
  }
  const int short_ctx[1] = {0};
  CHECK_THROWS_AS(chain.transitions(short_ctx), ContractViolation);
}

TEST_CASE("Markov spec validation") {
  MarkovSpec s;
  CHECK_NOTHROW(s.validate());
  s.max_length = 17;
  CHECK_THROWS_AS(s.validate(), ContractViolation);
  s = MarkovSpec{};
  s.branching = 0;
  CHECK_THROWS_AS(s.validate(), ContractViolation);
  s = MarkovSpec{};
  s.concentration = 0.0;
  CHECK_THROWS_AS(s.validate(), ContractViolation);
  s = MarkovSpec{};
  s.min_length = 5;
  s.max_length = 4;
  CHECK_THROWS_AS(s.validate(), ContractViolation);
}

TEST_CASE("toy corpus lengths stay within the default bounds") {
  const MarkovChain chain(MarkovSpec{}, 1);
  const TextCorpus c = generate_toy_corpus(chain, 2000, 5);
  CHECK(c.size() == 2000);
  std::set<size_t> lengths;
  for (const TextSentence& s : c) {
    CHECK(s.size() >= 4);
    CHECK(s.size() <= 12);
    lengths.insert(s.size());
  }
  CHECK(lengths.size() == 9);
  CHECK_THROWS_AS(generate_toy_corpus(chain, 0, 5), ContractViolation);
}

TEST_CASE("same seed gives a byte-identical corpus file") {
  const fs::path dir = scratch_dir("determinism");
  const MarkovChain chain(MarkovSpec{}, 4);
  write_corpus((dir / "a").string(), generate_toy_corpus(chain, 500, 9));
  write_corpus((dir / "b").string(), generate_toy_corpus(MarkovChain(MarkovSpec{}, 4), 500, 9));
  write_corpus((dir / "c").string(), generate_toy_corpus(chain, 500, 10));
  CHECK(slurp(dir / "a") == slurp(dir / "b"));
  CHECK(slurp(dir / "a") != slurp(dir / "c"));
  fs::remove_all(dir);
}

TEST_CASE("unigram frequencies follow the stationary distribution") {
  const MarkovChain chain(MarkovSpec{}, 2);
  const std::vector<double> stationary = stationary_unigram(chain);
  double mass = 0.0;
  for (double p : stationary) mass += p;
  CHECK(std::abs(mass - 1.0) < 1e-9);

  const TextCorpus c = generate_toy_corpus(chain, 50000, 8);
  std::vector<double> counts(100, 0.0);
  double total = 0.0;
  for (const TextSentence& s : c)
    for (const std::string& t : s) {
      counts[static_cast<size_t>(std::stoi(t.substr(1)))] += 1.0;
      total += 1.0;
    }
  double tv = 0.0;
  for (size_t i = 0; i < 100; ++i) tv += std::abs(counts[i] / total - stationary[i]);
  tv *= 0.5;
  CHECK(tv < 0.05);
}

TEST_CASE("sentiment corpus appends a style attribute") {
  MarkovSpec spec;
  spec.max_length = 10;
  const MarkovChain chain(spec, 1);
  const TextCorpus x = generate_sentiment_corpus(chain, 100, Style::kX, 3);
  const TextCorpus y = generate_sentiment_corpus(chain, 100, Style::kY, 3);
  for (size_t i = 0; i < x.size(); ++i) {
    CHECK(x[i][x[i].size() - 2] == "is");
    CHECK(x[i].back().rfind("pos", 0) == 0);
    CHECK(y[i].back().rfind("neg", 0) == 0);
  }
  MarkovSpec long_spec;
  long_spec.max_length = 15;
  CHECK_THROWS_AS(generate_sentiment_corpus(MarkovChain(long_spec, 1), 10, Style::kX, 3), ContractViolation);
}

TEST_CASE("cipher size is the ceiling of f times the plain vocabulary") {
  const std::vector<std::string> plain = plain_names(100);
  CHECK(make_cipher(plain, 0.0, 1).size() == 0);
  CHECK(make_cipher(plain, 0.2, 1).size() == 20);
  CHECK(make_cipher(plain, 0.6, 1).size() == 60);
  CHECK(make_cipher(plain, 0.205, 1).size() == 21);
  const CipherDictionary full = make_cipher(plain, 1.0, 1);
  CHECK(full.size() == 100);
  for (const std::string& p : plain) CHECK(full.forward.count(p) == 1);
  CHECK_THROWS_AS(make_cipher(plain, 1.5, 1), ContractViolation);
  CHECK_THROWS_AS(make_cipher(plain, -0.1, 1), ContractViolation);

  Vocabulary v;
  for (const std::string& p : plain) v.add(p);
  const CipherDictionary from_vocab = make_cipher(v, 1.0, 2);
  CHECK(from_vocab.size() == 100);
  CHECK(from_vocab.forward.count("<pad>") == 0);
  CHECK(make_cipher(v, 0.2, 7).forward == make_cipher(plain, 0.2, 7).forward);
}

TEST_CASE("apply_cipher substitutes mapped tokens only") {
  CipherDictionary d;
  d.forward = {{"a", "α"}, {"b", "β"}};
  const TextCorpus out = apply_cipher({{"a", "b", "a"}, {"c", "a"}}, d);
  CHECK(out[0] == TextSentence{"α", "β", "α"});
  CHECK(out[1] == TextSentence{"c", "α"});
  const TextCorpus same = apply_cipher({{"a", "b"}}, CipherDictionary{});
  CHECK(same[0] == TextSentence{"a", "b"});
}

TEST_CASE("cipher injectivity, disjointness and inverse roundtrip") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + static_cast<int>(rng() % 60);
    const std::vector<std::string> plain = plain_names(n);
    const double f = uniform01(rng);
    const CipherDictionary d = make_cipher(plain, f, rng());
    CHECK(d.size() == static_cast<size_t>(std::ceil(f * n - 1e-9)));
    std::set<std::string> images;
    const std::set<std::string> plain_set(plain.begin(), plain.end());
    for (const auto& [p, c] : d.forward) {
      images.insert(c);
      CHECK(plain_set.count(c) == 0);
    }
    CHECK(images.size() == d.size());

    TextCorpus corpus;
    std::uniform_int_distribution<int> tok(0, n - 1), len(1, 16);
    for (int i = 0; i < 30; ++i) {
      TextSentence s;
      for (int j = len(rng); j > 0; --j) s.push_back(plain[static_cast<size_t>(tok(rng))]);
      corpus.push_back(std::move(s));
    }
    const TextCorpus ciphered = apply_cipher(corpus, d);
    for (size_t i = 0; i < corpus.size(); ++i) CHECK(ciphered[i].size() == corpus[i].size());
    const TextCorpus back = apply_cipher(ciphered, d.inverse());
    for (size_t i = 0; i < corpus.size(); ++i) CHECK(join_tokens(back[i]) == join_tokens(corpus[i]));
  }
  CipherDictionary clash;
  clash.forward = {{"a", "z"}, {"b", "z"}};
  CHECK_THROWS_AS(clash.inverse(), ContractViolation);
}

TEST_CASE("corpus and cipher files roundtrip") {
  const fs::path dir = scratch_dir("files");
  const TextCorpus c{{"w1", "w2"}, {"w3"}, {"w4", "w5", "w6"}};
  write_corpus((dir / "c.txt").string(), c);
  CHECK(slurp(dir / "c.txt") == "w1 w2\nw3\nw4 w5 w6\n");
  CHECK(read_corpus((dir / "c.txt").string()) == c);

  const CipherDictionary d = make_cipher(plain_names(10), 0.5, 3);
  write_cipher((dir / "cipher.tsv").string(), d);
  CHECK(read_cipher((dir / "cipher.tsv").string()).forward == d.forward);
  CHECK(split_tokens("  a  b\tc ") == TextSentence{"a", "b", "c"});
  CHECK_THROWS_AS(read_corpus((dir / "missing").string()), ContractViolation);
  fs::remove_all(dir);
}

TEST_CASE("encode_corpus truncates long sentences and drops empty lines") {
  Vocabulary v;
  for (const std::string& t : plain_names(20)) v.add(t);
  TextCorpus text{{}, plain_names(20), {"w1", "zz"}};
  int unknown = 0;
  const StyleCorpus c = encode_corpus(text, v, Style::kY, Split::kDev, &unknown);
  CHECK(c.sentences.size() == 2);
  CHECK(c.sentences[0].size() == static_cast<size_t>(kMaxSentenceLength));
  CHECK(c.sentences[1] == Sentence{5, kUnkId});
  CHECK(unknown == 1);
  CHECK(c.style == Style::kY);
  CHECK(std::string(split_name(c.split)) == "dev");
}

TEST_CASE("one epoch covers every sentence once per style") {
  StyleCorpus x, y;
  for (int i = 0; i < 70; ++i) x.sentences.push_back({kNumReserved + i});
  for (int i = 0; i < 64; ++i) y.sentences.push_back({kNumReserved + 100 + i});
  const BatchIterator it(x, y, 16, 5);
  CHECK(it.batches_per_epoch() == 8);
  const auto epoch = it.epoch(0);
  REQUIRE(epoch.size() == 8);
  std::multiset<int> xs, ys;
  for (const PairedBatch& b : epoch) {
    CHECK(b.x.size() == 8);
    CHECK(b.y.size() == 8);
    for (const Sentence& s : b.x) xs.insert(s[0]);
    for (const Sentence& s : b.y) ys.insert(s[0]);
  }
  // y has exactly 64 sentences, so nothing is dropped from it.
  CHECK(ys.size() == 64);
  CHECK(std::set<int>(ys.begin(), ys.end()).size() == 64);
  CHECK(xs.size() == 64);
  CHECK(std::set<int>(xs.begin(), xs.end()).size() == 64);
}

TEST_CASE("batch order is a function of seed and epoch") {
  StyleCorpus x, y;
  for (int i = 0; i < 40; ++i) {
    x.sentences.push_back({kNumReserved + i});
    y.sentences.push_back({kNumReserved + i, kNumReserved});
  }
  auto flat = [](const std::vector<PairedBatch>& e) {
    std::vector<Sentence> out;
    for (const PairedBatch& b : e) {
      out.insert(out.end(), b.x.begin(), b.x.end());
      out.insert(out.end(), b.y.begin(), b.y.end());
    }
    return out;
  };
  const BatchIterator a(x, y, 8, 1), b(x, y, 8, 1), c(x, y, 8, 2);
  CHECK(flat(a.epoch(3)) == flat(b.epoch(3)));
  CHECK(flat(a.epoch(3)) != flat(a.epoch(4)));
  CHECK(flat(a.epoch(3)) != flat(c.epoch(3)));
  CHECK_THROWS_AS(BatchIterator(x, y, 7, 1), ContractViolation);
  CHECK_THROWS_AS(BatchIterator(x, y, 0, 1), ContractViolation);
}

TEST_CASE("padded positions are excluded from loss sums") {
  std::mt19937_64 rng(13);
  ParameterSet ps;
  const ModelDims dims = testing::small_dims(15);
  Seq2SeqModel model(ps, dims, rng);
  LanguageModel lm(ps, "lm_x.", dims, rng);
  testing::randomize(ps, 0.5, rng);
  const std::vector<Sentence> pair{{4, 5, 6}, {7, 8, 9, 10, 11, 12, 13}};

  Graph g;
  const auto m = model.bind(g, false);
  const auto lv = lm.bind(g, false);
  const PaddedBatch batch(pair);
  CHECK(batch.has_padding_at(3));
  const Var z = encode(g, m, batch, Style::kX);
  const PaddedBatch targets = PaddedBatch::with_end(pair);
  const Tensor nll = g.value(sequence_nll(g, decode_teacher_forced(g, m, z, Style::kX, targets), targets));
  const Tensor lm_nll = g.value(lm_score_discrete(g, lv, batch));

  for (int b = 0; b < 2; ++b) {
    // The same sentence alone, so the batch is truncated to its own length.
    Graph h;
    const auto hm = model.bind(h, false);
    const auto hl = lm.bind(h, false);
    const std::vector<Sentence> one{pair[static_cast<size_t>(b)]};
    const PaddedBatch alone(one);
    const PaddedBatch alone_t = PaddedBatch::with_end(one);
    const Var hz = encode(h, hm, alone, Style::kX);
    const std::vector<Var> logits = decode_teacher_forced(h, hm, hz, Style::kX, alone_t);
    // Manual sum of -log softmax at the target over the unpadded steps only.
    double manual = 0.0;
    for (int t = 0; t < alone_t.max_len(); ++t) {
      const Tensor lp = h.value(h.log_softmax(logits[static_cast<size_t>(t)]));
      manual -= lp.at(0, alone_t.token(t, 0));
    }
    CHECK(std::abs(nll.at(b, 0) - manual) < 1e-10);
    CHECK(std::abs(lm_nll.at(b, 0) - h.value(lm_score_discrete(h, hl, alone)).at(0, 0)) < 1e-10);
  }
}

}  // TEST_SUITE
