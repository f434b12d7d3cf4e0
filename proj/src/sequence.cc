#include "lmstyle/sequence.h"

#include <algorithm>

#include "lmstyle/errors.h"

namespace lmstyle {

PaddedBatch::PaddedBatch(std::span<const Sentence> sentences) {
  LMS_REQUIRE(!sentences.empty(), "empty batch");
  batch_ = static_cast<int>(sentences.size());
  for (const Sentence& s : sentences) {
    LMS_REQUIRE(!s.empty(), "empty sentence in batch");
    lengths_.push_back(static_cast<int>(s.size()));
    max_len_ = std::max(max_len_, static_cast<int>(s.size()));
  }
  ids_.assign(static_cast<size_t>(batch_ * max_len_), kPadId);
  for (int b = 0; b < batch_; ++b) {
    const Sentence& s = sentences[static_cast<size_t>(b)];
    for (size_t t = 0; t < s.size(); ++t) ids_[t * static_cast<size_t>(batch_) + static_cast<size_t>(b)] = s[t];
  }
}

PaddedBatch PaddedBatch::with_end(std::span<const Sentence> sentences) {
  std::vector<Sentence> ended(sentences.begin(), sentences.end());
  for (Sentence& s : ended) s.push_back(kEndId);
  return PaddedBatch(ended);
}

std::span<const int> PaddedBatch::step(int t) const {
  LMS_REQUIRE(t >= 0 && t < max_len_, "step out of range");
  return std::span<const int>(ids_).subspan(static_cast<size_t>(t * batch_), static_cast<size_t>(batch_));
}

bool PaddedBatch::has_padding_at(int t) const {
  return std::any_of(lengths_.begin(), lengths_.end(), [t](int len) { return t >= len; });
}

Tensor PaddedBatch::step_mask(int t) const { return step_mask(t, 1); }

Tensor PaddedBatch::step_mask(int t, int64_t cols) const {
  Tensor m = Tensor::matrix(batch_, cols);
  for (int b = 0; b < batch_; ++b) {
    const double v = t < lengths_[static_cast<size_t>(b)] ? 1.0 : 0.0;
    for (int64_t j = 0; j < cols; ++j) m.at(b, j) = v;
  }
  return m;
}

std::vector<Sentence> PaddedBatch::sentences() const {
  std::vector<Sentence> out(static_cast<size_t>(batch_));
  for (int b = 0; b < batch_; ++b)
    for (int t = 0; t < lengths_[static_cast<size_t>(b)]; ++t) out[static_cast<size_t>(b)].push_back(token(t, b));
  return out;
}

std::vector<Sentence> RelaxedSequence::argmax_tokens() const {
  std::vector<Sentence> out(lengths.size());
  for (size_t t = 0; t < steps.size(); ++t) {
    const Tensor& p = steps[t].value();
    const int64_t v = p.cols();
    for (size_t b = 0; b < lengths.size(); ++b) {
      if (static_cast<int>(t) >= lengths[b]) continue;
      const double* row = p.data() + static_cast<int64_t>(b) * v;
      out[b].push_back(static_cast<int>(std::max_element(row, row + v) - row));
    }
  }
  return out;
}

RelaxedSequence RelaxedSequence::detached(Graph& g) const {
  RelaxedSequence out;
  out.lengths = lengths;
  for (Var v : steps) out.steps.push_back(g.constant(v.value()));
  return out;
}

Tensor one_hot_rows(std::span<const int> ids, int vocab_size) {
  Tensor t = Tensor::matrix(static_cast<int64_t>(ids.size()), vocab_size);
  for (size_t i = 0; i < ids.size(); ++i) {
    LMS_REQUIRE(ids[i] >= 0 && ids[i] < vocab_size, "token id out of range");
    t.at(static_cast<int64_t>(i), ids[i]) = 1.0;
  }
  return t;
}

RelaxedSequence one_hot_sequence(Graph& g, std::span<const Sentence> sentences, int vocab_size,
                                 bool append_end) {
  PaddedBatch padded = append_end ? PaddedBatch::with_end(sentences) : PaddedBatch(sentences);
  RelaxedSequence seq;
  seq.lengths = padded.lengths();
  for (int t = 0; t < padded.max_len(); ++t) {
    // Padding rows still need to be on the simplex; kPadId one-hots are masked downstream.
    seq.steps.push_back(g.constant(one_hot_rows(padded.step(t), vocab_size)));
  }
  return seq;
}

}  // namespace lmstyle
