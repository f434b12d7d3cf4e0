#ifndef LMSTYLE_SEQUENCE_H_
#define LMSTYLE_SEQUENCE_H_

#include <span>
#include <string>
#include <vector>

#include "lmstyle/graph.h"
#include "lmstyle/tensor.h"

namespace lmstyle {

// Reserved vocabulary ids.
inline constexpr int kPadId = 0;
inline constexpr int kStartId = 1;
inline constexpr int kEndId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kNumReserved = 4;

enum class Style : int { kX = 0, kY = 1 };

inline Style other_style(Style s) { return s == Style::kX ? Style::kY : Style::kX; }
inline const char* style_name(Style s) { return s == Style::kX ? "x" : "y"; }

using Sentence = std::vector<int>;

// Sentences padded with kPadId to the longest one, stored time-major so a
// single decoding step reads a contiguous slice.
class PaddedBatch {
 public:
  PaddedBatch() = default;
  explicit PaddedBatch(std::span<const Sentence> sentences);
  // Appends kEndId to every sentence before padding.
  static PaddedBatch with_end(std::span<const Sentence> sentences);

  int batch_size() const { return batch_; }
  int max_len() const { return max_len_; }
  int length(int b) const { return lengths_[static_cast<size_t>(b)]; }
  const std::vector<int>& lengths() const { return lengths_; }
  std::span<const int> step(int t) const;
  int token(int t, int b) const { return ids_[static_cast<size_t>(t * batch_ + b)]; }
  // True when some sentence has ended before step t.
  bool has_padding_at(int t) const;
  // (batch x 1) tensor: 1 where step t is inside the sentence, else 0.
  Tensor step_mask(int t) const;
  // (batch x cols) tensor with the step-t mask repeated across columns.
  Tensor step_mask(int t, int64_t cols) const;
  std::vector<Sentence> sentences() const;

 private:
  int batch_ = 0;
  int max_len_ = 0;
  std::vector<int> lengths_;
  std::vector<int> ids_;
};

// Output of relaxed decoding: one (batch x |V|) probability matrix per step.
struct RelaxedSequence {
  std::vector<Var> steps;
  std::vector<int> lengths;

  int length() const { return static_cast<int>(steps.size()); }
  int batch_size() const { return static_cast<int>(lengths.size()); }
  // Greedy discretization: argmax of each row at every step, truncated to
  // each sentence's length. Ties go to the lowest index.
  std::vector<Sentence> argmax_tokens() const;
  // Same steps re-entered as constants, cutting gradient flow.
  RelaxedSequence detached(Graph& g) const;
};

// One-hot (batch x vocab) rows for the given ids.
Tensor one_hot_rows(std::span<const int> ids, int vocab_size);

// Relaxed sequence made of exact one-hot vectors. With append_end each
// sentence is followed by kEndId, so its length is sentence length + 1; this
// is the form that lm_score_relaxed scores like lm_score_discrete.
RelaxedSequence one_hot_sequence(Graph& g, std::span<const Sentence> sentences, int vocab_size,
                                 bool append_end = true);

}  // namespace lmstyle

#endif  // LMSTYLE_SEQUENCE_H_
