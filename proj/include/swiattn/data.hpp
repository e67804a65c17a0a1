#pragma once

#include <string>
#include <vector>

#include "swiattn/common.hpp"
#include "swiattn/ops.hpp"

namespace swiattn {

// Synthetic task families. The byte-level vocabulary is carved into disjoint
// alphabets so key material never collides with filler:
//   filler patterns  'a'..'p'   repeated short cycles, learnable within W
//   needle keys      'A'..'P'
//   needle values    '0'..'9'
//   markers          '[' needle start, '?' query start, '.' stop token
enum class TaskKind { lm_corpus, copy, induction, niah };

TaskKind task_kind_from_string(const std::string& s);
std::string to_string(TaskKind kind);

struct DataConfig {
  TaskKind kind = TaskKind::lm_corpus;
  // lm_corpus: fraction of sequences carrying a key-value needle; the rest
  // are pure repeated patterns.
  double recall_fraction = 0.5;
  int64_t pattern_period_min = 2;
  int64_t pattern_period_max = 8;
  // copy task block length and alphabet size
  int64_t copy_block = 4;
  int64_t copy_alphabet = 8;

  void validate() const;
};

constexpr Token kNeedleMark = '[';
constexpr Token kQueryMark = '?';
constexpr Token kStopToken = '.';
constexpr int64_t kNeedleKeyLen = 2;
constexpr int64_t kNeedleValueLen = 2;
// [mark k1 k2 v1 v2]
constexpr int64_t kNeedleLen = 1 + kNeedleKeyLen + kNeedleValueLen;
// [query k1 k2] + generated [v1 v2 stop]
constexpr int64_t kQueryLen = 1 + kNeedleKeyLen;
constexpr int64_t kTailLen = kQueryLen + kNeedleValueLen + 1;

struct NiahInstance {
  TokenSeq tokens;       // full sequence, answer and stop token included
  int64_t prompt_len;    // prefix ending right after the query keys
  TokenSeq answer;       // the planted value tokens
  int64_t needle_start;  // index of the needle mark
  int64_t answer_pos;    // index of the first value token inside the needle
  double depth_percent;
  int64_t context_len;
  bool inside_window;  // needle fully visible at every answer-generation step
};

// Builds a needle-in-a-haystack instance: predictable filler, one key-value
// needle at the requested depth, query at the end. depth 0 puts the needle at
// the start, depth 100 directly before the query.
NiahInstance make_niah(int64_t context_len, double depth_percent, int64_t window, Rng& rng);

// Draws one training sequence of the given length for the task family.
TokenSeq sample_sequence(const DataConfig& cfg, int64_t seq_len, int64_t window, Rng& rng);

}  // namespace swiattn
