#include "swiattn/data.hpp"

#include <algorithm>
#include <cmath>

namespace swiattn {

namespace {

constexpr Token kPatternBase = 'a';
constexpr int64_t kPatternAlphabet = 16;
constexpr Token kKeyBase = 'A';
constexpr int64_t kKeyAlphabet = 16;
constexpr Token kValueBase = '0';
constexpr int64_t kValueAlphabet = 10;

// Repeating short cycle over the filler alphabet; predictable from any
// window covering one period.
TokenSeq pattern_filler(int64_t len, int64_t period_min, int64_t period_max, Rng& rng) {
  const int64_t period = period_min + int64_t(rng.below(uint64_t(period_max - period_min + 1)));
  TokenSeq cycle(static_cast<size_t>(period));
  for (auto& t : cycle) t = kPatternBase + Token(rng.below(kPatternAlphabet));
  TokenSeq out(static_cast<size_t>(len));
  for (int64_t i = 0; i < len; ++i) out[size_t(i)] = cycle[size_t(i % period)];
  return out;
}

}  // namespace

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "lm_corpus") return TaskKind::lm_corpus;
  if (s == "copy") return TaskKind::copy;
  if (s == "induction") return TaskKind::induction;
  if (s == "niah") return TaskKind::niah;
  throw ConfigError("unknown task kind '" + s + "'");
}

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::lm_corpus: return "lm_corpus";
    case TaskKind::copy: return "copy";
    case TaskKind::induction: return "induction";
    case TaskKind::niah: return "niah";
  }
  throw ConfigError("unknown task kind");
}

void DataConfig::validate() const {
  if (recall_fraction < 0.0 || recall_fraction > 1.0)
    throw ConfigError("data: recall_fraction must lie in [0, 1]");
  if (pattern_period_min < 1 || pattern_period_max < pattern_period_min)
    throw ConfigError("data: bad pattern period range");
  if (pattern_period_max > kPatternAlphabet * 4)
    throw ConfigError("data: pattern period too long");
  if (copy_block < 1 || copy_alphabet < 2 || copy_alphabet > kPatternAlphabet)
    throw ConfigError("data: bad copy task parameters");
}

NiahInstance make_niah(int64_t context_len, double depth_percent, int64_t window, Rng& rng) {
  if (depth_percent < 0.0 || depth_percent > 100.0)
    throw ContractError("make_niah: depth percent outside [0, 100]");
  const int64_t min_len = kNeedleLen + kTailLen;
  if (context_len < min_len)
    throw ContractError("make_niah: context too short for needle and query");

  NiahInstance inst;
  inst.context_len = context_len;
  inst.depth_percent = depth_percent;

  // layout: filler | needle | filler | query keys | answer | stop
  const int64_t body_len = context_len - kTailLen;      // everything before the query
  const int64_t slack = body_len - kNeedleLen;          // filler around the needle
  inst.needle_start = int64_t(std::llround(depth_percent / 100.0 * double(slack)));
  inst.needle_start = std::clamp<int64_t>(inst.needle_start, 0, slack);

  TokenSeq keys(static_cast<size_t>(kNeedleKeyLen));
  for (auto& k : keys) k = kKeyBase + Token(rng.below(kKeyAlphabet));
  inst.answer.resize(static_cast<size_t>(kNeedleValueLen));
  for (auto& v : inst.answer) v = kValueBase + Token(rng.below(kValueAlphabet));

  TokenSeq filler = pattern_filler(slack, 2, 8, rng);
  TokenSeq seq;
  seq.reserve(static_cast<size_t>(context_len));
  seq.insert(seq.end(), filler.begin(), filler.begin() + inst.needle_start);
  seq.push_back(kNeedleMark);
  seq.insert(seq.end(), keys.begin(), keys.end());
  inst.answer_pos = int64_t(seq.size());
  seq.insert(seq.end(), inst.answer.begin(), inst.answer.end());
  seq.insert(seq.end(), filler.begin() + inst.needle_start, filler.end());
  seq.push_back(kQueryMark);
  seq.insert(seq.end(), keys.begin(), keys.end());
  inst.prompt_len = int64_t(seq.size());
  seq.insert(seq.end(), inst.answer.begin(), inst.answer.end());
  seq.push_back(kStopToken);
  inst.tokens = std::move(seq);

  // Visibility at the last answer-generation step: the decode step for answer
  // token i sees cache positions [cache_len - window, cache_len - 1] with
  // cache_len = prompt_len + i + 1. The needle must be fully visible at every
  // answer step; the tightest constraint is the last one.
  const int64_t last_cache_len = inst.prompt_len + kNeedleValueLen;
  inst.inside_window = inst.needle_start >= last_cache_len - window;
  return inst;
}

TokenSeq sample_sequence(const DataConfig& cfg, int64_t seq_len, int64_t window, Rng& rng) {
  cfg.validate();
  if (seq_len < 2) throw ContractError("sample_sequence: seq_len must be >= 2");
  switch (cfg.kind) {
    case TaskKind::copy: {
      TokenSeq block(static_cast<size_t>(cfg.copy_block));
      for (auto& t : block) t = kPatternBase + Token(rng.below(uint64_t(cfg.copy_alphabet)));
      TokenSeq out(static_cast<size_t>(seq_len));
      for (int64_t i = 0; i < seq_len; ++i) out[size_t(i)] = block[size_t(i % cfg.copy_block)];
      return out;
    }
    case TaskKind::induction: {
      // S | S: the second half is an exact long-range copy of the first.
      const int64_t half = seq_len / 2;
      TokenSeq s(static_cast<size_t>(half));
      for (auto& t : s) t = kPatternBase + Token(rng.below(kPatternAlphabet));
      TokenSeq out;
      out.reserve(static_cast<size_t>(seq_len));
      out.insert(out.end(), s.begin(), s.end());
      out.insert(out.end(), s.begin(), s.end());
      out.resize(static_cast<size_t>(seq_len), s.empty() ? kPatternBase : s[0]);
      return out;
    }
    case TaskKind::niah:
    case TaskKind::lm_corpus: {
      const bool with_needle =
          cfg.kind == TaskKind::niah || rng.uniform() < cfg.recall_fraction;
      if (with_needle) {
        const double depth = rng.uniform(0.0, 100.0);
        return make_niah(seq_len, depth, window, rng).tokens;
      }
      return pattern_filler(seq_len, cfg.pattern_period_min, cfg.pattern_period_max, rng);
    }
  }
  throw ConfigError("sample_sequence: unknown task kind");
}

}  // namespace swiattn
