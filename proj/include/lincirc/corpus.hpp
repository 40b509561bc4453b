#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lincirc/rng.hpp"

namespace lincirc {

enum class Family { Bracket, Induction, Ioi };

const char* family_name(Family f);
Family family_from_name(const std::string& s);

// One tokenized sample. answer_pos is the position whose next-token
// prediction the task grades (-1 when the family has no single answer);
// answer_token is the expected token there. depths carries the per-token
// bracket nesting depth for the bracket family.
struct TokenSequence {
  std::vector<int> tokens;
  int answer_pos = -1;
  int answer_token = -1;
  Family family = Family::Bracket;
  std::vector<int> depths;
};

// Fixed synthetic vocabulary shared by all task families.
namespace vocab {
constexpr int kPad = 0;
constexpr int kBos = 1;
constexpr int kOpen = 2;   // "["
constexpr int kClose = 3;  // "]"
constexpr int kDigit0 = 4;
constexpr int kNumDigits = 10;
constexpr int kName0 = 14;
constexpr int kNumNames = 16;
constexpr int kWhen = 30;
constexpr int kAnd = 31;
constexpr int kWent = 32;
constexpr int kTo = 33;
constexpr int kThe = 34;
constexpr int kStore = 35;
constexpr int kGave = 36;
constexpr int kBag = 37;
constexpr int kComma = 38;
constexpr int kPattern0 = 40;   // induction A/B pool
constexpr int kNumPattern = 40;
constexpr int kFiller0 = 80;    // induction filler pool, disjoint from A/B
constexpr int kNumFiller = 40;
constexpr int kSize = 128;

std::string token_name(int id);
}  // namespace vocab

// Balanced nested bracket strings. Content tokens are digit tokens carrying a
// running segment index that increments at every bracket token, so
// "0 0 [ 1 1 1 [ 2 ] 3 ] 4" is producible. Per-token depth goes to metadata.
std::vector<TokenSequence> generate_bracket_corpus(int count, int max_depth, std::uint64_t seed,
                                                   int seq_len = 24);

// Deterministic bracket builder driven by an explicit action string:
// 'c' = content token, 'o' = open bracket, 'x' = close bracket.
TokenSequence bracket_sequence_from_actions(const std::string& actions, int max_depth);

// [A][B] ... [A] -> [B] with filler tokens in between. Metadata marks the
// second [A] position and the expected [B].
std::vector<TokenSequence> generate_induction_corpus(int count, int seq_len, std::uint64_t seed);

// Two-name templates in both orders (indirect object first and subject
// first); the repeated name is never the answer. The answer token follows the
// final "to" so the sample is trainable as-is.
std::vector<TokenSequence> generate_ioi_corpus(int count, std::uint64_t seed);

// Archive + JSON sidecar persistence (tokens as exact small integers).
void save_corpus(const std::string& path_prefix, const std::vector<TokenSequence>& corpus,
                 const std::string& meta_json);
std::vector<TokenSequence> load_corpus(const std::string& path_prefix);

// CLI-visible JSON schema: {tokens, answer_pos, answer_token, family}.
std::string corpus_to_json(const std::vector<TokenSequence>& corpus);

}  // namespace lincirc
