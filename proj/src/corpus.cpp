#include "lincirc/corpus.hpp"

#include <nlohmann/json.hpp>

#include "lincirc/tensor_io.hpp"

namespace lincirc {

using nlohmann::json;

const char* family_name(Family f) {
  switch (f) {
    case Family::Bracket: return "bracket";
    case Family::Induction: return "induction";
    case Family::Ioi: return "ioi";
  }
  return "?";
}

Family family_from_name(const std::string& s) {
  if (s == "bracket") return Family::Bracket;
  if (s == "induction") return Family::Induction;
  if (s == "ioi") return Family::Ioi;
  fail("config-error", "unknown family: " + s);
}

namespace vocab {

std::string token_name(int id) {
  if (id == kPad) return "<pad>";
  if (id == kBos) return "<bos>";
  if (id == kOpen) return "[";
  if (id == kClose) return "]";
  if (id >= kDigit0 && id < kDigit0 + kNumDigits) return "d" + std::to_string(id - kDigit0);
  if (id >= kName0 && id < kName0 + kNumNames) return "name" + std::to_string(id - kName0);
  switch (id) {
    case kWhen: return "when";
    case kAnd: return "and";
    case kWent: return "went";
    case kTo: return "to";
    case kThe: return "the";
    case kStore: return "store";
    case kGave: return "gave";
    case kBag: return "bag";
    case kComma: return ",";
    default: break;
  }
  if (id >= kPattern0 && id < kPattern0 + kNumPattern) return "p" + std::to_string(id - kPattern0);
  if (id >= kFiller0 && id < kFiller0 + kNumFiller) return "f" + std::to_string(id - kFiller0);
  return "u" + std::to_string(id);
}

}  // namespace vocab

TokenSequence bracket_sequence_from_actions(const std::string& actions, int max_depth) {
  TokenSequence s;
  s.family = Family::Bracket;
  s.tokens.push_back(vocab::kBos);
  s.depths.push_back(0);
  int depth = 0;
  int segment = 0;
  for (char a : actions) {
    switch (a) {
      case 'c':
        s.tokens.push_back(vocab::kDigit0 + segment % vocab::kNumDigits);
        s.depths.push_back(depth);
        break;
      case 'o':
        if (depth >= max_depth) fail("config-error", "bracket action exceeds max_depth");
        ++depth;
        ++segment;
        s.tokens.push_back(vocab::kOpen);
        s.depths.push_back(depth);
        break;
      case 'x':
        if (depth == 0) fail("config-error", "bracket close at depth 0");
        --depth;
        ++segment;
        s.tokens.push_back(vocab::kClose);
        s.depths.push_back(depth);
        break;
      default:
        fail("config-error", "bracket action must be one of c/o/x");
    }
  }
  if (depth != 0) fail("config-error", "bracket action string not balanced");
  return s;
}

std::vector<TokenSequence> generate_bracket_corpus(int count, int max_depth, std::uint64_t seed,
                                                   int seq_len) {
  if (max_depth < 1) fail("config-error", "bracket: max_depth must be >= 1");
  if (seq_len < 6) fail("config-error", "bracket: seq_len too short");
  Rng rng = Rng(seed).substream("bracket");
  std::vector<TokenSequence> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    std::string actions;
    int depth = 0;
    // reserve room to close whatever is open
    while (static_cast<int>(actions.size()) + depth < seq_len - 1) {
      int room = seq_len - 1 - static_cast<int>(actions.size()) - depth;
      double r = rng.uniform();
      if (depth < max_depth && room >= 2 && r < 0.30) {
        actions += 'o';
        ++depth;
      } else if (depth > 0 && r < 0.55) {
        actions += 'x';
        --depth;
      } else {
        actions += 'c';
      }
    }
    while (depth > 0) {
      actions += 'x';
      --depth;
    }
    out.push_back(bracket_sequence_from_actions(actions, max_depth));
  }
  return out;
}

std::vector<TokenSequence> generate_induction_corpus(int count, int seq_len, std::uint64_t seed) {
  if (seq_len < 4) fail("config-error", "induction: seq_len must be >= 4");
  Rng rng = Rng(seed).substream("induction");
  std::vector<TokenSequence> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    TokenSequence s;
    s.family = Family::Induction;
    s.tokens.assign(static_cast<std::size_t>(seq_len), vocab::kPad);
    s.tokens[0] = vocab::kBos;
    for (int i = 1; i < seq_len; ++i)
      s.tokens[static_cast<std::size_t>(i)] =
          vocab::kFiller0 + rng.uniform_int(0, vocab::kNumFiller - 1);
    int a = vocab::kPattern0 + rng.uniform_int(0, vocab::kNumPattern - 1);
    int b;
    do {
      b = vocab::kPattern0 + rng.uniform_int(0, vocab::kNumPattern - 1);
    } while (b == a);
    // first bigram in [1, mid), second with room for [B] at the end
    int p1 = rng.uniform_int(1, seq_len / 2 - 2);
    int p2 = rng.uniform_int(p1 + 2, seq_len - 2);
    s.tokens[static_cast<std::size_t>(p1)] = a;
    s.tokens[static_cast<std::size_t>(p1 + 1)] = b;
    s.tokens[static_cast<std::size_t>(p2)] = a;
    s.tokens[static_cast<std::size_t>(p2 + 1)] = b;
    s.answer_pos = p2;
    s.answer_token = b;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TokenSequence> generate_ioi_corpus(int count, std::uint64_t seed) {
  static_assert(vocab::kNumNames >= 2, "ioi needs at least two names");
  Rng rng = Rng(seed).substream("ioi");
  std::vector<TokenSequence> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    int io = vocab::kName0 + rng.uniform_int(0, vocab::kNumNames - 1);
    int subj;
    do {
      subj = vocab::kName0 + rng.uniform_int(0, vocab::kNumNames - 1);
    } while (subj == io);
    bool subject_first = rng.uniform() < 0.5;
    int first = subject_first ? subj : io;
    int second = subject_first ? io : subj;
    TokenSequence s;
    s.family = Family::Ioi;
    s.tokens = {vocab::kBos, vocab::kWhen, first,      vocab::kAnd, second,
                vocab::kWent, vocab::kTo,  vocab::kThe, vocab::kStore, vocab::kComma,
                subj,         vocab::kGave, vocab::kThe, vocab::kBag,  vocab::kTo,
                io};
    s.answer_pos = 14;
    s.answer_token = io;
    out.push_back(std::move(s));
  }
  return out;
}

void save_corpus(const std::string& path_prefix, const std::vector<TokenSequence>& corpus,
                 const std::string& meta_json) {
  int n = static_cast<int>(corpus.size());
  int max_len = 1;
  for (const auto& s : corpus) max_len = std::max(max_len, static_cast<int>(s.tokens.size()));
  Tensor tokens = Tensor::full({std::max(n, 1), max_len}, -1.0f);
  Tensor lens = Tensor::zeros({std::max(n, 1)});
  Tensor answer_pos = Tensor::full({std::max(n, 1)}, -1.0f);
  Tensor answer_token = Tensor::full({std::max(n, 1)}, -1.0f);
  Tensor family = Tensor::zeros({std::max(n, 1)});
  Tensor depths = Tensor::full({std::max(n, 1), max_len}, -1.0f);
  for (int i = 0; i < n; ++i) {
    const auto& s = corpus[static_cast<std::size_t>(i)];
    lens.data[static_cast<std::size_t>(i)] = static_cast<float>(s.tokens.size());
    answer_pos.data[static_cast<std::size_t>(i)] = static_cast<float>(s.answer_pos);
    answer_token.data[static_cast<std::size_t>(i)] = static_cast<float>(s.answer_token);
    family.data[static_cast<std::size_t>(i)] = static_cast<float>(static_cast<int>(s.family));
    for (std::size_t j = 0; j < s.tokens.size(); ++j) {
      tokens.at(i, static_cast<int>(j)) = static_cast<float>(s.tokens[j]);
      if (j < s.depths.size()) depths.at(i, static_cast<int>(j)) = static_cast<float>(s.depths[j]);
    }
  }
  save_archive(path_prefix + ".lcgt", {{"tokens", tokens},
                                       {"lengths", lens},
                                       {"answer_pos", answer_pos},
                                       {"answer_token", answer_token},
                                       {"family", family},
                                       {"depths", depths}});
  json meta = meta_json.empty() ? json::object() : json::parse(meta_json);
  meta["schema_version"] = 1;
  meta["count"] = n;
  write_text_file(path_prefix + ".json", meta.dump(2) + "\n");
}

std::vector<TokenSequence> load_corpus(const std::string& path_prefix) {
  auto ar = load_archive(path_prefix + ".lcgt");
  const Tensor& tokens = archive_get(ar, "tokens");
  const Tensor& lens = archive_get(ar, "lengths");
  const Tensor& answer_pos = archive_get(ar, "answer_pos");
  const Tensor& answer_token = archive_get(ar, "answer_token");
  const Tensor& family = archive_get(ar, "family");
  const Tensor& depths = archive_get(ar, "depths");
  json meta = json::parse(read_text_file(path_prefix + ".json"));
  int n = meta.at("count").get<int>();
  std::vector<TokenSequence> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    TokenSequence s;
    int len = static_cast<int>(lens.data[static_cast<std::size_t>(i)]);
    s.answer_pos = static_cast<int>(answer_pos.data[static_cast<std::size_t>(i)]);
    s.answer_token = static_cast<int>(answer_token.data[static_cast<std::size_t>(i)]);
    s.family = static_cast<Family>(static_cast<int>(family.data[static_cast<std::size_t>(i)]));
    bool has_depths = false;
    for (int j = 0; j < len; ++j) {
      s.tokens.push_back(static_cast<int>(tokens.at(i, j)));
      int d = static_cast<int>(depths.at(i, j));
      if (d >= 0) has_depths = true;
      s.depths.push_back(d);
    }
    if (!has_depths) s.depths.clear();
    out.push_back(std::move(s));
  }
  return out;
}

std::string corpus_to_json(const std::vector<TokenSequence>& corpus) {
  json arr = json::array();
  for (const auto& s : corpus) {
    json rec;
    rec["tokens"] = s.tokens;
    if (s.answer_pos >= 0) {
      rec["answer_pos"] = s.answer_pos;
      rec["answer_token"] = s.answer_token;
    } else {
      rec["answer_pos"] = nullptr;
      rec["answer_token"] = nullptr;
    }
    rec["family"] = family_name(s.family);
    if (!s.depths.empty()) rec["depths"] = s.depths;
    arr.push_back(std::move(rec));
  }
  return arr.dump(2) + "\n";
}

}  // namespace lincirc
