#include "lincirc/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "lincirc/adam.hpp"
#include "lincirc/tape.hpp"

namespace lincirc {

namespace {

// One training step's computation graph. Returns the loss slot.
int build_lm_tape(Tape& tape, const ModelWeights& w, const std::vector<int>& param_slots,
                  const std::vector<const TokenSequence*>& batch, int seq) {
  const ModelConfig& cfg = w.cfg;
  int bsz = static_cast<int>(batch.size());
  std::vector<int> ids, pos_ids, targets;
  std::vector<std::uint8_t> mask;
  for (const auto* s : batch) {
    for (int i = 0; i < seq; ++i) {
      ids.push_back(s->tokens[static_cast<std::size_t>(i)]);
      pos_ids.push_back(i);
      int target = i + 1 < seq ? s->tokens[static_cast<std::size_t>(i + 1)] : vocab::kPad;
      bool valid = i + 1 < seq && target != vocab::kPad &&
                   s->tokens[static_cast<std::size_t>(i)] != vocab::kPad;
      targets.push_back(valid ? target : 0);
      mask.push_back(valid ? 1 : 0);
    }
  }

  // param slot order matches ModelWeights::params()
  std::size_t pi = 0;
  auto next_param = [&]() { return param_slots[pi++]; };
  int wte = next_param(), wpe = next_param();
  int x = tape.add(tape.embedding(wte, ids), tape.embedding(wpe, pos_ids));
  for (int l = 0; l < cfg.n_layers; ++l) {
    int ln1_g = next_param(), ln1_b = next_param();
    int wq = next_param(), bq = next_param();
    int wk = next_param(), bk = next_param();
    int wv = next_param(), bv = next_param();
    int wo = next_param(), bo = next_param();
    int ln2_g = next_param(), ln2_b = next_param();
    int w_in = next_param(), b_in = next_param();
    int w_out = next_param(), b_out = next_param();
    int ln1 = tape.layernorm(x, ln1_g, ln1_b, kLnEps);
    int q = tape.add_rowvec(tape.matmul(ln1, wq), bq);
    int k = tape.add_rowvec(tape.matmul(ln1, wk), bk);
    int v = tape.add_rowvec(tape.matmul(ln1, wv), bv);
    int ctx = tape.causal_attention(q, k, v, cfg.n_heads, bsz, seq);
    int attn = tape.add_rowvec(tape.matmul(ctx, wo), bo);
    x = tape.add(x, attn);
    int ln2 = tape.layernorm(x, ln2_g, ln2_b, kLnEps);
    int h = tape.gelu(tape.add_rowvec(tape.matmul(ln2, w_in), b_in));
    int m = tape.add_rowvec(tape.matmul(h, w_out), b_out);
    x = tape.add(x, m);
  }
  int lnf_g = next_param(), lnf_b = next_param(), w_unembed = next_param();
  int lnf = tape.layernorm(x, lnf_g, lnf_b, kLnEps);
  int logits = tape.matmul(lnf, w_unembed);
  return tape.cross_entropy(logits, targets, mask);
}

}  // namespace

TrainLmResult train_lm(ModelWeights& w, const std::vector<TokenSequence>& corpus,
                       const TrainLmConfig& cfg) {
  if (corpus.empty()) fail("input-error", "train_lm: empty corpus");
  w.cfg.validate();

  // bucket sample indices by length so batches are rectangular
  std::map<int, std::vector<int>> by_len;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    by_len[static_cast<int>(corpus[i].tokens.size())].push_back(static_cast<int>(i));

  Rng data_rng = Rng(cfg.seed).substream("lm-data");
  Adam adam({cfg.lr, cfg.beta1, cfg.beta2, 1e-8f});
  auto params = w.params();
  adam.register_params(params);

  // schedule of (length bucket, start) batches reshuffled per epoch
  std::vector<std::pair<int, int>> schedule;
  auto reshuffle = [&]() {
    schedule.clear();
    for (auto& [len, idxs] : by_len) {
      data_rng.shuffle(idxs);
      for (int start = 0; start + 1 <= static_cast<int>(idxs.size()); start += cfg.batch)
        schedule.push_back({len, start});
    }
    data_rng.shuffle(schedule);
  };
  reshuffle();
  std::size_t cursor = 0;

  TrainLmResult result;
  float base_lr = cfg.lr;
  for (int step = 0; step < cfg.steps; ++step) {
    if (cursor >= schedule.size()) {
      reshuffle();
      cursor = 0;
    }
    auto [len, start] = schedule[cursor++];
    const auto& idxs = by_len[len];
    std::vector<const TokenSequence*> batch;
    for (int i = start; i < std::min<int>(start + cfg.batch, static_cast<int>(idxs.size())); ++i)
      batch.push_back(&corpus[static_cast<std::size_t>(idxs[static_cast<std::size_t>(i)])]);

    Tape tape;
    std::vector<int> slots;
    for (Tensor* p : params) slots.push_back(tape.input(*p));
    int loss_slot;
    try {
      loss_slot = build_lm_tape(tape, w, slots, batch, len);
    } catch (const Error& e) {
      fail("divergence", std::string("train_lm: forward failed at step ") +
                             std::to_string(step) + ": " + e.what());
    }
    float loss = tape.value(loss_slot).data[0];
    if (!std::isfinite(loss))
      fail("divergence", "train_lm: non-finite loss at step " + std::to_string(step));
    tape.backward(loss_slot);

    // linear warmup
    float lr = step < cfg.warmup_steps
                   ? base_lr * static_cast<float>(step + 1) / static_cast<float>(cfg.warmup_steps)
                   : base_lr;
    adam.set_lr(lr);
    std::vector<const Tensor*> grads;
    for (int s : slots) grads.push_back(&tape.grad(s));
    adam.step(grads);

    result.loss_curve.push_back(loss);
    if (cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.steps))
      std::fprintf(stderr, "[train-lm] step %d/%d loss %.4f\n", step, cfg.steps, loss);
  }
  result.final_loss = result.loss_curve.empty() ? 0.0 : result.loss_curve.back();
  return result;
}

double answer_ce(const ModelWeights& w, const std::vector<TokenSequence>& corpus) {
  double total = 0;
  long count = 0;
  for (const auto& s : corpus) {
    if (s.answer_pos < 0) continue;
    Tensor logits = forward_logits(w, s.tokens);
    Tensor probs = ops::softmax_rows(logits);
    double p = std::max(static_cast<double>(probs.at(s.answer_pos, s.answer_token)), 1e-30);
    total -= std::log(p);
    ++count;
  }
  if (count == 0) fail("input-error", "answer_ce: corpus has no graded answers");
  return total / static_cast<double>(count);
}

double answer_accuracy(const ModelWeights& w, const std::vector<TokenSequence>& corpus) {
  long hits = 0, count = 0;
  for (const auto& s : corpus) {
    if (s.answer_pos < 0) continue;
    Tensor logits = forward_logits(w, s.tokens);
    const float* row = logits.row(s.answer_pos);
    int best = 0;
    for (int v = 1; v < logits.cols(); ++v)
      if (row[v] > row[best]) best = v;
    hits += best == s.answer_token ? 1 : 0;
    ++count;
  }
  if (count == 0) fail("input-error", "answer_accuracy: corpus has no graded answers");
  return static_cast<double>(hits) / static_cast<double>(count);
}

double bigram_answer_ce(const std::vector<TokenSequence>& train,
                        const std::vector<TokenSequence>& eval, int vocab_size) {
  std::vector<double> counts(static_cast<std::size_t>(vocab_size) * vocab_size, 1.0);
  std::vector<double> totals(static_cast<std::size_t>(vocab_size),
                             static_cast<double>(vocab_size));
  for (const auto& s : train) {
    for (std::size_t i = 0; i + 1 < s.tokens.size(); ++i) {
      int a = s.tokens[i], b = s.tokens[i + 1];
      counts[static_cast<std::size_t>(a) * vocab_size + b] += 1.0;
      totals[static_cast<std::size_t>(a)] += 1.0;
    }
  }
  double total = 0;
  long count = 0;
  for (const auto& s : eval) {
    if (s.answer_pos < 0) continue;
    int a = s.tokens[static_cast<std::size_t>(s.answer_pos)];
    double p = counts[static_cast<std::size_t>(a) * vocab_size + s.answer_token] /
               totals[static_cast<std::size_t>(a)];
    total -= std::log(p);
    ++count;
  }
  if (count == 0) fail("input-error", "bigram_answer_ce: no graded answers");
  return total / static_cast<double>(count);
}

double corpus_ce(const ModelWeights& w, const std::vector<TokenSequence>& corpus) {
  double total = 0;
  long count = 0;
  for (const auto& s : corpus) {
    Tensor logits = forward_logits(w, s.tokens);
    Tensor probs = ops::softmax_rows(logits);
    for (std::size_t i = 0; i + 1 < s.tokens.size(); ++i) {
      int target = s.tokens[i + 1];
      if (target == vocab::kPad || s.tokens[i] == vocab::kPad) continue;
      double p = std::max(static_cast<double>(probs.at(static_cast<int>(i), target)), 1e-30);
      total -= std::log(p);
      ++count;
    }
  }
  if (count == 0) fail("input-error", "corpus_ce: nothing to score");
  return total / static_cast<double>(count);
}

}  // namespace lincirc
