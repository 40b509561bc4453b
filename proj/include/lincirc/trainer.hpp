#pragma once

#include <vector>

#include "lincirc/corpus.hpp"
#include "lincirc/model.hpp"

namespace lincirc {

struct TrainLmConfig {
  int steps = 3000;
  int batch = 16;
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  int warmup_steps = 100;
  std::uint64_t seed = 0;
  int log_every = 100;
};

struct TrainLmResult {
  std::vector<float> loss_curve;  // one entry per step
  double final_loss = 0;
};

// Next-token cross-entropy training over a mixed corpus. Batches group
// same-length sequences; positions whose target is <pad> are masked out.
// Non-finite loss aborts with a diagnostic.
TrainLmResult train_lm(ModelWeights& w, const std::vector<TokenSequence>& corpus,
                       const TrainLmConfig& cfg);

// Mean cross-entropy at the graded answer positions of a corpus.
double answer_ce(const ModelWeights& w, const std::vector<TokenSequence>& corpus);
// Fraction of samples whose answer-position argmax equals the answer token.
double answer_accuracy(const ModelWeights& w, const std::vector<TokenSequence>& corpus);
// Add-one-smoothed bigram model fit on `train`, evaluated at answer positions
// of `eval` — the no-context baseline the LM must beat.
double bigram_answer_ce(const std::vector<TokenSequence>& train,
                        const std::vector<TokenSequence>& eval, int vocab_size);
// Full next-token CE over all non-pad positions.
double corpus_ce(const ModelWeights& w, const std::vector<TokenSequence>& corpus);

}  // namespace lincirc
