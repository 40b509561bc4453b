#pragma once

#include <map>
#include <optional>
#include <vector>

#include "lincirc/corpus.hpp"
#include "lincirc/hooks.hpp"
#include "lincirc/model.hpp"

namespace lincirc {

enum class DictKind { Sae, Transcoder };

// One sparse dictionary: f = ReLU(W_E x + b_E), reconstruction
// W_D (scaler ⊙ f). The activation scaler is kept in log space so it stays
// positive; it is 0 (scaler 1) until finetuning. Decoder columns are clamped
// to norm <= 1 after every training step. Pruned features are forced to 0 on
// the forward path and excluded from graph construction.
struct DictionaryModule {
  DictKind kind = DictKind::Sae;
  HookPoint hook;
  int d_model = 0;
  int d_sae = 0;
  Tensor w_enc;       // [d_sae, d_model]
  Tensor b_enc;       // [d_sae]
  Tensor w_dec;       // [d_model, d_sae]
  Tensor log_scaler;  // [d_sae]
  std::vector<std::uint8_t> alive;
  float lambda = 8e-5f;

  // pruning statistics (valid when stat_tokens > 0)
  Tensor max_act;     // [d_sae]
  Tensor fire_count;  // [d_sae]
  double stat_tokens = 0;

  static DictionaryModule init(DictKind kind, HookPoint hook, int d_model, int expansion,
                               float lambda, Rng rng);

  double scaler(int feature) const {
    return std::exp(static_cast<double>(log_scaler.data[static_cast<std::size_t>(feature)]));
  }
  double decoder_col_norm(int feature) const;
  // decoder column scaled by the activation scaler, in double
  std::vector<double> effective_decoder_col(int feature) const;
  int alive_count() const;

  void clamp_decoder_norms();
  void save(const std::string& path_prefix) const;
  static DictionaryModule load(const std::string& path_prefix);
};

// Scales x to L2 norm sqrt(d_model); returns the multiplier so callers can
// invert it. Zero-norm input is an error.
std::pair<Tensor, double> normalize_activation(const Tensor& x_row);
double normalization_scale(const float* x, int d);  // sqrt(d)/||x||

// f and normalized-space reconstruction for a batch of normalized rows [N, d].
struct DictForward {
  Tensor f;      // [N, d_sae]
  Tensor recon;  // [N, d_model]
};
DictForward sae_forward(const DictionaryModule& m, const Tensor& x_normed);
DictForward transcoder_forward(const DictionaryModule& m, const Tensor& x_normed);

// Variance-normalized MSE + lambda * L1, both terms reported. The MSE
// denominator is the squared L2 norm of the centered label, per batch.
struct DictLoss {
  double total = 0, mse = 0, l1 = 0;
};
DictLoss dictionary_loss(const DictionaryModule& m, const Tensor& x_normed,
                         const Tensor& label_normed, float lambda);

struct DictTrainConfig {
  long token_budget = 500000;
  int batch = 512;
  float lr = 4e-4f;
  float beta1 = 0.0f;
  float beta2 = 0.9999f;
  int buffer_rows = 16384;
  std::uint64_t seed = 0;
  int log_every = 0;
  bool finetune = false;          // decoder + scaler only, MSE only
  bool resample_dead = false;     // optional dead-feature revival pass
  long resample_after = 100000;   // tokens of silence before resampling
};

struct DictMetricPoint {
  long tokens = 0;
  double loss = 0, mse = 0, l1 = 0, l0 = 0;
};

// Streams activations from model forwards through a shuffled buffer and
// trains every module in `mods` on its own hook site in one pass.
std::vector<std::vector<DictMetricPoint>> train_dictionaries(
    std::vector<DictionaryModule*> mods, const ModelWeights& w,
    const std::vector<TokenSequence>& corpus, const DictTrainConfig& cfg);

std::vector<DictMetricPoint> train_dictionary(DictionaryModule& m, const ModelWeights& w,
                                              const std::vector<TokenSequence>& corpus,
                                              const DictTrainConfig& cfg);

// Per-feature max activation and firing frequency over at least min_tokens.
void collect_feature_statistics(DictionaryModule& m, const ModelWeights& w,
                                const std::vector<TokenSequence>& corpus, long min_tokens);

struct PruneThresholds {
  double min_norm = 0.99;
  double min_max_act = 1.0;
  double min_fire_freq = 1e-6;
};

// A feature is pruned iff decoder norm < min_norm, or max activation
// < min_max_act, or firing frequency < min_fire_freq.
int prune_features(DictionaryModule& m, const PruneThresholds& thresholds = {});

std::vector<DictMetricPoint> finetune_decoder(DictionaryModule& m, const ModelWeights& w,
                                              const std::vector<TokenSequence>& corpus,
                                              const DictTrainConfig& cfg);

struct DictionaryMetrics {
  double l0 = 0;
  double explained_variance = 0;
  double reconstruction_ce_loss = 0;
  double original_ce_loss = 0;
  double ablated_ce_loss = 0;
  double reconstruction_ce_score = 0;
  std::string to_json() const;
};

DictionaryMetrics evaluate_dictionary(const DictionaryModule& m, const ModelWeights& w,
                                      const std::vector<TokenSequence>& eval_corpus);

// All dictionaries of one run, keyed by hook.
struct DictionarySet {
  std::map<std::string, DictionaryModule> dicts;

  void add(DictionaryModule m) { dicts[m.hook.key()] = std::move(m); }
  bool has(const HookPoint& h) const { return dicts.count(h.key()) > 0; }
  const DictionaryModule& get(const HookPoint& h) const;
  DictionaryModule& get(const HookPoint& h);
  // writer dictionaries feeding the linear graph: embed, attn outputs, MLP
  // transcoders, in residual-stream order
  std::vector<const DictionaryModule*> writers(int n_layers) const;
  void save(const std::string& dir) const;
  static DictionarySet load(const std::string& dir);
};

// Standard inventory for a model: embed SAE, per-layer attn-out SAE,
// per-layer residual SAEs (pre-attn, pre-mlp), per-layer MLP transcoder.
std::vector<HookPoint> standard_hooks(int n_layers);

}  // namespace lincirc
