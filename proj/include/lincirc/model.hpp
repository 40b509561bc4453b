#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lincirc/hooks.hpp"
#include "lincirc/rng.hpp"
#include "lincirc/tensor.hpp"

namespace lincirc {

constexpr double kLnEps = 1e-5;

struct ModelConfig {
  int n_layers = 4;
  int d_model = 128;
  int n_heads = 4;
  int d_head = 32;
  int d_mlp = 512;
  int vocab_size = 128;
  int max_seq_len = 64;

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& j);
};

struct LayerWeights {
  Tensor ln1_g, ln1_b;        // [d]
  Tensor wq, wk, wv;          // [d, d] (heads in column blocks)
  Tensor bq, bk, bv;          // [d]
  Tensor wo, bo;              // [d, d], [d]
  Tensor ln2_g, ln2_b;        // [d]
  Tensor w_in, b_in;          // [d, d_mlp], [d_mlp]
  Tensor w_out, b_out;        // [d_mlp, d], [d]
};

// Pre-LN decoder-only transformer. Weights are immutable during inference.
struct ModelWeights {
  ModelConfig cfg;
  Tensor wte;  // [vocab, d]
  Tensor wpe;  // [max_seq, d]
  std::vector<LayerWeights> layers;
  Tensor lnf_g, lnf_b;  // [d]
  Tensor w_unembed;     // [d, vocab]

  static ModelWeights init(const ModelConfig& cfg, Rng rng);
  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;
  std::vector<std::string> param_names() const;

  void save(const std::string& path_prefix, const std::string& extra_meta_json = "") const;
  static ModelWeights load(const std::string& path_prefix);
};

// Everything one forward pass exposes, per layer and token position.
struct ActivationCache {
  int seq_len = 0;
  Tensor tok_emb, pos_emb;  // [S, d]
  struct LayerCache {
    Tensor resid_pre_attn;  // [S, d]
    Tensor ln1_inv_sigma;   // [S] 1/sqrt(var+eps), frozen-LN scale
    Tensor scores;          // [H, S*S] pre-softmax, scaled by 1/sqrt(dh)
    Tensor pattern;         // [H, S*S] post-softmax, causal
    Tensor attn_out;        // [S, d]
    Tensor resid_pre_mlp;   // [S, d]
    Tensor ln2_inv_sigma;   // [S]
    Tensor mlp_out;         // [S, d]
  };
  std::vector<LayerCache> layers;
  Tensor resid_final;     // [S, d]
  Tensor lnf_inv_sigma;   // [S]
  Tensor logits;          // [S, vocab]

  double pattern_at(int layer, int head, int qpos, int kpos) const;
  double score_at(int layer, int head, int qpos, int kpos) const;
  // raw activation rows for a dictionary hook site: [S, d]
  const Tensor& site_activation(const HookPoint& hook) const;
};

ActivationCache forward_with_cache(const ModelWeights& w, std::span<const int> tokens);
Tensor forward_logits(const ModelWeights& w, std::span<const int> tokens);

// Forward pass with the activation at one hook replaced by a caller-supplied
// [S, d] tensor; downstream computation sees the replacement.
Tensor forward_with_replacement(const ModelWeights& w, std::span<const int> tokens,
                                const HookPoint& hook, const Tensor& replacement);

}  // namespace lincirc
