#include "lincirc/model.hpp"

#include <nlohmann/json.hpp>

#include "lincirc/ops.hpp"
#include "lincirc/tensor_io.hpp"

namespace lincirc {

using nlohmann::json;

void ModelConfig::validate() const {
  if (d_model != n_heads * d_head)
    fail("config-error", "model config: d_model must equal n_heads * d_head");
  if (n_layers < 1 || vocab_size < 2 || max_seq_len < 2 || d_mlp < 1)
    fail("config-error", "model config: degenerate dimensions");
}

std::string ModelConfig::to_json() const {
  json j{{"n_layers", n_layers},   {"d_model", d_model},       {"n_heads", n_heads},
         {"d_head", d_head},       {"d_mlp", d_mlp},           {"vocab_size", vocab_size},
         {"max_seq_len", max_seq_len}, {"layernorm", "pre"}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& s) {
  json j = json::parse(s);
  ModelConfig c;
  c.n_layers = j.at("n_layers").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_head = j.at("d_head").get<int>();
  c.d_mlp = j.at("d_mlp").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.validate();
  return c;
}

namespace {

Tensor gaussian(std::vector<int> shape, float std, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.data) v = static_cast<float>(rng.normal(0.0, std));
  return t;
}

}  // namespace

ModelWeights ModelWeights::init(const ModelConfig& cfg, Rng rng) {
  cfg.validate();
  ModelWeights w;
  w.cfg = cfg;
  const float std = 0.02f;
  // residual projections scaled down by depth, GPT-2 style
  const float resid_std = std / std::sqrt(2.0f * static_cast<float>(cfg.n_layers));
  w.wte = gaussian({cfg.vocab_size, cfg.d_model}, std, rng);
  w.wpe = gaussian({cfg.max_seq_len, cfg.d_model}, std, rng);
  for (int l = 0; l < cfg.n_layers; ++l) {
    LayerWeights lw;
    lw.ln1_g = Tensor::full({cfg.d_model}, 1.0f);
    lw.ln1_b = Tensor::zeros({cfg.d_model});
    lw.wq = gaussian({cfg.d_model, cfg.d_model}, std, rng);
    lw.wk = gaussian({cfg.d_model, cfg.d_model}, std, rng);
    lw.wv = gaussian({cfg.d_model, cfg.d_model}, std, rng);
    lw.bq = Tensor::zeros({cfg.d_model});
    lw.bk = Tensor::zeros({cfg.d_model});
    lw.bv = Tensor::zeros({cfg.d_model});
    lw.wo = gaussian({cfg.d_model, cfg.d_model}, resid_std, rng);
    lw.bo = Tensor::zeros({cfg.d_model});
    lw.ln2_g = Tensor::full({cfg.d_model}, 1.0f);
    lw.ln2_b = Tensor::zeros({cfg.d_model});
    lw.w_in = gaussian({cfg.d_model, cfg.d_mlp}, std, rng);
    lw.b_in = Tensor::zeros({cfg.d_mlp});
    lw.w_out = gaussian({cfg.d_mlp, cfg.d_model}, resid_std, rng);
    lw.b_out = Tensor::zeros({cfg.d_model});
    w.layers.push_back(std::move(lw));
  }
  w.lnf_g = Tensor::full({cfg.d_model}, 1.0f);
  w.lnf_b = Tensor::zeros({cfg.d_model});
  w.w_unembed = gaussian({cfg.d_model, cfg.vocab_size}, std, rng);
  return w;
}

std::vector<Tensor*> ModelWeights::params() {
  std::vector<Tensor*> p{&wte, &wpe};
  for (auto& l : layers)
    for (Tensor* t : {&l.ln1_g, &l.ln1_b, &l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo,
                      &l.ln2_g, &l.ln2_b, &l.w_in, &l.b_in, &l.w_out, &l.b_out})
      p.push_back(t);
  p.push_back(&lnf_g);
  p.push_back(&lnf_b);
  p.push_back(&w_unembed);
  return p;
}

std::vector<const Tensor*> ModelWeights::params() const {
  auto p = const_cast<ModelWeights*>(this)->params();
  return {p.begin(), p.end()};
}

std::vector<std::string> ModelWeights::param_names() const {
  std::vector<std::string> names{"wte", "wpe"};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::string pre = "layer" + std::to_string(l) + ".";
    for (const char* n : {"ln1_g", "ln1_b", "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
                          "ln2_g", "ln2_b", "w_in", "b_in", "w_out", "b_out"})
      names.push_back(pre + n);
  }
  names.push_back("lnf_g");
  names.push_back("lnf_b");
  names.push_back("w_unembed");
  return names;
}

void ModelWeights::save(const std::string& path_prefix, const std::string& extra_meta_json) const {
  std::vector<NamedTensor> ts;
  auto names = param_names();
  auto ps = params();
  for (std::size_t i = 0; i < ps.size(); ++i) ts.push_back({names[i], *ps[i]});
  save_archive(path_prefix + ".lcgt", ts);
  json meta;
  meta["schema_version"] = 1;
  meta["config"] = json::parse(cfg.to_json());
  if (!extra_meta_json.empty()) meta["training"] = json::parse(extra_meta_json);
  write_text_file(path_prefix + ".json", meta.dump(2) + "\n");
}

ModelWeights ModelWeights::load(const std::string& path_prefix) {
  json meta = json::parse(read_text_file(path_prefix + ".json"));
  ModelConfig cfg = ModelConfig::from_json(meta.at("config").dump());
  ModelWeights w = ModelWeights::init(cfg, Rng(0));
  auto ar = load_archive(path_prefix + ".lcgt");
  auto names = w.param_names();
  auto ps = w.params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Tensor& t = archive_get(ar, names[i]);
    if (t.shape != ps[i]->shape) fail("io-error", "checkpoint shape mismatch for " + names[i]);
    *ps[i] = t;
  }
  return w;
}

double ActivationCache::pattern_at(int layer, int head, int qpos, int kpos) const {
  const auto& lc = layers[static_cast<std::size_t>(layer)];
  return lc.pattern.at(head, qpos * seq_len + kpos);
}

double ActivationCache::score_at(int layer, int head, int qpos, int kpos) const {
  const auto& lc = layers[static_cast<std::size_t>(layer)];
  return lc.scores.at(head, qpos * seq_len + kpos);
}

const Tensor& ActivationCache::site_activation(const HookPoint& hook) const {
  switch (hook.site) {
    case Site::WordEmbed: return tok_emb;
    case Site::AttnOut: return layers[static_cast<std::size_t>(hook.layer)].attn_out;
    case Site::ResidPreAttn: return layers[static_cast<std::size_t>(hook.layer)].resid_pre_attn;
    case Site::ResidPreMlp: return layers[static_cast<std::size_t>(hook.layer)].resid_pre_mlp;
    case Site::Mlp: return layers[static_cast<std::size_t>(hook.layer)].mlp_out;
  }
  fail("config-error", "bad hook site");
}

namespace {

struct ReplaceSpec {
  bool active = false;
  HookPoint hook;
  const Tensor* replacement = nullptr;
};

// Single forward implementation; caching and hook replacement are optional.
// Computation at position i never reads positions > i (causal masking before
// softmax, per-token LN/MLP), so logits are bitwise independent of future
// tokens.
Tensor forward_impl(const ModelWeights& w, std::span<const int> tokens, ActivationCache* cache,
                    const ReplaceSpec& rep) {
  const ModelConfig& cfg = w.cfg;
  int seq = static_cast<int>(tokens.size());
  if (seq < 1 || seq > cfg.max_seq_len) fail("input-error", "sequence length out of range");
  for (int t : tokens)
    if (t < 0 || t >= cfg.vocab_size) fail("input-error", "token id out of range");

  auto maybe_replace = [&](Site site, int layer, Tensor& act) {
    if (rep.active && rep.hook.site == site &&
        (site == Site::WordEmbed || rep.hook.layer == layer)) {
      if (!act.same_shape(*rep.replacement))
        fail("shape-error", "replacement shape mismatch at hook");
      act = *rep.replacement;
    }
  };

  Tensor tok_emb = Tensor::zeros({seq, cfg.d_model});
  for (int i = 0; i < seq; ++i) {
    const float* src = w.wte.row(tokens[static_cast<std::size_t>(i)]);
    float* dst = tok_emb.row(i);
    for (int j = 0; j < cfg.d_model; ++j) dst[j] = src[j];
  }
  maybe_replace(Site::WordEmbed, 0, tok_emb);
  Tensor pos_emb = Tensor::zeros({seq, cfg.d_model});
  for (int i = 0; i < seq; ++i) {
    const float* src = w.wpe.row(i);
    float* dst = pos_emb.row(i);
    for (int j = 0; j < cfg.d_model; ++j) dst[j] = src[j];
  }
  Tensor resid = ops::add(tok_emb, pos_emb);

  if (cache) {
    cache->seq_len = seq;
    cache->tok_emb = tok_emb;
    cache->pos_emb = pos_emb;
    cache->layers.resize(static_cast<std::size_t>(cfg.n_layers));
  }

  int dh = cfg.d_head;
  float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(dh));
  std::vector<int> limits(static_cast<std::size_t>(seq));
  for (int i = 0; i < seq; ++i) limits[static_cast<std::size_t>(i)] = i + 1;

  for (int l = 0; l < cfg.n_layers; ++l) {
    const LayerWeights& lw = w.layers[static_cast<std::size_t>(l)];
    auto* lc = cache ? &cache->layers[static_cast<std::size_t>(l)] : nullptr;
    maybe_replace(Site::ResidPreAttn, l, resid);
    if (lc) lc->resid_pre_attn = resid;

    ops::LnStats ln1_stats;
    Tensor ln1 = ops::layernorm(resid, lw.ln1_g, lw.ln1_b, kLnEps, &ln1_stats);
    Tensor q = ops::add_rowvec(ops::matmul(ln1, lw.wq), lw.bq);
    Tensor k = ops::add_rowvec(ops::matmul(ln1, lw.wk), lw.bk);
    Tensor v = ops::add_rowvec(ops::matmul(ln1, lw.wv), lw.bv);

    Tensor attn_ctx = Tensor::zeros({seq, cfg.d_model});
    Tensor scores_all, pattern_all;
    if (lc) {
      scores_all = Tensor::zeros({cfg.n_heads, seq * seq});
      pattern_all = Tensor::zeros({cfg.n_heads, seq * seq});
    }
    Tensor qh = Tensor::zeros({seq, dh}), kh = qh, vh = qh;
    for (int h = 0; h < cfg.n_heads; ++h) {
      for (int i = 0; i < seq; ++i) {
        for (int j = 0; j < dh; ++j) {
          qh.at(i, j) = q.at(i, h * dh + j);
          kh.at(i, j) = k.at(i, h * dh + j);
          vh.at(i, j) = v.at(i, h * dh + j);
        }
      }
      Tensor scores = ops::matmul(qh, kh, false, true);
      for (auto& s : scores.data) s *= inv_sqrt;
      Tensor pat = ops::softmax_rows(scores, &limits);
      Tensor ctx = ops::matmul(pat, vh);
      for (int i = 0; i < seq; ++i)
        for (int j = 0; j < dh; ++j) attn_ctx.at(i, h * dh + j) = ctx.at(i, j);
      if (lc) {
        for (int i = 0; i < seq; ++i)
          for (int j = 0; j <= i; ++j) {
            scores_all.at(h, i * seq + j) = scores.at(i, j);
            pattern_all.at(h, i * seq + j) = pat.at(i, j);
          }
      }
    }
    Tensor attn_out = ops::add_rowvec(ops::matmul(attn_ctx, lw.wo), lw.bo);
    attn_out.check_finite("attn_out");
    maybe_replace(Site::AttnOut, l, attn_out);
    resid = ops::add(resid, attn_out);
    maybe_replace(Site::ResidPreMlp, l, resid);

    if (lc) {
      lc->ln1_inv_sigma = Tensor::zeros({seq});
      for (int i = 0; i < seq; ++i)
        lc->ln1_inv_sigma.data[static_cast<std::size_t>(i)] =
            static_cast<float>(ln1_stats.inv_sigma[static_cast<std::size_t>(i)]);
      lc->scores = std::move(scores_all);
      lc->pattern = std::move(pattern_all);
      lc->attn_out = attn_out;
      lc->resid_pre_mlp = resid;
    }

    ops::LnStats ln2_stats;
    Tensor ln2 = ops::layernorm(resid, lw.ln2_g, lw.ln2_b, kLnEps, &ln2_stats);
    Tensor hpre = ops::add_rowvec(ops::matmul(ln2, lw.w_in), lw.b_in);
    Tensor hact = ops::gelu(hpre);
    Tensor mlp_out = ops::add_rowvec(ops::matmul(hact, lw.w_out), lw.b_out);
    mlp_out.check_finite("mlp_out");
    maybe_replace(Site::Mlp, l, mlp_out);
    resid = ops::add(resid, mlp_out);

    if (lc) {
      lc->ln2_inv_sigma = Tensor::zeros({seq});
      for (int i = 0; i < seq; ++i)
        lc->ln2_inv_sigma.data[static_cast<std::size_t>(i)] =
            static_cast<float>(ln2_stats.inv_sigma[static_cast<std::size_t>(i)]);
      lc->mlp_out = mlp_out;
    }
  }

  ops::LnStats lnf_stats;
  Tensor lnf = ops::layernorm(resid, w.lnf_g, w.lnf_b, kLnEps, &lnf_stats);
  Tensor logits = ops::matmul(lnf, w.w_unembed);
  logits.check_finite("logits");
  if (cache) {
    cache->resid_final = resid;
    cache->lnf_inv_sigma = Tensor::zeros({seq});
    for (int i = 0; i < seq; ++i)
      cache->lnf_inv_sigma.data[static_cast<std::size_t>(i)] =
          static_cast<float>(lnf_stats.inv_sigma[static_cast<std::size_t>(i)]);
    cache->logits = logits;
  }
  return logits;
}

}  // namespace

ActivationCache forward_with_cache(const ModelWeights& w, std::span<const int> tokens) {
  ActivationCache cache;
  forward_impl(w, tokens, &cache, {});
  return cache;
}

Tensor forward_logits(const ModelWeights& w, std::span<const int> tokens) {
  return forward_impl(w, tokens, nullptr, {});
}

Tensor forward_with_replacement(const ModelWeights& w, std::span<const int> tokens,
                                const HookPoint& hook, const Tensor& replacement) {
  ReplaceSpec rep;
  rep.active = true;
  rep.hook = hook;
  rep.replacement = &replacement;
  return forward_impl(w, tokens, nullptr, rep);
}

}  // namespace lincirc
