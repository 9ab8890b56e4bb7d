#include "biolm/model.hpp"

#include <cmath>

#include "biolm/kernels.hpp"

namespace biolm::model {

namespace {
constexpr double kInitStd = 0.02;
}

void ModelConfig::validate() const {
  if (num_layers < 1 || hidden_size < 1 || num_heads < 1 || ffn_size < 1 ||
      max_positions < 1 || vocab_size < 1) {
    throw Error("model config: all counts must be >= 1");
  }
  if (hidden_size % num_heads != 0) {
    throw Error("model config: hidden_size must be divisible by num_heads");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw Error("model config: dropout must be in [0,1)");
  }
}

ModelConfig ModelConfig::desk_preset() {
  return ModelConfig{2, 64, 4, 256, 256, 512, 0.0};
}

ModelConfig ModelConfig::paper_preset() {
  return ModelConfig{24, 1024, 16, 4096, 1024, 42384, 0.1};
}

int64_t count_params(const ModelConfig& c) {
  const int64_t H = c.hidden_size;
  const int64_t F = c.ffn_size;
  const int64_t per_layer = 2 * H                  // ln1
                            + 3 * H * H + 3 * H    // qkv
                            + H * H + H            // attn proj
                            + 2 * H                // ln2
                            + F * H + F            // mlp fc
                            + H * F + H;           // mlp proj
  return (int64_t)c.vocab_size * H      // wte (tied output projection)
         + (int64_t)c.max_positions * H  // wpe
         + c.num_layers * per_layer + 2 * H;  // lnf
}

void ModelParams::for_each(
    const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("wte", wte);
  fn("wpe", wpe);
  for (size_t l = 0; l < layers.size(); l++) {
    const std::string p = "layers." + std::to_string(l) + ".";
    LayerParams& lp = layers[l];
    fn(p + "ln1_gain", lp.ln1_gain);
    fn(p + "ln1_bias", lp.ln1_bias);
    fn(p + "attn_qkv_w", lp.attn_qkv_w);
    fn(p + "attn_qkv_b", lp.attn_qkv_b);
    fn(p + "attn_proj_w", lp.attn_proj_w);
    fn(p + "attn_proj_b", lp.attn_proj_b);
    fn(p + "ln2_gain", lp.ln2_gain);
    fn(p + "ln2_bias", lp.ln2_bias);
    fn(p + "mlp_fc_w", lp.mlp_fc_w);
    fn(p + "mlp_fc_b", lp.mlp_fc_b);
    fn(p + "mlp_proj_w", lp.mlp_proj_w);
    fn(p + "mlp_proj_b", lp.mlp_proj_b);
  }
  fn("lnf_gain", lnf_gain);
  fn("lnf_bias", lnf_bias);
}

void ModelParams::for_each(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
  const_cast<ModelParams*>(this)->for_each(
      [&fn](const std::string& name, Tensor& t) {
        fn(name, static_cast<const Tensor&>(t));
      });
}

Tensor* ModelParams::find(const std::string& name) {
  Tensor* found = nullptr;
  for_each([&](const std::string& n, Tensor& t) {
    if (n == name) found = &t;
  });
  return found;
}

ModelParams ModelParams::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  const int64_t H = config.hidden_size;
  const int64_t F = config.ffn_size;

  ModelParams p;
  p.config = config;
  p.wte = Tensor::zeros({config.vocab_size, H});
  p.wpe = Tensor::zeros({config.max_positions, H});
  p.layers.resize(config.num_layers);
  for (auto& lp : p.layers) {
    lp.ln1_gain = Tensor::zeros({H});
    lp.ln1_bias = Tensor::zeros({H});
    lp.attn_qkv_w = Tensor::zeros({3 * H, H});
    lp.attn_qkv_b = Tensor::zeros({3 * H});
    lp.attn_proj_w = Tensor::zeros({H, H});
    lp.attn_proj_b = Tensor::zeros({H});
    lp.ln2_gain = Tensor::zeros({H});
    lp.ln2_bias = Tensor::zeros({H});
    lp.mlp_fc_w = Tensor::zeros({F, H});
    lp.mlp_fc_b = Tensor::zeros({F});
    lp.mlp_proj_w = Tensor::zeros({H, F});
    lp.mlp_proj_b = Tensor::zeros({H});
  }
  p.lnf_gain = Tensor::zeros({H});
  p.lnf_bias = Tensor::zeros({H});

  // normal(0, 0.02) for weights, zeros for biases, ones for norm gains
  p.for_each([&rng](const std::string& name, Tensor& t) {
    if (name.ends_with("_gain")) {
      t.fill(1.0);
    } else if (name.ends_with("_bias") || name.ends_with("_b")) {
      t.fill(0.0);
    } else {
      for (double& v : t.data) v = rng.gauss(0.0, kInitStd);
    }
  });
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
  ModelParams z = other;
  z.for_each([](const std::string&, Tensor& t) { t.fill(0.0); });
  return z;
}

SequencePlan plan_from_ids(const std::vector<int32_t>& ids) {
  SequencePlan plan;
  plan.reserve(ids.size());
  for (int32_t id : ids) plan.push_back(PosInput::tok(id));
  return plan;
}

namespace {

void ensure(Tensor& t, std::vector<int64_t> shape) {
  if (t.shape != shape) t = Tensor::zeros(std::move(shape));
}

// Inverted dropout; mask entries are 0 or 1/(1-p) so eval needs no rescale.
void apply_dropout(Tensor& x, Tensor& mask, double p, Rng& rng) {
  const double keep = 1.0 - p;
  for (int64_t i = 0; i < x.numel(); i++) {
    const double m = rng.uniform() < p ? 0.0 : 1.0 / keep;
    mask.data[i] = m;
    x.data[i] *= m;
  }
}

}  // namespace

void forward(const ModelParams& params, const SequencePlan& plan,
             Activations& acts, const ForwardOptions& opts) {
  const ModelConfig& cfg = params.config;
  const int T = static_cast<int>(plan.size());
  const int H = cfg.hidden_size;
  const int F = cfg.ffn_size;
  const int V = cfg.vocab_size;
  if (T == 0) throw Error("forward: empty sequence");
  if (T > cfg.max_positions) {
    throw Error("forward: sequence length " + std::to_string(T) +
                " exceeds max_positions " + std::to_string(cfg.max_positions));
  }
  const bool drop = opts.training && cfg.dropout > 0.0;
  if (drop && !opts.dropout_rng) {
    throw Error("forward: dropout requires an rng");
  }

  acts.T = T;
  ensure(acts.embedded, {T, H});
  acts.layers.resize(cfg.num_layers);
  for (auto& la : acts.layers) {
    ensure(la.ln1_out, {T, H});
    ensure(la.ln1_mean, {T});
    ensure(la.ln1_rstd, {T});
    ensure(la.qkv, {T, 3 * H});
    ensure(la.att, {cfg.num_heads, T, T});
    ensure(la.att_out, {T, H});
    ensure(la.att_proj, {T, H});
    ensure(la.res1, {T, H});
    ensure(la.ln2_out, {T, H});
    ensure(la.ln2_mean, {T});
    ensure(la.ln2_rstd, {T});
    ensure(la.fc_out, {T, F});
    ensure(la.gelu_out, {T, F});
    ensure(la.mlp_proj, {T, H});
    ensure(la.res2, {T, H});
    if (drop) {
      ensure(la.drop1_mask, {T, H});
      ensure(la.drop2_mask, {T, H});
    }
  }
  ensure(acts.lnf_out, {T, H});
  ensure(acts.lnf_mean, {T});
  ensure(acts.lnf_rstd, {T});
  ensure(acts.logits, {T, V});

  // embedding: token or prompt row, plus learned position
  for (int t = 0; t < T; t++) {
    const PosInput& pi = plan[t];
    const double* src;
    if (pi.is_prompt()) {
      if (!opts.prompt_embed) {
        throw Error("forward: plan has prompt rows but no prompt embeddings");
      }
      if (pi.prompt_row >= opts.prompt_embed->dim(0)) {
        throw Error("forward: prompt row out of range");
      }
      src = opts.prompt_embed->ptr() + (int64_t)pi.prompt_row * H;
    } else {
      if (pi.token < 0 || pi.token >= V) {
        throw Error("forward: token id " + std::to_string(pi.token) +
                    " out of range for vocab " + std::to_string(V));
      }
      src = params.wte.ptr() + (int64_t)pi.token * H;
    }
    const double* pos = params.wpe.ptr() + (int64_t)t * H;
    double* dst = acts.embedded.ptr() + (int64_t)t * H;
    for (int i = 0; i < H; i++) dst[i] = src[i] + pos[i];
  }

  const Tensor* x = &acts.embedded;
  for (int l = 0; l < cfg.num_layers; l++) {
    const LayerParams& lp = params.layers[l];
    Activations::LayerActs& la = acts.layers[l];

    kernels::layernorm_forward(la.ln1_out.ptr(), la.ln1_mean.ptr(),
                               la.ln1_rstd.ptr(), x->ptr(), lp.ln1_gain.ptr(),
                               lp.ln1_bias.ptr(), T, H);
    kernels::matmul_forward(la.qkv.ptr(), la.ln1_out.ptr(),
                            lp.attn_qkv_w.ptr(), lp.attn_qkv_b.ptr(), T, H,
                            3 * H);
    kernels::attention_forward(la.att_out.ptr(), la.att.ptr(), la.qkv.ptr(), T,
                               H, cfg.num_heads);
    kernels::matmul_forward(la.att_proj.ptr(), la.att_out.ptr(),
                            lp.attn_proj_w.ptr(), lp.attn_proj_b.ptr(), T, H,
                            H);
    if (drop) {
      apply_dropout(la.att_proj, la.drop1_mask, cfg.dropout,
                    *opts.dropout_rng);
    }
    kernels::residual_forward(la.res1.ptr(), x->ptr(), la.att_proj.ptr(),
                              (int64_t)T * H);

    kernels::layernorm_forward(la.ln2_out.ptr(), la.ln2_mean.ptr(),
                               la.ln2_rstd.ptr(), la.res1.ptr(),
                               lp.ln2_gain.ptr(), lp.ln2_bias.ptr(), T, H);
    kernels::matmul_forward(la.fc_out.ptr(), la.ln2_out.ptr(),
                            lp.mlp_fc_w.ptr(), lp.mlp_fc_b.ptr(), T, H, F);
    kernels::gelu_forward(la.gelu_out.ptr(), la.fc_out.ptr(), (int64_t)T * F);
    kernels::matmul_forward(la.mlp_proj.ptr(), la.gelu_out.ptr(),
                            lp.mlp_proj_w.ptr(), lp.mlp_proj_b.ptr(), T, F, H);
    if (drop) {
      apply_dropout(la.mlp_proj, la.drop2_mask, cfg.dropout,
                    *opts.dropout_rng);
    }
    kernels::residual_forward(la.res2.ptr(), la.res1.ptr(), la.mlp_proj.ptr(),
                              (int64_t)T * H);
    x = &la.res2;
  }

  kernels::layernorm_forward(acts.lnf_out.ptr(), acts.lnf_mean.ptr(),
                             acts.lnf_rstd.ptr(), x->ptr(),
                             params.lnf_gain.ptr(), params.lnf_bias.ptr(), T,
                             H);
  // tied output projection
  kernels::matmul_forward(acts.logits.ptr(), acts.lnf_out.ptr(),
                          params.wte.ptr(), nullptr, T, H, V);
}

void backward(const ModelParams& params, const SequencePlan& plan,
              const Activations& acts, const double* dlogits,
              ModelParams& grads, Tensor* dprompt,
              const ForwardOptions& opts) {
  const ModelConfig& cfg = params.config;
  const int T = acts.T;
  const int H = cfg.hidden_size;
  const int F = cfg.ffn_size;
  const int V = cfg.vocab_size;
  const bool drop = opts.training && cfg.dropout > 0.0;

  Tensor dx = Tensor::zeros({T, H});
  Tensor dlnf = Tensor::zeros({T, H});
  Tensor dres1 = Tensor::zeros({T, H});
  Tensor dln_out = Tensor::zeros({T, H});
  Tensor datt_out = Tensor::zeros({T, H});
  Tensor dqkv = Tensor::zeros({T, 3 * H});
  Tensor datt = Tensor::zeros({cfg.num_heads, T, T});
  Tensor dfc = Tensor::zeros({T, F});
  Tensor dgelu = Tensor::zeros({T, F});

  // head (tied): dlnf_out and dwte both come from the logits matmul
  kernels::matmul_backward(dlnf.ptr(), grads.wte.ptr(), nullptr, dlogits,
                           acts.lnf_out.ptr(), params.wte.ptr(), T, H, V);
  const Tensor& last =
      cfg.num_layers > 0 ? acts.layers.back().res2 : acts.embedded;
  kernels::layernorm_backward(dx.ptr(), grads.lnf_gain.ptr(),
                              grads.lnf_bias.ptr(), dlnf.ptr(), last.ptr(),
                              acts.lnf_mean.ptr(), acts.lnf_rstd.ptr(),
                              params.lnf_gain.ptr(), T, H);

  for (int l = cfg.num_layers - 1; l >= 0; l--) {
    const LayerParams& lp = params.layers[l];
    LayerParams& gp = grads.layers[l];
    const Activations::LayerActs& la = acts.layers[l];
    const Tensor& layer_in = l == 0 ? acts.embedded : acts.layers[l - 1].res2;

    // res2 = res1 + mlp_proj: dx flows to both branches
    Tensor& dmlp = dln_out;  // reuse scratch
    dmlp.fill(0.0);
    if (drop) {
      for (int64_t i = 0; i < (int64_t)T * H; i++) {
        dmlp.data[i] = dx.data[i] * la.drop2_mask.data[i];
      }
    } else {
      dmlp.data.assign(dx.data.begin(), dx.data.end());
    }
    dgelu.fill(0.0);
    kernels::matmul_backward(dgelu.ptr(), gp.mlp_proj_w.ptr(),
                             gp.mlp_proj_b.ptr(), dmlp.ptr(),
                             la.gelu_out.ptr(), lp.mlp_proj_w.ptr(), T, F, H);
    dfc.fill(0.0);
    kernels::gelu_backward(dfc.ptr(), la.fc_out.ptr(), dgelu.ptr(),
                           (int64_t)T * F);
    Tensor dln2 = Tensor::zeros({T, H});
    kernels::matmul_backward(dln2.ptr(), gp.mlp_fc_w.ptr(), gp.mlp_fc_b.ptr(),
                             dfc.ptr(), la.ln2_out.ptr(), lp.mlp_fc_w.ptr(), T,
                             H, F);
    dres1.fill(0.0);
    kernels::layernorm_backward(dres1.ptr(), gp.ln2_gain.ptr(),
                                gp.ln2_bias.ptr(), dln2.ptr(), la.res1.ptr(),
                                la.ln2_mean.ptr(), la.ln2_rstd.ptr(),
                                lp.ln2_gain.ptr(), T, H);
    // + the straight-through residual path
    for (int64_t i = 0; i < (int64_t)T * H; i++) dres1.data[i] += dx.data[i];

    // res1 = x + att_proj
    Tensor& datt_proj = dmlp;
    if (drop) {
      for (int64_t i = 0; i < (int64_t)T * H; i++) {
        datt_proj.data[i] = dres1.data[i] * la.drop1_mask.data[i];
      }
    } else {
      datt_proj.data.assign(dres1.data.begin(), dres1.data.end());
    }
    datt_out.fill(0.0);
    kernels::matmul_backward(datt_out.ptr(), gp.attn_proj_w.ptr(),
                             gp.attn_proj_b.ptr(), datt_proj.ptr(),
                             la.att_out.ptr(), lp.attn_proj_w.ptr(), T, H, H);
    dqkv.fill(0.0);
    kernels::attention_backward(dqkv.ptr(), datt.ptr(), datt_out.ptr(),
                                la.qkv.ptr(), la.att.ptr(), T, H,
                                cfg.num_heads);
    Tensor dln1 = Tensor::zeros({T, H});
    kernels::matmul_backward(dln1.ptr(), gp.attn_qkv_w.ptr(),
                             gp.attn_qkv_b.ptr(), dqkv.ptr(), la.ln1_out.ptr(),
                             lp.attn_qkv_w.ptr(), T, H, 3 * H);
    dx.fill(0.0);
    kernels::layernorm_backward(dx.ptr(), gp.ln1_gain.ptr(), gp.ln1_bias.ptr(),
                                dln1.ptr(), layer_in.ptr(), la.ln1_mean.ptr(),
                                la.ln1_rstd.ptr(), lp.ln1_gain.ptr(), T, H);
    for (int64_t i = 0; i < (int64_t)T * H; i++) dx.data[i] += dres1.data[i];
  }

  // embedding scatter
  for (int t = 0; t < T; t++) {
    const PosInput& pi = plan[t];
    const double* d = dx.ptr() + (int64_t)t * H;
    double* dpos = grads.wpe.ptr() + (int64_t)t * H;
    for (int i = 0; i < H; i++) dpos[i] += d[i];
    if (pi.is_prompt()) {
      if (!dprompt) throw Error("backward: plan has prompt rows but no dprompt");
      double* dst = dprompt->ptr() + (int64_t)pi.prompt_row * H;
      for (int i = 0; i < H; i++) dst[i] += d[i];
    } else {
      double* dst = grads.wte.ptr() + (int64_t)pi.token * H;
      for (int i = 0; i < H; i++) dst[i] += d[i];
    }
  }
}

Tensor forward_logits(const ModelParams& params,
                      const std::vector<int32_t>& ids) {
  Activations acts;
  forward(params, plan_from_ids(ids), acts);
  return acts.logits;
}

AttentionOutput multi_head_attention(const Tensor& x, const LayerParams& layer,
                                     int num_heads) {
  const int T = static_cast<int>(x.dim(0));
  const int H = static_cast<int>(x.dim(1));
  if (H % num_heads != 0) {
    throw Error("multi_head_attention: hidden size not divisible by heads");
  }
  Tensor qkv = Tensor::zeros({T, 3 * H});
  kernels::matmul_forward(qkv.ptr(), x.ptr(), layer.attn_qkv_w.ptr(),
                          layer.attn_qkv_b.ptr(), T, H, 3 * H);
  AttentionOutput out;
  out.weights = Tensor::zeros({num_heads, T, T});
  Tensor heads = Tensor::zeros({T, H});
  kernels::attention_forward(heads.ptr(), out.weights.ptr(), qkv.ptr(), T, H,
                             num_heads);
  out.hidden = Tensor::zeros({T, H});
  kernels::matmul_forward(out.hidden.ptr(), heads.ptr(),
                          layer.attn_proj_w.ptr(), layer.attn_proj_b.ptr(), T,
                          H, H);
  return out;
}

}  // namespace biolm::model
