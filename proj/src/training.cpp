#include "biolm/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "biolm/checkpoint.hpp"
#include "biolm/kernels.hpp"

namespace biolm::train {

void TrainConfig::validate() const {
  if (warmup_steps < 1) throw ConfigError("warmup_steps must be >= 1");
  if (peak_lr <= 0.0) throw ConfigError("peak_lr must be > 0");
  if (tokens_per_batch < 1) throw ConfigError("tokens_per_batch must be >= 1");
  if (accumulation_steps < 1) {
    throw ConfigError("accumulation_steps must be >= 1");
  }
  if (seq_len < 2) throw ConfigError("seq_len must be >= 2");
}

double lr_at(int64_t step, const TrainConfig& cfg) {
  if (step < 1) throw Error("lr_at: step must be >= 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(cfg.warmup_steps);
  return cfg.peak_lr * std::min(s / w, std::sqrt(w / s));
}

double lm_loss(const Tensor& logits, const std::vector<int32_t>& targets,
               const std::vector<uint8_t>& mask) {
  const int T = static_cast<int>(logits.dim(0));
  const int V = static_cast<int>(logits.dim(1));
  if (static_cast<int>(targets.size()) != T ||
      static_cast<int>(mask.size()) != T) {
    throw Error("lm_loss: targets/mask size must match logit rows");
  }
  double sum = 0.0;
  int64_t count = 0;
  for (int t = 0; t < T; t++) {
    if (!mask[t]) continue;
    const int32_t y = targets[t];
    if (y < 0 || y >= V) throw Error("lm_loss: target id out of range");
    const double* row = logits.ptr() + (int64_t)t * V;
    double maxval = row[0];
    for (int v = 1; v < V; v++) maxval = std::max(maxval, row[v]);
    double lse = 0.0;
    for (int v = 0; v < V; v++) lse += std::exp(row[v] - maxval);
    sum += std::log(lse) + maxval - row[y];
    count++;
  }
  if (count == 0) throw Error("lm_loss: mask selects no positions");
  return sum / static_cast<double>(count);
}

namespace {

struct SumLoss {
  double loss_sum = 0.0;
  int64_t count = 0;
};

// Gradient of the *sum* of masked -log p; accumulates into grads/dprompt.
SumLoss accumulate_sum_grads(const model::ModelParams& params,
                             const prompt::AssembledSequence& seq,
                             const Tensor* prompt_embed,
                             model::ModelParams& grads, Tensor* dprompt,
                             model::Activations& acts,
                             const model::ForwardOptions& opts) {
  model::ForwardOptions fwd = opts;
  fwd.prompt_embed = prompt_embed;
  model::forward(params, seq.plan, acts, fwd);

  const int T = acts.T;
  const int V = params.config.vocab_size;
  Tensor dlogits = Tensor::zeros({T, V});
  Tensor probs = Tensor::zeros({T, V});
  kernels::softmax_rows(probs.ptr(), acts.logits.ptr(), T, V);

  SumLoss out;
  for (int t = 0; t < T; t++) {
    if (!seq.mask[t]) continue;
    const int32_t y = seq.targets[t];
    if (y < 0 || y >= V) throw Error("training: target id out of range");
    const double* p = probs.ptr() + (int64_t)t * V;
    double* d = dlogits.ptr() + (int64_t)t * V;
    for (int v = 0; v < V; v++) d[v] = p[v];
    d[y] -= 1.0;
    out.loss_sum += -std::log(std::max(p[y], 1e-300));
    out.count++;
  }
  if (out.count == 0) throw Error("training: loss mask selects no positions");
  model::backward(params, seq.plan, acts, dlogits.ptr(), grads, dprompt, fwd);
  return out;
}

void check_finite(const model::ModelParams& grads, const Tensor* dprompt) {
  grads.for_each([](const std::string& name, const Tensor& t) {
    for (double v : t.data) {
      if (std::isnan(v)) throw Error("NaN gradient in tensor " + name);
    }
  });
  if (dprompt) {
    for (double v : dprompt->data) {
      if (std::isnan(v)) throw Error("NaN gradient in tensor prompt.embed");
    }
  }
}

void scale_params(model::ModelParams& p, double s) {
  p.for_each([s](const std::string&, Tensor& t) {
    for (double& v : t.data) v *= s;
  });
}

void axpy_params(model::ModelParams& acc, const model::ModelParams& x,
                 double a) {
  auto* xs = const_cast<model::ModelParams*>(&x);
  std::vector<Tensor*> xt;
  xs->for_each([&xt](const std::string&, Tensor& t) { xt.push_back(&t); });
  size_t i = 0;
  acc.for_each([&](const std::string&, Tensor& t) {
    const Tensor& src = *xt[i++];
    for (size_t k = 0; k < t.data.size(); k++) t.data[k] += a * src.data[k];
  });
}

}  // namespace

double loss_and_grad(const model::ModelParams& params,
                     const prompt::AssembledSequence& seq,
                     const Tensor* prompt_embed, model::ModelParams& grads,
                     Tensor* dprompt) {
  grads.for_each([](const std::string&, Tensor& t) { t.fill(0.0); });
  if (dprompt) dprompt->fill(0.0);
  model::Activations acts;
  const SumLoss s = accumulate_sum_grads(params, seq, prompt_embed, grads,
                                         dprompt, acts, {});
  const double inv = 1.0 / static_cast<double>(s.count);
  scale_params(grads, inv);
  if (dprompt) {
    for (double& v : dprompt->data) v *= inv;
  }
  check_finite(grads, dprompt);
  return s.loss_sum * inv;
}

double sequence_loss(const model::ModelParams& params,
                     const prompt::AssembledSequence& seq,
                     const Tensor* prompt_embed) {
  model::Activations acts;
  model::ForwardOptions opts;
  opts.prompt_embed = prompt_embed;
  model::forward(params, seq.plan, acts, opts);
  return lm_loss(acts.logits, seq.targets, seq.mask);
}

AdamState AdamState::make(const model::ModelParams& params,
                          const Tensor* prompt_embed) {
  AdamState st;
  st.m = model::ModelParams::zeros_like(params);
  st.v = model::ModelParams::zeros_like(params);
  if (prompt_embed) {
    st.prompt_m = Tensor::zeros(prompt_embed->shape);
    st.prompt_v = Tensor::zeros(prompt_embed->shape);
  }
  return st;
}

void adam_step_tensor(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v,
                      int64_t t, double lr, const TrainConfig& cfg) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (size_t i = 0; i < param.data.size(); i++) {
    const double g = grad.data[i];
    m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g;
    v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = m.data[i] / bc1;
    const double vhat = v.data[i] / bc2;
    param.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  }
}

void adam_step(model::ModelParams& params, const model::ModelParams& grads,
               Tensor* prompt_embed, const Tensor* prompt_grads,
               AdamState& state, double lr, const TrainConfig& cfg) {
  state.t++;
  std::vector<Tensor*> gt, mt, vt;
  const_cast<model::ModelParams&>(grads).for_each(
      [&gt](const std::string&, Tensor& t) { gt.push_back(&t); });
  state.m.for_each([&mt](const std::string&, Tensor& t) { mt.push_back(&t); });
  state.v.for_each([&vt](const std::string&, Tensor& t) { vt.push_back(&t); });
  size_t i = 0;
  params.for_each([&](const std::string&, Tensor& t) {
    adam_step_tensor(t, *gt[i], *mt[i], *vt[i], state.t, lr, cfg);
    i++;
  });
  if (prompt_embed && prompt_grads) {
    adam_step_tensor(*prompt_embed, *prompt_grads, state.prompt_m,
                     state.prompt_v, state.t, lr, cfg);
  }
}

namespace {

struct LossLog {
  std::ofstream os;
  explicit LossLog(const std::string& path) : os(path) {
    if (!os) throw Error("cannot open for writing: " + path);
    os << "step,loss,lr\n";
  }
  void row(int64_t step, double loss, double lr) {
    os << step << ',' << loss << ',' << lr << '\n';
  }
};

// Greedy fairseq-style packing: add sequences while the token budget holds,
// always at least one per micro-batch.
std::vector<std::vector<size_t>> pack_micro_batches(
    const std::vector<size_t>& order,
    const std::vector<prompt::AssembledSequence>& seqs, int tokens_per_batch) {
  std::vector<std::vector<size_t>> batches;
  std::vector<size_t> cur;
  size_t tokens = 0;
  for (size_t idx : order) {
    const size_t n = seqs[idx].plan.size();
    if (!cur.empty() && tokens + n > static_cast<size_t>(tokens_per_batch)) {
      batches.push_back(std::move(cur));
      cur.clear();
      tokens = 0;
    }
    cur.push_back(idx);
    tokens += n;
  }
  if (!cur.empty()) batches.push_back(std::move(cur));
  return batches;
}

// Shared optimizer driver: walks micro-batches, accumulates mean gradients
// scaled by 1/accumulation_steps, and steps Adam every accumulation window.
class StepEngine {
 public:
  StepEngine(model::ModelParams& params, Tensor* prompt_embed,
             const TrainConfig& cfg)
      : params_(params),
        prompt_(prompt_embed),
        cfg_(cfg),
        grads_(model::ModelParams::zeros_like(params)),
        acc_(model::ModelParams::zeros_like(params)),
        state_(AdamState::make(params, prompt_embed)) {
    if (prompt_) {
      prompt_grads_ = Tensor::zeros(prompt_->shape);
      prompt_acc_ = Tensor::zeros(prompt_->shape);
    }
  }

  // Returns the micro-batch mean loss, or NaN when the model diverged.
  double micro_batch(const std::vector<prompt::AssembledSequence>& seqs,
                     const std::vector<size_t>& batch,
                     const model::ForwardOptions& opts) {
    grads_.for_each([](const std::string&, Tensor& t) { t.fill(0.0); });
    if (prompt_) prompt_grads_.fill(0.0);
    double loss_sum = 0.0;
    int64_t count = 0;
    for (size_t idx : batch) {
      const SumLoss s =
          accumulate_sum_grads(params_, seqs[idx], prompt_, grads_,
                               prompt_ ? &prompt_grads_ : nullptr, acts_, opts);
      loss_sum += s.loss_sum;
      count += s.count;
    }
    const double mean = loss_sum / static_cast<double>(count);
    if (!std::isfinite(mean)) return std::nan("");
    check_finite(grads_, prompt_ ? &prompt_grads_ : nullptr);

    const double scale =
        1.0 / (static_cast<double>(count) *
               static_cast<double>(cfg_.accumulation_steps));
    axpy_params(acc_, grads_, scale);
    if (prompt_) {
      for (size_t k = 0; k < prompt_acc_.data.size(); k++) {
        prompt_acc_.data[k] += scale * prompt_grads_.data[k];
      }
    }
    micro_in_window_++;
    window_loss_ += mean;
    return mean;
  }

  bool window_full() const {
    return micro_in_window_ == cfg_.accumulation_steps;
  }

  bool pending() const { return micro_in_window_ > 0; }

  // Applies the accumulated gradient; returns the window's mean loss.
  double step(double lr) {
    adam_step(params_, acc_, prompt_, prompt_ ? &prompt_acc_ : nullptr, state_,
              lr, cfg_);
    const double loss = window_loss_ / micro_in_window_;
    acc_.for_each([](const std::string&, Tensor& t) { t.fill(0.0); });
    if (prompt_) prompt_acc_.fill(0.0);
    micro_in_window_ = 0;
    window_loss_ = 0.0;
    return loss;
  }

 private:
  model::ModelParams& params_;
  Tensor* prompt_;
  const TrainConfig& cfg_;
  model::ModelParams grads_, acc_;
  Tensor prompt_grads_, prompt_acc_;
  AdamState state_;
  model::Activations acts_;
  int micro_in_window_ = 0;
  double window_loss_ = 0.0;
};

std::vector<prompt::AssembledSequence> make_lm_windows(
    const std::vector<std::string>& doc_texts, const bpe::Encoder& encoder,
    int seq_len) {
  std::vector<int32_t> stream;
  for (const std::string& text : doc_texts) {
    const std::vector<int32_t> ids = encoder.encode(text);
    stream.insert(stream.end(), ids.begin(), ids.end());
    stream.push_back(encoder.vocab().eos_id);
  }
  std::vector<prompt::AssembledSequence> windows;
  for (size_t start = 0; start + 1 < stream.size();
       start += static_cast<size_t>(seq_len)) {
    const size_t take =
        std::min(static_cast<size_t>(seq_len) + 1, stream.size() - start);
    if (take < 2) break;
    prompt::AssembledSequence w;
    const size_t n = take - 1;
    for (size_t j = 0; j < n; j++) {
      w.plan.push_back(model::PosInput::tok(stream[start + j]));
    }
    w.targets.resize(n);
    w.mask.assign(n, 1);
    for (size_t j = 0; j < n; j++) {
      w.targets[j] = stream[start + j + 1];
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

nlohmann::ordered_json train_config_meta(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["peak_lr"] = cfg.peak_lr;
  j["warmup_steps"] = cfg.warmup_steps;
  j["tokens_per_batch"] = cfg.tokens_per_batch;
  j["accumulation_steps"] = cfg.accumulation_steps;
  j["seed"] = cfg.seed;
  return j;
}

}  // namespace

TrainResult pretrain_loop(const std::vector<std::string>& doc_texts,
                          const bpe::Encoder& encoder,
                          const model::ModelConfig& model_cfg,
                          const TrainConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  model_cfg.validate();
  std::filesystem::create_directories(out_dir);

  const std::vector<prompt::AssembledSequence> windows =
      make_lm_windows(doc_texts, encoder, cfg.seq_len);
  if (windows.empty()) throw Error("pretrain: corpus produced no windows");

  Rng rng(cfg.seed);
  model::ModelParams params = model::ModelParams::init(model_cfg, rng);
  Rng drop_rng = rng.fork(1);
  Rng order_rng = rng.fork(2);

  model::ForwardOptions opts;
  opts.training = !cfg.deterministic && model_cfg.dropout > 0.0;
  opts.dropout_rng = &drop_rng;

  StepEngine engine(params, nullptr, cfg);
  TrainResult result;
  result.loss_log = out_dir + "/loss_log.csv";
  LossLog log(result.loss_log);

  model::ModelParams last_good = params;
  std::vector<size_t> order(windows.size());
  for (size_t i = 0; i < order.size(); i++) order[i] = i;

  int64_t step = 0;
  bool done = false;
  while (!done) {
    order_rng.shuffle(order);
    const auto batches =
        pack_micro_batches(order, windows, cfg.tokens_per_batch);
    for (const auto& batch : batches) {
      const double micro = engine.micro_batch(windows, batch, opts);
      if (std::isnan(micro)) {
        warn("pretrain: loss diverged at step " + std::to_string(step + 1) +
             "; aborting with last good checkpoint");
        result.diverged = true;
        params = last_good;
        done = true;
        break;
      }
      if (!engine.window_full()) continue;
      step++;
      const double lr = lr_at(step, cfg);
      const double loss = engine.step(lr);
      log.row(step, loss, lr);
      result.final_loss = loss;
      last_good = params;
      if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 &&
          step < cfg.total_steps) {
        const std::string path =
            out_dir + "/checkpoint_step" + std::to_string(step) + ".ckpt";
        checkpoint::Checkpoint ckpt;
        ckpt.params = params;
        ckpt.meta["mode"] = "pretrain";
        ckpt.meta["train"] = train_config_meta(cfg);
        checkpoint::save(path, ckpt);
        result.checkpoints.push_back(path);
      }
      if (step >= cfg.total_steps) {
        done = true;
        break;
      }
    }
  }

  result.steps = step;
  result.final_checkpoint = out_dir + "/checkpoint_final.ckpt";
  checkpoint::Checkpoint ckpt;
  ckpt.params = params;
  ckpt.meta["mode"] = "pretrain";
  ckpt.meta["train"] = train_config_meta(cfg);
  checkpoint::save(result.final_checkpoint, ckpt);
  result.checkpoints.push_back(result.final_checkpoint);
  return result;
}

std::vector<prompt::AssembledSequence> build_finetune_sequences(
    const std::vector<corpus::TaskExample>& examples,
    const bpe::Encoder& encoder, codec::TargetFormat format,
    const codec::RelationLexicon& lexicon,
    const std::vector<std::string>& label_universe,
    const prompt::PromptState& prompt_state, int max_positions,
    int32_t eos_id) {
  std::vector<prompt::AssembledSequence> out;
  out.reserve(examples.size());
  for (const corpus::TaskExample& e : examples) {
    std::string target_text;
    switch (e.task) {
      case corpus::Task::relation_extraction: {
        const auto& triplets = std::get<std::vector<corpus::Triplet>>(e.label);
        target_text = codec::encode_triplets(
            codec::sort_by_appearance(triplets, e.source), format, lexicon);
        break;
      }
      case corpus::Task::question_answering:
        target_text =
            codec::encode_qa_target(std::get<corpus::QaAnswer>(e.label));
        break;
      case corpus::Task::doc_classification:
        target_text = codec::encode_doc_target(
            std::get<std::vector<std::string>>(e.label), label_universe);
        break;
      case corpus::Task::generation:
        throw ConfigError("generation examples cannot be fine-tuned on");
    }
    std::vector<int32_t> target_ids = encoder.encode(target_text);
    target_ids.push_back(eos_id);
    out.push_back(prompt::assemble(encoder.encode(e.source), prompt_state,
                                   target_ids, max_positions));
  }
  return out;
}

TrainResult finetune_loop(model::ModelParams& params,
                          prompt::PromptState& prompt_state,
                          const std::vector<prompt::AssembledSequence>& data,
                          const TrainConfig& cfg, const std::string& out_dir,
                          const nlohmann::ordered_json& checkpoint_meta) {
  cfg.validate();
  if (cfg.epochs < 1) throw ConfigError("finetune: epochs must be >= 1");
  if (data.empty()) throw ConfigError("finetune: no training sequences");
  std::filesystem::create_directories(out_dir);

  Tensor* prompt_embed =
      prompt_state.is_continuous() ? &prompt_state.params.embed : nullptr;

  Rng rng(cfg.seed);
  Rng drop_rng = rng.fork(1);
  Rng order_rng = rng.fork(2);
  model::ForwardOptions opts;
  opts.training = !cfg.deterministic && params.config.dropout > 0.0;
  opts.dropout_rng = &drop_rng;

  StepEngine engine(params, prompt_embed, cfg);
  TrainResult result;
  result.loss_log = out_dir + "/loss_log.csv";
  LossLog log(result.loss_log);

  auto save_epoch = [&](int epoch) {
    const std::string path =
        out_dir + "/checkpoint_epoch" + std::to_string(epoch) + ".ckpt";
    checkpoint::Checkpoint ckpt;
    ckpt.params = params;
    ckpt.meta = checkpoint_meta;
    ckpt.meta["mode"] = "finetune";
    ckpt.meta["epoch"] = epoch;
    ckpt.meta["train"] = train_config_meta(cfg);
    if (prompt_embed) {
      ckpt.extra.emplace_back("prompt.embed", *prompt_embed);
    }
    checkpoint::save(path, ckpt);
    result.checkpoints.push_back(path);
    return path;
  };

  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); i++) order[i] = i;

  int64_t step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; epoch++) {
    order_rng.shuffle(order);
    const auto batches = pack_micro_batches(order, data, cfg.tokens_per_batch);
    for (const auto& batch : batches) {
      const double micro = engine.micro_batch(data, batch, opts);
      if (std::isnan(micro)) {
        warn("finetune: loss diverged at step " + std::to_string(step + 1) +
             "; aborting with last good checkpoint");
        result.diverged = true;
        result.steps = step;
        result.final_checkpoint = result.checkpoints.empty()
                                      ? save_epoch(epoch - 1)
                                      : result.checkpoints.back();
        return result;
      }
      if (!engine.window_full()) continue;
      step++;
      const double lr = lr_at(step, cfg);
      const double loss = engine.step(lr);
      log.row(step, loss, lr);
      result.final_loss = loss;
    }
    // flush a ragged accumulation window at epoch end
    if (!engine.window_full() && engine.pending()) {
      step++;
      const double lr = lr_at(step, cfg);
      const double loss = engine.step(lr);
      log.row(step, loss, lr);
      result.final_loss = loss;
    }
    save_epoch(epoch);
  }
  result.steps = step;
  result.final_checkpoint = result.checkpoints.back();
  return result;
}

double held_out_lm_loss(const model::ModelParams& params,
                        const bpe::Encoder& encoder,
                        const std::vector<std::string>& texts, int seq_len) {
  const auto windows = make_lm_windows(texts, encoder, seq_len);
  if (windows.empty()) throw Error("held_out_lm_loss: no windows");
  double sum = 0.0;
  int64_t count = 0;
  model::Activations acts;
  for (const auto& w : windows) {
    model::forward(params, w.plan, acts);
    const int T = acts.T;
    const int V = params.config.vocab_size;
    for (int t = 0; t < T; t++) {
      const double* row = acts.logits.ptr() + (int64_t)t * V;
      double maxval = row[0];
      for (int v = 1; v < V; v++) maxval = std::max(maxval, row[v]);
      double lse = 0.0;
      for (int v = 0; v < V; v++) lse += std::exp(row[v] - maxval);
      sum += std::log(lse) + maxval - row[w.targets[t]];
      count++;
    }
  }
  return sum / static_cast<double>(count);
}

}  // namespace biolm::train
