#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "duet/common.hpp"
#include "duet/features.hpp"

namespace duet {

struct DenoiserConfig {
  int layers = 2;
  int hidden = 64;
  int heads = 4;
  int time_embed_dim = 64;
  int text_embed_dim = 64;
  int history_len = defaults::kHistoryLen;
  int predict_len = defaults::kPredictLen;

  static DenoiserConfig tiny() { return {}; }
  static DenoiserConfig paper() { return {8, 512, 8, 512, 512, defaults::kHistoryLen, defaults::kPredictLen}; }

  int tokens() const { return 2 + history_len + predict_len; }

  void validate() const {
    if (layers < 1 || hidden < 1 || heads < 1 || time_embed_dim < 1 || text_embed_dim < 1)
      throw InvalidInput("denoiser config: all dims must be >= 1");
    if (hidden % heads != 0) throw InvalidInput("denoiser config: hidden must be divisible by heads");
    if (history_len < 1 || predict_len < 1) throw InvalidInput("denoiser config: window lengths must be >= 1");
  }
};

// One named parameter with its gradient buffer and Adam moments. Frozen
// tensors still accumulate gradients; the optimizer skips applying them.
struct Tensor {
  std::string name;
  MatX value;
  MatX grad;
  MatX m;
  MatX v;
  bool trainable = true;

  void init(std::string n, int rows, int cols, bool train = true) {
    name = std::move(n);
    value = MatX::Zero(rows, cols);
    grad = MatX::Zero(rows, cols);
    m = MatX::Zero(rows, cols);
    v = MatX::Zero(rows, cols);
    trainable = train;
  }
};

struct DenoiserParams {
  DenoiserConfig config;

  Tensor token_embed_w, token_embed_b;
  Tensor pos_table;  // frozen sinusoidal table for the h + k motion slots
  Tensor time_proj_w, time_proj_b;
  Tensor text_proj_w, text_proj_b;
  struct Block {
    Tensor ln1_g, ln1_b, qkv_w, qkv_b, out_w, out_b;
    Tensor ln2_g, ln2_b, mlp1_w, mlp1_b, mlp2_w, mlp2_b;
  };
  std::vector<Block> blocks;
  Tensor lnf_g, lnf_b, head_w, head_b;
  // learnable per-step gate blending the noised input into the prediction;
  // converges toward sqrt(alpha_bar_t), relieving the trunk of the copy
  // path at low noise
  Tensor skip_gate;

  std::vector<Tensor*> all() {
    std::vector<Tensor*> out = {&token_embed_w, &token_embed_b, &pos_table, &time_proj_w,
                                &time_proj_b,   &text_proj_w,   &text_proj_b};
    for (auto& b : blocks)
      for (Tensor* t : {&b.ln1_g, &b.ln1_b, &b.qkv_w, &b.qkv_b, &b.out_w, &b.out_b, &b.ln2_g, &b.ln2_b, &b.mlp1_w,
                        &b.mlp1_b, &b.mlp2_w, &b.mlp2_b})
        out.push_back(t);
    for (Tensor* t : {&lnf_g, &lnf_b, &head_w, &head_b, &skip_gate}) out.push_back(t);
    return out;
  }
  std::vector<const Tensor*> all() const {
    auto list = const_cast<DenoiserParams*>(this)->all();
    return {list.begin(), list.end()};
  }

  void zero_grads() {
    for (Tensor* t : all()) t->grad.setZero();
  }

  void check_finite() const {
    for (const Tensor* t : all())
      if (!t->value.allFinite()) throw TrainingError("non-finite parameter tensor: " + t->name);
  }
};

inline constexpr int kMaxDiffusionSteps = 512;

// Sinusoidal embedding of a scalar step index.
inline VecX sinusoidal_embedding(double t, int dim) {
  VecX e(dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / dim);
    e[2 * i] = std::sin(t * freq);
    e[2 * i + 1] = std::cos(t * freq);
  }
  if (dim % 2 == 1) e[dim - 1] = 0.0;
  return e;
}

inline MatX sinusoidal_table(int slots, int dim) {
  MatX table(slots, dim);
  for (int p = 0; p < slots; ++p) table.row(p) = sinusoidal_embedding(p, dim).transpose();
  return table;
}

// Forward declaration; the schedule seeds the skip gate when given.
struct NoiseSchedule;

inline DenoiserParams init_denoiser(const DenoiserConfig& config, std::uint64_t seed,
                                    const std::vector<double>* alpha_bar = nullptr) {
  config.validate();
  DenoiserParams p;
  p.config = config;
  const int H = config.hidden;

  Rng rng(seed);
  auto xavier = [&](Tensor& t, const std::string& name, int rows, int cols) {
    t.init(name, rows, cols);
    const double scale = std::sqrt(2.0 / (rows + cols));
    t.value = normal_matrix(rows, cols, rng) * scale;
  };
  auto zeros = [&](Tensor& t, const std::string& name, int rows, int cols) { t.init(name, rows, cols); };
  auto ones = [&](Tensor& t, const std::string& name, int rows, int cols) {
    t.init(name, rows, cols);
    t.value.setOnes();
  };

  xavier(p.token_embed_w, "token_embed_w", layout::kFrameDim, H);
  zeros(p.token_embed_b, "token_embed_b", 1, H);
  p.pos_table.init("pos_table", config.history_len + config.predict_len, H, /*train=*/false);
  p.pos_table.value = sinusoidal_table(config.history_len + config.predict_len, H);
  xavier(p.time_proj_w, "time_proj_w", config.time_embed_dim, H);
  zeros(p.time_proj_b, "time_proj_b", 1, H);
  xavier(p.text_proj_w, "text_proj_w", config.text_embed_dim, H);
  zeros(p.text_proj_b, "text_proj_b", 1, H);

  p.blocks.resize(static_cast<size_t>(config.layers));
  for (int l = 0; l < config.layers; ++l) {
    auto& b = p.blocks[static_cast<size_t>(l)];
    const std::string tag = "block" + std::to_string(l) + ".";
    ones(b.ln1_g, tag + "ln1_g", 1, H);
    zeros(b.ln1_b, tag + "ln1_b", 1, H);
    xavier(b.qkv_w, tag + "qkv_w", H, 3 * H);
    zeros(b.qkv_b, tag + "qkv_b", 1, 3 * H);
    xavier(b.out_w, tag + "out_w", H, H);
    zeros(b.out_b, tag + "out_b", 1, H);
    ones(b.ln2_g, tag + "ln2_g", 1, H);
    zeros(b.ln2_b, tag + "ln2_b", 1, H);
    xavier(b.mlp1_w, tag + "mlp1_w", H, 4 * H);
    zeros(b.mlp1_b, tag + "mlp1_b", 1, 4 * H);
    xavier(b.mlp2_w, tag + "mlp2_w", 4 * H, H);
    zeros(b.mlp2_b, tag + "mlp2_b", 1, H);
  }
  ones(p.lnf_g, "lnf_g", 1, H);
  zeros(p.lnf_b, "lnf_b", 1, H);
  // zero-initialized head: the first predictions are the bias
  zeros(p.head_w, "head_w", H, layout::kFrameDim);
  zeros(p.head_b, "head_b", 1, layout::kFrameDim);
  zeros(p.skip_gate, "skip_gate", kMaxDiffusionSteps, 1);
  // seed the gate at the Bayes-optimal linear coefficient sqrt(alpha_bar_t)
  // so the trunk starts from the residual task rather than re-learning the
  // identity path
  if (alpha_bar)
    for (size_t t = 0; t < alpha_bar->size() && t < kMaxDiffusionSteps; ++t)
      p.skip_gate.value(static_cast<int>(t), 0) = std::sqrt((*alpha_bar)[t]);
  return p;
}

// Deterministic substitute for a frozen language-model encoder: each token
// hashes to a fixed pseudo-random unit vector, averaged and renormalized.
inline VecX embed_text(const std::string& text, int dim, bool* null_flag = nullptr) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) tokens.push_back(cur), cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  if (null_flag) *null_flag = tokens.empty();
  VecX out = VecX::Zero(dim);
  if (tokens.empty()) return out;
  for (const auto& tok : tokens) {
    Rng rng(fnv1a64(tok) ^ 0x9e3779b97f4a7c15ull);
    VecX v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal_sample(rng);
    out += v / v.norm();
  }
  out /= static_cast<double>(tokens.size());
  const double n = out.norm();
  if (n > 1e-12) out /= n;
  return out;
}

// Diffusion-step and text conditioning as fed to the denoiser. null_flag
// true means the zero text vector: the unconditional path and masked
// training share it.
struct ConditionBundle {
  int t_index = 0;
  VecX t_embed;
  VecX text_embed;
  bool null_flag = true;

  static ConditionBundle make(int t, const DenoiserConfig& config, const std::string& text = "") {
    ConditionBundle c;
    c.t_index = t;
    c.t_embed = sinusoidal_embedding(t, config.time_embed_dim);
    bool empty = true;
    c.text_embed = embed_text(text, config.text_embed_dim, &empty);
    c.null_flag = empty;
    if (c.null_flag) c.text_embed.setZero();
    return c;
  }

  ConditionBundle masked() const {
    ConditionBundle c = *this;
    c.text_embed.setZero();
    c.null_flag = true;
    return c;
  }
};

namespace nn {

constexpr double kLnEps = 1e-5;

struct LayerNormTape {
  MatX xhat;
  VecX inv_sigma;
};

inline MatX layer_norm(const MatX& x, const Tensor& gamma, const Tensor& beta, LayerNormTape* tape) {
  const int S = static_cast<int>(x.rows());
  const int H = static_cast<int>(x.cols());
  MatX xhat(S, H);
  VecX inv_sigma(S);
  for (int i = 0; i < S; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    xhat.row(i) = (x.row(i).array() - mu) * inv;
    inv_sigma[i] = inv;
  }
  MatX y = (xhat.array().rowwise() * gamma.value.row(0).array()).rowwise() + beta.value.row(0).array();
  if (tape) {
    tape->xhat = std::move(xhat);
    tape->inv_sigma = std::move(inv_sigma);
  }
  return y;
}

inline MatX layer_norm_backward(const MatX& dy, const LayerNormTape& tape, Tensor& gamma, Tensor& beta) {
  const int S = static_cast<int>(dy.rows());
  gamma.grad.row(0) += (dy.array() * tape.xhat.array()).colwise().sum().matrix();
  beta.grad.row(0) += dy.colwise().sum();
  MatX dxhat = dy.array().rowwise() * gamma.value.row(0).array();
  MatX dx(dy.rows(), dy.cols());
  for (int i = 0; i < S; ++i) {
    const double m1 = dxhat.row(i).mean();
    const double m2 = (dxhat.row(i).array() * tape.xhat.row(i).array()).mean();
    dx.row(i) = (dxhat.row(i).array() - m1 - tape.xhat.row(i).array() * m2) * tape.inv_sigma[i];
  }
  return dx;
}

// tanh-form GELU, written as array expressions so Eigen vectorizes it
inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

inline MatX gelu(const MatX& x) {
  const auto inner = (kGeluC * (x.array() + kGeluA * x.array().cube())).tanh();
  return (0.5 * x.array() * (1.0 + inner)).matrix();
}

inline MatX gelu_grad(const MatX& x) {
  const Eigen::ArrayXXd t = (kGeluC * (x.array() + kGeluA * x.array().cube())).tanh();
  const auto dinner = (1.0 - t.square()) * kGeluC * (1.0 + 3.0 * kGeluA * x.array().square());
  return (0.5 * (1.0 + t) + 0.5 * x.array() * dinner).matrix();
}

}  // namespace nn

// Everything the backward pass needs from one forward evaluation.
struct ForwardTape {
  bool recorded = false;
  int t_index = 0;
  MatX motion_in;  // (h + k) x 443
  VecX t_row, text_row;
  struct BlockTape {
    MatX x_in;  // block input
    nn::LayerNormTape ln1;
    MatX y1, qkv;
    std::vector<MatX> probs;  // per head, S x S
    MatX ctx;
    MatX x_mid;  // after attention residual
    nn::LayerNormTape ln2;
    MatX y2, mlp_pre, mlp_act;
  };
  std::vector<BlockTape> blocks;
  nn::LayerNormTape lnf;
  MatX yf;
};

// Transformer denoiser: two condition tokens (diffusion step, text), h
// attended history tokens and k noised prediction tokens. The output head
// reads only the k prediction slots.
inline MatX denoise(const DenoiserParams& params, const MatX& z_t, const MatX& history,
                    const ConditionBundle& cond, ForwardTape* tape = nullptr) {
  const auto& cfg = params.config;
  const int H = cfg.hidden;
  const int h = cfg.history_len, k = cfg.predict_len;
  const int S = cfg.tokens();
  if (z_t.rows() != k || z_t.cols() != layout::kFrameDim) throw InvalidInput("denoise: bad z_t shape");
  if (history.rows() != h || history.cols() != layout::kFrameDim) throw InvalidInput("denoise: bad history shape");
  if (cond.t_embed.size() != cfg.time_embed_dim || cond.text_embed.size() != cfg.text_embed_dim)
    throw InvalidInput("denoise: bad condition dims");
  if (cond.t_index < 0 || cond.t_index >= kMaxDiffusionSteps)
    throw InvalidInput("denoise: step index out of range");

  MatX motion(h + k, layout::kFrameDim);
  motion.topRows(h) = history;
  motion.bottomRows(k) = z_t;

  MatX x(S, H);
  const Eigen::RowVectorXd time_row =
      cond.t_embed.transpose() * params.time_proj_w.value + params.time_proj_b.value.row(0);
  x.row(0) = time_row;
  x.row(1) = cond.text_embed.transpose() * params.text_proj_w.value + params.text_proj_b.value.row(0);
  // every motion token carries the diffusion step additively as well, so
  // per-token processing is step-aware without an attention hop
  x.bottomRows(h + k) =
      (((motion * params.token_embed_w.value).rowwise() + params.token_embed_b.value.row(0)) +
       params.pos_table.value)
          .rowwise() +
      time_row;

  if (tape) {
    tape->recorded = true;
    tape->t_index = cond.t_index;
    tape->motion_in = motion;
    tape->t_row = cond.t_embed;
    tape->text_row = cond.text_embed;
    tape->blocks.clear();
    tape->blocks.resize(params.blocks.size());
  }

  const int nh = cfg.heads;
  const int dh = H / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  for (size_t l = 0; l < params.blocks.size(); ++l) {
    const auto& blk = params.blocks[l];
    ForwardTape::BlockTape* bt = tape ? &tape->blocks[l] : nullptr;
    if (bt) bt->x_in = x;

    nn::LayerNormTape ln1_tape;
    MatX y1 = nn::layer_norm(x, blk.ln1_g, blk.ln1_b, &ln1_tape);
    MatX qkv = (y1 * blk.qkv_w.value).rowwise() + blk.qkv_b.value.row(0);
    MatX ctx(S, H);
    std::vector<MatX> probs(static_cast<size_t>(nh));
    for (int hd = 0; hd < nh; ++hd) {
      const auto q = qkv.middleCols(hd * dh, dh);
      const auto kk = qkv.middleCols(H + hd * dh, dh);
      const auto v = qkv.middleCols(2 * H + hd * dh, dh);
      MatX scores = q * kk.transpose() * scale;
      MatX p(S, S);
      for (int i = 0; i < S; ++i) {
        const double mx = scores.row(i).maxCoeff();
        Eigen::ArrayXd e = (scores.row(i).array() - mx).exp();
        p.row(i) = (e / e.sum()).matrix();
      }
      ctx.middleCols(hd * dh, dh) = p * v;
      probs[static_cast<size_t>(hd)] = std::move(p);
    }
    MatX attn_out = (ctx * blk.out_w.value).rowwise() + blk.out_b.value.row(0);
    MatX x_mid = x + attn_out;

    nn::LayerNormTape ln2_tape;
    MatX y2 = nn::layer_norm(x_mid, blk.ln2_g, blk.ln2_b, &ln2_tape);
    MatX mlp_pre = (y2 * blk.mlp1_w.value).rowwise() + blk.mlp1_b.value.row(0);
    MatX mlp_act = nn::gelu(mlp_pre);
    MatX mlp_out = (mlp_act * blk.mlp2_w.value).rowwise() + blk.mlp2_b.value.row(0);
    MatX x_next = x_mid + mlp_out;

    if (bt) {
      bt->ln1 = std::move(ln1_tape);
      bt->y1 = std::move(y1);
      bt->qkv = std::move(qkv);
      bt->probs = std::move(probs);
      bt->ctx = std::move(ctx);
      bt->x_mid = x_mid;
      bt->ln2 = std::move(ln2_tape);
      bt->y2 = std::move(y2);
      bt->mlp_pre = std::move(mlp_pre);
      bt->mlp_act = std::move(mlp_act);
    }
    x = std::move(x_next);
  }

  nn::LayerNormTape lnf_tape;
  MatX yf = nn::layer_norm(x, params.lnf_g, params.lnf_b, &lnf_tape);
  MatX out = (yf.bottomRows(k) * params.head_w.value).rowwise() + params.head_b.value.row(0);
  out += params.skip_gate.value(cond.t_index, 0) * z_t;
  if (tape) {
    tape->lnf = std::move(lnf_tape);
    tape->yf = std::move(yf);
  }
  return out;
}

// Reverse-mode gradients of `denoise` for every parameter, accumulated into
// the .grad buffers. `upstream` is dLoss/d(output), shape k x 443.
inline void denoiser_backward(DenoiserParams& params, const ForwardTape& tape, const MatX& upstream) {
  if (!tape.recorded) throw StateError("denoiser_backward: no recorded forward pass");
  const auto& cfg = params.config;
  const int H = cfg.hidden;
  const int h = cfg.history_len, k = cfg.predict_len;
  const int S = cfg.tokens();
  if (upstream.rows() != k || upstream.cols() != layout::kFrameDim)
    throw InvalidInput("denoiser_backward: bad upstream shape");

  params.head_w.grad += tape.yf.bottomRows(k).transpose() * upstream;
  params.head_b.grad.row(0) += upstream.colwise().sum();
  params.skip_gate.grad(tape.t_index, 0) +=
      (upstream.array() * tape.motion_in.bottomRows(k).array()).sum();
  MatX dyf = MatX::Zero(S, H);
  dyf.bottomRows(k) = upstream * params.head_w.value.transpose();
  MatX dx = nn::layer_norm_backward(dyf, tape.lnf, params.lnf_g, params.lnf_b);

  const int nh = cfg.heads;
  const int dh = H / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  for (int l = static_cast<int>(params.blocks.size()) - 1; l >= 0; --l) {
    auto& blk = params.blocks[static_cast<size_t>(l)];
    const auto& bt = tape.blocks[static_cast<size_t>(l)];

    // MLP sub-block
    MatX dmlp_out = dx;  // residual: dx flows to both x_mid and the branch
    blk.mlp2_w.grad += bt.mlp_act.transpose() * dmlp_out;
    blk.mlp2_b.grad.row(0) += dmlp_out.colwise().sum();
    MatX dact = dmlp_out * blk.mlp2_w.value.transpose();
    MatX dpre = dact.array() * nn::gelu_grad(bt.mlp_pre).array();
    blk.mlp1_w.grad += bt.y2.transpose() * dpre;
    blk.mlp1_b.grad.row(0) += dpre.colwise().sum();
    MatX dy2 = dpre * blk.mlp1_w.value.transpose();
    MatX dx_mid = dx + nn::layer_norm_backward(dy2, bt.ln2, blk.ln2_g, blk.ln2_b);

    // attention sub-block
    MatX dattn = dx_mid;
    blk.out_w.grad += bt.ctx.transpose() * dattn;
    blk.out_b.grad.row(0) += dattn.colwise().sum();
    MatX dctx = dattn * blk.out_w.value.transpose();
    MatX dqkv = MatX::Zero(S, 3 * H);
    for (int hd = 0; hd < nh; ++hd) {
      const auto q = bt.qkv.middleCols(hd * dh, dh);
      const auto kk = bt.qkv.middleCols(H + hd * dh, dh);
      const auto v = bt.qkv.middleCols(2 * H + hd * dh, dh);
      const MatX& p = bt.probs[static_cast<size_t>(hd)];
      const auto dctx_h = dctx.middleCols(hd * dh, dh);
      MatX dp = dctx_h * v.transpose();
      dqkv.middleCols(2 * H + hd * dh, dh) += p.transpose() * dctx_h;
      MatX dscores(S, S);
      for (int i = 0; i < S; ++i) {
        const double dot = dp.row(i).dot(p.row(i));
        dscores.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
      }
      dqkv.middleCols(hd * dh, dh) += dscores * kk * scale;
      dqkv.middleCols(H + hd * dh, dh) += dscores.transpose() * q * scale;
    }
    blk.qkv_w.grad += bt.y1.transpose() * dqkv;
    blk.qkv_b.grad.row(0) += dqkv.colwise().sum();
    MatX dy1 = dqkv * blk.qkv_w.value.transpose();
    dx = dx_mid + nn::layer_norm_backward(dy1, bt.ln1, blk.ln1_g, blk.ln1_b);
  }

  // embeddings; the time projection hears both its token and the additive
  // broadcast over the motion rows
  const auto dmotion_rows = dx.bottomRows(h + k);
  const Eigen::RowVectorXd dtime_row = dx.row(0) + dmotion_rows.colwise().sum();
  params.time_proj_w.grad += tape.t_row * dtime_row;
  params.time_proj_b.grad.row(0) += dtime_row;
  params.text_proj_w.grad += tape.text_row * dx.row(1);
  params.text_proj_b.grad.row(0) += dx.row(1);
  params.token_embed_w.grad += tape.motion_in.transpose() * dmotion_rows;
  params.token_embed_b.grad.row(0) += dmotion_rows.colwise().sum();
  params.pos_table.grad += dmotion_rows;  // accumulated; optimizer never applies it
}

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;
};

// Global-norm clipped Adam over every trainable tensor. `step_count` is the
// 1-based update index used for bias correction.
inline void optimizer_step(DenoiserParams& params, const AdamConfig& opt, int step_count) {
  double norm_sq = 0.0;
  for (Tensor* t : params.all()) {
    if (!t->trainable) continue;
    if (!t->grad.allFinite()) throw TrainingError("non-finite gradient in tensor: " + t->name);
    norm_sq += t->grad.squaredNorm();
  }
  const double norm = std::sqrt(norm_sq);
  const double rescale = (opt.clip_norm > 0 && norm > opt.clip_norm) ? opt.clip_norm / norm : 1.0;
  const double correct1 = 1.0 - std::pow(opt.beta1, step_count);
  const double correct2 = 1.0 - std::pow(opt.beta2, step_count);
  for (Tensor* t : params.all()) {
    if (!t->trainable) continue;
    const MatX g = t->grad * rescale;
    t->m = opt.beta1 * t->m + (1.0 - opt.beta1) * g;
    t->v = opt.beta2 * t->v + (1.0 - opt.beta2) * g.array().square().matrix();
    const auto m_hat = t->m.array() / correct1;
    const auto v_hat = t->v.array() / correct2;
    t->value.array() -= opt.lr * m_hat / (v_hat.sqrt() + opt.eps);
    if (!t->value.allFinite()) throw TrainingError("non-finite parameter after update: " + t->name);
  }
}

namespace detail {

inline void write_matrix(std::ostream& os, const MatX& m) {
  char buf[32];
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      os << buf << (j + 1 == m.cols() ? "" : " ");
    }
    os << '\n';
  }
}

inline MatX read_matrix(std::istream& is, int rows, int cols, const char* what) {
  MatX m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if (!(is >> m(i, j))) throw ParseError(std::string("checkpoint: truncated matrix ") + what);
  return m;
}

}  // namespace detail

inline constexpr int kCheckpointVersion = 1;

// Text checkpoint: config, normalization stats, Adam step and every tensor
// with value + moments at full precision.
inline void save_checkpoint(const std::string& path, const DenoiserParams& params, const NormStats& stats,
                            int adam_step) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open checkpoint for writing: " + path);
  const auto& c = params.config;
  os << "duet-checkpoint " << kCheckpointVersion << "\n";
  os << "config " << c.layers << " " << c.hidden << " " << c.heads << " " << c.time_embed_dim << " "
     << c.text_embed_dim << " " << c.history_len << " " << c.predict_len << "\n";
  os << "adam_step " << adam_step << "\n";
  os << "norm_stats\n";
  detail::write_matrix(os, stats.mean.transpose());
  detail::write_matrix(os, stats.std_dev.transpose());
  for (const Tensor* t : params.all()) {
    os << "tensor " << t->name << " " << t->value.rows() << " " << t->value.cols() << " "
       << (t->trainable ? 1 : 0) << "\n";
    detail::write_matrix(os, t->value);
    detail::write_matrix(os, t->m);
    detail::write_matrix(os, t->v);
  }
  os << "end\n";
}

struct Checkpoint {
  DenoiserParams params;
  NormStats stats;
  int adam_step = 0;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open checkpoint: " + path);
  std::string tag;
  int version = -1;
  if (!(is >> tag >> version) || tag != "duet-checkpoint") throw ParseError("checkpoint: bad magic");
  if (version != kCheckpointVersion)
    throw UnsupportedVersion("checkpoint: unsupported version " + std::to_string(version));
  DenoiserConfig cfg;
  if (!(is >> tag) || tag != "config") throw ParseError("checkpoint: missing config");
  if (!(is >> cfg.layers >> cfg.hidden >> cfg.heads >> cfg.time_embed_dim >> cfg.text_embed_dim >>
        cfg.history_len >> cfg.predict_len))
    throw ParseError("checkpoint: bad config line");
  cfg.validate();

  Checkpoint ck;
  ck.params = init_denoiser(cfg, 0);
  if (!(is >> tag >> ck.adam_step) || tag != "adam_step") throw ParseError("checkpoint: missing adam_step");
  if (!(is >> tag) || tag != "norm_stats") throw ParseError("checkpoint: missing norm_stats");
  ck.stats.mean = detail::read_matrix(is, 1, layout::kFrameDim, "norm mean").transpose();
  ck.stats.std_dev = detail::read_matrix(is, 1, layout::kFrameDim, "norm std").transpose();

  for (Tensor* t : ck.params.all()) {
    std::string name;
    int rows = 0, cols = 0, trainable = 0;
    if (!(is >> tag >> name >> rows >> cols >> trainable) || tag != "tensor")
      throw ParseError("checkpoint: missing tensor header for " + t->name);
    if (name != t->name || rows != t->value.rows() || cols != t->value.cols())
      throw ParseError("checkpoint: tensor mismatch, expected " + t->name + " got " + name);
    t->value = detail::read_matrix(is, rows, cols, name.c_str());
    t->m = detail::read_matrix(is, rows, cols, name.c_str());
    t->v = detail::read_matrix(is, rows, cols, name.c_str());
    t->trainable = trainable != 0;
  }
  if (!(is >> tag) || tag != "end") throw ParseError("checkpoint: missing end marker");
  return ck;
}

}  // namespace duet
