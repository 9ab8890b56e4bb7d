#include "biolm/kernels.hpp"

#include <cmath>

namespace biolm::kernels {

namespace {
constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluCubic = 0.044715;
}  // namespace

void matmul_forward(double* out, const double* inp, const double* weight,
                    const double* bias, int T, int C, int OC) {
#pragma omp parallel for
  for (int t = 0; t < T; t++) {
    const double* inp_t = inp + (int64_t)t * C;
    double* out_t = out + (int64_t)t * OC;
    for (int o = 0; o < OC; o++) {
      const double* wrow = weight + (int64_t)o * C;
      double val = bias ? bias[o] : 0.0;
      for (int c = 0; c < C; c++) {
        val += inp_t[c] * wrow[c];
      }
      out_t[o] = val;
    }
  }
}

void matmul_backward(double* dinp, double* dweight, double* dbias,
                     const double* dout, const double* inp,
                     const double* weight, int T, int C, int OC) {
  // dinp: each row t is owned by one iteration.
#pragma omp parallel for
  for (int t = 0; t < T; t++) {
    const double* dout_t = dout + (int64_t)t * OC;
    double* dinp_t = dinp + (int64_t)t * C;
    for (int o = 0; o < OC; o++) {
      const double* wrow = weight + (int64_t)o * C;
      const double d = dout_t[o];
      for (int c = 0; c < C; c++) {
        dinp_t[c] += wrow[c] * d;
      }
    }
  }
  // dweight/dbias: each output channel o is owned by one iteration.
#pragma omp parallel for
  for (int o = 0; o < OC; o++) {
    double* dwrow = dweight + (int64_t)o * C;
    double dbsum = 0.0;
    for (int t = 0; t < T; t++) {
      const double d = dout[(int64_t)t * OC + o];
      const double* inp_t = inp + (int64_t)t * C;
      dbsum += d;
      for (int c = 0; c < C; c++) {
        dwrow[c] += inp_t[c] * d;
      }
    }
    if (dbias) dbias[o] += dbsum;
  }
}

void layernorm_forward(double* out, double* mean, double* rstd,
                       const double* inp, const double* gain,
                       const double* bias, int T, int C) {
  constexpr double eps = 1e-5;
#pragma omp parallel for
  for (int t = 0; t < T; t++) {
    const double* x = inp + (int64_t)t * C;
    double m = 0.0;
    for (int c = 0; c < C; c++) m += x[c];
    m /= C;
    double v = 0.0;
    for (int c = 0; c < C; c++) {
      const double d = x[c] - m;
      v += d * d;
    }
    v /= C;
    const double rs = 1.0 / std::sqrt(v + eps);
    double* o = out + (int64_t)t * C;
    for (int c = 0; c < C; c++) {
      o[c] = (x[c] - m) * rs * gain[c] + bias[c];
    }
    mean[t] = m;
    rstd[t] = rs;
  }
}

void layernorm_backward(double* dinp, double* dgain, double* dbias,
                        const double* dout, const double* inp,
                        const double* mean, const double* rstd,
                        const double* gain, int T, int C) {
#pragma omp parallel for
  for (int t = 0; t < T; t++) {
    const double* dout_t = dout + (int64_t)t * C;
    const double* inp_t = inp + (int64_t)t * C;
    double* dinp_t = dinp + (int64_t)t * C;
    const double m = mean[t];
    const double rs = rstd[t];

    double dnorm_mean = 0.0;
    double dnorm_norm_mean = 0.0;
    for (int c = 0; c < C; c++) {
      const double norm = (inp_t[c] - m) * rs;
      const double dnorm = gain[c] * dout_t[c];
      dnorm_mean += dnorm;
      dnorm_norm_mean += dnorm * norm;
    }
    dnorm_mean /= C;
    dnorm_norm_mean /= C;

    for (int c = 0; c < C; c++) {
      const double norm = (inp_t[c] - m) * rs;
      const double dnorm = gain[c] * dout_t[c];
      dinp_t[c] += (dnorm - dnorm_mean - norm * dnorm_norm_mean) * rs;
    }
  }
#pragma omp parallel for
  for (int c = 0; c < C; c++) {
    double dg = 0.0;
    double db = 0.0;
    for (int t = 0; t < T; t++) {
      const double norm = (inp[(int64_t)t * C + c] - mean[t]) * rstd[t];
      const double d = dout[(int64_t)t * C + c];
      dg += norm * d;
      db += d;
    }
    dgain[c] += dg;
    dbias[c] += db;
  }
}

void gelu_forward(double* out, const double* inp, int64_t n) {
#pragma omp parallel for
  for (int64_t i = 0; i < n; i++) {
    const double x = inp[i];
    const double u = kGeluScale * (x + kGeluCubic * x * x * x);
    out[i] = 0.5 * x * (1.0 + std::tanh(u));
  }
}

void gelu_backward(double* dinp, const double* inp, const double* dout,
                   int64_t n) {
#pragma omp parallel for
  for (int64_t i = 0; i < n; i++) {
    const double x = inp[i];
    const double u = kGeluScale * (x + kGeluCubic * x * x * x);
    const double th = std::tanh(u);
    const double sech2 = 1.0 - th * th;
    const double local = 0.5 * (1.0 + th) +
                         0.5 * x * sech2 * kGeluScale *
                             (1.0 + 3.0 * kGeluCubic * x * x);
    dinp[i] += local * dout[i];
  }
}

void residual_forward(double* out, const double* a, const double* b,
                      int64_t n) {
#pragma omp parallel for
  for (int64_t i = 0; i < n; i++) {
    out[i] = a[i] + b[i];
  }
}

void attention_forward(double* out, double* att, const double* qkv, int T,
                       int H, int NH) {
  const int hs = H / NH;
  const double scale = 1.0 / std::sqrt((double)hs);
  const int C3 = 3 * H;
#pragma omp parallel for collapse(2)
  for (int h = 0; h < NH; h++) {
    for (int t = 0; t < T; t++) {
      const double* q = qkv + (int64_t)t * C3 + h * hs;
      double* att_row = att + ((int64_t)h * T + t) * T;

      // logits over the causal prefix, tracking the max for stability
      double maxval = -1e30;
      for (int t2 = 0; t2 <= t; t2++) {
        const double* k = qkv + (int64_t)t2 * C3 + H + h * hs;
        double val = 0.0;
        for (int i = 0; i < hs; i++) val += q[i] * k[i];
        val *= scale;
        if (val > maxval) maxval = val;
        att_row[t2] = val;
      }
      double expsum = 0.0;
      for (int t2 = 0; t2 <= t; t2++) {
        const double e = std::exp(att_row[t2] - maxval);
        att_row[t2] = e;
        expsum += e;
      }
      const double inv = 1.0 / expsum;
      for (int t2 = 0; t2 <= t; t2++) att_row[t2] *= inv;
      for (int t2 = t + 1; t2 < T; t2++) att_row[t2] = 0.0;

      // weighted sum of values
      double* out_th = out + (int64_t)t * H + h * hs;
      for (int i = 0; i < hs; i++) out_th[i] = 0.0;
      for (int t2 = 0; t2 <= t; t2++) {
        const double* v = qkv + (int64_t)t2 * C3 + 2 * H + h * hs;
        const double a = att_row[t2];
        for (int i = 0; i < hs; i++) out_th[i] += a * v[i];
      }
    }
  }
}

void attention_backward(double* dqkv, double* datt, const double* dout,
                        const double* qkv, const double* att, int T, int H,
                        int NH) {
  const int hs = H / NH;
  const double scale = 1.0 / std::sqrt((double)hs);
  const int C3 = 3 * H;
  // Heads touch disjoint slices of dqkv, so the head loop is safe to
  // parallelize; within a head, accumulation over t runs in a fixed order.
#pragma omp parallel for
  for (int h = 0; h < NH; h++) {
    for (int t = 0; t < T; t++) {
      const double* dout_th = dout + (int64_t)t * H + h * hs;
      const double* att_row = att + ((int64_t)h * T + t) * T;
      double* datt_row = datt + ((int64_t)h * T + t) * T;
      const double* q = qkv + (int64_t)t * C3 + h * hs;
      double* dq = dqkv + (int64_t)t * C3 + h * hs;

      // through the value aggregation
      for (int t2 = 0; t2 <= t; t2++) {
        const double* v = qkv + (int64_t)t2 * C3 + 2 * H + h * hs;
        double* dv = dqkv + (int64_t)t2 * C3 + 2 * H + h * hs;
        double da = 0.0;
        for (int i = 0; i < hs; i++) {
          da += v[i] * dout_th[i];
          dv[i] += att_row[t2] * dout_th[i];
        }
        datt_row[t2] = da;
      }
      // through the softmax
      double dot = 0.0;
      for (int t2 = 0; t2 <= t; t2++) dot += att_row[t2] * datt_row[t2];
      for (int t2 = 0; t2 <= t; t2++) {
        const double dpre = att_row[t2] * (datt_row[t2] - dot) * scale;
        const double* k = qkv + (int64_t)t2 * C3 + H + h * hs;
        double* dk = dqkv + (int64_t)t2 * C3 + H + h * hs;
        for (int i = 0; i < hs; i++) {
          dq[i] += k[i] * dpre;
          dk[i] += q[i] * dpre;
        }
      }
    }
  }
}

void softmax_rows(double* probs, const double* logits, int T, int V) {
#pragma omp parallel for
  for (int t = 0; t < T; t++) {
    const double* row = logits + (int64_t)t * V;
    double* p = probs + (int64_t)t * V;
    double maxval = row[0];
    for (int v = 1; v < V; v++) {
      if (row[v] > maxval) maxval = row[v];
    }
    double sum = 0.0;
    for (int v = 0; v < V; v++) {
      p[v] = std::exp(row[v] - maxval);
      sum += p[v];
    }
    const double inv = 1.0 / sum;
    for (int v = 0; v < V; v++) p[v] *= inv;
  }
}

// ---------------------------------------------------------------------------
// Serial reference. Same math, no pragmas, written as the obvious loops.
// ---------------------------------------------------------------------------

namespace ref {

void matmul_forward(double* out, const double* inp, const double* weight,
                    const double* bias, int T, int C, int OC) {
  for (int t = 0; t < T; t++) {
    for (int o = 0; o < OC; o++) {
      double val = bias ? bias[o] : 0.0;
      for (int c = 0; c < C; c++) {
        val += inp[(int64_t)t * C + c] * weight[(int64_t)o * C + c];
      }
      out[(int64_t)t * OC + o] = val;
    }
  }
}

void matmul_backward(double* dinp, double* dweight, double* dbias,
                     const double* dout, const double* inp,
                     const double* weight, int T, int C, int OC) {
  for (int t = 0; t < T; t++) {
    for (int o = 0; o < OC; o++) {
      const double d = dout[(int64_t)t * OC + o];
      for (int c = 0; c < C; c++) {
        dinp[(int64_t)t * C + c] += weight[(int64_t)o * C + c] * d;
        dweight[(int64_t)o * C + c] += inp[(int64_t)t * C + c] * d;
      }
      if (dbias) dbias[o] += d;
    }
  }
}

void layernorm_forward(double* out, double* mean, double* rstd,
                       const double* inp, const double* gain,
                       const double* bias, int T, int C) {
  constexpr double eps = 1e-5;
  for (int t = 0; t < T; t++) {
    const double* x = inp + (int64_t)t * C;
    double m = 0.0;
    for (int c = 0; c < C; c++) m += x[c];
    m /= C;
    double v = 0.0;
    for (int c = 0; c < C; c++) v += (x[c] - m) * (x[c] - m);
    v /= C;
    const double rs = 1.0 / std::sqrt(v + eps);
    for (int c = 0; c < C; c++) {
      out[(int64_t)t * C + c] = (x[c] - m) * rs * gain[c] + bias[c];
    }
    mean[t] = m;
    rstd[t] = rs;
  }
}

void layernorm_backward(double* dinp, double* dgain, double* dbias,
                        const double* dout, const double* inp,
                        const double* mean, const double* rstd,
                        const double* gain, int T, int C) {
  for (int t = 0; t < T; t++) {
    const double* dout_t = dout + (int64_t)t * C;
    const double* inp_t = inp + (int64_t)t * C;
    double dnorm_mean = 0.0;
    double dnorm_norm_mean = 0.0;
    for (int c = 0; c < C; c++) {
      const double norm = (inp_t[c] - mean[t]) * rstd[t];
      const double dnorm = gain[c] * dout_t[c];
      dnorm_mean += dnorm;
      dnorm_norm_mean += dnorm * norm;
    }
    dnorm_mean /= C;
    dnorm_norm_mean /= C;
    for (int c = 0; c < C; c++) {
      const double norm = (inp_t[c] - mean[t]) * rstd[t];
      const double dnorm = gain[c] * dout_t[c];
      dgain[c] += norm * dout_t[c];
      dbias[c] += dout_t[c];
      dinp[(int64_t)t * C + c] +=
          (dnorm - dnorm_mean - norm * dnorm_norm_mean) * rstd[t];
    }
  }
}

void gelu_forward(double* out, const double* inp, int64_t n) {
  for (int64_t i = 0; i < n; i++) {
    const double x = inp[i];
    const double u = kGeluScale * (x + kGeluCubic * x * x * x);
    out[i] = 0.5 * x * (1.0 + std::tanh(u));
  }
}

void gelu_backward(double* dinp, const double* inp, const double* dout,
                   int64_t n) {
  for (int64_t i = 0; i < n; i++) {
    const double x = inp[i];
    const double u = kGeluScale * (x + kGeluCubic * x * x * x);
    const double th = std::tanh(u);
    const double local = 0.5 * (1.0 + th) +
                         0.5 * x * (1.0 - th * th) * kGeluScale *
                             (1.0 + 3.0 * kGeluCubic * x * x);
    dinp[i] += local * dout[i];
  }
}

void residual_forward(double* out, const double* a, const double* b,
                      int64_t n) {
  for (int64_t i = 0; i < n; i++) out[i] = a[i] + b[i];
}

void attention_forward(double* out, double* att, const double* qkv, int T,
                       int H, int NH) {
  const int hs = H / NH;
  const double scale = 1.0 / std::sqrt((double)hs);
  const int C3 = 3 * H;
  for (int h = 0; h < NH; h++) {
    for (int t = 0; t < T; t++) {
      const double* q = qkv + (int64_t)t * C3 + h * hs;
      double* att_row = att + ((int64_t)h * T + t) * T;
      double maxval = -1e30;
      for (int t2 = 0; t2 <= t; t2++) {
        const double* k = qkv + (int64_t)t2 * C3 + H + h * hs;
        double val = 0.0;
        for (int i = 0; i < hs; i++) val += q[i] * k[i];
        val *= scale;
        if (val > maxval) maxval = val;
        att_row[t2] = val;
      }
      double expsum = 0.0;
      for (int t2 = 0; t2 <= t; t2++) {
        att_row[t2] = std::exp(att_row[t2] - maxval);
        expsum += att_row[t2];
      }
      for (int t2 = 0; t2 <= t; t2++) att_row[t2] /= expsum;
      for (int t2 = t + 1; t2 < T; t2++) att_row[t2] = 0.0;

      double* out_th = out + (int64_t)t * H + h * hs;
      for (int i = 0; i < hs; i++) out_th[i] = 0.0;
      for (int t2 = 0; t2 <= t; t2++) {
        const double* v = qkv + (int64_t)t2 * C3 + 2 * H + h * hs;
        for (int i = 0; i < hs; i++) out_th[i] += att_row[t2] * v[i];
      }
    }
  }
}

void attention_backward(double* dqkv, double* datt, const double* dout,
                        const double* qkv, const double* att, int T, int H,
                        int NH) {
  const int hs = H / NH;
  const double scale = 1.0 / std::sqrt((double)hs);
  const int C3 = 3 * H;
  for (int h = 0; h < NH; h++) {
    for (int t = 0; t < T; t++) {
      const double* dout_th = dout + (int64_t)t * H + h * hs;
      const double* att_row = att + ((int64_t)h * T + t) * T;
      double* datt_row = datt + ((int64_t)h * T + t) * T;
      const double* q = qkv + (int64_t)t * C3 + h * hs;
      double* dq = dqkv + (int64_t)t * C3 + h * hs;
      for (int t2 = 0; t2 <= t; t2++) {
        const double* v = qkv + (int64_t)t2 * C3 + 2 * H + h * hs;
        double* dv = dqkv + (int64_t)t2 * C3 + 2 * H + h * hs;
        double da = 0.0;
        for (int i = 0; i < hs; i++) {
          da += v[i] * dout_th[i];
          dv[i] += att_row[t2] * dout_th[i];
        }
        datt_row[t2] = da;
      }
      double dot = 0.0;
      for (int t2 = 0; t2 <= t; t2++) dot += att_row[t2] * datt_row[t2];
      for (int t2 = 0; t2 <= t; t2++) {
        const double dpre = att_row[t2] * (datt_row[t2] - dot) * scale;
        const double* k = qkv + (int64_t)t2 * C3 + H + h * hs;
        double* dk = dqkv + (int64_t)t2 * C3 + H + h * hs;
        for (int i = 0; i < hs; i++) {
          dq[i] += k[i] * dpre;
          dk[i] += q[i] * dpre;
        }
      }
    }
  }
}

void softmax_rows(double* probs, const double* logits, int T, int V) {
  for (int t = 0; t < T; t++) {
    const double* row = logits + (int64_t)t * V;
    double* p = probs + (int64_t)t * V;
    double maxval = row[0];
    for (int v = 1; v < V; v++) maxval = row[v] > maxval ? row[v] : maxval;
    double sum = 0.0;
    for (int v = 0; v < V; v++) {
      p[v] = std::exp(row[v] - maxval);
      sum += p[v];
    }
    for (int v = 0; v < V; v++) p[v] /= sum;
  }
}

}  // namespace ref

}  // namespace biolm::kernels
