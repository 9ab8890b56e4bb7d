#pragma once

#include <cstdint>

// Dense math kernels for the decoder stack, llm.c style: flat row-major
// buffers, one function per layer direction. The default namespace holds the
// OpenMP-parallel versions used by the engine; kernels::ref holds plain
// serial implementations kept as the reference for tests and the benchmark.
//
// Every parallel loop is over disjoint output elements and each element is
// accumulated serially in a fixed order, so results are bit-identical for
// any thread count.

namespace biolm::kernels {

// out (T,OC) = inp (T,C) @ weight (OC,C)^T + bias (OC). bias may be null.
void matmul_forward(double* out, const double* inp, const double* weight,
                    const double* bias, int T, int C, int OC);

// Accumulates into dinp (T,C), dweight (OC,C), dbias (OC). dbias may be null.
void matmul_backward(double* dinp, double* dweight, double* dbias,
                     const double* dout, const double* inp,
                     const double* weight, int T, int C, int OC);

// Row-wise layer norm over C. mean/rstd (T) are saved for the backward pass.
void layernorm_forward(double* out, double* mean, double* rstd,
                       const double* inp, const double* gain,
                       const double* bias, int T, int C);

void layernorm_backward(double* dinp, double* dgain, double* dbias,
                        const double* dout, const double* inp,
                        const double* mean, const double* rstd,
                        const double* gain, int T, int C);

// GELU, tanh approximation (the GPT-2 convention).
void gelu_forward(double* out, const double* inp, int64_t n);
void gelu_backward(double* dinp, const double* inp, const double* dout,
                   int64_t n);

void residual_forward(double* out, const double* a, const double* b,
                      int64_t n);

// Causal multi-head attention over a fused qkv buffer.
//   qkv (T,3H): per position, H query dims then H key dims then H value dims.
//   att (NH,T,T): post-softmax attention rows, saved for backward.
//   out (T,H): concatenated head outputs (no output projection here).
void attention_forward(double* out, double* att, const double* qkv, int T,
                       int H, int NH);

// Accumulates into dqkv (T,3H). datt (NH,T,T) is scratch.
void attention_backward(double* dqkv, double* datt, const double* dout,
                        const double* qkv, const double* att, int T, int H,
                        int NH);

// Stable row-wise softmax: probs (T,V) from logits (T,V).
void softmax_rows(double* probs, const double* logits, int T, int V);

namespace ref {
void matmul_forward(double* out, const double* inp, const double* weight,
                    const double* bias, int T, int C, int OC);
void matmul_backward(double* dinp, double* dweight, double* dbias,
                     const double* dout, const double* inp,
                     const double* weight, int T, int C, int OC);
void layernorm_forward(double* out, double* mean, double* rstd,
                       const double* inp, const double* gain,
                       const double* bias, int T, int C);
void layernorm_backward(double* dinp, double* dgain, double* dbias,
                        const double* dout, const double* inp,
                        const double* mean, const double* rstd,
                        const double* gain, int T, int C);
void gelu_forward(double* out, const double* inp, int64_t n);
void gelu_backward(double* dinp, const double* inp, const double* dout,
                   int64_t n);
void residual_forward(double* out, const double* a, const double* b,
                      int64_t n);
void attention_forward(double* out, double* att, const double* qkv, int T,
                       int H, int NH);
void attention_backward(double* dqkv, double* datt, const double* dout,
                        const double* qkv, const double* att, int T, int H,
                        int NH);
void softmax_rows(double* probs, const double* logits, int T, int V);
}  // namespace ref

}  // namespace biolm::kernels
