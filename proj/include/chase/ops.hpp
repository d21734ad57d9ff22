#pragma once

#include <string>
#include <vector>

#include "chase/rng.hpp"
#include "chase/tensor.hpp"

namespace chase {

// Layer set with explicit reverse-mode gradients. Buffers are row-major;
// sequence batches are time-major (T x B x D) so each step is one
// contiguous (B x D) block.

// ---- parameter registration -------------------------------------------

// Adds "<prefix>.w" (in x out) and "<prefix>.b" (out). Weights uniform
// +-1/sqrt(in), biases zero.
void add_affine_params(ParamSet& ps, const std::string& prefix, int in, int out,
                       Rng rng);

struct GruSpec {
    int input = 6;
    int hidden = 64;
    std::string prefix = "gru";
};

// Adds wx_zr (D x 2H), wx_n (D x H), u_zr (H x 2H), u_n (H x H),
// b_zr (2H), b_n (H) under "<prefix>.".
void add_gru_params(ParamSet& ps, const GruSpec& spec, Rng rng);

// ---- affine -------------------------------------------------------------

// y (n x out) = x (n x in) * w + b
void affine_forward(const ParamSet& ps, const std::string& prefix, const double* x,
                    double* y, int n, int in, int out);

// Accumulates dw/db; when dx != nullptr, accumulates dy * w^T into it.
void affine_backward(ParamSet& ps, const std::string& prefix, const double* x,
                     const double* dy, double* dx, int n, int in, int out);

// ---- recurrent unit ------------------------------------------------------

struct GruCache {
    int B = 0, Tg = 0, D = 0, H = 0;
    std::vector<double> hall;   // Tg*B*H  h_t after each step
    std::vector<double> hprev;  // Tg*B*H  state entering each step
    std::vector<double> zr;     // Tg*B*2H sigmoid gate activations [z|r]
    std::vector<double> hcand;  // Tg*B*H  tanh candidate
    std::vector<double> rh;     // Tg*B*H  r (.) h_prev
    const double* xtm = nullptr;  // borrowed input, Tg*B*D

    const double* h_at(int t) const { return hall.data() + static_cast<std::size_t>(t) * B * H; }
};

// Runs the unit over Tg steps from h0 = 0. Gate equations:
//   z = sigmoid(x Wxz + h Uz + bz)
//   r = sigmoid(x Wxr + h Ur + br)
//   hcand = tanh(x Wxn + (r (.) h) Un + bn)
//   h' = (1 - z) (.) h + z (.) hcand
void gru_forward(const ParamSet& ps, const GruSpec& spec, const double* xtm, int B,
                 int Tg, GruCache& cache);

// dhall holds dLoss/dh_t for every step (Tg x B x H); parameter gradients
// accumulate into ps. Input gradients are not produced (inputs are data).
void gru_backward(ParamSet& ps, const GruSpec& spec, const GruCache& cache,
                  std::vector<double>& dhall);

// Single-step convenience wrapper (x: (D), h_prev: (H)).
struct GruCellResult {
    Tensor h;
    Tensor z, r, hcand;
};
GruCellResult gru_cell_forward(const Tensor& x, const Tensor& h_prev,
                               const ParamSet& ps, const GruSpec& spec);

// ---- activations and probabilities --------------------------------------

// In-place row softmax; rows sum to 1 within 1e-12.
void softmax_rows(double* x, int n, int m);

// out[i] = log(sum_j exp(x[i*m+j])), numerically stable.
double logsumexp(const double* x, int m);

double softplus(double x);       // log(1 + e^x), stable
double sigmoid_scalar(double x);

// ---- Gaussian negative log-likelihood -----------------------------------

inline constexpr double kLogVarClamp = 8.0;
inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Mean over dimensions of 0.5*(lv + (x-mu)^2*exp(-lv) + log 2pi), with lv
// clamped to [-8, 8] before use. Lengths must match.
double gaussian_nll(const Tensor& x, const Tensor& mu, const Tensor& logvar);

// Row-level core used by the sequence heads: nll over one length-d row.
double gaussian_nll_row(const double* x, const double* mu, const double* lv_raw, int d);

// Gradient of coeff * nll_row w.r.t. mu and raw logvar, accumulated.
void gaussian_nll_row_backward(const double* x, const double* mu, const double* lv_raw,
                               int d, double coeff, double* dmu, double* dlv);

// ---- dropout --------------------------------------------------------------

// Inverted dropout mask: entries are 0 with probability rate, else 1/(1-rate).
void dropout_mask(Rng& rng, double rate, double* mask, int n);

}  // namespace chase
