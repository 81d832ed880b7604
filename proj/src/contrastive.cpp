// SPDX-License-Identifier: Apache-2.0
#include "rfclip/contrastive.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "rfclip/error.hpp"

namespace rfclip {

SimilarityMatrix similarity_matrix(const Matrix& f_img, const Matrix& f_txt, double log_temp) {
  if (f_img.rows() != f_txt.rows() || f_img.cols() != f_txt.cols()) {
    throw Error(Errc::kShape, "similarity blocks differ: " + f_img.shape_string() + " vs " +
                                  f_txt.shape_string());
  }
  if (f_img.rows() < 2) {
    throw Error(Errc::kBatchTooSmall,
                "contrastive batch needs at least 2 pairs, got " + std::to_string(f_img.rows()));
  }
  const double t = std::exp(log_temp);
  Matrix w = matmul_transposed(f_img, f_txt);
  for (double& x : w.values()) x *= t;
  return {std::move(w), t};
}

LossValue symmetric_ce_loss(const SimilarityMatrix& sim, bool with_grad) {
  const Matrix& w = sim.values;
  const std::size_t b = w.rows();
  if (b < 2 || w.cols() != b) {
    throw Error(Errc::kBatchTooSmall, "similarity matrix must be square with B >= 2, got " +
                                          w.shape_string());
  }
  if (!w.all_finite()) throw Error(Errc::kNumeric, "similarity matrix has non-finite entries");

  std::vector<double> row_lse(b), col_lse(b), col(b);
  for (std::size_t i = 0; i < b; ++i) row_lse[i] = logsumexp(w.row(i));
  for (std::size_t j = 0; j < b; ++j) {
    for (std::size_t i = 0; i < b; ++i) col[i] = w(i, j);
    col_lse[j] = logsumexp(col);
  }

  double row_ce = 0.0;
  double col_ce = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    row_ce += row_lse[i] - w(i, i);
    col_ce += col_lse[i] - w(i, i);
  }
  const double bd = static_cast<double>(b);
  LossValue out;
  out.value = 0.5 * (row_ce / bd + col_ce / bd);
  if (!std::isfinite(out.value)) throw Error(Errc::kNumeric, "contrastive loss is not finite");

  if (with_grad) {
    Matrix g(b, b);
    const double scale = 1.0 / (2.0 * bd);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < b; ++j) {
        const double target = i == j ? 1.0 : 0.0;
        const double p_row = std::exp(w(i, j) - row_lse[i]);
        const double p_col = std::exp(w(i, j) - col_lse[j]);
        g(i, j) = scale * (p_row - target) + scale * (p_col - target);
      }
    }
    out.grad = std::move(g);
  }
  return out;
}

namespace {

/// dL/dP for P = raw projection, F = P / |P| row-wise, given dL/dF:
///   dL/dP_i = (dF_i - (f_i · dF_i) f_i) / |P_i|.
Matrix normalize_backward(const Matrix& d_f, const Matrix& f, const std::vector<double>& norms) {
  Matrix d_p(f.rows(), f.cols());
  for (std::size_t i = 0; i < f.rows(); ++i) {
    double dot = 0.0;
    for (std::size_t c = 0; c < f.cols(); ++c) dot += f(i, c) * d_f(i, c);
    for (std::size_t c = 0; c < f.cols(); ++c) {
      d_p(i, c) = (d_f(i, c) - dot * f(i, c)) / norms[i];
    }
  }
  return d_p;
}

}  // namespace

EncoderGrads backward_to_params(const Matrix& grad_w, const Matrix& f_img,
                                const Matrix& f_txt, const Matrix& image_block,
                                const Matrix& text_block, const EncoderParams& params) {
  const std::size_t b = f_img.rows();
  if (grad_w.rows() != b || grad_w.cols() != b || f_txt.rows() != b ||
      image_block.rows() != b || text_block.rows() != b ||
      f_img.cols() != params.embed_dim() || f_txt.cols() != params.embed_dim() ||
      image_block.cols() != params.dim_image() || text_block.cols() != params.dim_text()) {
    throw Error(Errc::kShape, "backward_to_params shape mismatch: grad " +
                                  grad_w.shape_string() + ", f_img " + f_img.shape_string() +
                                  ", f_txt " + f_txt.shape_string() + ", image " +
                                  image_block.shape_string() + ", text " +
                                  text_block.shape_string());
  }
  const double t = params.temperature();

  // W = t · F_img F_txtᵀ  =>  dF_img = t · G F_txt,  dF_txt = t · Gᵀ F_img,
  // dL/dlog_temp = Σ G_ij W_ij.
  Matrix d_fimg = matmul(grad_w, f_txt);
  Matrix d_ftxt = transposed_matmul(grad_w, f_img);
  for (double& x : d_fimg.values()) x *= t;
  for (double& x : d_ftxt.values()) x *= t;

  double d_log_temp = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < f_img.cols(); ++c) dot += f_img(i, c) * f_txt(j, c);
      d_log_temp += grad_w(i, j) * t * dot;
    }
  }

  const auto img_norms = row_norms(matmul(image_block, params.w_img));
  const auto txt_norms = row_norms(matmul(text_block, params.w_txt));
  const Matrix d_pimg = normalize_backward(d_fimg, f_img, img_norms);
  const Matrix d_ptxt = normalize_backward(d_ftxt, f_txt, txt_norms);

  return {transposed_matmul(image_block, d_pimg), transposed_matmul(text_block, d_ptxt),
          d_log_temp};
}

}  // namespace rfclip
