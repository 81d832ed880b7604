// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

#include "rfclip/encoder.hpp"
#include "rfclip/numkit.hpp"

namespace rfclip {

/// values(i, j) = temperature · <img_i, txt_j> for a batch of B >= 2 pairs.
/// Matched pairs sit on the diagonal.
struct SimilarityMatrix {
  Matrix values;
  double temperature = 1.0;

  std::size_t batch() const noexcept { return values.rows(); }
};

SimilarityMatrix similarity_matrix(const Matrix& f_img, const Matrix& f_txt, double log_temp);

struct LossValue {
  double value = 0.0;
  std::optional<Matrix> grad;  // dL/dW, B x B
};

/// Symmetric cross-entropy over the similarity matrix with diagonal targets:
///   L = ½ [ mean_i (lse(row_i) - W_ii) + mean_j (lse(col_j) - W_jj) ].
/// With `with_grad`, also returns
///   dL/dW = (softmax_rows(W) - I) / 2B + (softmax_cols(W) - I) / 2B.
LossValue symmetric_ce_loss(const SimilarityMatrix& sim, bool with_grad = true);

/// Chain rule from dL/dW back through the temperature, the per-row L2
/// normalization and the linear projections. `f_img` / `f_txt` must be the
/// forward outputs of encode(params, image_block, text_block).
EncoderGrads backward_to_params(const Matrix& grad_w, const Matrix& f_img,
                                const Matrix& f_txt, const Matrix& image_block,
                                const Matrix& text_block, const EncoderParams& params);

}  // namespace rfclip
