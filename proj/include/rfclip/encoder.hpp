// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "rfclip/numkit.hpp"

namespace rfclip {

/// Initial logit scale ln(1/0.07) and the upper clamp exp(log_temp) <= 100.
inline const double kInitLogTemp = std::log(1.0 / 0.07);
inline const double kMaxLogTemp = std::log(100.0);

/// The trainable model: linear image and text projections into a shared
/// k-dimensional space, plus a learnable logit scale.
struct EncoderParams {
  Matrix w_img;  // m x k
  Matrix w_txt;  // n x k
  double log_temp = kInitLogTemp;

  std::size_t dim_image() const noexcept { return w_img.rows(); }
  std::size_t dim_text() const noexcept { return w_txt.rows(); }
  std::size_t embed_dim() const noexcept { return w_img.cols(); }
  double temperature() const { return std::exp(log_temp); }

  bool operator==(const EncoderParams&) const = default;
};

/// Gradient of a scalar loss with respect to every EncoderParams entry.
struct EncoderGrads {
  Matrix w_img;
  Matrix w_txt;
  double log_temp = 0.0;

  static EncoderGrads zeros_like(const EncoderParams& p);
  EncoderGrads& operator+=(const EncoderGrads& o);
  EncoderGrads& operator*=(double c);

  bool operator==(const EncoderGrads&) const = default;
};

/// Entries ~ N(0, 1/fan_in) variance, log_temp = ln(1/0.07).
EncoderParams init_params(std::size_t m, std::size_t n, std::size_t k, std::uint64_t seed);

struct EncodedBatch {
  Matrix img;  // B x k, unit rows
  Matrix txt;  // B x k, unit rows
};

EncodedBatch encode(const EncoderParams& params, const Matrix& image_block,
                    const Matrix& text_block);

struct AdamHyper {
  double lr = 1e-5;
  double beta1 = 0.1;
  double beta2 = 0.1;
  double eps = 1e-8;
  double weight_decay = 6e-5;

  bool operator==(const AdamHyper&) const = default;
};

struct AdamState {
  std::uint64_t step = 0;
  Matrix m_img, v_img;
  Matrix m_txt, v_txt;
  double m_s = 0.0;
  double v_s = 0.0;
  AdamHyper hyper;

  static AdamState zeros_like(const EncoderParams& p, const AdamHyper& hyper);

  bool operator==(const AdamState&) const = default;
};

/// One Adam step with bias correction. Weight decay is decoupled: every
/// parameter is first scaled by (1 - lr·weight_decay), then moved by the
/// Adam update. log_temp is clamped to kMaxLogTemp afterwards.
/// Throws kDiverged (state untouched) when any gradient entry is non-finite.
void adam_step(AdamState& state, EncoderParams& params, const EncoderGrads& grads);

}  // namespace rfclip
