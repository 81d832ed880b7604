// SPDX-License-Identifier: Apache-2.0
#include "rfclip/encoder.hpp"

#include <algorithm>
#include <string>

#include "rfclip/error.hpp"

namespace rfclip {

EncoderGrads EncoderGrads::zeros_like(const EncoderParams& p) {
  return {Matrix(p.w_img.rows(), p.w_img.cols()), Matrix(p.w_txt.rows(), p.w_txt.cols()), 0.0};
}

namespace {

void add_into(Matrix& dst, const Matrix& src) {
  if (dst.rows() != src.rows() || dst.cols() != src.cols()) {
    throw Error(Errc::kShape, "gradient shape mismatch: " + dst.shape_string() + " vs " +
                                  src.shape_string());
  }
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

EncoderGrads& EncoderGrads::operator+=(const EncoderGrads& o) {
  add_into(w_img, o.w_img);
  add_into(w_txt, o.w_txt);
  log_temp += o.log_temp;
  return *this;
}

EncoderGrads& EncoderGrads::operator*=(double c) {
  for (double& x : w_img.values()) x *= c;
  for (double& x : w_txt.values()) x *= c;
  log_temp *= c;
  return *this;
}

EncoderParams init_params(std::size_t m, std::size_t n, std::size_t k, std::uint64_t seed) {
  if (m == 0 || n == 0 || k == 0) {
    throw Error(Errc::kConfig, "encoder dimensions must be positive (m=" + std::to_string(m) +
                                   ", n=" + std::to_string(n) + ", k=" + std::to_string(k) +
                                   ")");
  }
  Rng rng(seed);
  Rng img_rng = rng.fork(1);
  Rng txt_rng = rng.fork(2);
  EncoderParams p{Matrix(m, k), Matrix(n, k), kInitLogTemp};
  const double img_std = 1.0 / std::sqrt(static_cast<double>(m));
  const double txt_std = 1.0 / std::sqrt(static_cast<double>(n));
  for (double& x : p.w_img.values()) x = img_rng.normal(0.0, img_std);
  for (double& x : p.w_txt.values()) x = txt_rng.normal(0.0, txt_std);
  return p;
}

EncodedBatch encode(const EncoderParams& params, const Matrix& image_block,
                    const Matrix& text_block) {
  if (image_block.rows() != text_block.rows()) {
    throw Error(Errc::kShape, "image block " + image_block.shape_string() +
                                  " and text block " + text_block.shape_string() +
                                  " differ in batch size");
  }
  return {row_l2_normalize(matmul(image_block, params.w_img)),
          row_l2_normalize(matmul(text_block, params.w_txt))};
}

AdamState AdamState::zeros_like(const EncoderParams& p, const AdamHyper& hyper) {
  AdamState s;
  s.m_img = s.v_img = Matrix(p.w_img.rows(), p.w_img.cols());
  s.m_txt = s.v_txt = Matrix(p.w_txt.rows(), p.w_txt.cols());
  s.hyper = hyper;
  return s;
}

namespace {

void check_block(const Matrix& g, const Matrix& p, const char* name) {
  if (g.rows() != p.rows() || g.cols() != p.cols()) {
    throw Error(Errc::kShape, std::string("gradient block ") + name + " has shape " +
                                  g.shape_string() + ", parameter has " + p.shape_string());
  }
  if (!g.all_finite()) {
    throw Error(Errc::kDiverged, std::string("non-finite gradient in ") + name);
  }
}

struct AdamCoeffs {
  double decay;
  double bc1;
  double bc2;
};

void update(double& p, double& m, double& v, double g, const AdamHyper& h, const AdamCoeffs& c) {
  p *= c.decay;
  m = h.beta1 * m + (1.0 - h.beta1) * g;
  v = h.beta2 * v + (1.0 - h.beta2) * g * g;
  const double m_hat = m / c.bc1;
  const double v_hat = v / c.bc2;
  p -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
}

void update_block(Matrix& p, Matrix& m, Matrix& v, const Matrix& g, const AdamHyper& h,
                  const AdamCoeffs& c) {
  auto pv = p.values();
  auto mv = m.values();
  auto vv = v.values();
  auto gv = g.values();
  for (std::size_t i = 0; i < pv.size(); ++i) update(pv[i], mv[i], vv[i], gv[i], h, c);
}

}  // namespace

void adam_step(AdamState& state, EncoderParams& params, const EncoderGrads& grads) {
  check_block(grads.w_img, params.w_img, "w_img");
  check_block(grads.w_txt, params.w_txt, "w_txt");
  if (!std::isfinite(grads.log_temp)) {
    throw Error(Errc::kDiverged, "non-finite gradient in log_temp");
  }
  if (state.m_img.rows() != params.w_img.rows() || state.m_txt.rows() != params.w_txt.rows() ||
      state.m_img.cols() != params.w_img.cols() || state.m_txt.cols() != params.w_txt.cols()) {
    throw Error(Errc::kShape, "Adam state does not match parameter shapes");
  }

  const AdamHyper& h = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const AdamCoeffs c{1.0 - h.lr * h.weight_decay, 1.0 - std::pow(h.beta1, t),
                     1.0 - std::pow(h.beta2, t)};
  update_block(params.w_img, state.m_img, state.v_img, grads.w_img, h, c);
  update_block(params.w_txt, state.m_txt, state.v_txt, grads.w_txt, h, c);
  update(params.log_temp, state.m_s, state.v_s, grads.log_temp, h, c);
  params.log_temp = std::min(params.log_temp, kMaxLogTemp);
}

}  // namespace rfclip
