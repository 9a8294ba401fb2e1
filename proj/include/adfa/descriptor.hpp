// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "adfa/types.hpp"

namespace adfa {

/// Trainable patch descriptor: a 1x1 channel-reduction convolution followed
/// by channel attention (a shared 1D convolution over the pooled channel
/// profile) and a residual attention refinement.
template <typename S>
struct DescriptorParamsT {
  MatX<S> reduce_weights;   // d_prime x in_channels, 1x1 convolution kernels
  VecX<S> reduce_bias;      // d_prime
  VecX<S> attn_conv_weights;  // odd-length shared kernel, no bias
  S epsilon = S(0.1);       // residual attention strength, not trained
  int d_prime = 0;

  int in_channels() const { return static_cast<int>(reduce_weights.cols()); }
  int kernel_size() const { return static_cast<int>(attn_conv_weights.size()); }
};

using DescriptorParams = DescriptorParamsT<double>;

/// Kernel size for the channel-attention convolution: the odd integer
/// nearest to log2(channels)/gamma + b/gamma. Exact halfway values round
/// down; the result is clamped to at least 1.
inline int adaptive_kernel_size(int channels, int gamma = 2, int b = 1) {
  if (channels < 2) throw ArgumentError("adaptive_kernel_size: channels must be >= 2");
  if (gamma <= 0) throw ArgumentError("adaptive_kernel_size: gamma must be positive");
  const double t = std::log2(static_cast<double>(channels)) / gamma +
                   static_cast<double>(b) / gamma;
  const int below = 2 * static_cast<int>(std::floor((t - 1.0) / 2.0)) + 1;
  const int above = below + 2;
  const int k = (t - below <= above - t) ? below : above;
  return k < 1 ? 1 : k;
}

template <typename S>
void validate_descriptor(const DescriptorParamsT<S>& p) {
  if (p.d_prime <= 0 || p.reduce_weights.rows() != p.d_prime ||
      p.reduce_bias.size() != p.d_prime)
    throw ConfigError("descriptor: reduction shapes disagree with d_prime");
  const int k = p.kernel_size();
  if (k < 1 || k % 2 == 0)
    throw ConfigError("descriptor: attention kernel size must be odd and positive");
  if (!(p.epsilon >= S(0))) throw ConfigError("descriptor: epsilon must be >= 0");
}

/// Fresh parameters: He-normal reduction weights, zero bias, zero attention
/// kernel (so the initial attention map is uniformly 0.5).
template <typename S>
DescriptorParamsT<S> descriptor_init(int in_channels, int d_prime, S epsilon,
                                     std::uint64_t seed, int gamma = 2, int b = 1) {
  if (in_channels <= 0 || d_prime <= 0)
    throw ConfigError("descriptor_init: channel counts must be positive");
  DescriptorParamsT<S> p;
  p.d_prime = d_prime;
  p.epsilon = epsilon;
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / in_channels));
  p.reduce_weights.resize(d_prime, in_channels);
  for (Eigen::Index r = 0; r < p.reduce_weights.rows(); ++r)
    for (Eigen::Index c = 0; c < p.reduce_weights.cols(); ++c)
      p.reduce_weights(r, c) = static_cast<S>(normal(gen));
  p.reduce_bias = VecX<S>::Zero(d_prime);
  p.attn_conv_weights = VecX<S>::Zero(adaptive_kernel_size(d_prime, gamma, b));
  return p;
}

/// Per-pixel linear map: out[:, t] = reduce_weights * in[:, t] + reduce_bias.
template <typename S>
PlanesT<S> reduce_channels(const PlanesT<S>& s, const DescriptorParamsT<S>& p) {
  validate_descriptor(p);
  if (s.channels() != p.in_channels())
    throw ConfigError("reduce_channels: input has " + std::to_string(s.channels()) +
                      " channels, weights expect " + std::to_string(p.in_channels()));
  PlanesT<S> out;
  out.height = s.height;
  out.width = s.width;
  out.data = p.reduce_weights * s.data;
  out.data.colwise() += p.reduce_bias;
  return out;
}

/// Per-channel spatial max with the index of the first maximum in row-major
/// order (the element that receives the pooled gradient on ties).
template <typename S>
void global_max_pool(const PlanesT<S>& r, VecX<S>& values, std::vector<Eigen::Index>& argmax) {
  const Eigen::Index c_count = r.data.rows();
  const Eigen::Index n = r.data.cols();
  values.resize(c_count);
  argmax.assign(static_cast<size_t>(c_count), 0);
  for (Eigen::Index c = 0; c < c_count; ++c) {
    S best = r.data(c, 0);
    Eigen::Index best_t = 0;
    for (Eigen::Index t = 1; t < n; ++t)
      if (r.data(c, t) > best) {
        best = r.data(c, t);
        best_t = t;
      }
    values(c) = best;
    argmax[static_cast<size_t>(c)] = best_t;
  }
}

/// Same-size 1D convolution over the channel axis with zero padding.
template <typename S>
VecX<S> conv1d_same(const VecX<S>& x, const VecX<S>& w) {
  const Eigen::Index n = x.size();
  const Eigen::Index k = w.size();
  const Eigen::Index h = (k - 1) / 2;
  VecX<S> y = VecX<S>::Zero(n);
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index src = c + j - h;
      if (src >= 0 && src < n) y(c) += w(j) * x(src);
    }
  return y;
}

template <typename S>
struct AttentionTrace {
  VecX<S> gmp;
  VecX<S> gap;
  std::vector<Eigen::Index> gmp_argmax;
  VecX<S> a;  // sigmoid output, every entry in (0,1)
};

/// Channel attention: sigmoid of the shared 1D convolution applied to the
/// global-max and global-average channel profiles, summed.
template <typename S>
AttentionTrace<S> channel_attention(const PlanesT<S>& r, const DescriptorParamsT<S>& p) {
  validate_descriptor(p);
  if (r.channels() != p.d_prime)
    throw ConfigError("channel_attention: feature channels disagree with d_prime");
  AttentionTrace<S> tr;
  global_max_pool(r, tr.gmp, tr.gmp_argmax);
  tr.gap = r.data.rowwise().mean();
  const VecX<S> u = conv1d_same(tr.gmp, p.attn_conv_weights) +
                    conv1d_same(tr.gap, p.attn_conv_weights);
  tr.a = (S(1) / (S(1) + (-u.array()).exp())).matrix();
  return tr;
}

/// Residual refinement: out[c, t] = r[c, t] * (1 + epsilon * a[c]).
/// At epsilon = 0 the output is the input, bit for bit.
template <typename S>
PlanesT<S> refine(const PlanesT<S>& r, const VecX<S>& a, S epsilon) {
  if (a.size() != r.data.rows())
    throw ConfigError("refine: attention length disagrees with channel count");
  PlanesT<S> out = r;
  if (epsilon == S(0)) return out;
  out.data.array().colwise() *= (S(1) + epsilon * a.array());
  return out;
}

/// Patch matrix: row t = r*W + c holds the channel vector at pixel (r, c).
template <typename S>
MatX<S> flatten_patches(const PlanesT<S>& refined) {
  return refined.data.transpose();
}

template <typename S>
PlanesT<S> unflatten_patches(const MatX<S>& patches, int height, int width) {
  if (patches.rows() != static_cast<Eigen::Index>(height) * width)
    throw ArgumentError("unflatten_patches: row count disagrees with the spatial extent");
  PlanesT<S> out;
  out.height = height;
  out.width = width;
  out.data = patches.transpose();
  return out;
}

template <typename S>
struct DescriptorForward {
  PlanesT<S> reduced;
  AttentionTrace<S> attention;
  MatX<S> patches;  // HW x d_prime
};

template <typename S>
DescriptorForward<S> descriptor_forward(const PlanesT<S>& s, const DescriptorParamsT<S>& p) {
  DescriptorForward<S> fwd;
  fwd.reduced = reduce_channels(s, p);
  fwd.attention = channel_attention(fwd.reduced, p);
  fwd.patches = flatten_patches(refine(fwd.reduced, fwd.attention.a, p.epsilon));
  return fwd;
}

template <typename S>
struct DescriptorGrads {
  MatX<S> reduce_weights;
  VecX<S> reduce_bias;
  VecX<S> attn_conv_weights;

  void setZero(const DescriptorParamsT<S>& p) {
    reduce_weights = MatX<S>::Zero(p.reduce_weights.rows(), p.reduce_weights.cols());
    reduce_bias = VecX<S>::Zero(p.reduce_bias.size());
    attn_conv_weights = VecX<S>::Zero(p.attn_conv_weights.size());
  }
};

namespace detail {

/// Adjoint of conv1d_same with respect to the input signal.
template <typename S>
VecX<S> conv1d_same_input_grad(const VecX<S>& gy, const VecX<S>& w) {
  const Eigen::Index n = gy.size();
  const Eigen::Index k = w.size();
  const Eigen::Index h = (k - 1) / 2;
  VecX<S> gx = VecX<S>::Zero(n);
  for (Eigen::Index e = 0; e < n; ++e)
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index dst = e + h - j;
      if (dst >= 0 && dst < n) gx(e) += w(j) * gy(dst);
    }
  return gx;
}

/// Adjoint of conv1d_same with respect to the kernel.
template <typename S>
VecX<S> conv1d_same_kernel_grad(const VecX<S>& gy, const VecX<S>& x, Eigen::Index k) {
  const Eigen::Index n = gy.size();
  const Eigen::Index h = (k - 1) / 2;
  VecX<S> gw = VecX<S>::Zero(k);
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index src = c + j - h;
      if (src >= 0 && src < n) gw(j) += gy(c) * x(src);
    }
  return gw;
}

}  // namespace detail

/// Hand-derived adjoint of descriptor_forward: pushes a gradient with
/// respect to the patch matrix back onto the trainable parameters. The
/// frozen input features receive no gradient. GMP routes its gradient to
/// the first maximal element in row-major order.
template <typename S>
DescriptorGrads<S> descriptor_backward(const DescriptorForward<S>& fwd,
                                       const DescriptorParamsT<S>& p, const PlanesT<S>& s,
                                       const MatX<S>& g_patches) {
  if (g_patches.rows() != fwd.patches.rows() || g_patches.cols() != fwd.patches.cols())
    throw ArgumentError("descriptor_backward: upstream gradient shape disagrees");
  DescriptorGrads<S> g;
  g.setZero(p);

  // refine: out = r .* (1 + eps * a), gradient arrives transposed as planes.
  const MatX<S> g_refined = g_patches.transpose();
  const VecX<S> scale = (S(1) + p.epsilon * fwd.attention.a.array()).matrix();
  MatX<S> g_reduced = (g_refined.array().colwise() * scale.array()).matrix();
  const VecX<S> g_a =
      p.epsilon * (g_refined.array() * fwd.reduced.data.array()).rowwise().sum().matrix();

  // sigmoid
  const VecX<S> g_u =
      (g_a.array() * fwd.attention.a.array() * (S(1) - fwd.attention.a.array())).matrix();

  // two shared-kernel convolutions over the pooled profiles
  const Eigen::Index k = p.attn_conv_weights.size();
  g.attn_conv_weights = detail::conv1d_same_kernel_grad(g_u, fwd.attention.gmp, k) +
                        detail::conv1d_same_kernel_grad(g_u, fwd.attention.gap, k);
  const VecX<S> g_gmp = detail::conv1d_same_input_grad(g_u, p.attn_conv_weights);
  const VecX<S> g_gap = detail::conv1d_same_input_grad(g_u, p.attn_conv_weights);

  // pooling adjoints feed the reduced features alongside the refine path
  const Eigen::Index hw = fwd.reduced.data.cols();
  for (Eigen::Index c = 0; c < fwd.reduced.data.rows(); ++c)
    g_reduced(c, fwd.attention.gmp_argmax[static_cast<size_t>(c)]) += g_gmp(c);
  g_reduced.colwise() += (g_gap / static_cast<S>(hw)).eval();

  // 1x1 reduction
  g.reduce_weights = g_reduced * s.data.transpose();
  g.reduce_bias = g_reduced.rowwise().sum();
  return g;
}

}  // namespace adfa
