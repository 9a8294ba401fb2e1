// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Center-bank construction, the training loss (mean soft-top-k-weighted
// distance between patches and the center bank), and the training loop
// that adapts the patch descriptor with AdamW/AMSGrad.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "adfa/descriptor.hpp"
#include "adfa/soft_topk.hpp"
#include "adfa/types.hpp"

namespace adfa {

enum class CenterRefresh { fixed_after_init, per_epoch };

template <typename S>
struct CenterBankT {
  MatX<S> centers;  // HW x d_prime
  std::string source_fingerprint;
  CenterRefresh refresh_policy = CenterRefresh::fixed_after_init;
};

using CenterBank = CenterBankT<double>;

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 5e-4;
  int epochs = 50;
  int batch_size = 4;
  std::uint64_t seed = 0;
  int k = 3;             // selection size inside the loss
  double epsilon = 0.1;  // residual attention strength; must agree with the descriptor
  SoftTopKConfig topk;   // solver settings; k above overrides topk.k
  CenterRefresh refresh = CenterRefresh::fixed_after_init;
  bool hard_selection = false;  // ablation arm: hard top-k with straight-through gradients
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
  int nonconverged_rows = 0;  // soft top-k rows that hit the iteration cap
};

/// Mean of every image's patch set under the given descriptor, computed in
/// one streaming pass.
template <typename S>
CenterBankT<S> init_center_bank(const std::vector<PlanesT<S>>& features,
                                const DescriptorParamsT<S>& params,
                                const std::string& fingerprint,
                                CenterRefresh policy = CenterRefresh::fixed_after_init) {
  if (features.empty()) throw ArgumentError("init_center_bank: empty dataset");
  CenterBankT<S> bank;
  bank.source_fingerprint = fingerprint;
  bank.refresh_policy = policy;
  MatX<S> mean;
  Eigen::Index count = 0;
  for (const auto& f : features) {
    const MatX<S> patches = descriptor_forward(f, params).patches;
    if (count == 0) {
      mean = patches;
    } else {
      if (patches.rows() != mean.rows() || patches.cols() != mean.cols())
        throw ArgumentError("init_center_bank: inconsistent patch shapes across images");
      mean += (patches - mean) / static_cast<S>(count + 1);
    }
    ++count;
  }
  if (!mean.allFinite()) throw NumericError("init_center_bank: non-finite centers");
  bank.centers = std::move(mean);
  return bank;
}

/// Recompute the centers with the current descriptor weights. The source
/// fingerprint identifies the dataset and the descriptor seed, both
/// unchanged by a refresh, so it carries over.
template <typename S>
CenterBankT<S> refresh_center_bank(const CenterBankT<S>& bank,
                                   const std::vector<PlanesT<S>>& features,
                                   const DescriptorParamsT<S>& params) {
  if (bank.refresh_policy != CenterRefresh::per_epoch)
    throw ArgumentError("refresh_center_bank: bank policy is fixed_after_init");
  return init_center_bank(features, params, bank.source_fingerprint, bank.refresh_policy);
}

template <typename S>
struct LossResult {
  S loss = S(0);
  MatX<S> g_patches;   // d loss / d patches, same shape as the patch set
  int nonconverged = 0;
};

/// Loss forward pass: L = (1/HW) sum_t z_t . d_t with z_t the (soft or
/// hard) top-k indicator over row t of the patch-to-center distances.
template <typename S>
S adfa_loss(const MatX<S>& patches, const CenterBankT<S>& bank, const SoftTopKConfig& cfg,
            bool hard_selection = false) {
  if (patches.cols() != bank.centers.cols() || patches.rows() != bank.centers.rows())
    throw ArgumentError("adfa_loss: patch set and center bank shapes disagree");
  const MatX<S> dist = pairwise_distances(patches, bank.centers);
  const Eigen::Index hw = dist.rows();
  S loss = S(0);
  for (Eigen::Index t = 0; t < hw; ++t) {
    const VecX<S> d = dist.row(t).transpose();
    const VecX<S> z = hard_selection ? hard_topk<S>(d, cfg.k) : soft_topk<S>(d, cfg);
    loss += z.dot(d);
  }
  return loss / static_cast<S>(hw);
}

/// Loss with its gradient with respect to the patches. The soft route
/// differentiates through the transport solve; the hard route holds the
/// indicator constant (straight-through).
template <typename S>
LossResult<S> adfa_loss_backward(const MatX<S>& patches, const CenterBankT<S>& bank,
                                 const SoftTopKConfig& cfg, bool hard_selection = false) {
  if (patches.cols() != bank.centers.cols() || patches.rows() != bank.centers.rows())
    throw ArgumentError("adfa_loss_backward: patch set and center bank shapes disagree");
  const MatX<S> dist = pairwise_distances(patches, bank.centers);
  const Eigen::Index hw = dist.rows();
  const S inv = S(1) / static_cast<S>(hw);
  const bool record = cfg.backward_mode == BackwardMode::unrolled;

  LossResult<S> out;
  out.loss = S(0);
  MatX<S> g_dist(dist.rows(), dist.cols());
  for (Eigen::Index t = 0; t < hw; ++t) {
    const VecX<S> d = dist.row(t).transpose();
    if (hard_selection) {
      const VecX<S> z = hard_topk<S>(d, cfg.k);
      out.loss += z.dot(d) * inv;
      g_dist.row(t) = (inv * z).transpose();
      continue;
    }
    const SoftTopKRecord<S> rec = soft_topk_forward<S>(d, cfg, record);
    if (!rec.sk.converged) ++out.nonconverged;
    out.loss += rec.z.dot(d) * inv;
    const VecX<S> g_through_z = soft_topk_vjp_from<S>(rec, cfg, inv * d);
    g_dist.row(t) = (inv * rec.z + g_through_z).transpose();
  }
  out.g_patches = pairwise_distances_vjp(patches, bank.centers, dist, g_dist);
  return out;
}

/// One AdamW/AMSGrad parameter tensor: first and second moments plus the
/// running maximum of the second moment.
template <typename S>
struct AdamWSlot {
  VecX<S> m, v, vmax;

  void init(Eigen::Index n) {
    m = VecX<S>::Zero(n);
    v = VecX<S>::Zero(n);
    vmax = VecX<S>::Zero(n);
  }
};

/// Decoupled weight decay, then a bias-corrected moment step using the
/// elementwise maximum of the second moment.
template <typename S>
void adamw_amsgrad_update(S* param, const S* grad, Eigen::Index n, AdamWSlot<S>& slot,
                          long step_count, S lr, S weight_decay, S beta1 = S(0.9),
                          S beta2 = S(0.999), S eps = S(1e-8)) {
  Eigen::Map<VecX<S>> p(param, n);
  Eigen::Map<const VecX<S>> g(grad, n);
  p *= (S(1) - lr * weight_decay);
  slot.m = beta1 * slot.m + (S(1) - beta1) * g;
  slot.v = (beta2 * slot.v.array() + (S(1) - beta2) * g.array().square()).matrix();
  slot.vmax = slot.vmax.cwiseMax(slot.v);
  const S bc1 = S(1) - std::pow(beta1, static_cast<S>(step_count));
  const S bc2 = S(1) - std::pow(beta2, static_cast<S>(step_count));
  p -= (lr / bc1) * (slot.m.array() / ((slot.vmax.array() / bc2).sqrt() + eps)).matrix();
}

template <typename S>
struct TrainResult {
  DescriptorParamsT<S> params;
  CenterBankT<S> bank;
  TrainLog log;
};

/// Adapt the descriptor to the normal images by stochastic gradient
/// descent on the mean top-k-weighted distance to the center bank. The
/// features are frozen backbone outputs; the centers move only under the
/// per-epoch refresh policy, and never receive gradients.
template <typename S>
TrainResult<S> train(const std::vector<PlanesT<S>>& features, DescriptorParamsT<S> params,
                     const TrainConfig& cfg, const std::string& fingerprint) {
  if (features.empty()) throw ArgumentError("train: empty dataset");
  if (!(cfg.learning_rate > 0)) throw ConfigError("train: learning_rate must be positive");
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (params.epsilon != static_cast<S>(cfg.epsilon))
    throw ConfigError("train: descriptor epsilon disagrees with the train config");
  validate_descriptor(params);

  SoftTopKConfig topk = cfg.topk;
  topk.k = cfg.k;

  TrainResult<S> out;
  out.bank = init_center_bank(features, params, fingerprint, cfg.refresh);

  AdamWSlot<S> slot_w, slot_b, slot_a;
  slot_w.init(params.reduce_weights.size());
  slot_b.init(params.reduce_bias.size());
  slot_a.init(params.attn_conv_weights.size());
  long step_count = 0;

  std::mt19937_64 shuffler(cfg.seed);
  std::vector<size_t> order(features.size());
  std::iota(order.begin(), order.end(), 0);

  const S lr = static_cast<S>(cfg.learning_rate);
  const S wd = static_cast<S>(cfg.weight_decay);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.refresh == CenterRefresh::per_epoch && epoch > 0)
      out.bank = refresh_center_bank(out.bank, features, params);
    std::shuffle(order.begin(), order.end(), shuffler);

    double epoch_loss = 0.0;
    for (size_t begin = 0; begin < order.size(); begin += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), begin + static_cast<size_t>(cfg.batch_size));
      const S inv_batch = S(1) / static_cast<S>(end - begin);
      DescriptorGrads<S> acc;
      acc.setZero(params);
      S batch_loss = S(0);
      const std::string where = " (learning_rate=" + std::to_string(cfg.learning_rate) +
                                ", epoch=" + std::to_string(epoch) + ", batch=" +
                                std::to_string(begin / static_cast<size_t>(cfg.batch_size)) + ")";
      for (size_t i = begin; i < end; ++i) {
        const auto& f = features[order[i]];
        try {
          const auto fwd = descriptor_forward(f, params);
          const auto lr_res = adfa_loss_backward(fwd.patches, out.bank, topk, cfg.hard_selection);
          out.log.nonconverged_rows += lr_res.nonconverged;
          const auto grads = descriptor_backward(fwd, params, f, lr_res.g_patches);
          acc.reduce_weights += grads.reduce_weights;
          acc.reduce_bias += grads.reduce_bias;
          acc.attn_conv_weights += grads.attn_conv_weights;
          batch_loss += lr_res.loss;
        } catch (const NumericError& e) {
          throw NumericError("train: " + std::string(e.what()) + where);
        }
      }
      batch_loss *= inv_batch;
      if (!std::isfinite(static_cast<double>(batch_loss)))
        throw NumericError("train: loss is not finite" + where);
      epoch_loss += static_cast<double>(batch_loss) * static_cast<double>(end - begin);

      acc.reduce_weights *= inv_batch;
      acc.reduce_bias *= inv_batch;
      acc.attn_conv_weights *= inv_batch;
      ++step_count;
      adamw_amsgrad_update(params.reduce_weights.data(), acc.reduce_weights.data(),
                           params.reduce_weights.size(), slot_w, step_count, lr, wd);
      adamw_amsgrad_update(params.reduce_bias.data(), acc.reduce_bias.data(),
                           params.reduce_bias.size(), slot_b, step_count, lr, wd);
      adamw_amsgrad_update(params.attn_conv_weights.data(), acc.attn_conv_weights.data(),
                           params.attn_conv_weights.size(), slot_a, step_count, lr, wd);
    }
    const auto t1 = std::chrono::steady_clock::now();
    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = epoch_loss / static_cast<double>(order.size());
    stats.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    out.log.epochs.push_back(stats);
  }

  out.params = std::move(params);
  return out;
}

}  // namespace adfa
