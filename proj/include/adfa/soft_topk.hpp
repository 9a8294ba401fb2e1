// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable top-k selection over distance vectors, realized as
// entropic optimal transport between the distances and two anchor
// targets, solved by log-domain Sinkhorn iteration. The soft indicator
// z has sum(z) = k by construction (column marginals are satisfied
// exactly by the final column update). A hard top-k selector is
// provided as the non-differentiable reference arm.

#pragma once

#include "adfa/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace adfa {

enum class AnchorMode { min_max_of_input, fixed_unit };
enum class BackwardMode { unrolled, implicit };

struct SoftTopKConfig {
  int k = 3;
  double ot_epsilon = 0.01;  // entropic regularization, applied to row-max-normalized distances
  int max_iters = 200;
  double tolerance = 1e-6;  // max absolute row-marginal violation of the returned plan
  AnchorMode anchor_mode = AnchorMode::min_max_of_input;
  int cost_power = 2;  // 1 or 2
  BackwardMode backward_mode = BackwardMode::unrolled;
};

template <typename S>
struct SinkhornResult {
  MatX<S> plan;              // n x 2; columns exact, rows within tolerance when converged
  VecX<S> f;                 // row potentials
  Eigen::Matrix<S, 2, 1> g;  // column potentials
  int iterations = 0;
  bool converged = false;
  S violation = std::numeric_limits<S>::infinity();
  // Potential trajectory, recorded when the caller needs an unrolled
  // backward pass. Entry t holds the potentials after update pair t.
  std::vector<VecX<S>> f_hist;
  std::vector<Eigen::Matrix<S, 2, 1>> g_hist;
};

namespace detail {

// Row update: f_i = eps * (log r_i - LSE_j((g_j - M_ij)/eps)).
// Rows of exp((f + g - M)/eps) then sum to r exactly.
template <typename S>
void sinkhorn_row_update(const MatX<S>& cost, const VecX<S>& log_r,
                         const Eigen::Matrix<S, 2, 1>& g, S eps, VecX<S>& f) {
  const auto t0 = ((g(0) - cost.col(0).array()) / eps).eval();
  const auto t1 = ((g(1) - cost.col(1).array()) / eps).eval();
  const auto hi = t0.max(t1);
  const auto lo = t0.min(t1);
  f = (eps * (log_r.array() - (hi + (lo - hi).exp().log1p()))).matrix();
}

// Column update: g_j = eps * (log c_j - LSE_i((f_i - M_ij)/eps)).
template <typename S>
void sinkhorn_col_update(const MatX<S>& cost, const Eigen::Matrix<S, 2, 1>& log_c,
                         const VecX<S>& f, S eps, Eigen::Matrix<S, 2, 1>& g) {
  for (int j = 0; j < 2; ++j) {
    const auto t = ((f.array() - cost.col(j).array()) / eps).eval();
    const S m = t.maxCoeff();
    if (!std::isfinite(m)) {
      g(j) = -std::numeric_limits<S>::infinity();
      continue;
    }
    g(j) = eps * (log_c(j) - (m + std::log((t - m).exp().sum())));
  }
}

}  // namespace detail

/// Entropy-regularized transport between n sources and 2 targets.
/// Iterates row and column scalings in the log domain until the row
/// marginals of the plan are met within cfg.tolerance (columns are met
/// exactly by the final column update). Non-convergence is reported via
/// the result flags rather than thrown; callers decide how to warn.
template <typename S>
SinkhornResult<S> sinkhorn(const MatX<S>& cost, const VecX<S>& row_marginal,
                           const Eigen::Matrix<S, 2, 1>& col_marginal,
                           const SoftTopKConfig& cfg, bool record_history = false) {
  const Eigen::Index n = cost.rows();
  if (cost.cols() != 2) throw ArgumentError("sinkhorn: cost must have exactly 2 columns");
  if (row_marginal.size() != n) throw ArgumentError("sinkhorn: row marginal size mismatch");
  if (!cost.allFinite()) throw NumericError("sinkhorn: non-finite cost matrix");
  if ((row_marginal.array() < S(0)).any() || (col_marginal.array() < S(0)).any())
    throw ArgumentError("sinkhorn: marginals must be nonnegative");
  const S mass_r = row_marginal.sum();
  const S mass_c = col_marginal.sum();
  if (std::abs(mass_r - mass_c) > S(1e-9))
    throw ArgumentError("sinkhorn: row and column marginals carry different total mass");

  SinkhornResult<S> res;
  const S eps = static_cast<S>(cfg.ot_epsilon);

  if (mass_r <= S(0)) {
    res.plan = MatX<S>::Zero(n, 2);
    res.f = VecX<S>::Constant(n, -std::numeric_limits<S>::infinity());
    res.g.setConstant(-std::numeric_limits<S>::infinity());
    res.converged = true;
    res.violation = S(0);
    return res;
  }

  const VecX<S> log_r = row_marginal.array().log().matrix();
  const Eigen::Matrix<S, 2, 1> log_c = col_marginal.array().log().matrix();

  VecX<S> f(n), f_probe(n);
  Eigen::Matrix<S, 2, 1> g = Eigen::Matrix<S, 2, 1>::Zero();

  detail::sinkhorn_row_update(cost, log_r, g, eps, f);
  detail::sinkhorn_col_update(cost, log_c, f, eps, g);
  res.iterations = 1;
  if (record_history) {
    res.f_hist.push_back(f);
    res.g_hist.push_back(g);
  }

  while (true) {
    // Row sums of the current plan (f, g) are r_i * exp((f_i - f'_i)/eps)
    // where f' is the next row update, so the violation is free.
    detail::sinkhorn_row_update(cost, log_r, g, eps, f_probe);
    res.violation = (row_marginal.array() * (((f - f_probe).array() / eps).exp() - S(1)).abs())
                        .maxCoeff();
    if (res.violation <= static_cast<S>(cfg.tolerance)) {
      res.converged = true;
      break;
    }
    if (res.iterations >= cfg.max_iters) break;
    f.swap(f_probe);
    detail::sinkhorn_col_update(cost, log_c, f, eps, g);
    ++res.iterations;
    if (record_history) {
      res.f_hist.push_back(f);
      res.g_hist.push_back(g);
    }
  }

  res.plan.resize(n, 2);
  for (int j = 0; j < 2; ++j)
    res.plan.col(j) = ((f.array() + g(j) - cost.col(j).array()) / eps).exp().matrix();
  res.f = std::move(f);
  res.g = g;
  return res;
}

/// Forward record for one soft top-k row; holds what the backward pass needs.
template <typename S>
struct SoftTopKRecord {
  VecX<S> z;
  VecX<S> d;        // raw input distances
  VecX<S> d_tilde;  // d / max(d)
  S scale = S(0);   // max(d); <= 0 marks the all-zero degenerate row
  Eigen::Index argmax = 0;
  Eigen::Index argmin = 0;
  S a0 = S(0), a1 = S(1);  // anchors on the normalized axis
  MatX<S> cost;            // n x 2
  SinkhornResult<S> sk;
};

/// Soft membership of each entry of d among the k smallest. Distances are
/// normalized by the row maximum before transport so one ot_epsilon is
/// meaningful across scales; z itself is scale-free.
template <typename S>
SoftTopKRecord<S> soft_topk_forward(const VecX<S>& d, const SoftTopKConfig& cfg,
                                    bool record_history = false) {
  const Eigen::Index n = d.size();
  if (cfg.k < 1 || cfg.k >= n)
    throw ArgumentError("soft_topk: requires 1 <= k < n, got k=" + std::to_string(cfg.k) +
                        ", n=" + std::to_string(n));
  if (!d.allFinite()) throw NumericError("soft_topk: non-finite distance vector");

  SoftTopKRecord<S> rec;
  rec.d = d;
  rec.scale = d.maxCoeff(&rec.argmax);
  d.minCoeff(&rec.argmin);
  rec.d_tilde = rec.scale > S(0) ? (d / rec.scale).eval() : VecX<S>::Zero(n).eval();

  if (cfg.anchor_mode == AnchorMode::min_max_of_input) {
    rec.a0 = rec.d_tilde.minCoeff();
    rec.a1 = rec.d_tilde.maxCoeff();
  } else {
    rec.a0 = S(0);
    rec.a1 = S(1);
  }

  rec.cost.resize(n, 2);
  if (cfg.cost_power == 2) {
    rec.cost.col(0) = (rec.d_tilde.array() - rec.a0).square().matrix();
    rec.cost.col(1) = (rec.d_tilde.array() - rec.a1).square().matrix();
  } else {
    rec.cost.col(0) = (rec.d_tilde.array() - rec.a0).abs().matrix();
    rec.cost.col(1) = (rec.d_tilde.array() - rec.a1).abs().matrix();
  }

  const VecX<S> row_marginal = VecX<S>::Constant(n, S(1) / S(n));
  Eigen::Matrix<S, 2, 1> col_marginal;
  col_marginal << S(cfg.k) / S(n), S(n - cfg.k) / S(n);

  // soft_topk keeps the indicator range within cfg.tolerance of [0, 1],
  // which needs the plan's rows n times tighter than the z tolerance.
  SoftTopKConfig inner = cfg;
  inner.tolerance = cfg.tolerance / static_cast<double>(n);
  rec.sk = sinkhorn<S>(rec.cost, row_marginal, col_marginal, inner, record_history);
  rec.z = S(n) * rec.sk.plan.col(0);
  return rec;
}

template <typename S>
VecX<S> soft_topk(const VecX<S>& d, const SoftTopKConfig& cfg) {
  return soft_topk_forward<S>(d, cfg).z;
}

/// Exactly k ones at the k smallest entries, ties broken by lower index.
template <typename S>
VecX<S> hard_topk(const VecX<S>& d, int k) {
  const Eigen::Index n = d.size();
  if (k < 1 || k > n) throw ArgumentError("hard_topk: requires 1 <= k <= n");
  std::vector<Eigen::Index> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index(0));
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    return d(a) < d(b) || (d(a) == d(b) && a < b);
  });
  VecX<S> z = VecX<S>::Zero(n);
  for (int i = 0; i < k; ++i) z(idx[static_cast<size_t>(i)]) = S(1);
  return z;
}

namespace detail {

// Backprop from the transport cost matrix to the raw distances, through
// the per-row normalization and (for min_max anchors) the anchor picks.
// The row maximum normalizes to exactly 1, so the upper anchor is
// locally constant and carries no gradient of its own.
template <typename S>
VecX<S> cost_construction_backward(const SoftTopKRecord<S>& rec, const SoftTopKConfig& cfg,
                                   const MatX<S>& g_cost) {
  const Eigen::Index n = rec.d.size();
  if (rec.scale <= S(0)) return VecX<S>::Zero(n);

  VecX<S> pg0(n), pg1(n);
  if (cfg.cost_power == 2) {
    pg0 = S(2) * (rec.d_tilde.array() - rec.a0).matrix();
    pg1 = S(2) * (rec.d_tilde.array() - rec.a1).matrix();
  } else {
    pg0 = (rec.d_tilde.array() - rec.a0).sign().matrix();
    pg1 = (rec.d_tilde.array() - rec.a1).sign().matrix();
  }

  const VecX<S> g_dt =
      (g_cost.col(0).array() * pg0.array() + g_cost.col(1).array() * pg1.array()).matrix();

  VecX<S> g_d = g_dt / rec.scale;
  const S s2 = rec.scale * rec.scale;
  g_d(rec.argmax) -= g_dt.dot(rec.d) / s2;
  if (cfg.anchor_mode == AnchorMode::min_max_of_input) {
    const S g_a0 = -(g_cost.col(0).array() * pg0.array()).sum();
    g_d(rec.argmin) += g_a0 / rec.scale;
    g_d(rec.argmax) -= g_a0 * rec.d(rec.argmin) / s2;
  }
  return g_d;
}

// Reverse pass through the recorded Sinkhorn iterations.
template <typename S>
MatX<S> sinkhorn_unrolled_backward(const SoftTopKRecord<S>& rec, S eps, const MatX<S>& g_plan) {
  const MatX<S>& cost = rec.cost;
  const MatX<S>& plan = rec.sk.plan;
  const Eigen::Index n = cost.rows();
  const auto& f_hist = rec.sk.f_hist;
  const auto& g_hist = rec.sk.g_hist;

  // plan_ij = exp((f_i + g_j - M_ij)/eps)
  const MatX<S> gp = (g_plan.array() * plan.array() / eps).matrix();
  VecX<S> gf = gp.rowwise().sum();
  Eigen::Matrix<S, 2, 1> gg = gp.colwise().sum().transpose();
  MatX<S> g_cost = -gp;

  VecX<S> beta(n), t(n);
  for (int it = static_cast<int>(f_hist.size()) - 1; it >= 0; --it) {
    // g_t = eps*(log c - LSE_i((f_t - M)/eps)) : column-wise softmax in f_t
    const VecX<S>& fcur = f_hist[static_cast<size_t>(it)];
    for (int j = 0; j < 2; ++j) {
      t = ((fcur.array() - cost.col(j).array()) / eps).matrix();
      const S m = t.maxCoeff();
      beta = (t.array() - m).exp().matrix();
      beta /= beta.sum();
      g_cost.col(j) += beta * gg(j);
      gf -= beta * gg(j);
    }
    gg.setZero();
    // f_t = eps*(log r - LSE_j((g_{t-1} - M)/eps)) : row-wise softmax in g_{t-1}
    Eigen::Matrix<S, 2, 1> gprev = Eigen::Matrix<S, 2, 1>::Zero();
    if (it > 0) gprev = g_hist[static_cast<size_t>(it) - 1];
    const auto t0 = ((gprev(0) - cost.col(0).array()) / eps).eval();
    const auto t1 = ((gprev(1) - cost.col(1).array()) / eps).eval();
    const auto hi = t0.max(t1);
    const auto e0 = (t0 - hi).exp().eval();
    const auto e1 = (t1 - hi).exp().eval();
    const auto denom = (e0 + e1).eval();
    const auto a0 = (e0 / denom).eval();
    const auto a1 = (e1 / denom).eval();
    g_cost.col(0) += (a0 * gf.array()).matrix();
    g_cost.col(1) += (a1 * gf.array()).matrix();
    gg(0) -= (a0 * gf.array()).sum();
    gg(1) -= (a1 * gf.array()).sum();
    gf.setZero();
    // gg now refers to g_{t-1}; consumed by the next loop turn. g_0 = 0 is
    // constant, so the remainder after it == 0 is dropped.
  }
  return g_cost;
}

}  // namespace detail

/// Vector-Jacobian product of z = soft_topk(d) against `upstream`, using a
/// forward record. Unrolled mode replays the recorded Sinkhorn iterations;
/// implicit mode differentiates the converged fixed point through the
/// two-anchor reduction (z_i is logistic in the cost gap, tied by sum(z)=k).
template <typename S>
VecX<S> soft_topk_vjp_from(const SoftTopKRecord<S>& rec, const SoftTopKConfig& cfg,
                           const VecX<S>& upstream) {
  const Eigen::Index n = rec.d.size();
  if (upstream.size() != n) throw ArgumentError("soft_topk_vjp: upstream size mismatch");
  if (rec.scale <= S(0)) return VecX<S>::Zero(n);
  const S eps = static_cast<S>(cfg.ot_epsilon);

  MatX<S> g_cost;
  if (cfg.backward_mode == BackwardMode::unrolled) {
    if (rec.sk.f_hist.empty())
      throw ArgumentError("soft_topk_vjp: unrolled mode needs a recorded forward trajectory");
    MatX<S> g_plan = MatX<S>::Zero(n, 2);
    g_plan.col(0) = S(n) * upstream;
    g_cost = detail::sinkhorn_unrolled_backward(rec, eps, g_plan);
  } else {
    if (!rec.sk.converged)
      throw NumericError("soft_topk_vjp: implicit mode requires a converged forward solve");
    const VecX<S>& z = rec.z;
    const VecX<S> sp = (z.array() * (S(1) - z.array())).max(S(0)).matrix();
    const S total = sp.sum();
    g_cost = MatX<S>::Zero(n, 2);
    if (total > std::numeric_limits<S>::min()) {
      const S mix = upstream.dot(sp) / total;
      const VecX<S> g_delta = (sp.array() * (upstream.array() - mix) / eps).matrix();
      g_cost.col(0) = -g_delta;
      g_cost.col(1) = g_delta;
    }
  }
  return detail::cost_construction_backward(rec, cfg, g_cost);
}

template <typename S>
VecX<S> soft_topk_vjp(const VecX<S>& d, const SoftTopKConfig& cfg, const VecX<S>& upstream) {
  const bool record = cfg.backward_mode == BackwardMode::unrolled;
  const SoftTopKRecord<S> rec = soft_topk_forward<S>(d, cfg, record);
  return soft_topk_vjp_from(rec, cfg, upstream);
}

/// Batch of independent soft top-k rows. Rows share the vectorized solver
/// and stop on their own convergence, so each row matches a sequential
/// soft_topk call on it.
template <typename S>
struct SoftTopKBatch {
  MatX<S> z;  // m x n
  std::vector<SoftTopKRecord<S>> records;
  int nonconverged = 0;
};

template <typename S>
SoftTopKBatch<S> soft_topk_batch_forward(const MatX<S>& dmat, const SoftTopKConfig& cfg,
                                         bool keep_records, bool record_history = false) {
  SoftTopKBatch<S> out;
  out.z.resize(dmat.rows(), dmat.cols());
  if (keep_records) out.records.reserve(static_cast<size_t>(dmat.rows()));
  for (Eigen::Index r = 0; r < dmat.rows(); ++r) {
    SoftTopKRecord<S> rec =
        soft_topk_forward<S>(dmat.row(r).transpose(), cfg, record_history);
    out.z.row(r) = rec.z.transpose();
    if (!rec.sk.converged) ++out.nonconverged;
    if (keep_records) out.records.push_back(std::move(rec));
  }
  return out;
}

template <typename S>
MatX<S> soft_topk_batch(const MatX<S>& dmat, const SoftTopKConfig& cfg) {
  return soft_topk_batch_forward<S>(dmat, cfg, /*keep_records=*/false).z;
}

template <typename S>
MatX<S> soft_topk_batch_vjp(const MatX<S>& dmat, const SoftTopKConfig& cfg,
                            const MatX<S>& upstream) {
  if (upstream.rows() != dmat.rows() || upstream.cols() != dmat.cols())
    throw ArgumentError("soft_topk_batch_vjp: upstream shape mismatch");
  MatX<S> grads(dmat.rows(), dmat.cols());
  for (Eigen::Index r = 0; r < dmat.rows(); ++r)
    grads.row(r) =
        soft_topk_vjp<S>(dmat.row(r).transpose(), cfg, upstream.row(r).transpose()).transpose();
  return grads;
}

/// Euclidean distances between every patch row and every center row:
/// entry (t, j) = ||patches.row(t) - centers.row(j)||. The squared-norm
/// expansion is clamped at zero before the square root.
template <typename S>
MatX<S> pairwise_distances(const MatX<S>& patches, const MatX<S>& centers) {
  if (patches.cols() != centers.cols())
    throw ArgumentError("pairwise_distances: feature dimensions disagree");
  if (!patches.allFinite() || !centers.allFinite())
    throw NumericError("pairwise_distances: non-finite input");
  const VecX<S> p2 = patches.rowwise().squaredNorm();
  const VecX<S> c2 = centers.rowwise().squaredNorm();
  MatX<S> sq = (-2 * patches * centers.transpose());
  sq.colwise() += p2;
  sq.rowwise() += c2.transpose();
  return sq.cwiseMax(S(0)).cwiseSqrt();
}

/// Gradient of a scalar through pairwise_distances with respect to the
/// patches. Entries at (numerically) zero distance contribute nothing.
template <typename S>
MatX<S> pairwise_distances_vjp(const MatX<S>& patches, const MatX<S>& centers,
                               const MatX<S>& dist, const MatX<S>& g_dist) {
  if (dist.rows() != patches.rows() || dist.cols() != centers.rows() ||
      g_dist.rows() != dist.rows() || g_dist.cols() != dist.cols())
    throw ArgumentError("pairwise_distances_vjp: shape mismatch");
  const S tiny = std::numeric_limits<S>::epsilon();
  const MatX<S> w = (dist.array() > tiny)
                        .select(g_dist.array() / dist.array(),
                                MatX<S>::Zero(dist.rows(), dist.cols()).array())
                        .matrix();
  return (w.rowwise().sum().asDiagonal() * patches) - w * centers;
}

}  // namespace adfa
