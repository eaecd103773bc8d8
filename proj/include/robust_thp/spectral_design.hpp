// SPDX-License-Identifier: Apache-2.0
//
// robust-thp: robust Tomlinson-Harashima precoding for MIMO two-way relaying
// Copyright (C) 2026 The robust-thp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// Joint SVD structure of the relay channels and the diagonalized design.
//
//   [H1, H2]        = U_h  Lh^(1/2) V_h^H,   V_h = [V_h1; V_h2]
//   [G^1; G^2]      = U_g  Lg^(1/2) V_g^H,   U_g = [U_g1; U_g2]
//
// Precoders are built along these directions:
//   F_i = V_hi Li^(1/2),   F_r = V_g Lr^(1/2) U_h^H
// so that F_r H_i F_i = V_g Lr^(1/2) Lh^(1/2) V_hi^H V_hi Li^(1/2).

#pragma once

#include "numerics.hpp"
#include "random.hpp"
#include "robust_mse.hpp"
#include "system_model.hpp"

#include <limits>

namespace rthp {

struct JointSpectra {
    RVector lambda_h;  ///< squared singular values of [H1, H2], descending
    RVector lambda_g;  ///< squared singular values of [G^1; G^2], descending
    CMatrix u_h, v_h1, v_h2;
    CMatrix u_g1, u_g2, v_g;

    CMatrix v_h(Node i) const { return i == Node::first ? v_h1 : v_h2; }
    CMatrix u_g(Node i) const { return i == Node::first ? u_g1 : u_g2; }
};

struct SpectralAllocation {
    RVector lambda1;
    RVector lambda2;
    RVector lambda_r;

    const RVector& lambda(Node i) const { return i == Node::first ? lambda1 : lambda2; }
    RVector& lambda(Node i) { return i == Node::first ? lambda1 : lambda2; }
};

inline JointSpectra joint_svd(const ChannelSet& ch) {
    const Eigen::Index nr = ch.h1.rows();
    const Eigen::Index nt = ch.h1.cols();
    if (nr != nt) {
        throw ConfigError("joint_svd: requires n_t == n_r");
    }
    JointSpectra js;

    CMatrix h(nr, 2 * nt);
    h << ch.h1, ch.h2;
    const SvdFactors sh = svd_ordered(h);
    js.lambda_h = sh.sigma.array().square();
    js.u_h = sh.u;
    js.v_h1 = sh.v.topRows(nt);
    js.v_h2 = sh.v.bottomRows(nt);

    CMatrix g(2 * nt, nr);
    g << ch.g1_hat, ch.g2_hat;
    const SvdFactors sg = svd_ordered(g);
    js.lambda_g = sg.sigma.array().square();
    js.v_g = sg.v;
    js.u_g1 = sg.u.topRows(nt);
    js.u_g2 = sg.u.bottomRows(nt);
    return js;
}

/// Channels implied by the stored factors (exact up to SVD rounding).
inline ChannelSet reconstruct_channels(const JointSpectra& js) {
    const CMatrix sh = js.lambda_h.cwiseSqrt().cast<cplx>().asDiagonal();
    const CMatrix sg = js.lambda_g.cwiseSqrt().cast<cplx>().asDiagonal();
    ChannelSet ch;
    ch.h1 = js.u_h * sh * js.v_h1.adjoint();
    ch.h2 = js.u_h * sh * js.v_h2.adjoint();
    ch.g1_hat = js.u_g1 * sg * js.v_g.adjoint();
    ch.g2_hat = js.u_g2 * sg * js.v_g.adjoint();
    ch.dg1 = CMatrix::Zero(ch.g1_hat.rows(), ch.g1_hat.cols());
    ch.dg2 = CMatrix::Zero(ch.g2_hat.rows(), ch.g2_hat.cols());
    return ch;
}

struct Precoders {
    CMatrix f1, f2, fr;
};

inline CMatrix sqrt_diag(const RVector& lambda) {
    return lambda.cwiseMax(0.0).cwiseSqrt().cast<cplx>().asDiagonal();
}

inline Precoders assemble_precoders(const JointSpectra& js, const SpectralAllocation& alloc) {
    if ((alloc.lambda1.array() < 0.0).any() || (alloc.lambda2.array() < 0.0).any() ||
        (alloc.lambda_r.array() < 0.0).any()) {
        throw NumericError("assemble_precoders: spectra must be nonnegative");
    }
    Precoders p;
    p.f1 = js.v_h1 * sqrt_diag(alloc.lambda1);
    p.f2 = js.v_h2 * sqrt_diag(alloc.lambda2);
    p.fr = js.v_g * sqrt_diag(alloc.lambda_r) * js.u_h.adjoint();
    return p;
}

// ---------------------------------------------------------------------------
// Diagonalized problem
//
// Term i (source i heard at receiver j = peer(i)), per eigenmode k:
//   signal_k      = s2x_i li_k lh_k lg_k lr_k
//   denominator_k = s2x_i s2g_j sum(lr lh li) + s2nr s2g_j sum(lr) + s2n_j + s2n_j lr_k lg_k
// and the term value is prod_k (1 + signal_k / denominator_k).

inline RVector diagonal_signal(const SystemConfig& config, const JointSpectra& js,
                               const SpectralAllocation& alloc, Node i) {
    return config.sigma2_x(i) * alloc.lambda(i).array() * js.lambda_h.array() *
           js.lambda_g.array() * alloc.lambda_r.array();
}

inline double diagonal_denominator_offset(const SystemConfig& config, const JointSpectra& js,
                                          const SpectralAllocation& alloc, Node i) {
    const Node j = peer(i);
    const double s2g = config.sigma2_g(j);
    return config.sigma2_x(i) * s2g *
               (alloc.lambda_r.array() * js.lambda_h.array() * alloc.lambda(i).array()).sum() +
           config.sigma2_nr * s2g * alloc.lambda_r.sum() + config.sigma2_n(j);
}

inline RVector diagonal_denominator(const SystemConfig& config, const JointSpectra& js,
                                    const SpectralAllocation& alloc, Node i) {
    const Node j = peer(i);
    const double offset = diagonal_denominator_offset(config, js, alloc, i);
    return (offset + config.sigma2_n(j) * alloc.lambda_r.array() * js.lambda_g.array()).matrix();
}

/// Per-mode SINR-like ratios signal_k / denominator_k of term i.
inline RVector diagonal_ratios(const SystemConfig& config, const JointSpectra& js,
                               const SpectralAllocation& alloc, Node i) {
    return diagonal_signal(config, js, alloc, i).array() /
           diagonal_denominator(config, js, alloc, i).array();
}

/// Determinant of term i: prod_k (1 + ratio_k).
inline double diagonal_term(const SystemConfig& config, const JointSpectra& js,
                            const SpectralAllocation& alloc, Node i) {
    return (1.0 + diagonal_ratios(config, js, alloc, i).array()).prod();
}

/// Sum of the two determinants of the diagonalized max-det problem.
inline double diagonal_objective(const SystemConfig& config, const JointSpectra& js,
                                 const SpectralAllocation& alloc) {
    return diagonal_term(config, js, alloc, Node::first) +
           diagonal_term(config, js, alloc, Node::second);
}

inline double relay_power_diagonal(const SystemConfig& config, const JointSpectra& js,
                                   const SpectralAllocation& alloc) {
    const auto& lh = js.lambda_h.array();
    const auto& lr = alloc.lambda_r.array();
    return config.sigma2_x1 * (lr * alloc.lambda1.array() * lh).sum() +
           config.sigma2_x2 * (lr * alloc.lambda2.array() * lh).sum() +
           config.sigma2_nr * lr.sum();
}

inline double node_power_diagonal(const SystemConfig& config, const SpectralAllocation& alloc,
                                  Node i) {
    return config.sigma2_x(i) * alloc.lambda(i).sum();
}

// ---------------------------------------------------------------------------
// Pre-diagonalization objective and the unitary-assignment audit

/// sum_i |I + s2x_j D_j^H E_i^H (a_i I + B_i)^{-1} E_i D_j| for arbitrary precoders.
inline double max_det_objective(const SystemConfig& config, const ChannelSet& ch,
                                const CMatrix& f1, const CMatrix& f2, const CMatrix& fr) {
    DesignSolution sol;
    sol.f1 = f1;
    sol.f2 = f2;
    sol.fr = fr;
    double total = 0.0;
    for (Node i : {Node::first, Node::second}) {
        const EffectiveFactors f = effective_factors(config, ch, sol, i);
        CMatrix k = detail::signal_gram(f, config.sigma2_x(peer(i)));
        k.diagonal().array() += 1.0;
        total += hermitian_det(k);
    }
    return total;
}

struct DominanceReport {
    int trials = 0;
    int dominated = 0;           ///< random draws with objective <= structured objective
    double fraction = 0.0;       ///< dominated / trials
    double structured = 0.0;     ///< objective with the SVD-aligned unitaries
    double best_random = 0.0;
    double worst_random = 0.0;
};

/// Compares the SVD-aligned precoder directions against `trials` Haar-random
/// choices of X_r, Z_r, X_1, X_2 at the same spectra.
inline DominanceReport proposition1_dominance(const SystemConfig& config, const JointSpectra& js,
                                              const SpectralAllocation& alloc, int trials,
                                              Rng& rng, double rel_tol = 1e-12) {
    if (trials < 1) {
        throw std::invalid_argument("proposition1_dominance: trials must be >= 1");
    }
    const ChannelSet ch = reconstruct_channels(js);
    const Precoders p = assemble_precoders(js, alloc);
    DominanceReport rep;
    rep.trials = trials;
    rep.structured = max_det_objective(config, ch, p.f1, p.f2, p.fr);
    rep.best_random = -std::numeric_limits<double>::infinity();
    rep.worst_random = std::numeric_limits<double>::infinity();
    const Eigen::Index nt = js.v_h1.rows();
    const Eigen::Index nr = js.u_h.rows();
    for (int t = 0; t < trials; ++t) {
        const CMatrix x1 = random_unitary(rng, nt);
        const CMatrix x2 = random_unitary(rng, nt);
        const CMatrix xr = random_unitary(rng, nr);
        const CMatrix zr = random_unitary(rng, nr);
        const double obj = max_det_objective(config, ch, x1 * sqrt_diag(alloc.lambda1),
                                             x2 * sqrt_diag(alloc.lambda2),
                                             xr * sqrt_diag(alloc.lambda_r) * zr);
        rep.best_random = std::max(rep.best_random, obj);
        rep.worst_random = std::min(rep.worst_random, obj);
        if (obj <= rep.structured * (1.0 + rel_tol)) {
            ++rep.dominated;
        }
    }
    rep.fraction = static_cast<double>(rep.dominated) / trials;
    return rep;
}

}  // namespace rthp
