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

// Closed-form MSE and power expressions for receiver i estimating v_j (j != i).
//
// With Q = F_r H_j F_j, the worst-case bound over ||dG_i||^2 <= s2g is
//
//   s2x ||Gamma G^ Q - C||^2 + s2x s2g ||Gamma||^2 ||Q||^2
//     + s2nr ||Gamma G^ F_r||^2 + s2nr s2g ||Gamma||^2 ||F_r||^2 + s2n ||Gamma||^2
//
// All inverses are Hermitian PD solves.

#pragma once

#include "numerics.hpp"
#include "system_model.hpp"

namespace rthp {

/// Scalar and matrix factors of the reduced MSE at receiver i:
///   a = s2x_j s2g_i ||F_r D_j||^2 + s2nr s2g_i ||F_r||^2 + s2n_i
///   e = G^_i F_r,  d = H_j F_j,  b = s2nr e e^H (relay-noise Gram)
struct EffectiveFactors {
    double a = 0.0;
    CMatrix e;
    CMatrix d;
    CMatrix b;
};

inline EffectiveFactors effective_factors(const SystemConfig& config, const ChannelSet& ch,
                                          const DesignSolution& sol, Node i) {
    const Node j = peer(i);
    EffectiveFactors f;
    f.e = ch.g_hat(i) * sol.fr;
    f.d = ch.h(j) * sol.f(j);
    f.b = config.sigma2_nr * f.e * f.e.adjoint();
    f.a = config.sigma2_x(j) * config.sigma2_g(i) * fro2(sol.fr * f.d) +
          config.sigma2_nr * config.sigma2_g(i) * fro2(sol.fr) + config.sigma2_n(i);
    return f;
}

/// Exact MSE at receiver i for a given downlink G_i (expectation over x_j and noise).
inline double mse_at(const SystemConfig& config, const ChannelSet& ch, const DesignSolution& sol,
                     Node i, const CMatrix& g_i) {
    const Node j = peer(i);
    const CMatrix& gam = sol.gamma(i);
    const CMatrix q = sol.fr * ch.h(j) * sol.f(j);
    return config.sigma2_x(j) * fro2(gam * g_i * q - sol.c(j)) +
           config.sigma2_nr * fro2(gam * g_i * sol.fr) + config.sigma2_n(i) * fro2(gam);
}

/// Exact MSE at receiver i on the true channel G^_i + dG_i held in `ch`.
inline double exact_mse(const SystemConfig& config, const ChannelSet& ch,
                        const DesignSolution& sol, Node i) {
    return mse_at(config, ch, sol, i, ch.g_true(i));
}

/// Worst-case MSE upper bound for receiver i given its current equalizer.
inline double worst_case_mse_with(const SystemConfig& config, const ChannelSet& ch,
                                  const DesignSolution& sol, Node i, const CMatrix& gamma) {
    const Node j = peer(i);
    const double s2x = config.sigma2_x(j);
    const double s2g = config.sigma2_g(i);
    const double s2nr = config.sigma2_nr;
    const CMatrix q = sol.fr * ch.h(j) * sol.f(j);
    const CMatrix& g = ch.g_hat(i);
    const double gam2 = fro2(gamma);
    return s2x * fro2(gamma * g * q - sol.c(j)) + s2x * s2g * gam2 * fro2(q) +
           s2nr * fro2(gamma * g * sol.fr) + s2nr * s2g * gam2 * fro2(sol.fr) +
           config.sigma2_n(i) * gam2;
}

inline double worst_case_mse(const SystemConfig& config, const ChannelSet& ch,
                             const DesignSolution& sol, Node i) {
    return worst_case_mse_with(config, ch, sol, i, sol.gamma(i));
}

inline double sum_worst_case_mse(const SystemConfig& config, const ChannelSet& ch,
                                 const DesignSolution& sol) {
    return worst_case_mse(config, ch, sol, Node::first) +
           worst_case_mse(config, ch, sol, Node::second);
}

/// MMSE equalizer minimizing the worst-case bound for receiver i (uses sol.c(j)).
inline CMatrix mmse_equalizer(const SystemConfig& config, const ChannelSet& ch,
                              const DesignSolution& sol, Node i) {
    const Node j = peer(i);
    const double s2x = config.sigma2_x(j);
    const double s2g = config.sigma2_g(i);
    const double s2nr = config.sigma2_nr;
    const CMatrix q = sol.fr * ch.h(j) * sol.f(j);
    const CMatrix eq = ch.g_hat(i) * q;   // G^ F_r H_j F_j
    const CMatrix e = ch.g_hat(i) * sol.fr;
    CMatrix m = s2x * eq * eq.adjoint() + s2nr * e * e.adjoint();
    m.diagonal().array() += s2x * s2g * fro2(q) + s2nr * s2g * fro2(sol.fr) + config.sigma2_n(i);
    m = 0.5 * (m + m.adjoint());
    // Gamma = s2x C Q^H G^^H M^{-1}  =>  Gamma^H = M^{-1} (s2x G^ Q C^H)
    const CMatrix rhs = s2x * eq * sol.c(j).adjoint();
    return hermitian_solve(m, rhs).adjoint();
}

namespace detail {

/// s2x D^H E^H (a I + B)^{-1} E D, Hermitian PSD.
inline CMatrix signal_gram(const EffectiveFactors& f, double s2x) {
    CMatrix ab = f.b;
    ab.diagonal().array() += f.a;
    const CMatrix ed = f.e * f.d;
    CMatrix k = s2x * ed.adjoint() * hermitian_solve(0.5 * (ab + ab.adjoint()), ed);
    return 0.5 * (k + k.adjoint());
}

}  // namespace detail

/// The Hermitian PD matrix (I + s2x D^H E^H (a I + B)^{-1} E D)^{-1} whose
/// trace, weighted by C, gives the MMSE-reduced MSE.
inline CMatrix mse_inner_matrix(const EffectiveFactors& f, double sigma2_xj) {
    CMatrix k = detail::signal_gram(f, sigma2_xj);
    const Eigen::Index n = k.rows();
    k.diagonal().array() += 1.0;
    CMatrix inv = hermitian_solve(k, CMatrix::Identity(n, n));
    return 0.5 * (inv + inv.adjoint());
}

/// MSE after substituting the MMSE equalizer, via the matrix inversion lemma:
///   tr(s2x C (I + s2x D^H E^H (a I + B)^{-1} E D)^{-1} C^H)
inline double reduced_mse(const SystemConfig& config, const EffectiveFactors& f,
                          const CMatrix& c_j, Node j) {
    const double s2x = config.sigma2_x(j);
    const CMatrix inner = mse_inner_matrix(f, s2x);
    return s2x * (c_j * inner * c_j.adjoint()).trace().real();
}

/// Same quantity without the inversion lemma:
///   tr(s2x C (I - s2x D^H E^H (a I + B + s2x E D D^H E^H)^{-1} E D) C^H)
inline double reduced_mse_direct(const SystemConfig& config, const EffectiveFactors& f,
                                 const CMatrix& c_j, Node j) {
    const double s2x = config.sigma2_x(j);
    const CMatrix ed = f.e * f.d;
    const Eigen::Index n = f.d.cols();
    CMatrix m = f.b + s2x * ed * ed.adjoint();
    m.diagonal().array() += f.a;
    const CMatrix inner =
        CMatrix::Identity(n, n) - s2x * ed.adjoint() * hermitian_solve(0.5 * (m + m.adjoint()), ed);
    return s2x * (c_j * inner * c_j.adjoint()).trace().real();
}

/// |I + s2x D^H E^H (a I + B)^{-1} E D|^(-1/n)
inline double mse_lower_bound(const EffectiveFactors& f, double sigma2_xj, int n) {
    CMatrix k = detail::signal_gram(f, sigma2_xj);
    k.diagonal().array() += 1.0;
    return std::pow(hermitian_det(k), -1.0 / static_cast<double>(n));
}

inline double relay_power(const SystemConfig& config, const ChannelSet& ch,
                          const DesignSolution& sol) {
    return config.sigma2_x1 * fro2(sol.fr * ch.h1 * sol.f1) +
           config.sigma2_x2 * fro2(sol.fr * ch.h2 * sol.f2) + config.sigma2_nr * fro2(sol.fr);
}

inline double node_power(const SystemConfig& config, const DesignSolution& sol, Node i) {
    return config.sigma2_x(i) * fro2(sol.f(i));
}

}  // namespace rthp
