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

// Two-slot MIMO two-way relay link with Tomlinson-Harashima precoding at
// both sources, a linear relay and linear equalizers at the receivers.
//
//   slot 1:  y_r = H1 F1 x1 + H2 F2 x2 + n_r
//   slot 2:  y_i = G_i F_r y_r + n_i
//
// Each receiver removes its own back-propagated signal G_i F_r H_i F_i x_i and
// equalizes the remainder with Gamma_i to estimate the peer's modified symbols
// v_j = C_j x_j.

#pragma once

#include "numerics.hpp"
#include "random.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace rthp {

class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

enum class Node { first = 1, second = 2 };

constexpr Node peer(Node i) { return i == Node::first ? Node::second : Node::first; }
constexpr int index_of(Node i) { return static_cast<int>(i); }

struct SystemConfig {
    int n_t = 4;
    int n_r = 4;
    double sigma2_x1 = 1.0;
    double sigma2_x2 = 1.0;
    double sigma2_nr = 0.1;
    double sigma2_n1 = 0.1;
    double sigma2_n2 = 0.1;
    double p_rt = 10.0;
    double p_1t = 10.0;
    double p_2t = 10.0;
    double sigma2_g1 = 0.01;
    double sigma2_g2 = 0.01;
    int qam_m = 4;
    std::uint64_t rng_seed = 1;

    double sigma2_x(Node i) const { return i == Node::first ? sigma2_x1 : sigma2_x2; }
    double sigma2_n(Node i) const { return i == Node::first ? sigma2_n1 : sigma2_n2; }
    double sigma2_g(Node i) const { return i == Node::first ? sigma2_g1 : sigma2_g2; }
    double p_t(Node i) const { return i == Node::first ? p_1t : p_2t; }

    /// Throws ConfigError naming the first violated field.
    void validate() const {
        auto require = [](bool ok, const std::string& what) {
            if (!ok) {
                throw ConfigError("invalid config: " + what);
            }
        };
        require(n_t >= 1, "n_t must be >= 1");
        require(n_r >= 1, "n_r must be >= 1");
        require(n_t == n_r, "n_t must equal n_r");
        require(sigma2_x1 > 0.0 && sigma2_x2 > 0.0, "signal variances must be > 0");
        require(sigma2_nr > 0.0, "sigma2_nr must be > 0");
        require(sigma2_n1 > 0.0 && sigma2_n2 > 0.0, "receiver noise variances must be > 0");
        require(p_rt > 0.0, "p_rt must be > 0");
        require(p_1t > 0.0 && p_2t > 0.0, "transmit power budgets must be > 0");
        require(sigma2_g1 >= 0.0 && sigma2_g2 >= 0.0, "uncertainty radii must be >= 0");
        require(qam_m == 4 || qam_m == 16 || qam_m == 64, "qam_m must be one of 4, 16, 64");
        for (double v : {sigma2_x1, sigma2_x2, sigma2_nr, sigma2_n1, sigma2_n2, p_rt, p_1t, p_2t,
                         sigma2_g1, sigma2_g2}) {
            require(std::isfinite(v), "all real-valued fields must be finite");
        }
    }
};

/// Uplink channels H_i (N_r x N_t), downlink estimates G^_i (N_t x N_r) and
/// the estimation errors dG_i. The true downlink is G_i = G^_i + dG_i.
struct ChannelSet {
    CMatrix h1, h2;
    CMatrix g1_hat, g2_hat;
    CMatrix dg1, dg2;

    const CMatrix& h(Node i) const { return i == Node::first ? h1 : h2; }
    const CMatrix& g_hat(Node i) const { return i == Node::first ? g1_hat : g2_hat; }
    const CMatrix& dg(Node i) const { return i == Node::first ? dg1 : dg2; }
    CMatrix g_true(Node i) const { return g_hat(i) + dg(i); }
};

struct DesignSolution {
    CMatrix f1, f2, fr;
    CMatrix c1, c2;
    CMatrix gamma1, gamma2;
    RVector lambda1, lambda2, lambda_r;

    const CMatrix& f(Node i) const { return i == Node::first ? f1 : f2; }
    const CMatrix& c(Node i) const { return i == Node::first ? c1 : c2; }
    const CMatrix& gamma(Node i) const { return i == Node::first ? gamma1 : gamma2; }
};

inline ChannelSet generate_channels(const SystemConfig& config, Rng& rng) {
    ChannelSet ch;
    ch.h1 = complex_gaussian_matrix(rng, config.n_r, config.n_t);
    ch.h2 = complex_gaussian_matrix(rng, config.n_r, config.n_t);
    ch.g1_hat = complex_gaussian_matrix(rng, config.n_t, config.n_r);
    ch.g2_hat = complex_gaussian_matrix(rng, config.n_t, config.n_r);
    ch.dg1 = CMatrix::Zero(config.n_t, config.n_r);
    ch.dg2 = CMatrix::Zero(config.n_t, config.n_r);
    return ch;
}

// ---------------------------------------------------------------------------
// Square M-QAM and the Tomlinson-Harashima modulo

inline int qam_side(int m) {
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
    if (m < 4 || side * side != m || side % 2 != 0) {
        throw ConfigError("qam constellation size must be an even square (4, 16, 64)");
    }
    return side;
}

namespace detail {

inline double modulo_axis(double a, double half) {
    const double period = 2.0 * half;
    double r = a - period * std::ceil((a - half) / period);
    // guard rounding at the open lower edge
    if (r <= -half) {
        r += period;
    }
    if (r > half) {
        r -= period;
    }
    return r;
}

inline double slice_axis(double a, int side) {
    // odd integers -(side-1), ..., side-1; ties go to the smaller magnitude
    const double top = side - 1;
    double q = 2.0 * std::floor(a / 2.0) + 1.0;  // nearest odd candidate from below-ish
    double best = q;
    double best_d = std::abs(a - q);
    for (double cand : {q - 2.0, q + 2.0}) {
        const double d = std::abs(a - cand);
        if (d < best_d || (d == best_d && std::abs(cand) < std::abs(best))) {
            best = cand;
            best_d = d;
        }
    }
    return std::clamp(best, -top, top);
}

}  // namespace detail

/// Reduces real and imaginary parts into (-sqrt(M), sqrt(M)] by multiples of 2 sqrt(M).
inline cplx modulo_reduce(cplx z, int m) {
    const double half = std::sqrt(static_cast<double>(m));
    return {detail::modulo_axis(z.real(), half), detail::modulo_axis(z.imag(), half)};
}

/// Nearest square-QAM point (odd integer grid).
inline cplx slice_qam(cplx z, int m) {
    const int side = qam_side(m);
    return {detail::slice_axis(z.real(), side), detail::slice_axis(z.imag(), side)};
}

inline cplx random_qam_symbol(Rng& rng, int m) {
    const int side = qam_side(m);
    std::uniform_int_distribution<int> ud(0, side - 1);
    const int re = ud(rng);
    const int im = ud(rng);
    return {2.0 * re - (side - 1), 2.0 * im - (side - 1)};
}

struct ThEncoded {
    CVector x;  ///< transmitted vector, every component inside the modulo region
    CVector v;  ///< modified symbols s + d, with C x = v
};

/// Successive feedback recursion realizing x = C^{-1} v.
inline ThEncoded th_encode(const CVector& s, const CMatrix& c, int m) {
    const Eigen::Index n = s.size();
    if (c.rows() != n || c.cols() != n) {
        throw NumericError("th_encode: feedback matrix does not match symbol length");
    }
    ThEncoded out{CVector(n), CVector(n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        cplx interference(0.0, 0.0);
        for (Eigen::Index l = 0; l < k; ++l) {
            interference += c(k, l) * out.x(l);
        }
        out.x(k) = modulo_reduce(s(k) - interference, m);
        out.v(k) = out.x(k) + interference;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Link simulation

struct LinkNoise {
    CVector n_r;  ///< relay noise, length N_r
    CVector n_1;  ///< receiver noise at node 1, length N_t
    CVector n_2;  ///< receiver noise at node 2, length N_t

    static LinkNoise zero(const SystemConfig& config) {
        return {CVector::Zero(config.n_r), CVector::Zero(config.n_t), CVector::Zero(config.n_t)};
    }
    static LinkNoise draw(const SystemConfig& config, Rng& relay_rng, Rng& receiver_rng) {
        LinkNoise n;
        n.n_r = complex_gaussian_vector(relay_rng, config.n_r, config.sigma2_nr);
        n.n_1 = complex_gaussian_vector(receiver_rng, config.n_t, config.sigma2_n1);
        n.n_2 = complex_gaussian_vector(receiver_rng, config.n_t, config.sigma2_n2);
        return n;
    }
};

/// Outputs of one two-way exchange. s1_hat is node 2's decision on s1 and
/// s2_hat is node 1's decision on s2; y1_bar / y2_bar are the received
/// signals at nodes 1 and 2 after self-interference cancellation.
struct LinkOutput {
    CVector s1_hat, s2_hat;
    CVector y1_bar, y2_bar;
};

namespace detail {

inline void check_link_shapes(const SystemConfig& config, const ChannelSet& ch,
                              const DesignSolution& sol) {
    const Eigen::Index nt = config.n_t;
    const Eigen::Index nr = config.n_r;
    auto shape = [](const CMatrix& a, Eigen::Index r, Eigen::Index c) {
        return a.rows() == r && a.cols() == c;
    };
    const bool ok = shape(ch.h1, nr, nt) && shape(ch.h2, nr, nt) && shape(ch.g1_hat, nt, nr) &&
                    shape(ch.g2_hat, nt, nr) && shape(ch.dg1, nt, nr) && shape(ch.dg2, nt, nr) &&
                    shape(sol.f1, nt, nt) && shape(sol.f2, nt, nt) && shape(sol.fr, nr, nr) &&
                    shape(sol.c1, nt, nt) && shape(sol.c2, nt, nt) && shape(sol.gamma1, nt, nt) &&
                    shape(sol.gamma2, nt, nt);
    if (!ok) {
        throw NumericError("simulate_link: dimension mismatch between config, channels and solution");
    }
}

}  // namespace detail

inline LinkOutput simulate_link(const SystemConfig& config, const ChannelSet& ch,
                                const DesignSolution& sol, const CVector& s1, const CVector& s2,
                                const LinkNoise& noise) {
    detail::check_link_shapes(config, ch, sol);
    if (s1.size() != config.n_t || s2.size() != config.n_t || noise.n_r.size() != config.n_r ||
        noise.n_1.size() != config.n_t || noise.n_2.size() != config.n_t) {
        throw NumericError("simulate_link: symbol or noise vector has the wrong length");
    }
    const int m = config.qam_m;
    const ThEncoded e1 = th_encode(s1, sol.c1, m);
    const ThEncoded e2 = th_encode(s2, sol.c2, m);

    const CVector y_r = ch.h1 * sol.f1 * e1.x + ch.h2 * sol.f2 * e2.x + noise.n_r;
    const CVector x_r = sol.fr * y_r;

    const CMatrix g1 = ch.g_true(Node::first);
    const CMatrix g2 = ch.g_true(Node::second);
    const CVector y1 = g1 * x_r + noise.n_1;
    const CVector y2 = g2 * x_r + noise.n_2;

    LinkOutput out;
    out.y1_bar = y1 - g1 * sol.fr * ch.h1 * sol.f1 * e1.x;
    out.y2_bar = y2 - g2 * sol.fr * ch.h2 * sol.f2 * e2.x;

    const CVector v2_hat = sol.gamma1 * out.y1_bar;
    const CVector v1_hat = sol.gamma2 * out.y2_bar;
    out.s2_hat.resize(config.n_t);
    out.s1_hat.resize(config.n_t);
    for (Eigen::Index k = 0; k < config.n_t; ++k) {
        out.s2_hat(k) = slice_qam(modulo_reduce(v2_hat(k), m), m);
        out.s1_hat(k) = slice_qam(modulo_reduce(v1_hat(k), m), m);
    }
    return out;
}

/// Monte Carlo estimate of E||v^_i - C_j x_j||^2 at both receivers, with x_j
/// drawn white Gaussian of variance sigma2_x_j and the true downlink G_i.
inline std::pair<double, double> empirical_mse(const SystemConfig& config, const ChannelSet& ch,
                                               const DesignSolution& sol, int trials, Rng& rng) {
    if (trials < 1) {
        throw std::invalid_argument("empirical_mse: trials must be >= 1");
    }
    detail::check_link_shapes(config, ch, sol);
    double acc[2] = {0.0, 0.0};
    for (int t = 0; t < trials; ++t) {
        const CVector x1 = complex_gaussian_vector(rng, config.n_t, config.sigma2_x1);
        const CVector x2 = complex_gaussian_vector(rng, config.n_t, config.sigma2_x2);
        const CVector n_r = complex_gaussian_vector(rng, config.n_r, config.sigma2_nr);
        for (Node i : {Node::first, Node::second}) {
            const Node j = peer(i);
            const CVector& xj = j == Node::first ? x1 : x2;
            const CVector n_i = complex_gaussian_vector(rng, config.n_t, config.sigma2_n(i));
            const CMatrix gi = ch.g_true(i);
            const CVector y_bar = gi * sol.fr * (ch.h(j) * sol.f(j) * xj + n_r) + n_i;
            const CVector err = sol.gamma(i) * y_bar - sol.c(j) * xj;
            acc[index_of(i) - 1] += err.squaredNorm();
        }
    }
    return {acc[0] / trials, acc[1] / trials};
}

}  // namespace rthp
