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

#pragma once

#include "numerics.hpp"

#include <cstdint>
#include <random>

namespace rthp {

using Rng = std::mt19937_64;

// Independent sub-streams. A trial's streams depend only on (seed, trial, role),
// never on which worker runs it.
enum class StreamRole : std::uint32_t {
    channels = 1,
    uncertainty = 2,
    symbols = 3,
    relay_noise = 4,
    receiver_noise = 5,
    audit = 6,
    misc = 7,
};

inline Rng make_stream(std::uint64_t seed, std::uint64_t trial, StreamRole role) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                      static_cast<std::uint32_t>(role)};
    return Rng(seq);
}

/// Circularly symmetric complex Gaussian with E|z|^2 = variance.
inline cplx complex_gaussian(Rng& rng, double variance = 1.0) {
    std::normal_distribution<double> nd(0.0, std::sqrt(variance / 2.0));
    const double re = nd(rng);
    const double im = nd(rng);
    return {re, im};
}

inline CMatrix complex_gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                                       double variance = 1.0) {
    CMatrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            m(r, c) = complex_gaussian(rng, variance);
        }
    }
    return m;
}

inline CVector complex_gaussian_vector(Rng& rng, Eigen::Index n, double variance = 1.0) {
    return complex_gaussian_matrix(rng, n, 1, variance);
}

/// Haar-distributed unitary matrix (QR of a Gaussian matrix with the phase of R's diagonal removed).
inline CMatrix random_unitary(Rng& rng, Eigen::Index n) {
    const CMatrix g = complex_gaussian_matrix(rng, n, n);
    Eigen::HouseholderQR<CMatrix> qr(g);
    CMatrix q = qr.householderQ() * CMatrix::Identity(n, n);
    const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index k = 0; k < n; ++k) {
        const double mag = std::abs(r(k, k));
        if (mag > 0.0) {
            q.col(k) *= r(k, k) / mag;
        }
    }
    return q;
}

/// Random Hermitian positive definite matrix with eigenvalues in [lo, hi].
inline CMatrix random_hpd(Rng& rng, Eigen::Index n, double lo = 0.2, double hi = 3.0) {
    std::uniform_real_distribution<double> ud(lo, hi);
    RVector eig(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        eig(k) = ud(rng);
    }
    const CMatrix q = random_unitary(rng, n);
    CMatrix a = q * eig.cast<cplx>().asDiagonal() * q.adjoint();
    return 0.5 * (a + a.adjoint());
}

}  // namespace rthp
