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

namespace rthp {

struct FeedbackDesign {
    CMatrix c;            ///< unit lower triangular feedback matrix
    double achieved_mse;  ///< trace(C J C^H)
};

/// Minimizes trace(C J C^H) over unit lower triangular C for Hermitian PD J.
/// With J = L diag(delta) L^H the minimizer is C = L^{-1} and C J C^H = diag(delta).
inline FeedbackDesign compute_feedback_matrix(const CMatrix& j_inner) {
    const LdlFactors f = ldl_unit_lower(j_inner);
    CMatrix c = unit_lower_inverse(f.l);
    // unit diagonal and zero upper triangle, exactly
    for (Eigen::Index r = 0; r < c.rows(); ++r) {
        c(r, r) = cplx(1.0, 0.0);
        for (Eigen::Index k = r + 1; k < c.cols(); ++k) {
            c(r, k) = cplx(0.0, 0.0);
        }
    }
    return {c, f.delta.sum()};
}

}  // namespace rthp
