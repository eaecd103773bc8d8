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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace rthp {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

/// Thrown when a numerical routine receives input outside its domain
/// (non-finite entries, indefinite matrices, shape mismatch).
class NumericError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
    return a.allFinite();
}

/// Squared Frobenius norm.
template <typename Derived>
double fro2(const Eigen::MatrixBase<Derived>& a) {
    return a.squaredNorm();
}

/// Singular value decomposition A = U * diag(sigma) * V^H with singular values
/// in descending order. Thin factors: U is rows x k, V is cols x k, k = min(rows, cols).
struct SvdFactors {
    CMatrix u;
    RVector sigma;
    CMatrix v;

    CMatrix reconstruct() const { return u * sigma.cast<cplx>().asDiagonal() * v.adjoint(); }
};

inline SvdFactors svd_ordered(const CMatrix& a) {
    if (!all_finite(a)) {
        throw NumericError("svd_ordered: input contains non-finite entries");
    }
    if (a.size() == 0) {
        return {CMatrix(a.rows(), 0), RVector(0), CMatrix(a.cols(), 0)};
    }
    // JacobiSVD returns singular values sorted in decreasing order.
    Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

/// Result of J = L * diag(delta) * L^H with L unit lower triangular.
struct LdlFactors {
    CMatrix l;
    RVector delta;
};

inline double hermitian_min_eigenvalue(const CMatrix& a) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// Unpivoted LDL^H of a Hermitian positive definite matrix.
/// The PD test is relative: lambda_min > 1e-12 * ||J||_F.
inline LdlFactors ldl_unit_lower(const CMatrix& j) {
    const Eigen::Index n = j.rows();
    if (j.cols() != n) {
        throw NumericError("ldl_unit_lower: matrix is not square");
    }
    if (!all_finite(j)) {
        throw NumericError("ldl_unit_lower: input contains non-finite entries");
    }
    const double scale = j.norm();
    if ((j - j.adjoint()).norm() > 1e-10 * std::max(scale, 1.0)) {
        throw NumericError("ldl_unit_lower: matrix is not Hermitian");
    }
    const double lmin = n > 0 ? hermitian_min_eigenvalue(0.5 * (j + j.adjoint())) : 1.0;
    if (!(lmin > 1e-12 * scale)) {
        std::ostringstream msg;
        msg << "ldl_unit_lower: matrix is not positive definite (smallest eigenvalue " << lmin
            << ", threshold " << 1e-12 * scale << ")";
        throw NumericError(msg.str());
    }

    CMatrix l = CMatrix::Identity(n, n);
    RVector d(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        cplx acc = j(k, k);
        for (Eigen::Index m = 0; m < k; ++m) {
            acc -= l(k, m) * std::conj(l(k, m)) * d(m);
        }
        d(k) = acc.real();
        for (Eigen::Index r = k + 1; r < n; ++r) {
            cplx s = j(r, k);
            for (Eigen::Index m = 0; m < k; ++m) {
                s -= l(r, m) * std::conj(l(k, m)) * d(m);
            }
            l(r, k) = s / d(k);
        }
    }
    return {l, d};
}

/// Solves A X = B for Hermitian positive definite A.
inline CMatrix hermitian_solve(const CMatrix& a, const CMatrix& b) {
    if (a.rows() != a.cols() || a.rows() != b.rows()) {
        throw NumericError("hermitian_solve: dimension mismatch");
    }
    if (!all_finite(a) || !all_finite(b)) {
        throw NumericError("hermitian_solve: input contains non-finite entries");
    }
    Eigen::LLT<CMatrix> llt(a);
    if (llt.info() != Eigen::Success) {
        throw NumericError("hermitian_solve: matrix is singular or not positive definite");
    }
    CMatrix x = llt.solve(b);
    // one step of iterative refinement
    x += llt.solve(b - a * x);
    return x;
}

/// Inverse of the unit lower triangular matrix L (also unit lower triangular).
inline CMatrix unit_lower_inverse(const CMatrix& l) {
    const Eigen::Index n = l.rows();
    return l.triangularView<Eigen::UnitLower>().solve(CMatrix::Identity(n, n));
}

/// Determinant of a Hermitian positive definite matrix, via its Cholesky factor.
inline double hermitian_det(const CMatrix& a) {
    Eigen::LLT<CMatrix> llt(a);
    if (llt.info() != Eigen::Success) {
        throw NumericError("hermitian_det: matrix is not positive definite");
    }
    double logdet = 0.0;
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
        logdet += 2.0 * std::log(llt.matrixL()(k, k).real());
    }
    return std::exp(logdet);
}

inline bool is_unit_lower_triangular(const CMatrix& c, double tol = 0.0) {
    if (c.rows() != c.cols()) {
        return false;
    }
    for (Eigen::Index r = 0; r < c.rows(); ++r) {
        if (std::abs(c(r, r) - cplx(1.0, 0.0)) > tol) {
            return false;
        }
        for (Eigen::Index k = r + 1; k < c.cols(); ++k) {
            if (std::abs(c(r, k)) > tol) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace rthp
