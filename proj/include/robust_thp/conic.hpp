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

// Small dense second-order cone programming layer.
//
// ConicProblem is a modeling object: real variables, affine expressions,
// linear (in)equalities and cone memberships  e_0 >= ||(e_1, ..., e_k)||.
// It compiles to the standard form
//
//     minimize   c^T x
//     subject to A x = b,  G x + s = h,  s in K
//
// with K a product of a nonnegative orthant and second-order cones, which
// InteriorPointSolver handles with a homogeneous self-dual embedding,
// Nesterov-Todd scaling and a Mehrotra predictor-corrector.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rthp::conic {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class ModelError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Affine function sum_k coef_k * x_{var_k} + constant.
class AffineExpr {
  public:
    AffineExpr() = default;
    AffineExpr(double constant) : constant_(constant) {}  // NOLINT(google-explicit-constructor)

    static AffineExpr variable(int index, double coef = 1.0) {
        AffineExpr e;
        e.terms_.emplace_back(index, coef);
        return e;
    }

    const std::vector<std::pair<int, double>>& terms() const { return terms_; }
    double constant() const { return constant_; }

    AffineExpr& operator+=(const AffineExpr& o) {
        terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
        constant_ += o.constant_;
        return *this;
    }
    AffineExpr& operator-=(const AffineExpr& o) { return *this += (-1.0) * o; }
    AffineExpr& operator*=(double s) {
        for (auto& t : terms_) {
            t.second *= s;
        }
        constant_ *= s;
        return *this;
    }

    friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
    friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
    friend AffineExpr operator*(double s, AffineExpr a) { return a *= s; }
    friend AffineExpr operator*(AffineExpr a, double s) { return a *= s; }
    friend AffineExpr operator-(AffineExpr a) { return a *= -1.0; }

    double evaluate(const std::vector<double>& x) const {
        double v = constant_;
        for (const auto& [idx, coef] : terms_) {
            v += coef * x.at(static_cast<std::size_t>(idx));
        }
        return v;
    }

  private:
    std::vector<std::pair<int, double>> terms_;
    double constant_ = 0.0;
};

enum class Sense { minimize, maximize };

class ConicProblem {
  public:
    /// Adds a variable and returns its index. Infinite bounds are omitted.
    int add_variable(std::string name = {},
                     double lower = -std::numeric_limits<double>::infinity(),
                     double upper = std::numeric_limits<double>::infinity()) {
        const int idx = static_cast<int>(names_.size());
        names_.push_back(name.empty() ? "x" + std::to_string(idx) : std::move(name));
        lower_.push_back(lower);
        upper_.push_back(upper);
        return idx;
    }

    AffineExpr var(int index) const {
        check_index(index);
        return AffineExpr::variable(index);
    }

    /// lhs <= rhs
    void add_less_equal(const AffineExpr& lhs, const AffineExpr& rhs, std::string label = {}) {
        check_expr(lhs);
        check_expr(rhs);
        inequalities_.push_back({lhs - rhs, std::move(label)});
    }

    /// lhs == rhs
    void add_equal(const AffineExpr& lhs, const AffineExpr& rhs, std::string label = {}) {
        check_expr(lhs);
        check_expr(rhs);
        equalities_.push_back({lhs - rhs, std::move(label)});
    }

    /// entries[0] >= || entries[1..] ||
    void add_cone(std::vector<AffineExpr> entries, std::string label = {}) {
        if (entries.size() < 2) {
            throw ModelError("cone needs at least two affine entries");
        }
        for (const auto& e : entries) {
            check_expr(e);
        }
        cones_.push_back({std::move(entries), std::move(label)});
    }

    /// Hyperbolic constraint u * v >= w^2 with u, v >= 0, as ||(2w, u - v)|| <= u + v.
    void add_hyperbolic(const AffineExpr& u, const AffineExpr& v, const AffineExpr& w,
                        std::string label = {}) {
        add_cone({u + v, 2.0 * w, u - v}, std::move(label));
    }

    void set_objective(const AffineExpr& objective, Sense sense) {
        check_expr(objective);
        objective_ = objective;
        sense_ = sense;
    }

    int num_variables() const { return static_cast<int>(names_.size()); }
    int num_cones() const { return static_cast<int>(cones_.size()); }
    int num_inequalities() const { return static_cast<int>(inequalities_.size()); }
    int num_equalities() const { return static_cast<int>(equalities_.size()); }
    const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }
    const AffineExpr& objective() const { return objective_; }
    Sense sense() const { return sense_; }

    struct Row {
        AffineExpr expr;
        std::string label;
    };
    struct Cone {
        std::vector<AffineExpr> entries;
        std::string label;
    };
    const std::vector<Row>& inequalities() const { return inequalities_; }
    const std::vector<Row>& equalities() const { return equalities_; }
    const std::vector<Cone>& cones() const { return cones_; }
    double lower(int i) const { return lower_.at(static_cast<std::size_t>(i)); }
    double upper(int i) const { return upper_.at(static_cast<std::size_t>(i)); }

    /// Largest violation of any constraint at x (0 when feasible).
    double max_violation(const std::vector<double>& x) const {
        double worst = 0.0;
        for (const auto& r : inequalities_) {
            worst = std::max(worst, r.expr.evaluate(x));
        }
        for (const auto& r : equalities_) {
            worst = std::max(worst, std::abs(r.expr.evaluate(x)));
        }
        for (const auto& c : cones_) {
            double n2 = 0.0;
            for (std::size_t k = 1; k < c.entries.size(); ++k) {
                const double v = c.entries[k].evaluate(x);
                n2 += v * v;
            }
            worst = std::max(worst, std::sqrt(n2) - c.entries[0].evaluate(x));
        }
        for (int i = 0; i < num_variables(); ++i) {
            const double xi = x.at(static_cast<std::size_t>(i));
            worst = std::max({worst, lower(i) - xi, xi - upper(i)});
        }
        return worst;
    }

  private:
    void check_index(int index) const {
        if (index < 0 || index >= num_variables()) {
            throw ModelError("variable index out of range");
        }
    }
    void check_expr(const AffineExpr& e) const {
        if (!std::isfinite(e.constant())) {
            throw ModelError("non-finite constant in affine expression");
        }
        for (const auto& [idx, coef] : e.terms()) {
            check_index(idx);
            if (!std::isfinite(coef)) {
                throw ModelError("non-finite coefficient in affine expression");
            }
        }
    }

    std::vector<std::string> names_;
    std::vector<double> lower_, upper_;
    std::vector<Row> inequalities_;
    std::vector<Row> equalities_;
    std::vector<Cone> cones_;
    AffineExpr objective_;
    Sense sense_ = Sense::minimize;
};

// ---------------------------------------------------------------------------
// Standard form

struct ConeDims {
    int orthant = 0;
    std::vector<int> soc;

    int total() const {
        int m = orthant;
        for (int q : soc) {
            m += q;
        }
        return m;
    }
    int degree() const { return orthant + static_cast<int>(soc.size()); }
};

struct StandardForm {
    Vec c;
    Mat a;
    Vec b;
    Mat g;
    Vec h;
    ConeDims dims;
    double objective_offset = 0.0;
    double objective_sign = 1.0;  ///< -1 when the model maximizes
};

inline StandardForm to_standard_form(const ConicProblem& p) {
    const int n = p.num_variables();
    StandardForm sf;
    sf.objective_sign = p.sense() == Sense::maximize ? -1.0 : 1.0;
    sf.c = Vec::Zero(n);
    for (const auto& [idx, coef] : p.objective().terms()) {
        sf.c(idx) += sf.objective_sign * coef;
    }
    sf.objective_offset = p.objective().constant();

    std::vector<std::pair<AffineExpr, bool>> orthant_rows;  // expr >= 0
    for (const auto& r : p.inequalities()) {
        orthant_rows.emplace_back(-r.expr, true);
    }
    for (int i = 0; i < n; ++i) {
        if (std::isfinite(p.lower(i))) {
            orthant_rows.emplace_back(AffineExpr::variable(i) - AffineExpr(p.lower(i)), true);
        }
        if (std::isfinite(p.upper(i))) {
            orthant_rows.emplace_back(AffineExpr(p.upper(i)) - AffineExpr::variable(i), true);
        }
    }
    sf.dims.orthant = static_cast<int>(orthant_rows.size());
    for (const auto& cone : p.cones()) {
        sf.dims.soc.push_back(static_cast<int>(cone.entries.size()));
    }
    const int m = sf.dims.total();
    sf.g = Mat::Zero(m, n);
    sf.h = Vec::Zero(m);
    // s = e(x) = a^T x + c0 = h - G x  =>  G row = -a, h = c0
    auto emit = [&](int row, const AffineExpr& e) {
        for (const auto& [idx, coef] : e.terms()) {
            sf.g(row, idx) -= coef;
        }
        sf.h(row) = e.constant();
    };
    int row = 0;
    for (const auto& r : orthant_rows) {
        emit(row++, r.first);
    }
    for (const auto& cone : p.cones()) {
        for (const auto& e : cone.entries) {
            emit(row++, e);
        }
    }

    const int pe = p.num_equalities();
    sf.a = Mat::Zero(pe, n);
    sf.b = Vec::Zero(pe);
    for (int k = 0; k < pe; ++k) {
        const auto& e = p.equalities()[static_cast<std::size_t>(k)].expr;
        for (const auto& [idx, coef] : e.terms()) {
            sf.a(k, idx) += coef;
        }
        sf.b(k) = -e.constant();
    }
    return sf;
}

// ---------------------------------------------------------------------------
// Cone algebra on K = R^l_+ x Q^{q_1} x ... x Q^{q_k}

namespace cone {

inline Vec identity(const ConeDims& d) {
    Vec e = Vec::Zero(d.total());
    e.head(d.orthant).setOnes();
    int off = d.orthant;
    for (int q : d.soc) {
        e(off) = 1.0;
        off += q;
    }
    return e;
}

/// Jordan product u o v.
inline Vec product(const ConeDims& d, const Vec& u, const Vec& v) {
    Vec w(u.size());
    w.head(d.orthant) = u.head(d.orthant).cwiseProduct(v.head(d.orthant));
    int off = d.orthant;
    for (int q : d.soc) {
        const auto us = u.segment(off, q);
        const auto vs = v.segment(off, q);
        w(off) = us.dot(vs);
        w.segment(off + 1, q - 1) = us(0) * vs.tail(q - 1) + vs(0) * us.tail(q - 1);
        off += q;
    }
    return w;
}

/// Solves lambda o w = v for w.
inline Vec divide(const ConeDims& d, const Vec& lambda, const Vec& v) {
    Vec w(v.size());
    w.head(d.orthant) = v.head(d.orthant).cwiseQuotient(lambda.head(d.orthant));
    int off = d.orthant;
    for (int q : d.soc) {
        const auto l = lambda.segment(off, q);
        const auto vs = v.segment(off, q);
        const double l0 = l(0);
        const double det = l0 * l0 - l.tail(q - 1).squaredNorm();
        const double w0 = (l0 * vs(0) - l.tail(q - 1).dot(vs.tail(q - 1))) / det;
        w(off) = w0;
        w.segment(off + 1, q - 1) = (vs.tail(q - 1) - w0 * l.tail(q - 1)) / l0;
        off += q;
    }
    return w;
}

/// Smallest "eigenvalue" of u with respect to K (min of u_i and u0 - ||u1||).
inline double min_eig(const ConeDims& d, const Vec& u) {
    double m = std::numeric_limits<double>::infinity();
    if (d.orthant > 0) {
        m = u.head(d.orthant).minCoeff();
    }
    int off = d.orthant;
    for (int q : d.soc) {
        m = std::min(m, u(off) - u.segment(off + 1, q - 1).norm());
        off += q;
    }
    return m;
}

/// Largest alpha such that u + alpha du stays in K (infinity when unbounded).
inline double max_step(const ConeDims& d, const Vec& u, const Vec& du) {
    double alpha = std::numeric_limits<double>::infinity();
    for (int i = 0; i < d.orthant; ++i) {
        if (du(i) < 0.0) {
            alpha = std::min(alpha, -u(i) / du(i));
        }
    }
    int off = d.orthant;
    for (int q : d.soc) {
        const double u0 = u(off);
        const double d0 = du(off);
        const auto u1 = u.segment(off + 1, q - 1);
        const auto d1 = du.segment(off + 1, q - 1);
        // f(a) = (u0 + a d0)^2 - ||u1 + a d1||^2 = qa a^2 + 2 qb a + qc
        const double qa = d0 * d0 - d1.squaredNorm();
        const double qb = u0 * d0 - u1.dot(d1);
        const double qc = std::max(u0 * u0 - u1.squaredNorm(), 0.0);
        double a_soc = std::numeric_limits<double>::infinity();
        const double disc = qb * qb - qa * qc;
        if (std::abs(qa) < 1e-300) {
            if (qb < 0.0) {
                a_soc = -qc / (2.0 * qb);
            }
        } else if (qa < 0.0) {
            // concave with f(0) >= 0: exactly one nonnegative root
            const double r = std::sqrt(std::max(disc, 0.0));
            a_soc = qb > 0.0 ? (-qb - r) / qa : qc / (-qb + r);
        } else if (qb < 0.0 && disc >= 0.0) {
            // both roots positive, take the smaller
            const double r = std::sqrt(disc);
            a_soc = qc / (-qb + r);
        }
        // the first coordinate must stay nonnegative as well
        if (d0 < 0.0) {
            a_soc = std::min(a_soc, -u0 / d0);
        }
        alpha = std::min(alpha, a_soc);
        off += q;
    }
    return alpha;
}

/// Nesterov-Todd scaling W (symmetric, block diagonal) with W z = W^{-1} s = lambda.
struct Scaling {
    Mat w;
    Mat w_inv;
    Vec lambda;
};

inline Scaling nt_scaling(const ConeDims& d, const Vec& s, const Vec& z) {
    const int m = d.total();
    Scaling sc{Mat::Zero(m, m), Mat::Zero(m, m), Vec::Zero(m)};
    for (int i = 0; i < d.orthant; ++i) {
        const double wi = std::sqrt(s(i) / z(i));
        sc.w(i, i) = wi;
        sc.w_inv(i, i) = 1.0 / wi;
    }
    int off = d.orthant;
    for (int q : d.soc) {
        const Vec ss = s.segment(off, q);
        const Vec zs = z.segment(off, q);
        const double s_nrm = std::sqrt(std::max(ss(0) * ss(0) - ss.tail(q - 1).squaredNorm(), 1e-300));
        const double z_nrm = std::sqrt(std::max(zs(0) * zs(0) - zs.tail(q - 1).squaredNorm(), 1e-300));
        const Vec sb = ss / s_nrm;
        const Vec zb = zs / z_nrm;
        const double gamma = std::sqrt(std::max((1.0 + sb.dot(zb)) / 2.0, 1e-300));
        Vec w(q);  // w = (sb + J zb) / (2 gamma), w^T J w = 1
        w(0) = (sb(0) + zb(0)) / (2.0 * gamma);
        w.tail(q - 1) = (sb.tail(q - 1) - zb.tail(q - 1)) / (2.0 * gamma);
        const double eta = std::sqrt(s_nrm / z_nrm);
        // W = eta [a q^T; q I + q q^T / (1 + a)],  W^{-1} = (1/eta) [a -q^T; -q I + q q^T / (1 + a)]
        const double a = w(0);
        const Vec qv = w.tail(q - 1);
        Mat blk(q, q);
        blk(0, 0) = a;
        blk.block(0, 1, 1, q - 1) = qv.transpose();
        blk.block(1, 0, q - 1, 1) = qv;
        blk.bottomRightCorner(q - 1, q - 1) =
            Mat::Identity(q - 1, q - 1) + qv * qv.transpose() / (1.0 + a);
        sc.w.block(off, off, q, q) = eta * blk;
        blk.block(0, 1, 1, q - 1) *= -1.0;
        blk.block(1, 0, q - 1, 1) *= -1.0;
        sc.w_inv.block(off, off, q, q) = blk / eta;
        off += q;
    }
    sc.lambda = sc.w * z;
    return sc;
}

}  // namespace cone

// ---------------------------------------------------------------------------
// Solver

enum class SolverStatus { optimal, infeasible, unbounded, numerical_limit };

inline const char* to_string(SolverStatus s) {
    switch (s) {
        case SolverStatus::optimal: return "optimal";
        case SolverStatus::infeasible: return "infeasible";
        case SolverStatus::unbounded: return "unbounded";
        case SolverStatus::numerical_limit: return "numerical-limit";
    }
    return "unknown";
}

struct SolverOptions {
    int max_iterations = 200;
    double feastol = 1e-9;
    double abstol = 1e-9;
    double reltol = 1e-9;
    /// accepted as optimal when the iteration stalls
    double feastol_relaxed = 1e-8;
    double reltol_relaxed = 1e-8;
    double step_fraction = 0.99;
};

struct SolverResult {
    SolverStatus status = SolverStatus::numerical_limit;
    std::vector<double> x;
    double objective = 0.0;  ///< in the model's sense, including its constant
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double relative_gap = 0.0;
};

/// Pluggable conic backend.
class ConicSolver {
  public:
    virtual ~ConicSolver() = default;
    virtual SolverResult solve(const ConicProblem& problem) const = 0;
};

class InteriorPointSolver final : public ConicSolver {
  public:
    InteriorPointSolver() = default;
    explicit InteriorPointSolver(SolverOptions opts) : opts_(opts) {}

    SolverResult solve(const ConicProblem& problem) const override {
        const StandardForm sf = to_standard_form(problem);
        SolverResult r = solve_standard(sf);
        if (r.status == SolverStatus::optimal) {
            r.objective = sf.objective_sign * r.objective + sf.objective_offset;
        }
        return r;
    }

    SolverResult solve_standard(const StandardForm& sf) const;

  private:
    SolverOptions opts_;
};

namespace detail {

/// Dense factorization of [0 A^T G^T; A 0 0; G 0 -W^2] with iterative refinement.
/// Solved in the scaled form dz = W^-1 dz~, whose last block is -I.
class KktSystem {
  public:
    KktSystem(const StandardForm& sf, const Mat& w_inv)
        : n_(sf.c.size()), p_(sf.b.size()), m_(sf.h.size()), w_inv_(w_inv) {
        const Eigen::Index dim = n_ + p_ + m_;
        const Mat gs = w_inv * sf.g;
        k_ = Mat::Zero(dim, dim);
        k_.block(0, n_, n_, p_) = sf.a.transpose();
        k_.block(0, n_ + p_, n_, m_) = gs.transpose();
        k_.block(n_, 0, p_, n_) = sf.a;
        k_.block(n_ + p_, 0, m_, n_) = gs;
        k_.block(n_ + p_, n_ + p_, m_, m_) = -Mat::Identity(m_, m_);
        // static regularization keeps the factorization well defined; refinement
        // below solves against the unregularized matrix
        Mat reg = k_;
        double data_scale = 1.0;
        if (p_ > 0) {
            data_scale = std::max(data_scale, sf.a.cwiseAbs().maxCoeff());
        }
        if (m_ > 0) {
            data_scale = std::max(data_scale, sf.g.cwiseAbs().maxCoeff());
        }
        const double delta = 1e-13 * data_scale;
        reg.diagonal().head(n_).array() += delta;
        reg.diagonal().tail(p_ + m_).array() -= delta;
        lu_.compute(reg);
    }

    Vec solve(const Vec& rhs) const {
        Vec r = rhs;
        r.tail(m_) = w_inv_ * rhs.tail(m_);
        Vec x = lu_.solve(r);
        double last = std::numeric_limits<double>::infinity();
        for (int it = 0; it < 10; ++it) {
            const Vec res = r - k_ * x;
            const double rn = res.lpNorm<Eigen::Infinity>();
            if (rn <= 1e-15 * std::max(1.0, r.lpNorm<Eigen::Infinity>()) || rn > 0.5 * last) {
                break;
            }
            last = rn;
            x += lu_.solve(res);
        }
        x.tail(m_) = w_inv_ * x.tail(m_).eval();
        return x;
    }

  private:
    Eigen::Index n_, p_, m_;
    Mat w_inv_;
    Mat k_;
    Eigen::PartialPivLU<Mat> lu_;
};

}  // namespace detail

inline SolverResult InteriorPointSolver::solve_standard(const StandardForm& sf) const {
    const ConeDims& dims = sf.dims;
    const Eigen::Index n = sf.c.size();
    const Eigen::Index p = sf.b.size();
    const Eigen::Index m = sf.h.size();
    const Vec e = cone::identity(dims);
    const double degree = dims.degree();

    SolverResult res;
    res.x.assign(static_cast<std::size_t>(n), 0.0);

    auto split = [&](const Vec& v, Vec& vx, Vec& vy, Vec& vz) {
        vx = v.head(n);
        vy = v.segment(n, p);
        vz = v.tail(m);
    };

    // Initial point from two least-squares problems with W = I.
    Vec x, y, z, s;
    {
        const detail::KktSystem kkt(sf, Mat::Identity(m, m));
        Vec rhs(n + p + m);
        rhs << Vec::Zero(n), sf.b, sf.h;
        Vec sol = kkt.solve(rhs);
        Vec tmp_y, tmp_z;
        split(sol, x, tmp_y, tmp_z);
        s = -tmp_z;
        rhs << -sf.c, Vec::Zero(p), Vec::Zero(m);
        sol = kkt.solve(rhs);
        Vec tmp_x;
        split(sol, tmp_x, y, z);
        if (m > 0) {
            const double as = -cone::min_eig(dims, s);
            if (as >= -1e-8) {
                s += (1.0 + as) * e;
            }
            const double az = -cone::min_eig(dims, z);
            if (az >= -1e-8) {
                z += (1.0 + az) * e;
            }
        }
    }
    double tau = 1.0;
    double kappa = 1.0;

    const double nb = std::max(1.0, std::max(sf.b.size() ? sf.b.norm() : 0.0, sf.h.size() ? sf.h.norm() : 0.0));
    const double nc = std::max(1.0, sf.c.norm());

    struct Best {
        bool have = false;
        Vec x;
        double pres = 0, dres = 0, relgap = 0, pcost = 0;
    } best;

    for (int iter = 0; iter <= opts_.max_iterations; ++iter) {
        res.iterations = iter;
        // residuals of the embedding
        const Vec f1 = sf.a.transpose() * y + sf.g.transpose() * z + sf.c * tau;
        const Vec f2 = sf.a * x - sf.b * tau;
        const Vec f3 = sf.g * x + s - sf.h * tau;
        const double f4 = sf.c.dot(x) + sf.b.dot(y) + sf.h.dot(z) + kappa;

        const double pres = std::max(f2.size() ? f2.norm() : 0.0, f3.size() ? f3.norm() : 0.0) / tau / nb;
        const double dres = f1.norm() / tau / nc;
        const double pcost = sf.c.dot(x) / tau;
        const double dcost = -(sf.h.dot(z) + sf.b.dot(y)) / tau;
        const double gap = s.dot(z) / (tau * tau);
        const double relgap = gap / std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)));

        if (pres < opts_.feastol && dres < opts_.feastol && (gap < opts_.abstol || relgap < opts_.reltol)) {
            res.status = SolverStatus::optimal;
            res.x.assign(x.data(), x.data() + n);
            for (auto& v : res.x) {
                v /= tau;
            }
            res.objective = pcost;
            res.primal_residual = pres;
            res.dual_residual = dres;
            res.relative_gap = relgap;
            return res;
        }
        if (pres < opts_.feastol_relaxed && dres < opts_.feastol_relaxed &&
            relgap < opts_.reltol_relaxed) {
            best.have = true;
            best.x = x / tau;
            best.pres = pres;
            best.dres = dres;
            best.relgap = relgap;
            best.pcost = pcost;
        }

        // infeasibility certificates
        const double hz_by = sf.h.dot(z) + sf.b.dot(y);
        if (hz_by < 0.0) {
            const double cert = (sf.a.transpose() * y + sf.g.transpose() * z).norm() / (-hz_by);
            if (cert < opts_.feastol) {
                res.status = SolverStatus::infeasible;
                return res;
            }
        }
        const double cx = sf.c.dot(x);
        if (cx < 0.0) {
            const double ax = p > 0 ? (sf.a * x).norm() : 0.0;
            const double cert = std::max(ax, (sf.g * x + s).norm()) / (-cx);
            if (cert < opts_.feastol) {
                res.status = SolverStatus::unbounded;
                return res;
            }
        }
        if (iter == opts_.max_iterations) {
            break;
        }

        const cone::Scaling sc = cone::nt_scaling(dims, s, z);
        const detail::KktSystem kkt(sf, sc.w_inv);
        const double mu = (s.dot(z) + tau * kappa) / (degree + 1.0);

        Vec rhs2(n + p + m);
        rhs2 << sf.c, -sf.b, -sf.h;
        const Vec u2 = kkt.solve(rhs2);
        Vec q(n + p + m);
        q << sf.c, sf.b, sf.h;

        struct Direction {
            Vec dx, dy, dz, ds;
            double dtau = 0.0, dkappa = 0.0;
        };
        auto direction = [&](double sigma, const Vec& d_s, double d_kappa) {
            const double one_minus = 1.0 - sigma;
            const Vec lds = cone::divide(dims, sc.lambda, d_s);
            Vec rhs1(n + p + m);
            rhs1 << -one_minus * f1, -one_minus * f2, -one_minus * f3 - sc.w * lds;
            const double r4 = -one_minus * f4 - d_kappa / tau;
            const Vec u1 = kkt.solve(rhs1);
            Direction d;
            d.dtau = (q.dot(u1) - r4) / (q.dot(u2) + kappa / tau);
            const Vec du = u1 - u2 * d.dtau;
            split(du, d.dx, d.dy, d.dz);
            // from the linearized primal row, equal to W lds - W^2 dz without the W^2 error growth
            d.ds = -one_minus * f3 + sf.h * d.dtau - sf.g * d.dx;
            d.dkappa = (d_kappa - kappa * d.dtau) / tau;
            return d;
        };
        auto step_to_boundary = [&](const Direction& d) {
            double a = std::numeric_limits<double>::infinity();
            if (m > 0) {
                a = std::min(cone::max_step(dims, s, d.ds), cone::max_step(dims, z, d.dz));
            }
            if (d.dtau < 0.0) {
                a = std::min(a, -tau / d.dtau);
            }
            if (d.dkappa < 0.0) {
                a = std::min(a, -kappa / d.dkappa);
            }
            return a;
        };

        // predictor
        const Vec lam2 = cone::product(dims, sc.lambda, sc.lambda);
        const Direction aff = direction(0.0, -lam2, -kappa * tau);
        const double alpha_aff = std::min(1.0, step_to_boundary(aff));
        const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);

        // corrector
        const Vec ws = sc.w_inv * aff.ds;
        const Vec wz = sc.w * aff.dz;
        const Vec d_s = -lam2 - cone::product(dims, ws, wz) + sigma * mu * e;
        const double d_kappa = -kappa * tau - aff.dkappa * aff.dtau + sigma * mu;
        const Direction dir = direction(sigma, d_s, d_kappa);
        const double alpha = std::min(1.0, opts_.step_fraction * step_to_boundary(dir));

        if (!(alpha > 1e-12) || !dir.dx.allFinite()) {
            break;
        }
        x += alpha * dir.dx;
        y += alpha * dir.dy;
        z += alpha * dir.dz;
        s += alpha * dir.ds;
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        if (!(tau > 0.0) || !(kappa > 0.0)) {
            break;
        }
    }

    if (best.have) {
        res.status = SolverStatus::optimal;
        res.x.assign(best.x.data(), best.x.data() + n);
        res.objective = best.pcost;
        res.primal_residual = best.pres;
        res.dual_residual = best.dres;
        res.relative_gap = best.relgap;
        return res;
    }
    res.status = SolverStatus::numerical_limit;
    res.x.assign(x.data(), x.data() + n);
    for (auto& v : res.x) {
        v /= tau;
    }
    return res;
}

}  // namespace rthp::conic
