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

// Alternating SOCP power allocation over the diagonal spectra (Lr, L1, L2).
//
// With slack variables t_k (term of source 1) and t'_k (term of source 2),
// each block subproblem reads
//
//   maximize   tau + tau'
//   subject to tau  <= (prod_k t_k )^(1/2^q)         hyperbolic cone tree
//              tau' <= (prod_k t'_k)^(1/2^q)
//              signal_k >= phi_k/2 beta_k^2 + (t_k - 1)^2 / (2 phi_k)
//              denominator_k <= beta_k
//              (same for the primed term)
//              relay and node power budgets
//
// where only one spectrum block is free, so every constraint is convex.
// The AM-GM surrogate is tight at phi_k = (t_k - 1) / beta_k, which is
// refreshed after every (Lr, L1, L2) cycle.

#pragma once

#include "conic.hpp"
#include "numerics.hpp"
#include "robust_mse.hpp"
#include "spectral_design.hpp"
#include "system_model.hpp"
#include "thp.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rthp {

class InfeasibleSubproblem : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

constexpr double kPhiFloor = 1e-9;

/// (phi/2) beta^2 + (t - 1)^2 / (2 phi), a convex upper bound of beta (t - 1).
inline double amgm_surrogate(double t, double beta, double phi) {
    if (!(phi > 0.0)) {
        throw std::invalid_argument("amgm_surrogate: phi must be > 0");
    }
    return 0.5 * phi * beta * beta + (t - 1.0) * (t - 1.0) / (2.0 * phi);
}

/// Tight point of the surrogate, clamped below by kPhiFloor.
inline double update_phi(double t, double beta) {
    if (!(beta > 0.0)) {
        throw std::invalid_argument("update_phi: beta must be > 0");
    }
    return std::max((t - 1.0) / beta, kPhiFloor);
}

/// Depth of the product tree over n leaves: ceil(log2 n).
inline int tree_depth(int n) {
    int q = 0;
    while ((1 << q) < n) {
        ++q;
    }
    return q;
}

struct ProductTree {
    int tau = -1;               ///< root variable
    std::vector<int> nodes;     ///< internal node variables, level by level
    int cones = 0;
};

/// Emits tau <= (prod leaves * 1^pad)^(1/2^q) as a binary tree of hyperbolic
/// cones. Leaves are padded with the constant 1 up to 2^q.
inline ProductTree build_product_tree(conic::ConicProblem& p, const std::vector<conic::AffineExpr>& leaves,
                                      const std::string& prefix) {
    if (leaves.empty()) {
        throw std::invalid_argument("build_product_tree: needs at least one leaf");
    }
    const int q = tree_depth(static_cast<int>(leaves.size()));
    std::vector<conic::AffineExpr> level = leaves;
    level.resize(static_cast<std::size_t>(1) << q, conic::AffineExpr(1.0));
    ProductTree tree;
    for (int m = 1; m <= q; ++m) {
        std::vector<conic::AffineExpr> next;
        for (std::size_t j = 0; j + 1 < level.size(); j += 2) {
            const int v = p.add_variable(prefix + "v" + std::to_string(m) + "_" + std::to_string(j / 2 + 1));
            tree.nodes.push_back(v);
            p.add_hyperbolic(level[j], level[j + 1], p.var(v), prefix + "tree");
            ++tree.cones;
            next.push_back(p.var(v));
        }
        level = std::move(next);
    }
    tree.tau = p.add_variable(prefix + "tau");
    p.add_less_equal(p.var(tree.tau), level.front(), prefix + "root");
    return tree;
}

enum class FreeBlock { relay, first, second };

inline const char* to_string(FreeBlock b) {
    switch (b) {
        case FreeBlock::relay: return "relay";
        case FreeBlock::first: return "first";
        case FreeBlock::second: return "second";
    }
    return "unknown";
}

struct SurrogateState {
    RVector phi;        ///< per-mode surrogate weights of the source-1 term
    RVector phi_prime;  ///< per-mode surrogate weights of the source-2 term
    int iteration = 0;
    std::vector<double> objective_trace;

    const RVector& weights(Node i) const { return i == Node::first ? phi : phi_prime; }
};

/// Sum over both terms of (prod_k (1 + ratio_k))^(1/2^q): the value of
/// tau + tau' with every slack tight.
inline double tree_objective(const SystemConfig& config, const JointSpectra& js,
                             const SpectralAllocation& alloc) {
    const int q = tree_depth(static_cast<int>(js.lambda_h.size()));
    const double root = 1.0 / static_cast<double>(1 << q);
    double total = 0.0;
    for (Node i : {Node::first, Node::second}) {
        const RVector r = diagonal_ratios(config, js, alloc, i);
        // product in log space
        total += std::exp(root * (1.0 + r.array()).log().sum());
    }
    return total;
}

/// Per-mode slacks at the current spectra: beta = denominator, t = 1 + ratio.
struct TightSlacks {
    RVector t, beta;
};

inline TightSlacks tight_slacks(const SystemConfig& config, const JointSpectra& js,
                                const SpectralAllocation& alloc, Node i) {
    TightSlacks s;
    s.beta = diagonal_denominator(config, js, alloc, i);
    s.t = (1.0 + diagonal_signal(config, js, alloc, i).array() / s.beta.array()).matrix();
    return s;
}

inline SurrogateState surrogate_state_at(const SystemConfig& config, const JointSpectra& js,
                                         const SpectralAllocation& alloc) {
    SurrogateState st;
    for (Node i : {Node::first, Node::second}) {
        const TightSlacks s = tight_slacks(config, js, alloc, i);
        RVector w(s.t.size());
        for (Eigen::Index k = 0; k < w.size(); ++k) {
            w(k) = update_phi(s.t(k), s.beta(k));
        }
        (i == Node::first ? st.phi : st.phi_prime) = w;
    }
    return st;
}

/// A block subproblem together with the indices of its variables.
struct Subproblem {
    conic::ConicProblem problem;
    FreeBlock free_block = FreeBlock::relay;
    std::vector<int> spectrum;  ///< free spectrum entries
    std::vector<int> t, t_prime;
    std::vector<int> beta, beta_prime;
    ProductTree tree, tree_prime;
};

namespace detail {

using conic::AffineExpr;

/// lambda_k as an affine expression: the variable when its block is free, else a constant.
inline AffineExpr spectrum_entry(const Subproblem& sp, FreeBlock block, const RVector& fixed,
                                 Eigen::Index k) {
    if (sp.free_block == block) {
        return sp.problem.var(sp.spectrum[static_cast<std::size_t>(k)]);
    }
    return AffineExpr(fixed(k));
}

inline FreeBlock block_of(Node i) { return i == Node::first ? FreeBlock::first : FreeBlock::second; }

/// Products of a fixed coefficient with lambda_i,k * lambda_r,k, affine since
/// at most one of the two is free.
inline AffineExpr bilinear(const Subproblem& sp, const SpectralAllocation& alloc, Node i,
                           Eigen::Index k, double coef) {
    if (sp.free_block == FreeBlock::relay) {
        return (coef * alloc.lambda(i)(k)) * sp.problem.var(sp.spectrum[static_cast<std::size_t>(k)]);
    }
    if (sp.free_block == block_of(i)) {
        return (coef * alloc.lambda_r(k)) * sp.problem.var(sp.spectrum[static_cast<std::size_t>(k)]);
    }
    return AffineExpr(coef * alloc.lambda(i)(k) * alloc.lambda_r(k));
}

inline bool is_zero(const AffineExpr& e) {
    if (e.constant() != 0.0) {
        return false;
    }
    for (const auto& t : e.terms()) {
        if (t.second != 0.0) {
            return false;
        }
    }
    return true;
}

inline bool is_constant(const AffineExpr& e) {
    for (const auto& t : e.terms()) {
        if (t.second != 0.0) {
            return false;
        }
    }
    return true;
}

}  // namespace detail

inline Subproblem build_subproblem(const SystemConfig& config, const JointSpectra& js,
                                   const SpectralAllocation& alloc, FreeBlock free_block,
                                   const SurrogateState& state) {
    using conic::AffineExpr;
    const Eigen::Index n = js.lambda_h.size();
    for (const RVector* v : {&alloc.lambda1, &alloc.lambda2, &alloc.lambda_r}) {
        if (v->size() != n) {
            throw std::invalid_argument("build_subproblem: spectrum length mismatch");
        }
        if ((v->array() < 0.0).any()) {
            throw InfeasibleSubproblem("build_subproblem: spectra must be nonnegative");
        }
    }
    if (state.phi.size() != n || state.phi_prime.size() != n) {
        throw std::invalid_argument("build_subproblem: surrogate weights have the wrong length");
    }

    Subproblem sp;
    sp.free_block = free_block;
    auto& p = sp.problem;
    const std::string tag = to_string(free_block);
    for (Eigen::Index k = 0; k < n; ++k) {
        sp.spectrum.push_back(p.add_variable("lambda_" + tag + "_" + std::to_string(k + 1), 0.0));
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        sp.t.push_back(p.add_variable("t_" + std::to_string(k + 1)));
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        sp.t_prime.push_back(p.add_variable("t'_" + std::to_string(k + 1)));
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        sp.beta.push_back(p.add_variable("beta_" + std::to_string(k + 1)));
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        sp.beta_prime.push_back(p.add_variable("beta'_" + std::to_string(k + 1)));
    }

    std::vector<AffineExpr> t_leaves, tp_leaves;
    for (Eigen::Index k = 0; k < n; ++k) {
        t_leaves.push_back(p.var(sp.t[static_cast<std::size_t>(k)]));
        tp_leaves.push_back(p.var(sp.t_prime[static_cast<std::size_t>(k)]));
    }
    sp.tree = build_product_tree(p, t_leaves, "");
    sp.tree_prime = build_product_tree(p, tp_leaves, "'");

    // signal and denominator constraints of both terms
    for (Node i : {Node::first, Node::second}) {
        const Node j = peer(i);
        const bool primed = i == Node::second;
        const auto& t_idx = primed ? sp.t_prime : sp.t;
        const auto& b_idx = primed ? sp.beta_prime : sp.beta;
        const RVector& phi = state.weights(i);
        const std::string lbl = primed ? "'" : "";

        // s2x_i s2g_j sum_m lr_m lh_m li_m + s2nr s2g_j sum_m lr_m + s2n_j
        AffineExpr offset(config.sigma2_n(j));
        for (Eigen::Index m = 0; m < n; ++m) {
            offset += detail::bilinear(sp, alloc, i, m,
                                       config.sigma2_x(i) * config.sigma2_g(j) * js.lambda_h(m));
            offset += (config.sigma2_nr * config.sigma2_g(j)) *
                      detail::spectrum_entry(sp, FreeBlock::relay, alloc.lambda_r, m);
        }
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            const AffineExpr signal = detail::bilinear(
                sp, alloc, i, k, config.sigma2_x(i) * js.lambda_h(k) * js.lambda_g(k));
            const AffineExpr denominator =
                offset + (config.sigma2_n(j) * js.lambda_g(k)) *
                             detail::spectrum_entry(sp, FreeBlock::relay, alloc.lambda_r, k);
            p.add_less_equal(denominator, p.var(b_idx[ku]), "denominator" + lbl);

            const AffineExpr tm1 = p.var(t_idx[ku]) - AffineExpr(1.0);
            if (detail::is_zero(signal)) {
                // no signal on this mode: ratio is 0, so t_k <= 1
                p.add_less_equal(p.var(t_idx[ku]), 1.0, "signal" + lbl);
                continue;
            }
            // 2 signal >= phi beta^2 + (t - 1)^2 / phi
            const double ph = phi(k);
            const double sq = std::sqrt(ph);
            p.add_cone({signal + AffineExpr(2.0), (2.0 * sq) * p.var(b_idx[ku]), (2.0 / sq) * tm1,
                        signal - AffineExpr(2.0)},
                       "signal" + lbl);
        }
    }

    // power budgets
    AffineExpr relay(0.0);
    for (Eigen::Index k = 0; k < n; ++k) {
        relay += detail::bilinear(sp, alloc, Node::first, k, config.sigma2_x1 * js.lambda_h(k));
        relay += detail::bilinear(sp, alloc, Node::second, k, config.sigma2_x2 * js.lambda_h(k));
        relay += config.sigma2_nr * detail::spectrum_entry(sp, FreeBlock::relay, alloc.lambda_r, k);
    }
    if (free_block != FreeBlock::relay) {
        // with the free block at zero the relay must already fit its budget
        const double base = relay.constant();
        if (base > config.p_rt * (1.0 + 1e-12)) {
            throw InfeasibleSubproblem("build_subproblem: relay power constraint violated by the fixed spectra (" +
                                       std::to_string(base) + " > " + std::to_string(config.p_rt) + ")");
        }
    }
    p.add_less_equal(relay, config.p_rt, "relay power");
    for (Node i : {Node::first, Node::second}) {
        AffineExpr node(0.0);
        for (Eigen::Index k = 0; k < n; ++k) {
            node += config.sigma2_x(i) * detail::spectrum_entry(sp, detail::block_of(i), alloc.lambda(i), k);
        }
        const std::string lbl = std::string("node ") + (i == Node::first ? "1" : "2") + " power";
        if (detail::is_constant(node)) {
            if (node.constant() > config.p_t(i) * (1.0 + 1e-12)) {
                throw InfeasibleSubproblem("build_subproblem: " + lbl + " constraint violated by the fixed spectrum (" +
                                           std::to_string(node.constant()) + " > " +
                                           std::to_string(config.p_t(i)) + ")");
            }
            continue;
        }
        p.add_less_equal(node, config.p_t(i), lbl);
    }

    p.set_objective(p.var(sp.tree.tau) + p.var(sp.tree_prime.tau), conic::Sense::maximize);
    return sp;
}

/// Values for every variable of `sp` at the given allocation with tight slacks;
/// tree nodes take the exact geometric means. Feasible whenever the surrogate
/// weights were computed at `alloc`.
inline std::vector<double> incumbent_point(const SystemConfig& config, const JointSpectra& js,
                                           const SpectralAllocation& alloc, const Subproblem& sp) {
    std::vector<double> x(static_cast<std::size_t>(sp.problem.num_variables()), 0.0);
    const RVector& free_values = sp.free_block == FreeBlock::relay  ? alloc.lambda_r
                                 : sp.free_block == FreeBlock::first ? alloc.lambda1
                                                                     : alloc.lambda2;
    for (std::size_t k = 0; k < sp.spectrum.size(); ++k) {
        x[static_cast<std::size_t>(sp.spectrum[k])] = free_values(static_cast<Eigen::Index>(k));
    }
    for (Node i : {Node::first, Node::second}) {
        const bool primed = i == Node::second;
        const TightSlacks s = tight_slacks(config, js, alloc, i);
        const auto& t_idx = primed ? sp.t_prime : sp.t;
        const auto& b_idx = primed ? sp.beta_prime : sp.beta;
        const ProductTree& tree = primed ? sp.tree_prime : sp.tree;
        std::vector<double> level;
        for (std::size_t k = 0; k < t_idx.size(); ++k) {
            x[static_cast<std::size_t>(t_idx[k])] = s.t(static_cast<Eigen::Index>(k));
            x[static_cast<std::size_t>(b_idx[k])] = s.beta(static_cast<Eigen::Index>(k));
            level.push_back(s.t(static_cast<Eigen::Index>(k)));
        }
        const int q = tree_depth(static_cast<int>(level.size()));
        level.resize(static_cast<std::size_t>(1) << q, 1.0);
        std::size_t node = 0;
        while (level.size() > 1) {
            std::vector<double> next;
            for (std::size_t j = 0; j + 1 < level.size(); j += 2) {
                const double v = std::sqrt(level[j] * level[j + 1]);
                x[static_cast<std::size_t>(tree.nodes[node++])] = v;
                next.push_back(v);
            }
            level = std::move(next);
        }
        x[static_cast<std::size_t>(tree.tau)] = level.front();
    }
    return x;
}

// ---------------------------------------------------------------------------
// Outer loop

struct OptimizerOptions {
    int max_outer_iterations = 50;
    double relative_tolerance = 1e-4;
    int max_consecutive_failures = 3;
    std::optional<SpectralAllocation> initial_allocation;
    std::shared_ptr<const conic::ConicSolver> solver;  ///< defaults to InteriorPointSolver
};

struct IterationRecord {
    int iteration = 0;
    double objective = 0.0;       ///< tree objective (tau + tau' with tight slacks)
    double sum_mse = 0.0;         ///< worst-case sum MSE of the assembled design
    double relay_power = 0.0;
    double node1_power = 0.0;
    double node2_power = 0.0;
};

struct OptimizationResult {
    DesignSolution solution;
    SurrogateState state;
    JointSpectra spectra;
    SpectralAllocation allocation;
    SpectralAllocation final_allocation;   ///< last iterate of the alternation
    std::vector<IterationRecord> history;  ///< entry 0 is the initial point
    int selected_iteration = 0;            ///< iterate with the lowest worst-case sum MSE
    int outer_iterations = 0;
    bool converged = false;
    bool degraded = false;  ///< repeated subproblem failures, incumbent returned
    int failed_subproblems = 0;
};

/// Uniform spectra saturating the node budgets, relay spectrum uniform and on its budget.
inline SpectralAllocation initial_allocation(const SystemConfig& config, const JointSpectra& js) {
    const Eigen::Index n = js.lambda_h.size();
    SpectralAllocation a;
    a.lambda1 = RVector::Constant(n, config.p_1t / (config.sigma2_x1 * static_cast<double>(n)));
    a.lambda2 = RVector::Constant(n, config.p_2t / (config.sigma2_x2 * static_cast<double>(n)));
    a.lambda_r = RVector::Ones(n);
    const double per_unit = relay_power_diagonal(config, js, a);
    a.lambda_r *= config.p_rt / per_unit;
    return a;
}

/// Builds the full transceiver from a spectral allocation: precoders along the
/// joint SVD directions, each scaled so its transmit power equals its budget,
/// then TH feedback matrices and MMSE equalizers.
inline DesignSolution finalize_design(const SystemConfig& config, const ChannelSet& ch,
                                      const JointSpectra& js, const SpectralAllocation& alloc) {
    const Precoders pre = assemble_precoders(js, alloc);
    DesignSolution sol;
    sol.f1 = pre.f1;
    sol.f2 = pre.f2;
    sol.fr = pre.fr;
    sol.lambda1 = alloc.lambda1;
    sol.lambda2 = alloc.lambda2;
    sol.lambda_r = alloc.lambda_r;
    for (Node i : {Node::first, Node::second}) {
        const double pw = node_power(config, sol, i);
        if (pw > 0.0) {
            (i == Node::first ? sol.f1 : sol.f2) *= std::sqrt(config.p_t(i) / pw);
        }
    }
    const double pr = relay_power(config, ch, sol);
    if (pr > 0.0) {
        sol.fr *= std::sqrt(config.p_rt / pr);
    }

    const Eigen::Index nt = config.n_t;
    sol.c1 = CMatrix::Identity(nt, nt);
    sol.c2 = CMatrix::Identity(nt, nt);
    for (Node i : {Node::first, Node::second}) {
        const Node j = peer(i);
        const EffectiveFactors f = effective_factors(config, ch, sol, i);
        const FeedbackDesign fb = compute_feedback_matrix(mse_inner_matrix(f, config.sigma2_x(j)));
        (j == Node::first ? sol.c1 : sol.c2) = fb.c;
    }
    sol.gamma1 = mmse_equalizer(config, ch, sol, Node::first);
    sol.gamma2 = mmse_equalizer(config, ch, sol, Node::second);
    return sol;
}

inline IterationRecord make_record(const SystemConfig& config, const ChannelSet& ch, const JointSpectra& js,
                                   const SpectralAllocation& alloc, const DesignSolution& sol, int iteration) {
    IterationRecord r;
    r.iteration = iteration;
    r.objective = tree_objective(config, js, alloc);
    r.sum_mse = sum_worst_case_mse(config, ch, sol);
    r.relay_power = relay_power(config, ch, sol);
    r.node1_power = node_power(config, sol, Node::first);
    r.node2_power = node_power(config, sol, Node::second);
    return r;
}

/// Solver tolerance may overshoot a budget by ~1e-9; shrinks the free block
/// just enough to sit on every budget it touches.
inline void pull_onto_budgets(const SystemConfig& config, const JointSpectra& js,
                              SpectralAllocation& alloc, FreeBlock block) {
    const double pr = relay_power_diagonal(config, js, alloc);
    if (block == FreeBlock::relay) {
        if (pr > config.p_rt) {
            alloc.lambda_r *= config.p_rt / pr;
        }
        return;
    }
    const Node i = block == FreeBlock::first ? Node::first : Node::second;
    double scale = 1.0;
    const double pw = node_power_diagonal(config, alloc, i);
    if (pw > config.p_t(i)) {
        scale = config.p_t(i) / pw;
    }
    if (pr > config.p_rt) {
        const double own =
            config.sigma2_x(i) * (alloc.lambda_r.array() * alloc.lambda(i).array() * js.lambda_h.array()).sum();
        const double rest = pr - own;
        if (own > 0.0) {
            scale = std::min(scale, std::max(config.p_rt - rest, 0.0) / own);
        }
    }
    alloc.lambda(i) *= scale;
}

inline OptimizationResult alternate_optimize(const SystemConfig& config, const ChannelSet& ch,
                                             const OptimizerOptions& opts = {}) {
    config.validate();
    const std::shared_ptr<const conic::ConicSolver> solver =
        opts.solver ? opts.solver : std::make_shared<conic::InteriorPointSolver>();

    OptimizationResult res;
    res.spectra = joint_svd(ch);
    const JointSpectra& js = res.spectra;
    const Eigen::Index n = js.lambda_h.size();
    SpectralAllocation alloc = opts.initial_allocation ? *opts.initial_allocation : initial_allocation(config, js);

    SurrogateState state = surrogate_state_at(config, js, alloc);
    double objective = tree_objective(config, js, alloc);
    state.objective_trace.push_back(objective);
    DesignSolution best = finalize_design(config, ch, js, alloc);
    res.history.push_back(make_record(config, ch, js, alloc, best, 0));
    res.allocation = alloc;
    auto keep_if_better = [&](const DesignSolution& sol, int outer) {
        if (res.history.back().sum_mse < res.history[static_cast<std::size_t>(res.selected_iteration)].sum_mse) {
            best = sol;
            res.allocation = alloc;
            res.selected_iteration = outer;
        }
    };

    int consecutive_failures = 0;
    for (int outer = 1; outer <= opts.max_outer_iterations && !res.degraded; ++outer) {
        for (FreeBlock block : {FreeBlock::relay, FreeBlock::first, FreeBlock::second}) {
            const Subproblem sp = build_subproblem(config, js, alloc, block, state);
            const conic::SolverResult sr = solver->solve(sp.problem);
            if (sr.status != conic::SolverStatus::optimal) {
                ++res.failed_subproblems;
                if (++consecutive_failures >= opts.max_consecutive_failures) {
                    res.degraded = true;
                    break;
                }
                continue;
            }
            consecutive_failures = 0;
            RVector values(n);
            for (Eigen::Index k = 0; k < n; ++k) {
                values(k) = std::max(sr.x[static_cast<std::size_t>(sp.spectrum[static_cast<std::size_t>(k)])], 0.0);
            }
            SpectralAllocation candidate = alloc;
            (block == FreeBlock::relay ? candidate.lambda_r
             : block == FreeBlock::first ? candidate.lambda1
                                         : candidate.lambda2) = values;
            pull_onto_budgets(config, js, candidate, block);
            alloc = candidate;
        }
        {
            SurrogateState tight = surrogate_state_at(config, js, alloc);
            tight.iteration = outer;
            tight.objective_trace = std::move(state.objective_trace);
            state = std::move(tight);
        }
        const double next = tree_objective(config, js, alloc);
        state.objective_trace.push_back(next);
        const DesignSolution sol = finalize_design(config, ch, js, alloc);
        res.history.push_back(make_record(config, ch, js, alloc, sol, outer));
        keep_if_better(sol, outer);
        res.outer_iterations = outer;
        const double change = std::abs(next - objective) / std::max(1.0, std::abs(next));
        objective = next;
        if (change < opts.relative_tolerance && !res.degraded) {
            res.converged = true;
            break;
        }
    }

    res.state = std::move(state);
    res.final_allocation = alloc;
    res.solution = std::move(best);
    return res;
}

}  // namespace rthp
