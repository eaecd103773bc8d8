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

#include <gtest/gtest.h>

#include "robust_thp/harness.hpp"
#include "robust_thp/socp_optimizer.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace rthp;
using rthp::testing::scalar;

namespace {

double solve_tree(const std::vector<double>& leaves) {
    conic::ConicProblem p;
    std::vector<conic::AffineExpr> e;
    for (double v : leaves) {
        e.emplace_back(v);
    }
    const ProductTree tree = build_product_tree(p, e, "");
    p.set_objective(p.var(tree.tau), conic::Sense::maximize);
    const conic::SolverResult r = conic::InteriorPointSolver().solve(p);
    EXPECT_EQ(r.status, conic::SolverStatus::optimal);
    return r.objective;
}

struct Instance {
    SystemConfig config;
    ChannelSet ch;
    JointSpectra js;
};

Instance random_instance(std::uint64_t seed, double s2g = 0.01) {
    Instance in;
    in.config.sigma2_g1 = in.config.sigma2_g2 = s2g;
    in.config.rng_seed = seed;
    in.ch = trial_channels(in.config, 0);
    in.js = joint_svd(in.ch);
    return in;
}

Instance scalar_instance() {
    Instance in;
    auto& c = in.config;
    c.n_t = c.n_r = 1;
    c.sigma2_g1 = c.sigma2_g2 = 0.0;
    c.p_1t = 4.0;
    c.p_2t = 6.0;
    c.p_rt = 5.0;
    c.sigma2_nr = 0.1;
    c.sigma2_n1 = 0.2;
    c.sigma2_n2 = 0.3;
    in.ch.h1 = scalar(1.0);
    in.ch.h2 = scalar(0.8);
    in.ch.g1_hat = scalar(0.9);
    in.ch.g2_hat = scalar(1.1);
    in.ch.dg1 = in.ch.dg2 = scalar(0.0);
    in.js = joint_svd(in.ch);
    return in;
}

class FailingSolver final : public conic::ConicSolver {
  public:
    conic::SolverResult solve(const conic::ConicProblem&) const override { return {}; }
};

}  // namespace

TEST(Surrogate, HandValues) {
    EXPECT_NEAR(amgm_surrogate(1.0, 3.0, 1.0), 4.5, 1e-15);
    EXPECT_NEAR(amgm_surrogate(3.0, 1.0, 2.0), 2.0, 1e-15);
    EXPECT_THROW(amgm_surrogate(2.0, 1.0, 0.0), std::invalid_argument);
}

TEST(Surrogate, BoundsBilinearTermAndIsTightAtUpdate) {
    Rng rng = make_stream(41, 0, StreamRole::misc);
    std::uniform_real_distribution<double> u(1e-3, 10.0);
    for (int rep = 0; rep < 10000; ++rep) {
        const double t = 1.0 + u(rng), beta = u(rng), phi = u(rng);
        const double exact = beta * (t - 1.0);
        EXPECT_GE(amgm_surrogate(t, beta, phi), exact * (1.0 - 1e-14));
        EXPECT_NEAR(amgm_surrogate(t, beta, update_phi(t, beta)), exact, 1e-12 * exact);
    }
}

TEST(Surrogate, UpdateRule) {
    EXPECT_NEAR(update_phi(3.0, 1.0), 2.0, 1e-15);
    EXPECT_NEAR(update_phi(2.0, 4.0), 0.25, 1e-15);
    EXPECT_EQ(update_phi(1.0, 5.0), kPhiFloor);
    EXPECT_EQ(update_phi(0.5, 5.0), kPhiFloor);
    EXPECT_THROW(update_phi(2.0, 0.0), std::invalid_argument);
}

TEST(ProductTreeTest, DepthAndConeCounts) {
    EXPECT_EQ(tree_depth(1), 0);
    EXPECT_EQ(tree_depth(2), 1);
    EXPECT_EQ(tree_depth(3), 2);
    EXPECT_EQ(tree_depth(4), 2);
    EXPECT_EQ(tree_depth(5), 3);
    conic::ConicProblem p;
    const ProductTree one = build_product_tree(p, {conic::AffineExpr(3.0)}, "");
    EXPECT_EQ(one.cones, 0);
    EXPECT_TRUE(one.nodes.empty());
    EXPECT_EQ(p.num_cones(), 0);
    conic::ConicProblem q;
    std::vector<conic::AffineExpr> four(4, conic::AffineExpr(1.0));
    const ProductTree t4 = build_product_tree(q, four, "");
    EXPECT_EQ(t4.cones, 3);
    EXPECT_EQ(t4.nodes.size(), 3u);
    EXPECT_THROW(build_product_tree(q, {}, ""), std::invalid_argument);
}

TEST(ProductTreeTest, HandMaxima) {
    EXPECT_NEAR(solve_tree({4.0, 1.0}), 2.0, 1e-6);
    EXPECT_NEAR(solve_tree({16.0, 1.0, 1.0, 1.0}), 2.0, 1e-6);
    EXPECT_NEAR(solve_tree({5.0}), 5.0, 1e-6);
    // padded to four leaves: (2 * 8 * 1 * 1)^(1/4)
    EXPECT_NEAR(solve_tree({2.0, 8.0, 1.0}), 2.0, 1e-6);
}

TEST(Subproblem, StructuralCounts) {
    const Instance in = random_instance(1);
    const SpectralAllocation a = initial_allocation(in.config, in.js);
    const SurrogateState st = surrogate_state_at(in.config, in.js, a);
    for (FreeBlock b : {FreeBlock::relay, FreeBlock::first, FreeBlock::second}) {
        const Subproblem sp = build_subproblem(in.config, in.js, a, b, st);
        EXPECT_EQ(sp.problem.num_variables(), 4 + 8 + 8 + 2 * 3 + 2) << to_string(b);
        EXPECT_EQ(sp.problem.num_cones(), 2 * 3 + 2 * 4) << to_string(b);
        EXPECT_EQ(sp.problem.sense(), conic::Sense::maximize);
    }
    const Instance s = scalar_instance();
    const SpectralAllocation sa = initial_allocation(s.config, s.js);
    const Subproblem sp = build_subproblem(s.config, s.js, sa, FreeBlock::relay, surrogate_state_at(s.config, s.js, sa));
    EXPECT_EQ(sp.problem.num_variables(), 1 + 2 + 2 + 0 + 2);
    EXPECT_EQ(sp.problem.num_cones(), 2);
}

TEST(Subproblem, IncumbentIsFeasible) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Instance in = random_instance(10 + seed, 0.05);
        SpectralAllocation a = initial_allocation(in.config, in.js);
        a.lambda1 *= 0.7;
        a.lambda_r(0) *= 0.5;
        const SurrogateState st = surrogate_state_at(in.config, in.js, a);
        for (FreeBlock b : {FreeBlock::relay, FreeBlock::first, FreeBlock::second}) {
            const Subproblem sp = build_subproblem(in.config, in.js, a, b, st);
            const std::vector<double> x = incumbent_point(in.config, in.js, a, sp);
            EXPECT_LT(sp.problem.max_violation(x), 1e-9) << to_string(b);
            const double obj = x[static_cast<std::size_t>(sp.tree.tau)] + x[static_cast<std::size_t>(sp.tree_prime.tau)];
            EXPECT_NEAR(obj, tree_objective(in.config, in.js, a), 1e-10 * obj);
        }
    }
}

TEST(Subproblem, SilentRelayPinsRootsAtOne) {
    const Instance in = random_instance(2);
    SpectralAllocation a = initial_allocation(in.config, in.js);
    a.lambda_r.setZero();
    const Subproblem sp = build_subproblem(in.config, in.js, a, FreeBlock::first, surrogate_state_at(in.config, in.js, a));
    const conic::SolverResult r = conic::InteriorPointSolver().solve(sp.problem);
    ASSERT_EQ(r.status, conic::SolverStatus::optimal);
    EXPECT_NEAR(r.x[static_cast<std::size_t>(sp.tree.tau)], 1.0, 1e-6);
    EXPECT_NEAR(r.x[static_cast<std::size_t>(sp.tree_prime.tau)], 1.0, 1e-6);
}

TEST(Subproblem, OptimumMeetsBudgetsAndTreesAreTight) {
    const Instance in = random_instance(3);
    const SpectralAllocation a = initial_allocation(in.config, in.js);
    const SurrogateState st = surrogate_state_at(in.config, in.js, a);
    for (FreeBlock b : {FreeBlock::relay, FreeBlock::first, FreeBlock::second}) {
        const Subproblem sp = build_subproblem(in.config, in.js, a, b, st);
        const conic::SolverResult r = conic::InteriorPointSolver().solve(sp.problem);
        ASSERT_EQ(r.status, conic::SolverStatus::optimal) << to_string(b);
        EXPECT_LT(sp.problem.max_violation(r.x), 1e-8);
        EXPECT_GE(r.objective, tree_objective(in.config, in.js, a) - 1e-6);
        for (bool primed : {false, true}) {
            const auto& idx = primed ? sp.t_prime : sp.t;
            const ProductTree& tree = primed ? sp.tree_prime : sp.tree;
            double prod = 1.0;
            for (int v : idx) {
                prod *= r.x[static_cast<std::size_t>(v)];
            }
            const double tau = r.x[static_cast<std::size_t>(tree.tau)];
            EXPECT_NEAR(std::pow(tau, 4.0) / prod, 1.0, 1e-6) << to_string(b);
        }
    }
}

TEST(Subproblem, InfeasibleFixedSpectraNameTheConstraint) {
    const Instance in = random_instance(4);
    SpectralAllocation a = initial_allocation(in.config, in.js);
    const SurrogateState st = surrogate_state_at(in.config, in.js, a);
    SpectralAllocation hot = a;
    hot.lambda2 *= 3.0;
    try {
        build_subproblem(in.config, in.js, hot, FreeBlock::first, st);
        FAIL() << "expected InfeasibleSubproblem";
    } catch (const InfeasibleSubproblem& e) {
        EXPECT_NE(std::string(e.what()).find("relay power"), std::string::npos) << e.what();
    }
    SpectralAllocation loud = a;
    loud.lambda1 *= 2.0;
    try {
        build_subproblem(in.config, in.js, loud, FreeBlock::relay, st);
        FAIL() << "expected InfeasibleSubproblem";
    } catch (const InfeasibleSubproblem& e) {
        EXPECT_NE(std::string(e.what()).find("node 1 power"), std::string::npos) << e.what();
    }
    SpectralAllocation negative = a;
    negative.lambda_r(1) = -1.0;
    EXPECT_THROW(build_subproblem(in.config, in.js, negative, FreeBlock::first, st), InfeasibleSubproblem);
}

TEST(AlternateOptimize, ScalarMatchesGridOracle) {
    const Instance in = scalar_instance();
    const OptimizationResult r = alternate_optimize(in.config, in.ch);
    const SpectralAllocation& a = r.final_allocation;
    EXPECT_NEAR(a.lambda1(0), 4.0, 1e-6);
    EXPECT_NEAR(a.lambda2(0), 6.0, 1e-6);
    EXPECT_NEAR(relay_power_diagonal(in.config, in.js, a), 5.0, 1e-6);

    double best = 0.0;
    for (int i = 0; i <= 200; ++i) {
        for (int j = 0; j <= 200; ++j) {
            SpectralAllocation g;
            g.lambda1 = RVector::Constant(1, 4.0 * i / 200.0);
            g.lambda2 = RVector::Constant(1, 6.0 * j / 200.0);
            g.lambda_r = RVector::Ones(1);
            g.lambda_r *= in.config.p_rt / relay_power_diagonal(in.config, in.js, g);
            best = std::max(best, tree_objective(in.config, in.js, g));
        }
    }
    EXPECT_GE(tree_objective(in.config, in.js, a), best - 1e-6);
}

TEST(AlternateOptimize, ConvergedPointIsAFixedPoint) {
    const Instance in = random_instance(5);
    const OptimizationResult first = alternate_optimize(in.config, in.ch);
    ASSERT_TRUE(first.converged);
    OptimizerOptions opts;
    opts.initial_allocation = first.final_allocation;
    const OptimizationResult again = alternate_optimize(in.config, in.ch, opts);
    EXPECT_EQ(again.outer_iterations, 1);
    EXPECT_TRUE(again.converged);
    const auto& tr = again.state.objective_trace;
    EXPECT_LT(std::abs(tr.back() - tr.front()) / std::max(1.0, tr.back()), 1e-4);
}

TEST(AlternateOptimize, MonotoneTraceAndBudgetsOnRandomInstances) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const Instance in = random_instance(100 + seed, 0.05);
        const OptimizationResult r = alternate_optimize(in.config, in.ch);
        EXPECT_FALSE(r.degraded);
        EXPECT_TRUE(r.converged);
        const auto& tr = r.state.objective_trace;
        ASSERT_EQ(tr.size(), static_cast<std::size_t>(r.outer_iterations) + 1);
        for (std::size_t k = 1; k < tr.size(); ++k) {
            EXPECT_GE(tr[k], tr[k - 1] - 1e-6) << "seed " << seed << " step " << k;
        }
        const auto& a = r.final_allocation;
        EXPECT_LE(relay_power_diagonal(in.config, in.js, a), in.config.p_rt * (1.0 + 1e-8));
        EXPECT_LE(node_power_diagonal(in.config, a, Node::first), in.config.p_1t * (1.0 + 1e-8));
        EXPECT_LE(node_power_diagonal(in.config, a, Node::second), in.config.p_2t * (1.0 + 1e-8));
        EXPECT_NEAR(relay_power(in.config, in.ch, r.solution), in.config.p_rt, 1e-8 * in.config.p_rt);
        EXPECT_LE(sum_worst_case_mse(in.config, in.ch, r.solution), r.history.front().sum_mse);
        EXPECT_TRUE(is_unit_lower_triangular(r.solution.c1));
        EXPECT_TRUE(is_unit_lower_triangular(r.solution.c2));
        EXPECT_GT(r.state.phi.minCoeff(), 0.0);
    }
}

TEST(AlternateOptimize, RepeatedSolverFailuresDegradeToIncumbent) {
    const Instance in = random_instance(6);
    OptimizerOptions opts;
    opts.solver = std::make_shared<FailingSolver>();
    const OptimizationResult r = alternate_optimize(in.config, in.ch, opts);
    EXPECT_TRUE(r.degraded);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.failed_subproblems, 3);
    EXPECT_EQ(r.selected_iteration, 0);
    const DesignSolution init = finalize_design(in.config, in.ch, in.js, initial_allocation(in.config, in.js));
    EXPECT_LT((r.solution.fr - init.fr).norm(), 1e-14);
}
