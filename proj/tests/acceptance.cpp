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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include "robust_thp/harness.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

using namespace rthp;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

template <typename... Args>
std::string format(const char* fmt, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

Outcome equivalence_oracle() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto r = testing::random_link(1000 + seed);
        for (Node i : {Node::first, Node::second}) {
            const Node j = peer(i);
            const EffectiveFactors f = effective_factors(r.config, r.ch, r.sol, i);
            worst = std::max(worst, testing::relative_error(reduced_mse_direct(r.config, f, r.sol.c(j), j),
                                                            reduced_mse(r.config, f, r.sol.c(j), j)));
        }
    }
    const double dt = seconds_since(t0);
    return {worst < 1e-10 && dt < 1.0, format("max relative difference %.2e over 50 instances, %.3f s", worst, dt)};
}

Outcome equalizer_stationarity() {
    const double h = 1e-6;
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto r = testing::random_link(2000 + seed);
        for (Node i : {Node::first, Node::second}) {
            const CMatrix g0 = r.sol.gamma(i);
            for (Eigen::Index k = 0; k < g0.size(); ++k) {
                for (cplx dir : {cplx(1, 0), cplx(0, 1)}) {
                    CMatrix gp = g0, gm = g0;
                    gp(k) += h * dir;
                    gm(k) -= h * dir;
                    const double fd = (worst_case_mse_with(r.config, r.ch, r.sol, i, gp) -
                                       worst_case_mse_with(r.config, r.ch, r.sol, i, gm)) /
                                      (2.0 * h);
                    worst = std::max(worst, std::abs(fd));
                }
            }
        }
    }
    return {worst < 1e-6, format("max finite-difference gradient %.2e over 20 instances", worst)};
}

Outcome bound_dominance() {
    SystemConfig c;
    c.sigma2_g1 = c.sigma2_g2 = 0.05;
    c.rng_seed = 3003;
    const int instances = 20;
    const int samples = 10000;
    const auto per = run_trials<std::pair<int, double>>(instances, workers(), [&](int trial) {
        const ChannelSet ch = trial_channels(c, trial);
        const OptimizationResult r = alternate_optimize(c, ch);
        Rng rng = make_stream(c.rng_seed, static_cast<std::uint64_t>(trial), StreamRole::uncertainty);
        int violations = 0;
        double min_slack = std::numeric_limits<double>::infinity();
        for (Node i : {Node::first, Node::second}) {
            const double bound = worst_case_mse(c, ch, r.solution, i);
            const CMatrix& g = ch.g_hat(i);
            for (int s = 0; s < samples; ++s) {
                const SampleMode mode = s % 2 == 0 ? SampleMode::boundary : SampleMode::interior;
                const double v = mse_at(c, ch, r.solution, i, g + sample_uncertainty(c.sigma2_g(i), g.rows(), g.cols(), mode, rng));
                violations += v > bound + 1e-9;
                min_slack = std::min(min_slack, bound - v);
            }
        }
        return std::pair{violations, min_slack};
    });
    int violations = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    for (const auto& [v, s] : per) {
        violations += v;
        min_slack = std::min(min_slack, s);
    }
    return {violations == 0, format("%d violations in %d x %d samples per receiver, smallest slack %.3e", violations,
                                    instances, samples, min_slack)};
}

// Gradient descent over the strictly lower entries of a unit lower triangular C.
double brute_force_feedback(const CMatrix& j) {
    const Eigen::Index n = j.rows();
    const double lmax = Eigen::SelfAdjointEigenSolver<CMatrix>(j).eigenvalues().maxCoeff();
    CMatrix c = CMatrix::Identity(n, n);
    for (int it = 0; it < 200000; ++it) {
        const CMatrix grad = c * j;
        double gnorm = 0.0;
        for (Eigen::Index r = 1; r < n; ++r) {
            for (Eigen::Index k = 0; k < r; ++k) {
                c(r, k) -= (0.5 / lmax) * grad(r, k);
                gnorm += std::norm(grad(r, k));
            }
        }
        if (gnorm < 1e-26) {
            break;
        }
    }
    return (c * j * c.adjoint()).trace().real();
}

Outcome feedback_optimality() {
    Rng rng = make_stream(4004, 0, StreamRole::misc);
    double worst = 0.0;
    for (int n : {2, 3}) {
        for (int rep = 0; rep < 20; ++rep) {
            const CMatrix j = random_hpd(rng, n);
            const FeedbackDesign d = compute_feedback_matrix(j);
            worst = std::max(worst, std::abs(d.achieved_mse - brute_force_feedback(j)));
        }
    }
    return {worst < 1e-6, format("max objective gap %.2e over 40 matrices", worst)};
}

Outcome monotone_ascent() {
    SystemConfig c;
    c.sigma2_g1 = c.sigma2_g2 = 0.01;
    c.rng_seed = 5005;
    const auto t0 = Clock::now();
    struct Trial {
        int iterations = 0;
        int drops = 0;
        bool converged = false;
    };
    const auto trials = run_trials<Trial>(50, workers(), [&](int trial) {
        const OptimizationResult r = alternate_optimize(c, trial_channels(c, trial));
        Trial t;
        t.iterations = r.outer_iterations;
        t.converged = r.converged;
        const auto& tr = r.state.objective_trace;
        for (std::size_t k = 1; k < tr.size(); ++k) {
            t.drops += tr[k] < tr[k - 1] - 1e-6;
        }
        return t;
    });
    const double dt = seconds_since(t0);
    int drops = 0, unconverged = 0;
    double mean = 0.0;
    for (const Trial& t : trials) {
        drops += t.drops;
        unconverged += !t.converged;
        mean += t.iterations / 50.0;
    }
    return {drops == 0 && mean <= 20.0 && dt < 300.0,
            format("%d decreasing steps, mean %.2f outer iterations, %d unconverged, %.1f s", drops, mean,
                   unconverged, dt)};
}

Outcome power_sweep_ordering() {
    ExperimentSpec s;
    s.kind = ExperimentKind::power_sweep;
    s.realizations = 100;
    s.sweep = default_power_sweep();
    s.base.rng_seed = 6006;
    s.workers = workers();
    const auto t0 = Clock::now();
    const PowerSweepResult r = run_power_sweep(s);
    const double dt = seconds_since(t0);
    const auto& radii = power_sweep_uncertainties();
    const std::size_t np = s.sweep.size();
    auto mean = [&](std::size_t g, std::size_t p) { return r.points[g * np + p].mean_sum_mse; };
    int order_breaks = 0, rises = 0;
    for (std::size_t p = 0; p < np; ++p) {
        for (std::size_t g = 1; g < radii.size(); ++g) {
            order_breaks += !(mean(g - 1, p) < mean(g, p));
        }
    }
    for (std::size_t g = 0; g < radii.size(); ++g) {
        for (std::size_t p = 1; p < np; ++p) {
            rises += mean(g, p) > mean(g, p - 1);
        }
    }
    std::ostringstream curve;
    for (std::size_t g = 0; g < radii.size(); ++g) {
        curve << (g ? "; " : "") << "g=" << radii[g] << ":";
        for (std::size_t p = 0; p < np; ++p) {
            curve << " " << format("%.4f", mean(g, p));
        }
    }
    return {order_breaks == 0 && rises == 0 && dt < 1800.0,
            format("%d ordering breaks, %d increases in P_t, %.1f s [", order_breaks, rises, dt) + curve.str() + "]"};
}

Outcome zero_noise_round_trip() {
    SystemConfig c;
    c.sigma2_nr = c.sigma2_n1 = c.sigma2_n2 = 1e-9;
    c.sigma2_g1 = c.sigma2_g2 = 0.0;
    c.rng_seed = 7007;
    const ChannelSet ch = trial_channels(c, 0);
    const OptimizationResult r = alternate_optimize(c, ch);
    Rng sym = make_stream(c.rng_seed, 0, StreamRole::symbols);
    int errors = 0;
    const int vectors = 1000;
    for (int t = 0; t < vectors; ++t) {
        CVector s1(c.n_t), s2(c.n_t);
        for (int k = 0; k < c.n_t; ++k) {
            s1(k) = random_qam_symbol(sym, 4);
            s2(k) = random_qam_symbol(sym, 4);
        }
        const LinkOutput out = simulate_link(c, ch, r.solution, s1, s2, LinkNoise::zero(c));
        for (int k = 0; k < c.n_t; ++k) {
            errors += (out.s1_hat(k) != s1(k)) + (out.s2_hat(k) != s2(k));
        }
    }
    return {errors == 0, format("%d symbol errors in %d vectors per direction", errors, vectors)};
}

Outcome trace_determinant() {
    Rng rng = make_stream(8008, 0, StreamRole::misc);
    int violations = 0;
    for (int rep = 0; rep < 1000; ++rep) {
        const int n = 1 + rep % 6;
        const CMatrix b = complex_gaussian_matrix(rng, n, n);
        const CMatrix x = b * b.adjoint();
        const double rhs = n * std::pow(std::max(hermitian_det(x), 0.0), 1.0 / n);
        violations += x.trace().real() < rhs * (1.0 - 1e-12);
    }
    double eq_gap = 0.0;
    for (double c : {1e-3, 0.5, 1.0, 3.0, 40.0}) {
        for (int n : {1, 2, 4, 8}) {
            const CMatrix x = c * CMatrix::Identity(n, n);
            eq_gap = std::max(eq_gap, std::abs(x.trace().real() - n * std::pow(hermitian_det(x), 1.0 / n)) / (n * c));
        }
    }
    return {violations == 0 && eq_gap < 1e-10,
            format("%d violations in 1000 matrices, equality gap %.2e at scaled identities", violations, eq_gap)};
}

double tree_max(const std::vector<double>& leaves) {
    conic::ConicProblem p;
    std::vector<conic::AffineExpr> e(leaves.begin(), leaves.end());
    const ProductTree tree = build_product_tree(p, e, "");
    p.set_objective(p.var(tree.tau), conic::Sense::maximize);
    const conic::SolverResult r = conic::InteriorPointSolver().solve(p);
    return r.status == conic::SolverStatus::optimal ? r.objective : std::numeric_limits<double>::quiet_NaN();
}

Outcome socp_micro_oracles() {
    const double a = tree_max({4.0, 1.0});
    const double b = tree_max({16.0, 1.0, 1.0, 1.0});
    Rng rng = make_stream(9009, 0, StreamRole::misc);
    std::uniform_real_distribution<double> u(1e-2, 10.0);
    double worst = 0.0;
    for (int rep = 0; rep < 10000; ++rep) {
        const double t = 1.0 + u(rng), beta = u(rng);
        const double exact = beta * (t - 1.0);
        worst = std::max(worst, std::abs(amgm_surrogate(t, beta, (t - 1.0) / beta) - exact) / exact);
    }
    const bool ok = std::abs(a - 2.0) < 1e-6 && std::abs(b - 2.0) < 1e-6 && worst < 1e-12;
    return {ok, format("trees (4,1) -> %.9f, (16,1,1,1) -> %.9f, surrogate tightness %.2e", a, b, worst)};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const auto dir = std::filesystem::temp_directory_path() / "rthp_acceptance";
    std::filesystem::create_directories(dir);
    bool same = true;
    std::size_t bytes = 0;
    auto check = [&](const std::string& name, const std::function<void(ExperimentSpec&)>& run, ExperimentSpec s) {
        std::vector<std::string> texts;
        for (int w : {1, 1, 3}) {
            s.workers = w;
            s.output_path = (dir / (name + std::to_string(texts.size()) + ".csv")).string();
            run(s);
            texts.push_back(slurp(s.output_path));
        }
        same = same && !texts[0].empty() && texts[0] == texts[1] && texts[0] == texts[2];
        bytes += texts[0].size();
    };
    ExperimentSpec conv;
    conv.realizations = 4;
    conv.sweep = {5.0, 10.0};
    conv.base.rng_seed = 1010;
    check("convergence", [](ExperimentSpec& s) { run_convergence(s); }, conv);
    ExperimentSpec sweep;
    sweep.realizations = 3;
    sweep.sweep = {5.0, 15.0};
    sweep.base.rng_seed = 1011;
    check("power_sweep", [](ExperimentSpec& s) { run_power_sweep(s); }, sweep);
    ExperimentSpec audit;
    audit.realizations = 3;
    audit.audit_samples = 500;
    audit.base.rng_seed = 1012;
    audit.base.sigma2_g1 = audit.base.sigma2_g2 = 0.05;
    check("bound_audit", [](ExperimentSpec& s) { run_bound_audit(s); }, audit);
    std::filesystem::remove_all(dir);
    return {same, format("three experiments, two runs with 1 worker and one with 3, %zu bytes compared per run", bytes)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"reduced MSE forms agree", equivalence_oracle},
        {"equalizer stationarity", equalizer_stationarity},
        {"worst-case bound dominance", bound_dominance},
        {"feedback matrix optimality", feedback_optimality},
        {"monotone ascent and convergence", monotone_ascent},
        {"power sweep ordering", power_sweep_ordering},
        {"zero-noise round trip", zero_noise_round_trip},
        {"trace-determinant inequality", trace_determinant},
        {"conic micro-oracles", socp_micro_oracles},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
