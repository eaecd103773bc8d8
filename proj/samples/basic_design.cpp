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

// Designs a robust transceiver for one random 4x4 channel, then pushes
// 4-QAM symbols through the two-way link with noise and a channel error on
// the uncertainty sphere.

#include "robust_thp/harness.hpp"

#include <cstdio>

int main() {
    using namespace rthp;
    SystemConfig cfg;
    cfg.sigma2_g1 = cfg.sigma2_g2 = 0.01;
    cfg.rng_seed = 42;

    ChannelSet ch = trial_channels(cfg, 0);
    const OptimizationResult r = alternate_optimize(cfg, ch);
    std::printf("outer iterations: %d\n", r.outer_iterations);
    std::printf("objective: %.4f -> %.4f\n", r.state.objective_trace.front(), r.state.objective_trace.back());
    std::printf("worst-case sum MSE: %.4f\n", sum_worst_case_mse(cfg, ch, r.solution));
    std::printf("relay power: %.4f of %.1f\n", relay_power(cfg, ch, r.solution), cfg.p_rt);

    Rng err = make_stream(cfg.rng_seed, 0, StreamRole::uncertainty);
    ch.dg1 = sample_uncertainty(cfg.sigma2_g1, cfg.n_t, cfg.n_r, SampleMode::boundary, err);
    ch.dg2 = sample_uncertainty(cfg.sigma2_g2, cfg.n_t, cfg.n_r, SampleMode::boundary, err);

    Rng sym = make_stream(cfg.rng_seed, 0, StreamRole::symbols);
    Rng relay = make_stream(cfg.rng_seed, 0, StreamRole::relay_noise);
    Rng recv = make_stream(cfg.rng_seed, 0, StreamRole::receiver_noise);
    const int vectors = 2000;
    int errors = 0;
    for (int t = 0; t < vectors; ++t) {
        CVector s1(cfg.n_t), s2(cfg.n_t);
        for (int k = 0; k < cfg.n_t; ++k) {
            s1(k) = random_qam_symbol(sym, cfg.qam_m);
            s2(k) = random_qam_symbol(sym, cfg.qam_m);
        }
        const LinkOutput out = simulate_link(cfg, ch, r.solution, s1, s2, LinkNoise::draw(cfg, relay, recv));
        for (int k = 0; k < cfg.n_t; ++k) {
            errors += (out.s1_hat(k) != s1(k)) + (out.s2_hat(k) != s2(k));
        }
    }
    std::printf("symbol errors: %d of %d\n", errors, 2 * cfg.n_t * vectors);
    return 0;
}
