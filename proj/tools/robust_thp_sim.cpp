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

// Command line simulator.
//
//   robust_thp_sim convergence  [options]   per-iteration objective and sum MSE
//   robust_thp_sim power-sweep  [options]   mean sum MSE versus transmit power
//   robust_thp_sim bound-audit  [options]   sampled exact MSE versus the bound
//   robust_thp_sim demo         [options]   one 4x4 design, printed summary
//
// Exit status: 0 success, 1 usage or configuration error, 2 runtime failure.

#include "CLI11.hpp"
#include "robust_thp/harness.hpp"

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    int realizations = 100;
    std::string sweep;
    int workers = 1;
};

std::vector<double> parse_sweep(const std::string& text) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        values.push_back(rthp::detail::parse_real("--sweep", rthp::detail::trim(item)));
    }
    return values;
}

rthp::ExperimentSpec make_spec(const Options& o, rthp::ExperimentKind kind, const std::string& default_out) {
    rthp::ExperimentSpec spec;
    spec.kind = kind;
    spec.base = o.config_path.empty() ? rthp::SystemConfig{} : rthp::load_config(o.config_path);
    if (o.seed) {
        spec.base.rng_seed = *o.seed;
    }
    spec.realizations = o.realizations;
    spec.workers = o.workers;
    spec.sweep = o.sweep.empty() ? std::vector<double>{} : parse_sweep(o.sweep);
    spec.output_path = o.out.empty() ? default_out : o.out;
    spec.validate();
    return spec;
}

void add_common(CLI::App* cmd, Options& o, bool experiment) {
    cmd->add_option("--config", o.config_path, "key = value configuration file");
    cmd->add_option("--seed", o.seed, "random seed (overrides rng_seed)");
    if (experiment) {
        cmd->add_option("--out", o.out, "CSV output path");
        cmd->add_option("--realizations", o.realizations, "independent channel realizations");
        cmd->add_option("--sweep", o.sweep, "comma-separated sweep values");
        cmd->add_option("--workers", o.workers, "worker threads");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust Tomlinson-Harashima precoding simulator for MIMO two-way relays"};
    app.require_subcommand(1);
    Options o;
    CLI::App* conv = app.add_subcommand("convergence", "objective and sum MSE per outer iteration");
    CLI::App* sweep = app.add_subcommand("power-sweep", "mean sum MSE versus P_t for several uncertainty radii");
    CLI::App* audit = app.add_subcommand("bound-audit", "sampled exact MSE against the worst-case bound");
    CLI::App* demo = app.add_subcommand("demo", "optimize one channel draw and print a summary");
    add_common(conv, o, true);
    add_common(sweep, o, true);
    add_common(audit, o, true);
    add_common(demo, o, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (conv->parsed()) {
            const auto spec = make_spec(o, rthp::ExperimentKind::convergence, "convergence.csv");
            const auto r = rthp::run_convergence(spec);
            std::cout << "wrote " << r.table.rows.size() << " rows to " << spec.output_path << "\n";
        } else if (sweep->parsed()) {
            const auto spec = make_spec(o, rthp::ExperimentKind::power_sweep, "power_sweep.csv");
            const auto r = rthp::run_power_sweep(spec);
            std::cout << "wrote " << r.table.rows.size() << " rows to " << spec.output_path << "\n";
        } else if (audit->parsed()) {
            const auto spec = make_spec(o, rthp::ExperimentKind::bound_audit, "bound_audit.csv");
            const auto r = rthp::run_bound_audit(spec);
            int violations = 0;
            for (const auto& row : r.rows) {
                violations += row.violations;
            }
            std::cout << "wrote " << r.table.rows.size() << " rows to " << spec.output_path << ", "
                      << violations << " samples above the bound\n";
        } else if (demo->parsed()) {
            rthp::SystemConfig cfg = o.config_path.empty() ? rthp::SystemConfig{} : rthp::load_config(o.config_path);
            if (o.seed) {
                cfg.rng_seed = *o.seed;
            }
            rthp::run_demo(cfg, std::cout);
        }
    } catch (const rthp::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
