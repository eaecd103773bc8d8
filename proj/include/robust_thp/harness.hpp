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

// Experiment drivers, config files and CSV output.

#pragma once

#include "random.hpp"
#include "robust_mse.hpp"
#include "socp_optimizer.hpp"
#include "system_model.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rthp {

// ---------------------------------------------------------------------------
// Uncertainty sampling

enum class SampleMode { interior, boundary };

/// Delta G with ||Delta G||_F^2 = radius2 (boundary) or uniform in the ball (interior).
inline CMatrix sample_uncertainty(double radius2, Eigen::Index rows, Eigen::Index cols, SampleMode mode,
                                  Rng& rng) {
    if (!(radius2 >= 0.0)) {
        throw std::invalid_argument("sample_uncertainty: radius2 must be >= 0");
    }
    if (radius2 == 0.0) {
        return CMatrix::Zero(rows, cols);
    }
    CMatrix d = complex_gaussian_matrix(rng, rows, cols);
    double scale2 = radius2 / fro2(d);
    if (mode == SampleMode::interior) {
        // uniform volume in real dimension 2 rows cols
        const double dim = 2.0 * static_cast<double>(rows * cols);
        const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        scale2 *= std::pow(u, 2.0 / dim);
    }
    d *= std::sqrt(scale2);
    return d;
}

// ---------------------------------------------------------------------------
// Config files: flat "key = value" lines, '#' starts a comment

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_real(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not a number: '" + value + "'");
    }
    if (used != value.size() || !std::isfinite(v)) {
        throw ConfigError("config key '" + key + "': not a finite number: '" + value + "'");
    }
    return v;
}

inline long long parse_integer(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(value, &used);
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not an integer: '" + value + "'");
    }
    if (used != value.size()) {
        throw ConfigError("config key '" + key + "': not an integer: '" + value + "'");
    }
    return v;
}

inline const std::map<std::string, double SystemConfig::*>& real_keys() {
    static const std::map<std::string, double SystemConfig::*> keys{
        {"sigma2_x1", &SystemConfig::sigma2_x1}, {"sigma2_x2", &SystemConfig::sigma2_x2},
        {"sigma2_nr", &SystemConfig::sigma2_nr}, {"sigma2_n1", &SystemConfig::sigma2_n1},
        {"sigma2_n2", &SystemConfig::sigma2_n2}, {"p_rt", &SystemConfig::p_rt},
        {"p_1t", &SystemConfig::p_1t},           {"p_2t", &SystemConfig::p_2t},
        {"sigma2_g1", &SystemConfig::sigma2_g1}, {"sigma2_g2", &SystemConfig::sigma2_g2},
    };
    return keys;
}

}  // namespace detail

/// Parses config text on top of the defaults; every key is optional, unknown keys are errors.
inline SystemConfig parse_config(std::istream& in, const std::string& source = "<config>") {
    SystemConfig c;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = detail::trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        const auto& reals = detail::real_keys();
        if (auto it = reals.find(key); it != reals.end()) {
            c.*(it->second) = detail::parse_real(key, value);
        } else if (key == "n_t" || key == "n_r" || key == "qam_m") {
            const long long v = detail::parse_integer(key, value);
            if (v < 1 || v > 1 << 20) {
                throw ConfigError("config key '" + key + "': out of range: " + value);
            }
            (key == "n_t" ? c.n_t : key == "n_r" ? c.n_r : c.qam_m) = static_cast<int>(v);
        } else if (key == "rng_seed") {
            const long long v = detail::parse_integer(key, value);
            if (v < 0) {
                throw ConfigError("config key 'rng_seed': must be >= 0");
            }
            c.rng_seed = static_cast<std::uint64_t>(v);
        } else {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

inline SystemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "': " + std::strerror(errno));
    }
    return parse_config(in, path);
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') {
            out += '"';
        }
        out += ch;
    }
    out += '"';
    return out;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void write(std::ostream& out) const {
        auto line = [&](const std::vector<std::string>& fields) {
            for (std::size_t k = 0; k < fields.size(); ++k) {
                out << (k ? "," : "") << csv_field(fields[k]);
            }
            out << "\r\n";
        };
        line(header);
        for (const auto& r : rows) {
            line(r);
        }
    }

    void write_file(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot open '" + path + "' for writing: " + std::strerror(errno));
        }
        write(out);
        out.flush();
        if (!out) {
            throw std::runtime_error("write to '" + path + "' failed: " + std::strerror(errno));
        }
    }
};

// ---------------------------------------------------------------------------
// Worker pool

/// Evaluates fn(0..count-1) on up to `workers` threads; results indexed by trial.
template <typename T>
std::vector<T> run_trials(int count, int workers, const std::function<T(int)>& fn) {
    std::vector<T> out(static_cast<std::size_t>(std::max(count, 0)));
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (int t = next++; t < count; t = next++) {
            try {
                out[static_cast<std::size_t>(t)] = fn(t);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                next = count;
            }
        }
    };
    const int n = std::clamp(workers, 1, std::max(count, 1));
    if (n == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n; ++w) {
            pool.emplace_back(work);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Experiments

enum class ExperimentKind { convergence, power_sweep, bound_audit };

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::convergence;
    int realizations = 100;
    std::vector<double> sweep;  ///< P_rt (convergence), P_t (power sweep) or sigma2_g
    SystemConfig base;
    std::string output_path;    ///< empty: no file written
    int workers = 1;
    int audit_samples = 10000;  ///< Delta G pairs per bound-audit realization

    void validate() const {
        base.validate();
        if (realizations < 1) {
            throw ConfigError("realizations must be >= 1");
        }
        if (workers < 1) {
            throw ConfigError("workers must be >= 1");
        }
        for (std::size_t k = 0; k < sweep.size(); ++k) {
            if (!std::isfinite(sweep[k]) || (k > 0 && !(sweep[k] > sweep[k - 1]))) {
                throw ConfigError("sweep values must be finite and strictly increasing");
            }
        }
        if (audit_samples < 1) {
            throw ConfigError("audit samples must be >= 1");
        }
    }
};

struct TraceRecord {
    int trial = 0;
    double sweep_value = 0.0;
    int iteration = 0;
    double objective = 0.0;
    double sum_mse = 0.0;
    double relay_power = 0.0;
    double node1_power = 0.0;
    double node2_power = 0.0;
    double wall_time = 0.0;  ///< seconds spent on the trial
};

inline ChannelSet trial_channels(const SystemConfig& config, int trial) {
    Rng rng = make_stream(config.rng_seed, static_cast<std::uint64_t>(trial), StreamRole::channels);
    return generate_channels(config, rng);
}

struct ConvergenceResult {
    std::vector<TraceRecord> records;  ///< sorted by (trial, sweep value, iteration)
    CsvTable table;
};

inline ConvergenceResult run_convergence(const ExperimentSpec& spec) {
    spec.validate();
    const std::vector<double> sweep = spec.sweep.empty() ? std::vector<double>{spec.base.p_rt} : spec.sweep;
    using Rows = std::vector<TraceRecord>;
    const auto per_trial = run_trials<Rows>(spec.realizations, spec.workers, [&](int trial) {
        Rows rows;
        for (double p_rt : sweep) {
            SystemConfig cfg = spec.base;
            cfg.p_rt = p_rt;
            const auto t0 = std::chrono::steady_clock::now();
            const OptimizationResult r = alternate_optimize(cfg, trial_channels(cfg, trial));
            const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            for (const IterationRecord& h : r.history) {
                rows.push_back({trial, p_rt, h.iteration, h.objective, h.sum_mse, h.relay_power, h.node1_power,
                                h.node2_power, dt});
            }
        }
        return rows;
    });
    ConvergenceResult res;
    res.table.header = {"trial", "p_rt", "iteration", "objective", "sum_mse"};
    for (const Rows& rows : per_trial) {
        for (const TraceRecord& r : rows) {
            res.records.push_back(r);
            res.table.rows.push_back({std::to_string(r.trial), format_real(r.sweep_value),
                                      std::to_string(r.iteration), format_real(r.objective),
                                      format_real(r.sum_mse)});
        }
    }
    if (!spec.output_path.empty()) {
        res.table.write_file(spec.output_path);
    }
    return res;
}

struct SweepPoint {
    double sigma2_g = 0.0;
    double p_t = 0.0;
    double mean_sum_mse = 0.0;
    double std_sum_mse = 0.0;
    int realizations = 0;
};

struct PowerSweepResult {
    std::vector<SweepPoint> points;  ///< ordered by (sigma2_g, p_t)
    CsvTable table;
};

inline const std::vector<double>& power_sweep_uncertainties() {
    static const std::vector<double> radii{0.0, 0.01, 0.05};
    return radii;
}

inline std::vector<double> default_power_sweep() { return {5.0, 10.0, 15.0, 20.0, 25.0}; }

/// Mean and sample standard deviation of the worst-case sum MSE for every
/// (sigma2_g, P_t) pair, with P_1t = P_2t = P_t and the relay budget fixed.
inline PowerSweepResult run_power_sweep(const ExperimentSpec& spec) {
    spec.validate();
    const std::vector<double> sweep = spec.sweep.empty() ? default_power_sweep() : spec.sweep;
    const auto& radii = power_sweep_uncertainties();
    const std::size_t points = radii.size() * sweep.size();
    const auto per_trial = run_trials<std::vector<double>>(spec.realizations, spec.workers, [&](int trial) {
        const ChannelSet ch = trial_channels(spec.base, trial);
        std::vector<double> mse;
        mse.reserve(points);
        for (double g : radii) {
            for (double p : sweep) {
                SystemConfig cfg = spec.base;
                cfg.sigma2_g1 = cfg.sigma2_g2 = g;
                cfg.p_1t = cfg.p_2t = p;
                const OptimizationResult r = alternate_optimize(cfg, ch);
                mse.push_back(sum_worst_case_mse(cfg, ch, r.solution));
            }
        }
        return mse;
    });
    PowerSweepResult res;
    res.table.header = {"sigma2_g", "p_t", "mean_sum_mse", "std_sum_mse", "realizations"};
    std::size_t idx = 0;
    for (double g : radii) {
        for (double p : sweep) {
            double sum = 0.0;
            for (const auto& m : per_trial) {
                sum += m[idx];
            }
            const double n = static_cast<double>(per_trial.size());
            const double mean = sum / n;
            double ss = 0.0;
            for (const auto& m : per_trial) {
                ss += (m[idx] - mean) * (m[idx] - mean);
            }
            const double sd = per_trial.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
            res.points.push_back({g, p, mean, sd, static_cast<int>(per_trial.size())});
            res.table.rows.push_back({format_real(g), format_real(p), format_real(mean), format_real(sd),
                                      std::to_string(per_trial.size())});
            ++idx;
        }
    }
    if (!spec.output_path.empty()) {
        res.table.write_file(spec.output_path);
    }
    return res;
}

struct AuditRow {
    int trial = 0;
    double bound = 0.0;        ///< worst-case sum MSE bound of the optimized design
    double max_sampled = 0.0;  ///< largest exact sum MSE over the sampled channel errors
    double slack = 0.0;        ///< bound - max_sampled
    int violations = 0;        ///< samples above bound + 1e-9
};

struct BoundAuditResult {
    std::vector<AuditRow> rows;
    CsvTable table;
};

/// Exact sum MSE over channel errors drawn alternately on the boundary and in
/// the interior of the uncertainty spheres, compared against the bound.
inline AuditRow audit_design(const SystemConfig& config, const ChannelSet& ch, const DesignSolution& sol,
                             int samples, Rng& rng) {
    AuditRow row;
    row.bound = sum_worst_case_mse(config, ch, sol);
    row.max_sampled = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < samples; ++s) {
        const SampleMode mode = s % 2 == 0 ? SampleMode::boundary : SampleMode::interior;
        double total = 0.0;
        for (Node i : {Node::first, Node::second}) {
            const CMatrix& g = ch.g_hat(i);
            const CMatrix d = sample_uncertainty(config.sigma2_g(i), g.rows(), g.cols(), mode, rng);
            total += mse_at(config, ch, sol, i, g + d);
        }
        row.max_sampled = std::max(row.max_sampled, total);
        if (total > row.bound + 1e-9) {
            ++row.violations;
        }
    }
    row.slack = row.bound - row.max_sampled;
    return row;
}

inline BoundAuditResult run_bound_audit(const ExperimentSpec& spec) {
    spec.validate();
    BoundAuditResult res;
    res.rows = run_trials<AuditRow>(spec.realizations, spec.workers, [&](int trial) {
        const ChannelSet ch = trial_channels(spec.base, trial);
        const OptimizationResult r = alternate_optimize(spec.base, ch);
        Rng rng = make_stream(spec.base.rng_seed, static_cast<std::uint64_t>(trial), StreamRole::uncertainty);
        AuditRow row = audit_design(spec.base, ch, r.solution, spec.audit_samples, rng);
        row.trial = trial;
        return row;
    });
    res.table.header = {"trial", "bound", "max_sampled", "slack"};
    for (const AuditRow& r : res.rows) {
        res.table.rows.push_back(
            {std::to_string(r.trial), format_real(r.bound), format_real(r.max_sampled), format_real(r.slack)});
    }
    if (!spec.output_path.empty()) {
        res.table.write_file(spec.output_path);
    }
    return res;
}

/// Optimizes one channel draw and prints a short summary.
inline void run_demo(const SystemConfig& config, std::ostream& out) {
    config.validate();
    const ChannelSet ch = trial_channels(config, 0);
    const OptimizationResult r = alternate_optimize(config, ch);
    const DesignSolution& s = r.solution;
    char buf[256];
    auto line = [&](const char* label, double v) {
        std::snprintf(buf, sizeof buf, "%-26s %.6g\n", label, v);
        out << buf;
    };
    out << "robust THP design, " << config.n_t << "x" << config.n_r << " antennas, seed " << config.rng_seed
        << "\n";
    line("outer iterations", r.outer_iterations);
    out << "converged                  " << (r.converged ? "yes" : "no") << (r.degraded ? " (degraded)" : "")
        << "\n";
    line("initial objective", r.state.objective_trace.front());
    line("final objective", r.state.objective_trace.back());
    line("initial sum MSE bound", r.history.front().sum_mse);
    line("sum worst-case MSE", sum_worst_case_mse(config, ch, s));
    line("worst-case MSE node 1", worst_case_mse(config, ch, s, Node::first));
    line("worst-case MSE node 2", worst_case_mse(config, ch, s, Node::second));
    std::snprintf(buf, sizeof buf, "%-26s %.6g / %.6g\n", "relay power / budget", relay_power(config, ch, s),
                  config.p_rt);
    out << buf;
    std::snprintf(buf, sizeof buf, "%-26s %.6g / %.6g\n", "node 1 power / budget", node_power(config, s, Node::first),
                  config.p_1t);
    out << buf;
    std::snprintf(buf, sizeof buf, "%-26s %.6g / %.6g\n", "node 2 power / budget",
                  node_power(config, s, Node::second), config.p_2t);
    out << buf;
}

}  // namespace rthp
