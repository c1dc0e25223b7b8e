// SPDX-License-Identifier: Apache-2.0
//
// Seeded Monte-Carlo engine: per trial, draw a channel, optionally estimate
// it, design filters, and score them on the true channel.
//
// Every trial draws from its own named substreams, so the values of one
// (method, point, trial) cell do not depend on scheduling, thread count or
// which other methods run.

#ifndef MMW_EXPERIMENT_HPP
#define MMW_EXPERIMENT_HPP

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mmw/config.hpp"
#include "mmw/hybrid.hpp"

namespace mmw {

enum class SweepVar { snr, frames, rfchains };
enum class CsiMode { perfect, estimated };

std::string to_string(SweepVar v);
SweepVar sweep_var_from_string(std::string_view text);
std::string to_string(CsiMode c);
CsiMode csi_mode_from_string(std::string_view text);

struct Sweep {
    SweepVar var = SweepVar::snr;
    std::vector<double> values;
};

/// Applies one sweep value to a copy of cfg.
SystemConfig apply_sweep(const SystemConfig& cfg, SweepVar var, double value);

struct MethodId {
    std::string name;  // e.g. "digital-mmse", "hd-pg-ey:mrc", "ul-nmse"
    CsiMode csi = CsiMode::perfect;

    bool is_estimation() const;
    /// name for estimation methods, name + "/" + csi otherwise.
    std::string label() const;
    bool operator==(const MethodId&) const = default;
};

std::vector<std::string> estimation_method_names();
std::vector<std::string> design_method_names();
/// Throws std::invalid_argument listing every valid name.
MethodId parse_method(std::string_view text, CsiMode csi);

struct PointStats {
    double mean = 0.0;    // dB for NMSE methods, bits/s/Hz for rates
    double stderr_ = 0.0; // same unit as mean
    std::size_t trials = 0;    // successful trials
    std::size_t failures = 0;  // trials that raised and were excluded
};

struct TrialError {
    std::size_t point = 0;
    std::size_t trial = 0;
    std::string message;
};

struct Series {
    MethodId method;
    std::vector<PointStats> points;              // one per sweep value
    std::vector<std::vector<double>> samples;    // [point][trial], linear, NaN on failure
    std::vector<TrialError> errors;              // one per NaN sample
};

struct TraceRecord {
    std::string method;
    std::size_t point = 0;
    std::size_t trial = 0;
    std::string role;  // "precoder-u<i>" or "combiner"
    FactorizationTrace trace;
};

struct ExperimentSpec {
    SystemConfig cfg;
    Sweep sweep;
    std::vector<MethodId> methods;
    std::size_t trials = 100;
    unsigned threads = 0;  // 0 = hardware concurrency
    bool keep_traces = false;
    HdPgOptions hd_pg;
    AmOptions am;
};

struct ExperimentResult {
    ExperimentSpec spec;
    std::vector<Series> series;
    std::vector<TraceRecord> traces;

    const Series& find(const std::string& label) const;
};

/// Validates every sweep point's configuration before running any trial.
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Columns method, sweep_var, sweep_value, mean, stderr, trials.
void write_csv(std::ostream& os, const ExperimentResult& result);
nlohmann::json to_json(const ExperimentResult& result);

nlohmann::json to_json(const ExperimentSpec& spec);
/// Inverse of to_json(ExperimentSpec); used to rerun from a manifest.
ExperimentSpec spec_from_json(const nlohmann::json& j);

}  // namespace mmw

#endif  // MMW_EXPERIMENT_HPP
