// SPDX-License-Identifier: Apache-2.0
//
// mmw: command-line front end for the estimation and design experiments.
//
//   mmw estimate [--config FILE] [--sweep snr|frames] [--mode ul|dl|both] ...
//   mmw design   [--config FILE] [--methods a,b] [--csi perfect|estimated] ...
//   mmw selftest
//   mmw rerun MANIFEST
//
// Exit codes: 0 success, 1 runtime failure or failed self-test, 2 invalid
// input (configuration, flags, method names). Input is validated before any
// file is written.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmw/config.hpp"
#include "mmw/experiment.hpp"
#include "mmw/selftest.hpp"

#ifndef MMW_VERSION
#define MMW_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Invalid user input; printed verbatim, exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

std::size_t line_of_key(const std::string& text, const std::string& key) {
    if (key.empty()) {
        return 1;
    }
    const auto pos = text.find("\"" + key + "\"");
    return pos == std::string::npos ? 1 : line_of_offset(text, pos);
}

// Where the configuration came from, to anchor later errors to a line.
struct ConfigSource {
    std::string path;  // empty when no file was given
    std::string text;
};

struct LoadedConfig {
    mmw::SystemConfig cfg;
    std::optional<std::size_t> trials;
    ConfigSource source;
};

LoadedConfig load_config(const std::string& path, const std::string& profile) {
    LoadedConfig out;
    if (profile == "full") {
        out.cfg = mmw::full_profile();
    } else if (profile == "desk") {
        out.cfg = mmw::desk_profile();
    } else {
        throw UsageError("--profile must be desk or full");
    }
    if (path.empty()) {
        return out;
    }
    std::ifstream in(path);
    if (!in) {
        throw UsageError(path + ": cannot read configuration file");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    out.source = {path, text};
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw UsageError(path + ":" + std::to_string(line_of_offset(text, e.byte)) +
                         ": invalid JSON: " + e.what());
    }
    try {
        if (j.is_object() && j.contains("profile")) {
            const auto& p = j.at("profile");
            if (!p.is_string() || (p != "desk" && p != "full")) {
                throw mmw::ConfigError("profile", "profile: must be \"desk\" or \"full\"");
            }
            out.cfg = p == "full" ? mmw::full_profile() : mmw::desk_profile();
        }
        mmw::apply_json(j, out.cfg);
        if (j.contains("trials")) {
            const auto& t = j.at("trials");
            if (!t.is_number_integer() || t.get<long long>() < 1) {
                throw mmw::ConfigError("trials", "trials: must be a positive integer");
            }
            out.trials = t.get<std::size_t>();
        }
    } catch (const mmw::ConfigError& e) {
        throw UsageError(path + ":" + std::to_string(line_of_key(text, e.key())) + ": " + e.what());
    }
    return out;
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw UsageError("--values: '" + item + "' is not a number");
        }
    }
    if (out.empty()) {
        throw UsageError("--values: empty list");
    }
    return out;
}

std::vector<std::string> split(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

fs::path output_dir(const std::string& flag) {
    if (!flag.empty()) {
        return flag;
    }
    if (const char* env = std::getenv("MMW_OUT_DIR"); env && *env) {
        return env;
    }
    return "results";
}

std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string safe_name(std::string s) {
    for (char& c : s) {
        if (c == '/' || c == ':' || c == ' ') {
            c = '_';
        }
    }
    return s;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + p.string());
    }
    out << content;
}

// Manifest first, then results, then the manifest again with the elapsed time.
int execute(const std::string& command, const mmw::ExperimentSpec& spec, const fs::path& out_dir,
            const std::vector<std::string>& argv) {
    fs::create_directories(out_dir);
    const fs::path csv = out_dir / (command + ".csv");
    const fs::path js = out_dir / (command + ".json");
    const fs::path manifest_path = out_dir / (command + "_manifest.json");
    json manifest = {{"tool", "mmw"},
                     {"version", MMW_VERSION},
                     {"command", command},
                     {"argv", argv},
                     {"spec", mmw::to_json(spec)},
                     {"outputs", {{"dir", out_dir.string()}, {"csv", csv.filename().string()},
                                  {"json", js.filename().string()}}},
                     {"started_at", timestamp()}};
    if (spec.keep_traces) {
        manifest["outputs"]["traces"] = "traces";
    }
    write_file(manifest_path, manifest.dump(2) + "\n");

    const auto start = std::chrono::steady_clock::now();
    const mmw::ExperimentResult result = mmw::run_experiment(spec);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::ostringstream csv_text;
    mmw::write_csv(csv_text, result);
    write_file(csv, csv_text.str());
    write_file(js, mmw::to_json(result).dump(2) + "\n");
    if (spec.keep_traces) {
        const fs::path dir = out_dir / "traces";
        fs::create_directories(dir);
        for (const auto& tr : result.traces) {
            std::ostringstream os;
            tr.trace.write_csv(os);
            write_file(dir / (safe_name(tr.method) + "_p" + std::to_string(tr.point) + "_t" +
                              std::to_string(tr.trial) + "_" + tr.role + ".csv"),
                       os.str());
        }
    }
    manifest["wall_clock_seconds"] = elapsed;
    write_file(manifest_path, manifest.dump(2) + "\n");

    std::size_t failures = 0;
    for (const auto& s : result.series) {
        for (const auto& p : s.points) {
            failures += p.failures;
        }
    }
    std::cout << csv_text.str();
    std::cerr << "wrote " << csv.string() << " (" << elapsed << " s";
    if (failures) {
        std::cerr << ", " << failures << " failed trials excluded";
    }
    std::cerr << ")\n";
    return 0;
}

struct CommonFlags {
    std::string config;
    std::string profile = "desk";
    std::string sweep = "snr";
    std::string values;
    std::string grid;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::string out;
    unsigned threads = 0;
};

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config, "JSON configuration file");
    app->add_option("--profile", f.profile, "Base profile: desk or full");
    app->add_option("--values", f.values, "Comma-separated sweep values");
    app->add_option("--grid", f.grid, "Angle model: on or off");
    app->add_option("--seed", f.seed, "Master seed");
    app->add_option("--trials", f.trials, "Monte-Carlo trials per point");
    app->add_option("--out", f.out, "Output directory (default $MMW_OUT_DIR or ./results)");
    app->add_option("--threads", f.threads, "Worker threads (0 = all cores)");
}

mmw::ExperimentSpec base_spec(const CommonFlags& f, const std::vector<double>& default_values,
                              ConfigSource& source) {
    LoadedConfig loaded = load_config(f.config, f.profile);
    source = loaded.source;
    mmw::ExperimentSpec spec;
    spec.cfg = loaded.cfg;
    if (!f.grid.empty()) {
        try {
            spec.cfg.grid_mode = mmw::grid_mode_from_string(f.grid);
        } catch (const std::exception&) {
            throw UsageError("--grid must be on or off");
        }
    }
    if (f.seed) {
        spec.cfg.seed = *f.seed;
    }
    spec.trials = f.trials ? *f.trials : loaded.trials.value_or(100);
    if (spec.trials == 0) {
        throw UsageError("--trials must be positive");
    }
    try {
        spec.sweep.var = mmw::sweep_var_from_string(f.sweep);
    } catch (const std::exception& e) {
        throw UsageError(std::string("--sweep: ") + e.what());
    }
    spec.sweep.values = f.values.empty() ? default_values : parse_values(f.values);
    spec.threads = f.threads;
    return spec;
}

std::vector<double> rfchain_values(const mmw::SystemConfig& cfg) {
    std::vector<double> out;
    for (int l = cfg.n_users * cfg.n_streams; l < cfg.n_bs; l *= 2) {
        out.push_back(l);
    }
    out.push_back(cfg.n_bs);
    return out;
}

// Checks every sweep point before anything is written.
// A key present in the config file is reported as path:line.
void validate_spec(const mmw::ExperimentSpec& spec, bool for_estimation,
                   const ConfigSource& source = {}) {
    for (double v : spec.sweep.values) {
        const mmw::SystemConfig c = mmw::apply_sweep(spec.cfg, spec.sweep.var, v);
        try {
            c.validate(for_estimation, spec.sweep.var == mmw::SweepVar::rfchains);
        } catch (const mmw::ConfigError& e) {
            std::ostringstream point;
            point << mmw::to_string(spec.sweep.var) << "=" << v;
            const std::string msg = std::string(e.what()) + " (at " + point.str() + ")";
            if (!source.path.empty() && !e.key().empty() &&
                source.text.find("\"" + e.key() + "\"") != std::string::npos) {
                throw UsageError(source.path + ":" + std::to_string(line_of_key(source.text, e.key())) +
                                 ": " + msg);
            }
            throw UsageError("invalid configuration: " + msg);
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid mmWave multiuser channel estimation and precoding experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", MMW_VERSION);

    CommonFlags est_flags;
    std::string mode = "both";
    auto* est = app.add_subcommand("estimate", "NMSE and CRLB versus SNR or training frames");
    add_common(est, est_flags);
    est->add_option("--sweep", est_flags.sweep, "snr or frames");
    est->add_option("--mode", mode, "ul, dl or both");

    CommonFlags des_flags;
    std::string methods = "digital-mmse,digital-mrc,digital-cb,hd-pg-ey,am-mmse";
    std::string csi = "perfect";
    bool trace = false;
    auto* des = app.add_subcommand("design", "Sum-rate of precoder/combiner designs");
    add_common(des, des_flags);
    des->add_option("--sweep", des_flags.sweep, "snr or rfchains");
    des->add_option("--methods", methods, "Comma-separated method names");
    des->add_option("--csi", csi, "perfect, estimated or both");
    des->add_flag("--trace", trace, "Write per-run factorization traces");

    auto* self = app.add_subcommand("selftest", "Fast invariant checks");

    std::string manifest_path;
    std::string rerun_out;
    auto* rerun = app.add_subcommand("rerun", "Repeat a run from its manifest");
    rerun->add_option("manifest", manifest_path, "Manifest written by a previous run")->required();
    rerun->add_option("--out", rerun_out, "Output directory (default: the manifest's)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }
    const std::vector<std::string> args(argv, argv + argc);

    try {
        if (*self) {
            const auto results = mmw::run_selftest();
            mmw::print_report(std::cout, results);
            for (const auto& r : results) {
                if (!r.passed) {
                    return kExitRuntime;
                }
            }
            return 0;
        }
        if (*est) {
            if (est_flags.sweep != "snr" && est_flags.sweep != "frames") {
                throw UsageError("estimate --sweep must be snr or frames");
            }
            const std::vector<double> defaults = est_flags.sweep == "snr"
                                                     ? std::vector<double>{-15, -10, -5, 0, 5}
                                                     : std::vector<double>{20, 40, 60, 80, 100};
            ConfigSource source;
            mmw::ExperimentSpec spec = base_spec(est_flags, defaults, source);
            std::vector<std::string> names;
            if (mode == "ul" || mode == "both") {
                names.insert(names.end(), {"ul-nmse", "crlb-ul"});
            }
            if (mode == "dl" || mode == "both") {
                names.insert(names.end(), {"dl-nmse", "crlb-dl"});
            }
            if (names.empty()) {
                throw UsageError("--mode must be ul, dl or both");
            }
            for (const auto& n : names) {
                spec.methods.push_back(mmw::parse_method(n, mmw::CsiMode::estimated));
            }
            validate_spec(spec, true, source);
            return execute("estimate", spec, output_dir(est_flags.out), args);
        }
        if (*des) {
            if (des_flags.sweep != "snr" && des_flags.sweep != "rfchains") {
                throw UsageError("design --sweep must be snr or rfchains");
            }
            std::vector<mmw::CsiMode> modes;
            if (csi == "both") {
                modes = {mmw::CsiMode::perfect, mmw::CsiMode::estimated};
            } else {
                try {
                    modes = {mmw::csi_mode_from_string(csi)};
                } catch (const std::exception& e) {
                    throw UsageError(std::string("--csi: ") + e.what());
                }
            }
            ConfigSource source;
            mmw::ExperimentSpec spec = base_spec(des_flags, {}, source);
            if (des_flags.values.empty()) {
                spec.sweep.values = des_flags.sweep == "snr" ? std::vector<double>{-10, -5, 0, 5, 10}
                                                             : rfchain_values(spec.cfg);
            }
            const auto names = split(methods);
            if (names.empty()) {
                throw UsageError("--methods: empty list");
            }
            for (mmw::CsiMode m : modes) {
                for (const auto& n : names) {
                    try {
                        mmw::MethodId id = mmw::parse_method(n, m);
                        if (id.is_estimation()) {
                            throw std::invalid_argument("'" + n + "' is an estimation method; use `mmw estimate`");
                        }
                        spec.methods.push_back(id);
                    } catch (const std::invalid_argument& e) {
                        throw UsageError(e.what());
                    }
                }
            }
            spec.keep_traces = trace;
            validate_spec(spec, std::find(modes.begin(), modes.end(), mmw::CsiMode::estimated) != modes.end(),
                          source);
            return execute("design", spec, output_dir(des_flags.out), args);
        }
        if (*rerun) {
            std::ifstream in(manifest_path);
            if (!in) {
                throw UsageError(manifest_path + ": cannot read manifest");
            }
            json manifest;
            mmw::ExperimentSpec spec;
            try {
                manifest = json::parse(in);
                spec = mmw::spec_from_json(manifest.at("spec"));
            } catch (const std::exception& e) {
                throw UsageError(manifest_path + ": invalid manifest: " + e.what());
            }
            const std::string command = manifest.value("command", "design");
            fs::path out_dir = rerun_out.empty() ? fs::path(manifest.at("outputs").at("dir").get<std::string>())
                                                 : fs::path(rerun_out);
            validate_spec(spec, command == "estimate");
            return execute(command, spec, out_dir, args);
        }
    } catch (const UsageError& e) {
        std::cerr << "mmw: " << e.what() << '\n';
        return kExitUsage;
    } catch (const mmw::ConfigError& e) {
        std::cerr << "mmw: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "mmw: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
