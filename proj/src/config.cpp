// SPDX-License-Identifier: Apache-2.0

#include "mmw/config.hpp"

#include <array>
#include <cmath>
#include <type_traits>

namespace mmw {

std::string to_string(GridMode mode) {
    return mode == GridMode::on_grid ? "on_grid" : "off_grid";
}

GridMode grid_mode_from_string(std::string_view text) {
    if (text == "on_grid" || text == "on") {
        return GridMode::on_grid;
    }
    if (text == "off_grid" || text == "off") {
        return GridMode::off_grid;
    }
    throw ConfigError("grid_mode", "grid_mode must be on_grid or off_grid, got '" +
                                       std::string(text) + "'");
}

double SystemConfig::noise_var() const { return p_tx / (n_users * db_to_linear(snr_db)); }

double SystemConfig::stream_power() const { return p_tx / (n_users * n_streams); }

double SystemConfig::user_power() const { return p_tx / n_users; }

int SystemConfig::max_support() const { return 4 * n_users * n_paths; }

namespace {

void require(bool ok, const char* key, const std::string& message) {
    if (!ok) {
        throw ConfigError(key, std::string(key) + ": " + message);
    }
}

}  // namespace

void SystemConfig::validate(bool for_estimation, bool allow_full_rf) const {
    require(n_bs >= 1, "n_bs", "must be positive");
    require(n_ms >= 1, "n_ms", "must be positive");
    require(n_users >= 1, "n_users", "must be positive");
    require(n_subcarriers >= 1, "n_subcarriers", "must be positive");
    require(n_delay_taps >= 1, "n_delay_taps", "must be positive");
    require(n_paths >= 1, "n_paths", "must be positive");
    require(n_frames >= 1, "n_frames", "must be positive");
    require(n_quant_bits >= 1, "n_quant_bits", "must be positive");
    require(n_streams >= 1, "n_streams", "must be positive");
    require(l_bs >= 1, "l_bs", "must be positive");
    require(l_ms >= 1, "l_ms", "must be positive");
    if (allow_full_rf) {
        require(l_bs <= n_bs, "l_bs", "must not exceed n_bs");
    } else {
        require(l_bs < n_bs, "l_bs", "must be smaller than n_bs");
    }
    require(l_ms < n_ms, "l_ms", "must be smaller than n_ms");
    require(n_streams <= l_ms, "n_streams", "must not exceed l_ms");
    require(n_users * n_streams <= l_bs, "n_streams", "n_users * n_streams must not exceed l_bs");
    require(std::isfinite(snr_db), "snr_db", "must be finite");
    require(p_tx > 0.0 && std::isfinite(p_tx), "p_tx", "must be positive");
    require(rolloff >= 0.0 && rolloff <= 1.0, "rolloff", "must lie in [0, 1]");
    require(g_bs >= n_bs, "g_bs", "must be at least n_bs");
    require(g_ms >= n_ms, "g_ms", "must be at least n_ms");
    if (for_estimation) {
        require(g_bs >= 2 * n_bs, "g_bs", "must be at least 2 * n_bs for estimation");
        require(g_ms >= 2 * n_ms, "g_ms", "must be at least 2 * n_ms for estimation");
    }
    if (grid_mode == GridMode::on_grid) {
        require(n_paths <= g_bs && n_paths <= g_ms, "n_paths",
                "on-grid paths need distinct grid cells per user");
    }
}

SystemConfig desk_profile() { return SystemConfig{}; }

SystemConfig full_profile() {
    SystemConfig cfg;
    cfg.n_bs = 128;
    cfg.n_ms = 16;
    cfg.n_users = 4;
    cfg.l_bs = 8;
    cfg.l_ms = 2;
    cfg.n_streams = 2;
    cfg.n_subcarriers = 32;
    cfg.n_delay_taps = 8;
    cfg.n_paths = 4;
    cfg.g_bs = 256;
    cfg.g_ms = 32;
    cfg.n_quant_bits = 4;
    cfg.n_frames = 100;
    return cfg;
}

void to_json(nlohmann::json& j, const SystemConfig& cfg) {
    j = nlohmann::json{
        {"n_bs", cfg.n_bs},
        {"n_ms", cfg.n_ms},
        {"n_users", cfg.n_users},
        {"l_bs", cfg.l_bs},
        {"l_ms", cfg.l_ms},
        {"n_streams", cfg.n_streams},
        {"n_subcarriers", cfg.n_subcarriers},
        {"n_delay_taps", cfg.n_delay_taps},
        {"n_paths", cfg.n_paths},
        {"g_bs", cfg.g_bs},
        {"g_ms", cfg.g_ms},
        {"n_quant_bits", cfg.n_quant_bits},
        {"n_frames", cfg.n_frames},
        {"snr_db", cfg.snr_db},
        {"p_tx", cfg.p_tx},
        {"rolloff", cfg.rolloff},
        {"grid_mode", to_string(cfg.grid_mode)},
        {"seed", cfg.seed},
    };
}

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
    const auto it = j.find(key);
    if (it == j.end()) {
        return;
    }
    try {
        if constexpr (std::is_integral_v<T>) {
            if (!it->is_number_integer()) {
                throw ConfigError(key, std::string(key) + ": expected an integer");
            }
        } else {
            if (!it->is_number()) {
                throw ConfigError(key, std::string(key) + ": expected a number");
            }
        }
        out = it->get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(key, std::string(key) + ": " + e.what());
    }
}

}  // namespace

void apply_json(const nlohmann::json& j, SystemConfig& cfg) {
    if (!j.is_object()) {
        throw ConfigError("", "configuration must be a JSON object");
    }
    static const std::array<const char*, 18> known = {
        "n_bs",  "n_ms",  "n_users",      "l_bs",     "l_ms",   "n_streams",
        "n_subcarriers", "n_delay_taps", "n_paths", "g_bs", "g_ms", "n_quant_bits",
        "n_frames", "snr_db", "p_tx", "rolloff", "grid_mode", "seed"};
    for (const auto& [key, value] : j.items()) {
        bool found = false;
        for (const char* k : known) {
            found = found || key == k;
        }
        // Experiment-level keys live beside the system parameters.
        if (!found && key != "trials" && key != "profile") {
            throw ConfigError(key, "unknown configuration key '" + key + "'");
        }
    }
    read_field(j, "n_bs", cfg.n_bs);
    read_field(j, "n_ms", cfg.n_ms);
    read_field(j, "n_users", cfg.n_users);
    read_field(j, "l_bs", cfg.l_bs);
    read_field(j, "l_ms", cfg.l_ms);
    read_field(j, "n_streams", cfg.n_streams);
    read_field(j, "n_subcarriers", cfg.n_subcarriers);
    read_field(j, "n_delay_taps", cfg.n_delay_taps);
    read_field(j, "n_paths", cfg.n_paths);
    read_field(j, "g_bs", cfg.g_bs);
    read_field(j, "g_ms", cfg.g_ms);
    read_field(j, "n_quant_bits", cfg.n_quant_bits);
    read_field(j, "n_frames", cfg.n_frames);
    read_field(j, "snr_db", cfg.snr_db);
    read_field(j, "p_tx", cfg.p_tx);
    read_field(j, "rolloff", cfg.rolloff);
    read_field(j, "seed", cfg.seed);
    if (const auto it = j.find("grid_mode"); it != j.end()) {
        if (!it->is_string()) {
            throw ConfigError("grid_mode", "grid_mode: expected a string");
        }
        cfg.grid_mode = grid_mode_from_string(it->get<std::string>());
    }
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t trial, Stream stream) {
    const auto s = static_cast<std::uint64_t>(stream);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                      static_cast<std::uint32_t>(s)};
    return std::mt19937_64(seq);
}

}  // namespace mmw
