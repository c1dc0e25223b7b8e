// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration and seeded random substreams.

#ifndef MMW_CONFIG_HPP
#define MMW_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace mmw {

enum class GridMode { on_grid, off_grid };

std::string to_string(GridMode mode);
GridMode grid_mode_from_string(std::string_view text);

/// Raised for configuration values that break a structural invariant.
/// `key` names the offending field so callers can point at it.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string key, const std::string& message)
        : std::invalid_argument(message), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Every dimensional and statistical parameter of one experiment.
/// Defaults are the desk-scale profile.
struct SystemConfig {
    int n_bs = 32;            // BS antennas
    int n_ms = 8;             // antennas per MS
    int n_users = 2;
    int l_bs = 4;             // BS RF chains
    int l_ms = 2;             // RF chains per MS
    int n_streams = 2;        // streams per user
    int n_subcarriers = 16;
    int n_delay_taps = 8;
    int n_paths = 2;          // paths per user
    int g_bs = 64;            // BS dictionary grid
    int g_ms = 16;            // MS dictionary grid
    int n_quant_bits = 4;     // phase-shifter resolution
    int n_frames = 60;        // training frames M
    double snr_db = 0.0;
    double p_tx = 1.0;
    double rolloff = 0.8;
    GridMode grid_mode = GridMode::off_grid;
    std::uint64_t seed = 1;

    /// sigma^2 = P_tx / (U * SNR).
    double noise_var() const;
    /// Per-(user, subcarrier) transmit budget P_tx / (U * N_s).
    double stream_power() const;
    /// Per-user budget P_tx / U.
    double user_power() const;
    /// 4 * sum of per-user path counts.
    int max_support() const;

    /// Throws ConfigError naming the offending key. `allow_full_rf` admits
    /// l_bs == n_bs (the RF-chain sweep endpoint).
    void validate(bool for_estimation = false, bool allow_full_rf = false) const;

    bool operator==(const SystemConfig&) const = default;
};

SystemConfig desk_profile();
SystemConfig full_profile();

void to_json(nlohmann::json& j, const SystemConfig& cfg);
/// Missing keys keep the value already in `cfg`; unknown keys throw ConfigError.
void apply_json(const nlohmann::json& j, SystemConfig& cfg);

/// Named random substreams; a trial's draws for one stream never depend on
/// how many draws another stream made.
enum class Stream : std::uint64_t {
    channel = 1,
    training = 2,
    noise = 3,
    design = 4,
    downlink_training = 5,
    downlink_noise = 6,
};

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t trial, Stream stream);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

}  // namespace mmw

#endif  // MMW_CONFIG_HPP
