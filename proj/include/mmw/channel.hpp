// SPDX-License-Identifier: Apache-2.0
//
// Multiuser frequency-selective geometric channels on half-wavelength ULAs,
// and the quantized-angle dictionaries used for sparse recovery.
//
// Orientation convention: freq[u][k] is the downlink matrix H_u[k]
// (n_ms x n_bs); the uplink channel is its Hermitian transpose.

#ifndef MMW_CHANNEL_HPP
#define MMW_CHANNEL_HPP

#include <cstddef>
#include <random>
#include <vector>

#include <json.hpp>

#include "mmw/config.hpp"
#include "mmw/linalg.hpp"

namespace mmw {

struct Path {
    cdouble gain{1.0, 0.0};
    double delay = 0.0;  // in units of T_s
    double aoa = 0.0;    // at the MS, radians
    double aod = 0.0;    // at the BS, radians
    int aoa_grid = -1;   // MS grid index when drawn on the grid
    int aod_grid = -1;   // BS grid index when drawn on the grid
};

struct PathSet {
    std::vector<Path> paths;
};

struct ChannelRealization {
    std::vector<PathSet> users;
    MatrixGrid taps;  // [u][d], n_ms x n_bs
    MatrixGrid freq;  // [u][k], n_ms x n_bs

    std::size_t n_users() const { return freq.size(); }
    std::size_t n_subcarriers() const { return freq.empty() ? 0 : freq.front().size(); }
    CMatrix uplink(std::size_t u, std::size_t k) const { return freq[u][k].adjoint(); }
};

/// Unit-norm ULA response, entry i = exp(j*pi*i*sin(angle)) / sqrt(n).
CVector steering_vector(int n_antennas, double angle);

/// Raised-cosine pulse with sampling period t_s.
double pulse_shape(double t, double rolloff, double t_s = 1.0);

/// Spatial frequency of grid point g: -1 + 2g/G, uniform over [-1, 1).
double grid_spatial_frequency(int g, int grid_size);
double grid_angle(int g, int grid_size);

/// n_antennas x grid_size matrix of steering vectors at the grid angles.
CMatrix build_dictionary(int n_antennas, int grid_size);

/// sqrt(n_bs * n_ms / n_paths).
double path_gain_scale(const SystemConfig& cfg);

ChannelRealization generate_channel(const SystemConfig& cfg, std::mt19937_64& rng);

/// Builds delay taps and frequency responses for given paths.
ChannelRealization channel_from_paths(const SystemConfig& cfg, std::vector<PathSet> users);

/// Flat indices into vec(Delta_u) (G_bs x G_MS, column-major), one per path:
/// aoa_grid * g_bs + aod_grid. Throws for off-grid paths.
std::vector<std::size_t> virtual_support(const PathSet& paths, const SystemConfig& cfg);

/// Support over the stacked multiuser dictionary (user blocks of g_bs*g_ms
/// columns), sorted ascending.
std::vector<std::size_t> multiuser_virtual_support(const ChannelRealization& ch,
                                                   const SystemConfig& cfg);

nlohmann::json matrix_to_json(const CMatrix& m);
CMatrix matrix_from_json(const nlohmann::json& j);

void to_json(nlohmann::json& j, const ChannelRealization& ch);
void from_json(const nlohmann::json& j, ChannelRealization& ch);

}  // namespace mmw

#endif  // MMW_CHANNEL_HPP
