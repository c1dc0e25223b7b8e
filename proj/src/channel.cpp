// SPDX-License-Identifier: Apache-2.0

#include "mmw/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace mmw {

using std::numbers::pi;

CVector steering_vector(int n_antennas, double angle) {
    if (n_antennas < 1) {
        throw std::invalid_argument("steering_vector: n_antennas must be positive");
    }
    const double omega = pi * std::sin(angle);
    const double norm = 1.0 / std::sqrt(static_cast<double>(n_antennas));
    CVector a(n_antennas);
    for (int i = 0; i < n_antennas; ++i) {
        a(i) = std::polar(norm, omega * i);
    }
    return a;
}

double pulse_shape(double t, double rolloff, double t_s) {
    const double x = t / t_s;
    if (x == 0.0) {
        return 1.0;
    }
    const double sinc = std::sin(pi * x) / (pi * x);
    if (rolloff == 0.0) {
        return sinc;
    }
    const double denom = 1.0 - 4.0 * rolloff * rolloff * x * x;
    if (std::abs(denom) < 1e-12) {
        const double y = 1.0 / (2.0 * rolloff);
        return (pi / 4.0) * std::sin(pi * y) / (pi * y);
    }
    return sinc * std::cos(pi * rolloff * x) / denom;
}

double grid_spatial_frequency(int g, int grid_size) {
    return -1.0 + 2.0 * static_cast<double>(g) / static_cast<double>(grid_size);
}

double grid_angle(int g, int grid_size) { return std::asin(grid_spatial_frequency(g, grid_size)); }

CMatrix build_dictionary(int n_antennas, int grid_size) {
    if (grid_size < n_antennas) {
        throw std::invalid_argument("build_dictionary: grid_size must be >= n_antennas");
    }
    CMatrix dict(n_antennas, grid_size);
    for (int g = 0; g < grid_size; ++g) {
        dict.col(g) = steering_vector(n_antennas, grid_angle(g, grid_size));
    }
    return dict;
}

double path_gain_scale(const SystemConfig& cfg) {
    return std::sqrt(static_cast<double>(cfg.n_bs) * cfg.n_ms / cfg.n_paths);
}

namespace {

std::vector<int> draw_distinct(int count, int range, std::mt19937_64& rng) {
    std::vector<int> pool(range);
    std::iota(pool.begin(), pool.end(), 0);
    // Partial Fisher-Yates.
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> pick(i, range - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(count);
    return pool;
}

}  // namespace

ChannelRealization generate_channel(const SystemConfig& cfg, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    std::uniform_real_distribution<double> angle(-pi / 2.0, pi / 2.0);
    std::uniform_real_distribution<double> delay(0.0, cfg.n_delay_taps - 1.0);
    std::uniform_int_distribution<int> tap(0, cfg.n_delay_taps - 1);

    std::vector<PathSet> users(cfg.n_users);
    for (auto& set : users) {
        set.paths.resize(cfg.n_paths);
        if (cfg.grid_mode == GridMode::on_grid) {
            const auto aoa_idx = draw_distinct(cfg.n_paths, cfg.g_ms, rng);
            const auto aod_idx = draw_distinct(cfg.n_paths, cfg.g_bs, rng);
            for (int p = 0; p < cfg.n_paths; ++p) {
                Path& path = set.paths[p];
                path.aoa_grid = aoa_idx[p];
                path.aod_grid = aod_idx[p];
                path.aoa = grid_angle(path.aoa_grid, cfg.g_ms);
                path.aod = grid_angle(path.aod_grid, cfg.g_bs);
                path.delay = static_cast<double>(tap(rng));
            }
        } else {
            for (auto& path : set.paths) {
                path.aoa = angle(rng);
                path.aod = angle(rng);
                path.delay = delay(rng);
            }
        }
        for (auto& path : set.paths) {
            const double re = normal(rng);
            const double im = normal(rng);
            path.gain = {re, im};
        }
    }
    return channel_from_paths(cfg, std::move(users));
}

ChannelRealization channel_from_paths(const SystemConfig& cfg, std::vector<PathSet> users) {
    ChannelRealization ch;
    const double scale = path_gain_scale(cfg);
    const int n_taps = cfg.n_delay_taps;
    const int n_sc = cfg.n_subcarriers;
    ch.taps.assign(users.size(), {});
    ch.freq.assign(users.size(), {});
    for (std::size_t u = 0; u < users.size(); ++u) {
        auto& taps = ch.taps[u];
        taps.assign(n_taps, CMatrix::Zero(cfg.n_ms, cfg.n_bs));
        for (const Path& path : users[u].paths) {
            const CMatrix outer = steering_vector(cfg.n_ms, path.aoa) *
                                  steering_vector(cfg.n_bs, path.aod).adjoint();
            for (int d = 0; d < n_taps; ++d) {
                const double p = pulse_shape(d - path.delay, cfg.rolloff);
                if (p != 0.0) {
                    taps[d] += (scale * p) * path.gain * outer;
                }
            }
        }
        auto& freq = ch.freq[u];
        freq.assign(n_sc, CMatrix::Zero(cfg.n_ms, cfg.n_bs));
        for (int k = 0; k < n_sc; ++k) {
            for (int d = 0; d < n_taps; ++d) {
                const double arg = -2.0 * pi * static_cast<double>(k) * d / n_sc;
                freq[k] += std::polar(1.0, arg) * taps[d];
            }
        }
    }
    ch.users = std::move(users);
    return ch;
}

std::vector<std::size_t> virtual_support(const PathSet& paths, const SystemConfig& cfg) {
    if (cfg.grid_mode != GridMode::on_grid) {
        throw std::invalid_argument("virtual_support: only defined for on-grid channels");
    }
    std::vector<std::size_t> idx;
    idx.reserve(paths.paths.size());
    for (const Path& p : paths.paths) {
        if (p.aoa_grid < 0 || p.aod_grid < 0) {
            throw std::invalid_argument("virtual_support: path has no grid indices");
        }
        idx.push_back(static_cast<std::size_t>(p.aoa_grid) * cfg.g_bs + p.aod_grid);
    }
    return idx;
}

std::vector<std::size_t> multiuser_virtual_support(const ChannelRealization& ch,
                                                   const SystemConfig& cfg) {
    std::vector<std::size_t> all;
    const std::size_t block = static_cast<std::size_t>(cfg.g_bs) * cfg.g_ms;
    for (std::size_t u = 0; u < ch.users.size(); ++u) {
        for (std::size_t i : virtual_support(ch.users[u], cfg)) {
            all.push_back(u * block + i);
        }
    }
    std::sort(all.begin(), all.end());
    return all;
}

nlohmann::json matrix_to_json(const CMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            row.push_back({m(i, j).real(), m(i, j).imag()});
        }
        rows.push_back(std::move(row));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

CMatrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows) {
        throw std::invalid_argument("matrix_from_json: row count mismatch");
    }
    CMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = data[i];
        if (static_cast<Eigen::Index>(row.size()) != cols) {
            throw std::invalid_argument("matrix_from_json: column count mismatch");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(i, c) = {row[c].at(0).get<double>(), row[c].at(1).get<double>()};
        }
    }
    require_finite(m, "matrix_from_json");
    return m;
}

namespace {

nlohmann::json grid_to_json(const MatrixGrid& grid) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& user : grid) {
        nlohmann::json mats = nlohmann::json::array();
        for (const auto& m : user) {
            mats.push_back(matrix_to_json(m));
        }
        out.push_back(std::move(mats));
    }
    return out;
}

MatrixGrid grid_from_json(const nlohmann::json& j) {
    MatrixGrid grid;
    for (const auto& user : j) {
        std::vector<CMatrix> mats;
        for (const auto& m : user) {
            mats.push_back(matrix_from_json(m));
        }
        grid.push_back(std::move(mats));
    }
    return grid;
}

}  // namespace

void to_json(nlohmann::json& j, const ChannelRealization& ch) {
    nlohmann::json users = nlohmann::json::array();
    for (const auto& set : ch.users) {
        nlohmann::json paths = nlohmann::json::array();
        for (const Path& p : set.paths) {
            paths.push_back({{"gain", {p.gain.real(), p.gain.imag()}},
                             {"delay", p.delay},
                             {"aoa", p.aoa},
                             {"aod", p.aod},
                             {"aoa_grid", p.aoa_grid},
                             {"aod_grid", p.aod_grid}});
        }
        users.push_back({{"paths", std::move(paths)}});
    }
    j = {{"users", std::move(users)}, {"taps", grid_to_json(ch.taps)},
         {"freq", grid_to_json(ch.freq)}};
}

void from_json(const nlohmann::json& j, ChannelRealization& ch) {
    ch.users.clear();
    for (const auto& user : j.at("users")) {
        PathSet set;
        for (const auto& p : user.at("paths")) {
            Path path;
            path.gain = {p.at("gain").at(0).get<double>(), p.at("gain").at(1).get<double>()};
            path.delay = p.at("delay").get<double>();
            path.aoa = p.at("aoa").get<double>();
            path.aod = p.at("aod").get<double>();
            path.aoa_grid = p.value("aoa_grid", -1);
            path.aod_grid = p.value("aod_grid", -1);
            set.paths.push_back(path);
        }
        ch.users.push_back(std::move(set));
    }
    ch.taps = grid_from_json(j.at("taps"));
    ch.freq = grid_from_json(j.at("freq"));
}

}  // namespace mmw
