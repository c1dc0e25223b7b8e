// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <json.hpp>

#include "mmw/config.hpp"

using namespace mmw;

TEST(Config, DeskDefaultsValidate) {
    const SystemConfig cfg = desk_profile();
    EXPECT_EQ(cfg.n_bs, 32);
    EXPECT_EQ(cfg.l_bs, 4);
    EXPECT_EQ(cfg.n_frames, 60);
    EXPECT_NO_THROW(cfg.validate(true));
    EXPECT_NO_THROW(full_profile().validate(true));
}

TEST(Config, NoiseVarFollowsSnrDefinition) {
    SystemConfig cfg;
    cfg.snr_db = 10.0;
    cfg.p_tx = 2.0;
    EXPECT_NEAR(cfg.noise_var(), 2.0 / (cfg.n_users * 10.0), 1e-15);
    EXPECT_NEAR(cfg.stream_power(), 2.0 / (cfg.n_users * cfg.n_streams), 1e-15);
}

TEST(Config, RejectsFullRfUnlessAllowed) {
    SystemConfig cfg;
    cfg.l_bs = cfg.n_bs;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_NO_THROW(cfg.validate(false, true));
}

TEST(Config, ReportsOffendingKey) {
    SystemConfig cfg;
    cfg.n_streams = 3;
    try {
        cfg.validate();
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "n_streams");
    }
}

TEST(Config, EstimationNeedsOversampledGrids) {
    SystemConfig cfg;
    cfg.g_bs = cfg.n_bs;
    EXPECT_NO_THROW(cfg.validate(false));
    EXPECT_THROW(cfg.validate(true), ConfigError);
}

TEST(Config, JsonRoundTrip) {
    SystemConfig cfg;
    cfg.snr_db = -7.5;
    cfg.grid_mode = GridMode::on_grid;
    cfg.seed = 0xFFFFFFFFFFFFull;
    nlohmann::json j;
    to_json(j, cfg);
    SystemConfig back;
    apply_json(j, back);
    EXPECT_EQ(back, cfg);
}

TEST(Config, UnknownKeyAndWrongTypeRejected) {
    SystemConfig cfg;
    EXPECT_THROW(apply_json(nlohmann::json{{"n_bss", 4}}, cfg), ConfigError);
    EXPECT_THROW(apply_json(nlohmann::json{{"n_bs", "many"}}, cfg), ConfigError);
    EXPECT_THROW(apply_json(nlohmann::json{{"grid_mode", "diagonal"}}, cfg), ConfigError);
    EXPECT_THROW(apply_json(nlohmann::json::array(), cfg), ConfigError);
}

TEST(Rng, StreamsAreDeterministicAndDistinct) {
    auto a = make_rng(7, 3, Stream::channel);
    auto b = make_rng(7, 3, Stream::channel);
    auto c = make_rng(7, 3, Stream::noise);
    auto d = make_rng(7, 4, Stream::channel);
    const auto va = a();
    EXPECT_EQ(va, b());
    EXPECT_NE(va, c());
    EXPECT_NE(va, d());
}
