// SPDX-License-Identifier: Apache-2.0

#include "mmw/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "mmw/channel.hpp"
#include "mmw/digital.hpp"
#include "mmw/estimation.hpp"
#include "mmw/metrics.hpp"
#include "mmw/training.hpp"

namespace mmw {

std::string to_string(SweepVar v) {
    switch (v) {
        case SweepVar::snr:
            return "snr";
        case SweepVar::frames:
            return "frames";
        case SweepVar::rfchains:
            return "rfchains";
    }
    return "snr";
}

SweepVar sweep_var_from_string(std::string_view text) {
    if (text == "snr") {
        return SweepVar::snr;
    }
    if (text == "frames") {
        return SweepVar::frames;
    }
    if (text == "rfchains") {
        return SweepVar::rfchains;
    }
    throw std::invalid_argument("sweep must be one of snr, frames, rfchains; got '" +
                                std::string(text) + "'");
}

std::string to_string(CsiMode c) { return c == CsiMode::perfect ? "perfect-csi" : "estimated-csi"; }

CsiMode csi_mode_from_string(std::string_view text) {
    if (text == "perfect" || text == "perfect-csi") {
        return CsiMode::perfect;
    }
    if (text == "estimated" || text == "estimated-csi") {
        return CsiMode::estimated;
    }
    throw std::invalid_argument("csi must be perfect or estimated; got '" + std::string(text) + "'");
}

SystemConfig apply_sweep(const SystemConfig& cfg, SweepVar var, double value) {
    SystemConfig out = cfg;
    switch (var) {
        case SweepVar::snr:
            out.snr_db = value;
            break;
        case SweepVar::frames:
            out.n_frames = static_cast<int>(std::lround(value));
            break;
        case SweepVar::rfchains:
            out.l_bs = static_cast<int>(std::lround(value));
            break;
    }
    return out;
}

std::vector<std::string> estimation_method_names() {
    return {"ul-nmse", "dl-nmse", "crlb-ul", "crlb-dl"};
}

std::vector<std::string> design_method_names() {
    return {"digital-mmse", "digital-mrc", "digital-cb", "hd-pg", "hd-pg-ey",
            "eckart-young-bound", "am-mmse", "am-mrc", "am-cb"};
}

namespace {

// Factorized methods accept an optional ":mmse|:mrc|:cb" combiner suffix.
bool accepts_kind_suffix(std::string_view base) {
    return base == "hd-pg" || base == "hd-pg-ey" || base == "eckart-young-bound";
}

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
        out += (out.empty() ? "" : ", ") + s;
    }
    return out;
}

}  // namespace

bool MethodId::is_estimation() const {
    const auto names = estimation_method_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

std::string MethodId::label() const {
    return is_estimation() ? name : name + "/" + to_string(csi);
}

MethodId parse_method(std::string_view text, CsiMode csi) {
    const std::string s(text);
    const auto colon = s.find(':');
    const std::string base = s.substr(0, colon);
    const auto est = estimation_method_names();
    const auto des = design_method_names();
    bool ok = std::find(est.begin(), est.end(), base) != est.end() ||
              std::find(des.begin(), des.end(), base) != des.end();
    if (ok && colon != std::string::npos) {
        const std::string kind = s.substr(colon + 1);
        ok = accepts_kind_suffix(base) && (kind == "mmse" || kind == "mrc" || kind == "cb");
    }
    if (!ok) {
        throw std::invalid_argument("unknown method '" + s + "'; valid methods: " + join(est) +
                                    ", " + join(des) +
                                    " (hd-pg, hd-pg-ey and eckart-young-bound accept :mmse, "
                                    ":mrc or :cb)");
    }
    return MethodId{s, csi};
}

const Series& ExperimentResult::find(const std::string& label) const {
    for (const Series& s : series) {
        if (s.method.label() == label) {
            return s;
        }
    }
    throw std::out_of_range("no series labelled '" + label + "'");
}

namespace {

bool is_nmse_method(const std::string& name) {
    return name == "ul-nmse" || name == "dl-nmse" || name == "crlb-ul" || name == "crlb-dl";
}

// Lazily computed artifacts shared by all methods of one (point, trial).
struct TrialState {
    const SystemConfig& cfg;
    std::size_t trial;
    const ExperimentSpec& spec;
    double noise_var;
    ChannelRealization channel;
    std::optional<TrainingEnsemble> ul_ensemble;
    std::optional<LinkEstimate> ul_estimate;
    std::optional<std::vector<TrainingEnsemble>> dl_ensembles;

    TrialState(const SystemConfig& c, std::size_t t, const ExperimentSpec& s)
        : cfg(c), trial(t), spec(s), noise_var(c.noise_var()) {
        auto rng = make_rng(cfg.seed, trial, Stream::channel);
        channel = generate_channel(cfg, rng);
    }

    const TrainingEnsemble& uplink_training() {
        if (!ul_ensemble) {
            auto rng = make_rng(cfg.seed, trial, Stream::training);
            ul_ensemble = generate_training(cfg, rng);
        }
        return *ul_ensemble;
    }

    const LinkEstimate& uplink_estimate() {
        if (!ul_estimate) {
            const auto& ens = uplink_training();
            auto rng = make_rng(cfg.seed, trial, Stream::noise);
            ul_estimate = estimate_uplink(channel, cfg, ens, noise_var, rng);
        }
        return *ul_estimate;
    }

    const std::vector<TrainingEnsemble>& downlink_training() {
        if (!dl_ensembles) {
            auto rng = make_rng(cfg.seed, trial, Stream::downlink_training);
            dl_ensembles = generate_downlink_training(cfg, rng);
        }
        return *dl_ensembles;
    }
};

MatrixGrid rescale_blocks(MatrixGrid blocks, double power) {
    for (auto& user : blocks) {
        for (CMatrix& b : user) {
            const double n = b.norm();
            if (n > 0.0) {
                b *= std::sqrt(power) / n;
            }
        }
    }
    return blocks;
}

struct DesignOutput {
    DownlinkFilters dl;
    std::vector<std::pair<std::string, FactorizationTrace>> traces;
};

DesignOutput design_served(const std::string& name, const MatrixGrid& h, const SystemConfig& cfg,
                           double noise_var, const ExperimentSpec& spec, std::size_t trial) {
    const auto colon = name.find(':');
    const std::string base = name.substr(0, colon);
    DesignOutput out;
    if (base.rfind("digital-", 0) == 0) {
        const auto kind = combiner_kind_from_string(base.substr(8));
        const DigitalFilterSet f = design_digital(h, cfg, kind, noise_var);
        out.dl = dl_filters_from_ul(f.ul_precoders, f.ul_combiners, cfg);
        return out;
    }
    if (base.rfind("am-", 0) == 0) {
        const auto kind = combiner_kind_from_string(base.substr(3));
        const auto pre = am_precoders(h, cfg, noise_var);
        MatrixGrid t(h.size());
        for (std::size_t u = 0; u < h.size(); ++u) {
            t[u] = pre[u].product().front();
        }
        const AmResult comb = am_combiner(h, t, cfg.l_bs, kind, noise_var, cfg.stream_power(), spec.am);
        out.dl = dl_filters_from_ul(t, comb.filter.product(), cfg);
        return out;
    }
    const auto kind = colon == std::string::npos ? CombinerKind::mmse
                                                 : combiner_kind_from_string(name.substr(colon + 1));
    const MatrixGrid t_digital = ul_precoders(h, cfg, noise_var);
    MatrixGrid t(h.size());
    if (base == "eckart-young-bound") {
        for (std::size_t u = 0; u < h.size(); ++u) {
            const EckartYoung ey = eckart_young(hstack({t_digital[u]}), cfg.l_ms);
            const MatrixGrid split = split_columns(ey.approx, {cfg.n_streams}, t_digital[u].size());
            t[u] = rescale_blocks(split, cfg.user_power()).front();
        }
        const MatrixGrid f = design_combiners(h, t, kind, noise_var);
        const EckartYoung ey = eckart_young(hstack(f), cfg.l_bs);
        const std::vector<int> cols(h.size(), cfg.n_streams);
        out.dl = dl_filters_from_ul(t, split_columns(ey.approx, cols, h.front().size()), cfg);
        return out;
    }
    // hd-pg and hd-pg-ey
    HdPgOptions opt = spec.hd_pg;
    opt.init = base == "hd-pg-ey" ? HdPgInit::eckart_young : HdPgInit::random;
    opt.quant_bits = cfg.n_quant_bits;
    auto rng = make_rng(cfg.seed, trial, Stream::design);
    for (std::size_t u = 0; u < h.size(); ++u) {
        const HdPgResult r = hd_pg(budget_target({t_digital[u]}, cfg.user_power()), cfg.l_ms,
                                   FilterSide::ms_precoder, opt, rng);
        t[u] = r.filter.product().front();
        out.traces.emplace_back("precoder-u" + std::to_string(u), r.trace);
    }
    const MatrixGrid f = design_combiners(h, t, kind, noise_var);
    const HdPgResult r = hd_pg(budget_target(f, cfg.stream_power()), cfg.l_bs,
                               FilterSide::bs_combiner, opt, rng);
    out.traces.emplace_back("combiner", r.trace);
    out.dl = dl_filters_from_ul(t, r.filter.product(), cfg);
    return out;
}

// A user whose estimate is identically zero (no atom selected) cannot be
// served: its DL filters are zero and it contributes no rate. The others are
// designed as usual with unchanged per-user power.
DesignOutput design(const std::string& name, const MatrixGrid& h, const SystemConfig& cfg,
                    double noise_var, const ExperimentSpec& spec, std::size_t trial) {
    std::vector<std::size_t> served;
    for (std::size_t u = 0; u < h.size(); ++u) {
        double energy = 0.0;
        for (const CMatrix& b : h[u]) {
            energy += b.squaredNorm();
        }
        if (energy > 0.0) {
            served.push_back(u);
        }
    }
    if (served.size() == h.size()) {
        return design_served(name, h, cfg, noise_var, spec, trial);
    }
    const std::size_t n_sc = h.front().size();
    const auto n_ms = h.front().front().rows();
    const auto n_bs = h.front().front().cols();
    DesignOutput out;
    out.dl.precoders.assign(h.size(), std::vector<CMatrix>(n_sc, CMatrix::Zero(n_bs, cfg.n_streams)));
    out.dl.combiners.assign(h.size(), std::vector<CMatrix>(n_sc, CMatrix::Zero(n_ms, cfg.n_streams)));
    if (served.empty()) {
        return out;
    }
    MatrixGrid sub;
    for (std::size_t u : served) {
        sub.push_back(h[u]);
    }
    DesignOutput part = design_served(name, sub, cfg, noise_var, spec, trial);
    for (std::size_t i = 0; i < served.size(); ++i) {
        out.dl.precoders[served[i]] = std::move(part.dl.precoders[i]);
        out.dl.combiners[served[i]] = std::move(part.dl.combiners[i]);
    }
    for (auto& [role, tr] : part.traces) {
        if (role.rfind("precoder-u", 0) == 0) {
            role = "precoder-u" + std::to_string(served[std::stoul(role.substr(10))]);
        }
        out.traces.emplace_back(std::move(role), std::move(tr));
    }
    return out;
}

double evaluate(const MethodId& m, TrialState& st, std::size_t point,
                std::vector<TraceRecord>* traces) {
    const std::string& name = m.name;
    if (name == "ul-nmse") {
        return st.uplink_estimate().nmse;
    }
    if (name == "crlb-ul") {
        return crlb_nmse(st.channel, st.uplink_training(), st.noise_var);
    }
    if (name == "dl-nmse") {
        auto rng = make_rng(st.cfg.seed, st.trial, Stream::downlink_noise);
        return simulate_downlink_training(st.channel, st.cfg, st.downlink_training(), st.noise_var, rng)
            .nmse;
    }
    if (name == "crlb-dl") {
        return crlb_nmse_downlink(st.channel, st.downlink_training(), st.noise_var);
    }
    const MatrixGrid& h = m.csi == CsiMode::perfect ? st.channel.freq : st.uplink_estimate().channels;
    DesignOutput d = design(name, h, st.cfg, st.noise_var, st.spec, st.trial);
    if (traces) {
        for (auto& [role, tr] : d.traces) {
            traces->push_back({m.label(), point, st.trial, role, std::move(tr)});
        }
    }
    return sum_rate(st.channel.freq, d.dl.precoders, d.dl.combiners, st.noise_var);
}

PointStats summarize(const std::vector<double>& samples, bool in_db) {
    PointStats p;
    double sum = 0.0;
    for (double v : samples) {
        if (std::isnan(v)) {
            ++p.failures;
        } else {
            sum += v;
            ++p.trials;
        }
    }
    if (p.trials == 0) {
        p.mean = std::numeric_limits<double>::quiet_NaN();
        p.stderr_ = std::numeric_limits<double>::quiet_NaN();
        return p;
    }
    const double mean = sum / static_cast<double>(p.trials);
    double ss = 0.0;
    for (double v : samples) {
        if (!std::isnan(v)) {
            ss += (v - mean) * (v - mean);
        }
    }
    const double se = p.trials > 1 ? std::sqrt(ss / static_cast<double>(p.trials - 1) /
                                               static_cast<double>(p.trials))
                                   : 0.0;
    if (in_db) {
        p.mean = linear_to_db(mean);
        p.stderr_ = mean > 0.0 ? 10.0 / std::log(10.0) * se / mean : 0.0;
    } else {
        p.mean = mean;
        p.stderr_ = se;
    }
    return p;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    if (spec.methods.empty()) {
        throw std::invalid_argument("run_experiment: no methods");
    }
    if (spec.sweep.values.empty()) {
        throw std::invalid_argument("run_experiment: empty sweep");
    }
    if (spec.trials == 0) {
        throw ConfigError("trials", "trials: must be positive");
    }
    bool needs_estimation_grid = false;
    for (const MethodId& m : spec.methods) {
        needs_estimation_grid = needs_estimation_grid || m.is_estimation() || m.csi == CsiMode::estimated;
    }
    std::vector<SystemConfig> points;
    for (double v : spec.sweep.values) {
        points.push_back(apply_sweep(spec.cfg, spec.sweep.var, v));
        points.back().validate(needs_estimation_grid, spec.sweep.var == SweepVar::rfchains);
    }

    const std::size_t n_points = points.size();
    const std::size_t n_methods = spec.methods.size();
    const std::size_t n_jobs = n_points * spec.trials;
    // values[job][method]
    std::vector<std::vector<double>> values(n_jobs, std::vector<double>(n_methods, 0.0));
    std::vector<std::vector<TraceRecord>> job_traces(n_jobs);
    // errors[job][method], empty when the cell succeeded.
    std::vector<std::vector<std::string>> errors(n_jobs, std::vector<std::string>(n_methods));

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t job = next++; job < n_jobs; job = next++) {
            const std::size_t point = job / spec.trials;
            const std::size_t trial = job % spec.trials;
            std::optional<TrialState> st;
            try {
                st.emplace(points[point], trial, spec);
            } catch (const std::exception& e) {
                std::fill(values[job].begin(), values[job].end(),
                          std::numeric_limits<double>::quiet_NaN());
                std::fill(errors[job].begin(), errors[job].end(), e.what());
                continue;
            }
            for (std::size_t mi = 0; mi < n_methods; ++mi) {
                try {
                    values[job][mi] = evaluate(spec.methods[mi], *st, point,
                                               spec.keep_traces ? &job_traces[job] : nullptr);
                    if (!std::isfinite(values[job][mi])) {
                        values[job][mi] = std::numeric_limits<double>::quiet_NaN();
                        errors[job][mi] = "non-finite result";
                    }
                } catch (const std::exception& e) {
                    values[job][mi] = std::numeric_limits<double>::quiet_NaN();
                    errors[job][mi] = e.what();
                }
            }
        }
    };
    unsigned n_threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, n_jobs));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n_threads; ++i) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }

    ExperimentResult result;
    result.spec = spec;
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
        Series s;
        s.method = spec.methods[mi];
        const bool in_db = is_nmse_method(s.method.name);
        for (std::size_t p = 0; p < n_points; ++p) {
            std::vector<double> samples(spec.trials);
            for (std::size_t t = 0; t < spec.trials; ++t) {
                samples[t] = values[p * spec.trials + t][mi];
                const std::string& err = errors[p * spec.trials + t][mi];
                if (!err.empty()) {
                    s.errors.push_back({p, t, err});
                }
            }
            s.points.push_back(summarize(samples, in_db));
            s.samples.push_back(std::move(samples));
        }
        result.series.push_back(std::move(s));
    }
    for (auto& jt : job_traces) {
        for (auto& tr : jt) {
            result.traces.push_back(std::move(tr));
        }
    }
    return result;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

void write_csv(std::ostream& os, const ExperimentResult& result) {
    os << "method,sweep_var,sweep_value,mean,stderr,trials\n";
    const std::string var = to_string(result.spec.sweep.var);
    for (const Series& s : result.series) {
        for (std::size_t p = 0; p < s.points.size(); ++p) {
            const PointStats& st = s.points[p];
            os << s.method.label() << ',' << var << ',' << fmt(result.spec.sweep.values[p]) << ','
               << fmt(st.mean) << ',' << fmt(st.stderr_) << ',' << st.trials << '\n';
        }
    }
}

nlohmann::json to_json(const ExperimentSpec& spec) {
    nlohmann::json methods = nlohmann::json::array();
    for (const MethodId& m : spec.methods) {
        methods.push_back({{"name", m.name}, {"csi", to_string(m.csi)}});
    }
    nlohmann::json cfg;
    to_json(cfg, spec.cfg);
    return {{"config", cfg},
            {"sweep", {{"var", to_string(spec.sweep.var)}, {"values", spec.sweep.values}}},
            {"methods", methods},
            {"trials", spec.trials},
            {"keep_traces", spec.keep_traces},
            {"hd_pg",
             {{"s0", spec.hd_pg.s0},
              {"relative_step", spec.hd_pg.relative_step},
              {"delta_rel", spec.hd_pg.delta_rel},
              {"max_iter", spec.hd_pg.max_iter},
              {"step_floor", spec.hd_pg.step_floor}}},
            {"am", {{"max_iter", spec.am.max_iter}, {"tol", spec.am.tol}}}};
}

ExperimentSpec spec_from_json(const nlohmann::json& j) {
    ExperimentSpec spec;
    apply_json(j.at("config"), spec.cfg);
    spec.sweep.var = sweep_var_from_string(j.at("sweep").at("var").get<std::string>());
    spec.sweep.values = j.at("sweep").at("values").get<std::vector<double>>();
    for (const auto& m : j.at("methods")) {
        spec.methods.push_back(
            parse_method(m.at("name").get<std::string>(), csi_mode_from_string(m.at("csi").get<std::string>())));
    }
    spec.trials = j.at("trials").get<std::size_t>();
    spec.keep_traces = j.value("keep_traces", false);
    if (const auto it = j.find("hd_pg"); it != j.end()) {
        spec.hd_pg.s0 = it->value("s0", spec.hd_pg.s0);
        spec.hd_pg.relative_step = it->value("relative_step", spec.hd_pg.relative_step);
        spec.hd_pg.delta_rel = it->value("delta_rel", spec.hd_pg.delta_rel);
        spec.hd_pg.max_iter = it->value("max_iter", spec.hd_pg.max_iter);
        spec.hd_pg.step_floor = it->value("step_floor", spec.hd_pg.step_floor);
    }
    if (const auto it = j.find("am"); it != j.end()) {
        spec.am.max_iter = it->value("max_iter", spec.am.max_iter);
        spec.am.tol = it->value("tol", spec.am.tol);
    }
    return spec;
}

nlohmann::json to_json(const ExperimentResult& result) {
    nlohmann::json rows = nlohmann::json::array();
    const std::string var = to_string(result.spec.sweep.var);
    for (const Series& s : result.series) {
        for (std::size_t p = 0; p < s.points.size(); ++p) {
            const PointStats& st = s.points[p];
            rows.push_back({{"method", s.method.label()},
                            {"sweep_var", var},
                            {"sweep_value", result.spec.sweep.values[p]},
                            {"mean", std::isfinite(st.mean) ? nlohmann::json(st.mean) : nlohmann::json()},
                            {"stderr", std::isfinite(st.stderr_) ? nlohmann::json(st.stderr_) : nlohmann::json()},
                            {"trials", st.trials},
                            {"failures", st.failures},
                            {"unit", is_nmse_method(s.method.name) ? "dB" : "bits/s/Hz"}});
        }
    }
    nlohmann::json errors = nlohmann::json::array();
    for (const Series& s : result.series) {
        for (const TrialError& e : s.errors) {
            errors.push_back({{"method", s.method.label()},
                              {"sweep_value", result.spec.sweep.values[e.point]},
                              {"trial", e.trial},
                              {"message", e.message}});
        }
    }
    return {{"spec", to_json(result.spec)}, {"results", rows}, {"errors", errors}};
}

}  // namespace mmw
