#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "frameproj/data.hpp"
#include "frameproj/frames.hpp"
#include "frameproj/probe.hpp"
#include "frameproj/trainer.hpp"

namespace frameproj {

// Run configuration: one key = value file with dotted-key nesting and '#'
// comments. Unknown keys are rejected, and every command writes the resolved
// configuration back next to its outputs so a run can be reproduced from the
// snapshot alone.

struct RunConfig {
    uint64_t seed = 1;
    std::string task = "classification";  // or "regression"
    SyntheticConfig data;
    WaveletConfig transform;
    TrainConfig train;
    ProbeConfig probe;

    void validate() const {
        if (task != "classification" && task != "regression")
            throw ConfigError("RunConfig: task must be classification or regression");
        data.validate();
        train.validate();
    }

    /// Canonical key order; doubles printed with full precision.
    std::string snapshot() const {
        std::ostringstream os;
        char buf[64];
        auto f = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return std::string(buf);
        };
        os << "seed = " << seed << "\n";
        os << "task = " << task << "\n";
        os << "data.n_classes = " << data.n_classes << "\n";
        os << "data.samples_per_class = " << data.samples_per_class << "\n";
        os << "data.length = " << data.length << "\n";
        os << "data.sample_rate = " << f(data.sample_rate) << "\n";
        for (size_t c = 0; c < data.classes.size(); ++c) {
            os << "data.class" << c << ".frequencies = ";
            for (size_t i = 0; i < data.classes[c].frequencies_hz.size(); ++i)
                os << (i ? ";" : "") << f(data.classes[c].frequencies_hz[i]);
            os << "\n";
            os << "data.class" << c << ".transient_width = " << f(data.classes[c].transient_width)
               << "\n";
            os << "data.class" << c
               << ".transient_amplitude = " << f(data.classes[c].transient_amplitude) << "\n";
        }
        os << "data.noise_std = " << f(data.noise_std) << "\n";
        os << "data.train_fraction = " << f(data.train_fraction) << "\n";
        os << "data.val_fraction = " << f(data.val_fraction) << "\n";
        os << "data.band_lo_hz = " << f(data.band_lo_hz) << "\n";
        os << "data.band_hi_hz = " << f(data.band_hi_hz) << "\n";
        os << "data.harmonic_amplitude = " << f(data.harmonic_amplitude) << "\n";
        os << "data.target_scale = " << f(data.target_scale) << "\n";
        os << "transform.num_scales = " << transform.num_scales << "\n";
        os << "transform.scale_lo = " << f(transform.scale_lo) << "\n";
        os << "transform.scale_hi = " << f(transform.scale_hi) << "\n";
        os << "transform.sigma = " << f(transform.sigma) << "\n";
        os << "transform.xi = " << f(transform.xi) << "\n";
        os << "transform.store_complex = " << (transform.store_complex ? "true" : "false") << "\n";
        os << "train.batch_size = " << train.batch_size << "\n";
        os << "train.epochs = " << train.epochs << "\n";
        os << "train.mapper_epochs = " << train.mapper_epochs << "\n";
        os << "train.lr_pretrain = " << f(train.lr_pretrain) << "\n";
        os << "train.lr_mapper = " << f(train.lr_mapper) << "\n";
        os << "train.tau = " << f(train.tau) << "\n";
        os << "train.deterministic = " << (train.deterministic ? "true" : "false") << "\n";
        os << "train.include_positive = " << (train.include_positive_in_denominator ? "true" : "false")
           << "\n";
        os << "train.detach_map_targets = " << (train.detach_map_targets ? "true" : "false") << "\n";
        os << "train.latent_dim = " << train.latent_dim << "\n";
        os << "train.blocks = " << train.blocks << "\n";
        os << "train.width_time = " << train.width_time << "\n";
        os << "train.width_fourier = " << train.width_fourier << "\n";
        os << "train.width_wavelet = " << train.width_wavelet << "\n";
        os << "train.proj_hidden = " << train.proj_hidden << "\n";
        os << "train.dropout = " << f(train.dropout) << "\n";
        os << "probe.lr = " << f(probe.lr) << "\n";
        os << "probe.epochs = " << probe.epochs << "\n";
        return os.str();
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("expected boolean for " + key + ", got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string cell;
    while (std::getline(ss, cell, ';')) out.push_back(std::stod(trim(cell)));
    return out;
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
    std::map<std::string, std::string> kv;
    {
        std::stringstream ss(text);
        std::string line;
        long line_no = 0;
        while (std::getline(ss, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
            const std::string key = detail::trim(line.substr(0, eq));
            const std::string val = detail::trim(line.substr(eq + 1));
            if (key.empty()) throw ParseError("empty key", line_no);
            if (kv.count(key)) throw ParseError("duplicate key " + key, line_no);
            kv[key] = val;
        }
    }

    RunConfig cfg;
    const size_t n_classes =
        kv.count("data.n_classes") ? std::stoull(kv["data.n_classes"]) : cfg.data.n_classes;
    if (n_classes != cfg.data.classes.size()) {
        cfg.data.classes.assign(n_classes, ClassSpec{{1.0}, 4.0, 1.0});
        // distinct default frequencies so a resized config stays valid
        for (size_t c = 0; c < n_classes; ++c)
            cfg.data.classes[c].frequencies_hz = {2.0 + 2.0 * double(c)};
    }

    std::set<std::string> known = {
        "seed", "task",
        "data.n_classes", "data.samples_per_class", "data.length", "data.sample_rate",
        "data.noise_std", "data.train_fraction", "data.val_fraction", "data.band_lo_hz",
        "data.band_hi_hz", "data.harmonic_amplitude", "data.target_scale",
        "transform.num_scales", "transform.scale_lo", "transform.scale_hi", "transform.sigma",
        "transform.xi", "transform.store_complex",
        "train.batch_size", "train.epochs", "train.mapper_epochs", "train.lr_pretrain",
        "train.lr_mapper", "train.tau", "train.deterministic", "train.include_positive",
        "train.detach_map_targets", "train.latent_dim", "train.blocks", "train.width_time",
        "train.width_fourier", "train.width_wavelet", "train.proj_hidden", "train.dropout",
        "probe.lr", "probe.epochs",
    };
    for (size_t c = 0; c < n_classes; ++c) {
        const std::string p = "data.class" + std::to_string(c);
        known.insert(p + ".frequencies");
        known.insert(p + ".transient_width");
        known.insert(p + ".transient_amplitude");
    }
    for (const auto& [key, val] : kv)
        if (!known.count(key)) throw ConfigError("unknown config key: " + key);

    auto get = [&](const std::string& key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    auto set_u64 = [&](const std::string& k, auto& dst) {
        if (auto* v = get(k)) dst = std::stoull(*v);
    };
    auto set_f64 = [&](const std::string& k, double& dst) {
        if (auto* v = get(k)) dst = std::stod(*v);
    };
    auto set_bool = [&](const std::string& k, bool& dst) {
        if (auto* v = get(k)) dst = detail::parse_bool(*v, k);
    };

    set_u64("seed", cfg.seed);
    if (auto* v = get("task")) cfg.task = *v;
    cfg.data.n_classes = n_classes;
    set_u64("data.samples_per_class", cfg.data.samples_per_class);
    set_u64("data.length", cfg.data.length);
    set_f64("data.sample_rate", cfg.data.sample_rate);
    for (size_t c = 0; c < n_classes; ++c) {
        const std::string p = "data.class" + std::to_string(c);
        if (auto* v = get(p + ".frequencies")) cfg.data.classes[c].frequencies_hz = detail::parse_list(*v);
        set_f64(p + ".transient_width", cfg.data.classes[c].transient_width);
        set_f64(p + ".transient_amplitude", cfg.data.classes[c].transient_amplitude);
    }
    set_f64("data.noise_std", cfg.data.noise_std);
    set_f64("data.train_fraction", cfg.data.train_fraction);
    set_f64("data.val_fraction", cfg.data.val_fraction);
    set_f64("data.band_lo_hz", cfg.data.band_lo_hz);
    set_f64("data.band_hi_hz", cfg.data.band_hi_hz);
    set_f64("data.harmonic_amplitude", cfg.data.harmonic_amplitude);
    set_f64("data.target_scale", cfg.data.target_scale);
    set_u64("transform.num_scales", cfg.transform.num_scales);
    set_f64("transform.scale_lo", cfg.transform.scale_lo);
    set_f64("transform.scale_hi", cfg.transform.scale_hi);
    set_f64("transform.sigma", cfg.transform.sigma);
    set_f64("transform.xi", cfg.transform.xi);
    set_bool("transform.store_complex", cfg.transform.store_complex);
    set_u64("train.batch_size", cfg.train.batch_size);
    set_u64("train.epochs", cfg.train.epochs);
    set_u64("train.mapper_epochs", cfg.train.mapper_epochs);
    set_f64("train.lr_pretrain", cfg.train.lr_pretrain);
    set_f64("train.lr_mapper", cfg.train.lr_mapper);
    set_f64("train.tau", cfg.train.tau);
    set_bool("train.deterministic", cfg.train.deterministic);
    set_bool("train.include_positive", cfg.train.include_positive_in_denominator);
    set_bool("train.detach_map_targets", cfg.train.detach_map_targets);
    set_u64("train.latent_dim", cfg.train.latent_dim);
    set_u64("train.blocks", cfg.train.blocks);
    set_u64("train.width_time", cfg.train.width_time);
    set_u64("train.width_fourier", cfg.train.width_fourier);
    set_u64("train.width_wavelet", cfg.train.width_wavelet);
    set_u64("train.proj_hidden", cfg.train.proj_hidden);
    set_f64("train.dropout", cfg.train.dropout);
    set_f64("probe.lr", cfg.probe.lr);
    set_u64("probe.epochs", cfg.probe.epochs);

    cfg.train.seed = cfg.seed;
    cfg.probe.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return parse_run_config(os.str());
}

}  // namespace frameproj
