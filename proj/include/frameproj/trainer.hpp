#pragma once

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "frameproj/objectives.hpp"

namespace frameproj {

// Two-phase training. Phase one optimizes the three encoders, the three
// projectors, and the embedding mappers jointly under L_ID + L_map with one
// backward pass per step (no stop-gradient). Phase two freezes everything,
// discards projectors and embedding mappers from the optimization, and fits
// the representation mappers on frozen eval-mode representations.
//
// Determinism contract: with deterministic=true, identical (seed, config,
// dataset) produce bit-identical run logs and final parameters. All
// randomness flows through fixed CounterRng streams: stream 0 initializes
// the bundle, stream 1 shuffles pretraining epochs, stream 2 initializes
// representation mappers, stream 3 shuffles the mapper phase.

struct TrainConfig {
    size_t batch_size = 128;
    size_t epochs = 30;
    size_t mapper_epochs = 20;
    double lr_pretrain = 0.003;
    double lr_mapper = 0.003;
    double tau = 0.2;
    uint64_t seed = 1;
    bool deterministic = true;
    bool include_positive_in_denominator = true;
    bool detach_map_targets = false;

    // Desk-scale architecture knobs; restore the full-scale recipe by config.
    size_t latent_dim = 64;
    size_t blocks = 2;
    size_t width_time = 16;
    size_t width_fourier = 16;
    size_t width_wavelet = 8;
    size_t proj_hidden = 64;
    double dropout = 0.0;

    void validate() const {
        if (batch_size < 2) throw ConfigError("TrainConfig: batch_size must be >= 2");
        if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
        if (!(tau > 0.0)) throw ConfigError("TrainConfig: tau must be positive");
        if (latent_dim % 2 != 0) throw ConfigError("TrainConfig: latent_dim must be even");
    }
};

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

/// lr = base * 0.5 * (1 + cos(pi * epoch / total)); no warmup.
inline double cosine_lr(size_t epoch, size_t total_epochs, double base_lr) {
    if (epoch >= total_epochs) throw ContractError("cosine_lr: epoch out of range");
    return base_lr * 0.5 * (1.0 + std::cos(M_PI * double(epoch) / double(total_epochs)));
}

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam() = default;
    explicit Adam(std::vector<Tensor> params, AdamConfig cfg = {})
        : params_(std::move(params)), cfg_(cfg) {
        for (const auto& p : params_) {
            m_.emplace_back(p.size(), 0.0);
            v_.emplace_back(p.size(), 0.0);
        }
    }

    size_t step_count() const { return t_; }
    const std::vector<Tensor>& params() const { return params_; }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    void step(double lr) {
        if (lr < 0.0) throw ContractError("adam: negative learning rate");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
        for (size_t pi = 0; pi < params_.size(); ++pi) {
            auto& val = params_[pi].mutable_value();
            const auto& grad = params_[pi].grad();
            auto& m = m_[pi];
            auto& v = v_[pi];
            for (size_t i = 0; i < val.size(); ++i) {
                const double g = grad[i];
                if (!std::isfinite(g))
                    throw NumericError("adam: non-finite gradient, training aborted");
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                val[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    AdamConfig cfg_;
    size_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Bundle
// ---------------------------------------------------------------------------

enum class Phase { initialized, pretrained, mappers_trained };

inline const char* phase_name(Phase p) {
    switch (p) {
        case Phase::initialized: return "initialized";
        case Phase::pretrained: return "pretrained";
        case Phase::mappers_trained: return "mappers_trained";
    }
    return "?";
}

/// Whole-dataset encoder inputs, sliced per batch during training.
struct DatasetViews {
    Tensor time;       // (N, C, L)
    Tensor mag, phase; // (N, C, K)
    Tensor scalogram;  // (N, C, S, L)
    size_t n() const { return time.dim(0); }
};

inline DatasetViews make_dataset_views(const SignalBatch& batch, const CachedViews& views) {
    if (views.spectral.n != batch.n || views.scalogram.n != batch.n)
        throw ContractError("make_dataset_views: cached views do not match the batch");
    return {time_tensor(batch), magnitude_tensor(views.spectral), phase_tensor(views.spectral),
            scalogram_tensor(views.scalogram)};
}

struct ModelBundle {
    TrainConfig cfg;
    EncoderConfig tcfg, fcfg, wcfg;
    TimeEncoder f_t;
    FourierEncoder f_f;
    WaveletEncoder f_w;
    Projector g_t, g_f, g_w;
    LatentMapper phi_zf, phi_zw;   // embedding mappers, trained jointly
    LatentMapper phi_hf, phi_hw;   // representation mappers, phase two
    bool has_repr_mappers = false;
    Phase phase = Phase::initialized;
    uint64_t seed = 0;

    static ModelBundle build(const TrainConfig& cfg, const DatasetViews& views) {
        cfg.validate();
        ModelBundle b;
        b.cfg = cfg;
        b.seed = cfg.seed;

        b.tcfg = {EncoderFamily::time,    views.time.dim(1), views.time.dim(2), 0,
                  cfg.blocks, cfg.width_time, cfg.latent_dim, cfg.dropout};
        b.fcfg = {EncoderFamily::fourier, views.mag.dim(1), views.mag.dim(2), 0,
                  cfg.blocks, cfg.width_fourier, cfg.latent_dim, cfg.dropout};
        b.wcfg = {EncoderFamily::wavelet, views.scalogram.dim(1), views.scalogram.dim(3),
                  views.scalogram.dim(2), cfg.blocks, cfg.width_wavelet, cfg.latent_dim, cfg.dropout};

        b.f_t = build_time_encoder(b.tcfg);
        b.f_f = build_fourier_encoder(b.fcfg);
        b.f_w = build_wavelet_encoder(b.wcfg);
        b.g_t = build_projector(cfg.latent_dim, cfg.proj_hidden, cfg.latent_dim);
        b.g_f = build_projector(cfg.latent_dim, cfg.proj_hidden, cfg.latent_dim);
        b.g_w = build_projector(cfg.latent_dim, cfg.proj_hidden, cfg.latent_dim);
        b.phi_zf = build_mapper(cfg.latent_dim);
        b.phi_zw = build_mapper(cfg.latent_dim);

        CounterRng rng(cfg.seed, 0);
        b.f_t.init(rng);
        b.f_f.init(rng);
        b.f_w.init(rng);
        b.g_t.init(rng);
        b.g_f.init(rng);
        b.g_w.init(rng);
        b.phi_zf.init(rng);
        b.phi_zw.init(rng);
        return b;
    }

    /// Diagnostic constructor: a fully assembled but untrained bundle with
    /// randomly initialized representation mappers, usable by Algorithm-2
    /// style inference as a random baseline.
    static ModelBundle build_random(const TrainConfig& cfg, const DatasetViews& views) {
        ModelBundle b = build(cfg, views);
        b.attach_random_repr_mappers();
        b.phase = Phase::mappers_trained;
        return b;
    }

    void attach_random_repr_mappers() {
        phi_hf = build_mapper(cfg.latent_dim);
        phi_hw = build_mapper(cfg.latent_dim);
        CounterRng rng(seed, 2);
        phi_hf.init(rng);
        phi_hw.init(rng);
        has_repr_mappers = true;
    }

    std::vector<Tensor> pretrain_parameters() const {
        std::vector<Tensor> out;
        f_t.params(out);
        f_f.params(out);
        f_w.params(out);
        g_t.params(out);
        g_f.params(out);
        g_w.params(out);
        phi_zf.params(out);
        phi_zw.params(out);
        return out;
    }

    std::vector<Tensor> encoder_parameters() const {
        std::vector<Tensor> out;
        f_t.params(out);
        f_f.params(out);
        f_w.params(out);
        return out;
    }

    std::vector<Tensor> repr_mapper_parameters() const {
        std::vector<Tensor> out;
        if (has_repr_mappers) {
            phi_hf.params(out);
            phi_hw.params(out);
        }
        return out;
    }

    std::vector<Tensor> parameters() const {
        std::vector<Tensor> out = pretrain_parameters();
        auto extra = repr_mapper_parameters();
        out.insert(out.end(), extra.begin(), extra.end());
        return out;
    }

    NamedTensors named_tensors() const {
        NamedTensors out;
        f_t.named("time", out);
        f_f.named("fourier", out);
        f_w.named("wavelet", out);
        g_t.named("proj_t", out);
        g_f.named("proj_f", out);
        g_w.named("proj_w", out);
        phi_zf.named("phi_zf", out);
        phi_zw.named("phi_zw", out);
        if (has_repr_mappers) {
            phi_hf.named("phi_hf", out);
            phi_hw.named("phi_hw", out);
        }
        return out;
    }

    std::string parameter_hash() const {
        Sha256 h;
        for (const auto& [name, t] : named_tensors()) {
            h.update(name);
            for (size_t d : t.shape()) h.update_u64(d);
            h.update_f64s(t.value());
        }
        return Sha256::hex(h.finish());
    }

    std::string encoder_hash() const {
        Sha256 h;
        NamedTensors enc;
        f_t.named("time", enc);
        f_f.named("fourier", enc);
        f_w.named("wavelet", enc);
        for (const auto& [name, t] : enc) {
            h.update(name);
            h.update_f64s(t.value());
        }
        return Sha256::hex(h.finish());
    }
};

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

struct RunLog {
    std::vector<LossReport> rows;

    std::string to_csv() const {
        std::string s = runlog_csv_header();
        for (size_t i = 0; i < rows.size(); ++i) s += runlog_csv_row(i, rows[i]);
        return s;
    }
};

struct PretrainResult {
    ModelBundle bundle;
    RunLog log;
};

namespace detail {

inline std::vector<std::vector<size_t>> epoch_batches(size_t n, size_t batch_size, CounterRng& rng) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(idx);
    std::vector<std::vector<size_t>> batches;
    for (size_t start = 0; start < n; start += batch_size) {
        const size_t end = std::min(n, start + batch_size);
        batches.emplace_back(idx.begin() + long(start), idx.begin() + long(end));
    }
    return batches;
}

}  // namespace detail

/// One joint optimization step over a batch of view slices. Exposed so tests
/// can re-execute training in lockstep.
inline LossReport pretrain_step(ModelBundle& b, Adam& adam, const DatasetViews& views,
                                const std::vector<size_t>& batch_idx, double lr) {
    const TrainContext ctx{true, nullptr};
    Tensor xt = take_rows(views.time, batch_idx);
    Tensor xm = take_rows(views.mag, batch_idx);
    Tensor xp = take_rows(views.phase, batch_idx);
    Tensor xs = take_rows(views.scalogram, batch_idx);

    TrainContext train_ctx = ctx;
    CounterRng dropout_rng(b.cfg.seed, 4 + adam.step_count());
    if (b.cfg.dropout > 0.0) train_ctx.rng = &dropout_rng;

    LossReport report;
    adam.zero_grad();
    {
        Tape tape;
        Tensor h_t = b.f_t.forward(xt, train_ctx);
        Tensor h_f = b.f_f.forward(xm, xp, train_ctx);
        Tensor h_w = b.f_w.forward(xs, train_ctx);
        Tensor z_t = b.g_t.forward(h_t);
        Tensor z_f = b.g_f.forward(h_f);
        Tensor z_w = b.g_w.forward(h_w);
        auto [l_id, per_pair] = instance_discrimination_loss(
            z_t, z_f, z_w, b.cfg.tau, b.cfg.include_positive_in_denominator);
        Tensor l_map = mapping_loss(b.phi_zf, b.phi_zw, z_t, z_f, z_w, b.cfg.detach_map_targets);
        Tensor total = total_pretrain_loss(l_id, l_map);
        report.l_id = l_id.item();
        report.l_map = l_map.item();
        report.total = total.item();
        report.per_pair = std::move(per_pair);
        tape.backward(total);
    }
    adam.step(lr);
    return report;
}

/// Algorithm-1 phase one: joint pretraining of encoders, projectors, and
/// embedding mappers.
inline PretrainResult pretrain(const DatasetViews& views, const TrainConfig& cfg) {
    cfg.validate();
    const size_t n = views.n();
    if (n < cfg.batch_size && n < 2)
        throw ContractError("pretrain: dataset smaller than a usable batch");

    PretrainResult result{ModelBundle::build(cfg, views), {}};
    Adam adam(result.bundle.pretrain_parameters());
    CounterRng shuffle_rng(cfg.seed, 1);

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr_pretrain);
        for (const auto& batch : detail::epoch_batches(n, cfg.batch_size, shuffle_rng)) {
            if (batch.size() < 2) {
                std::cerr << "pretrain: skipping batch of " << batch.size()
                          << " samples (needs >= 2 for negatives)\n";
                continue;
            }
            result.log.rows.push_back(pretrain_step(result.bundle, adam, views, batch, lr));
        }
    }
    result.bundle.phase = Phase::pretrained;
    return result;
}

/// Frozen eval-mode representations for the whole dataset, in batches.
inline void encode_all(ModelBundle& b, const DatasetViews& views, Tensor& h_t, Tensor& h_f,
                       Tensor& h_w, size_t chunk = 256) {
    const size_t n = views.n();
    const TrainContext ctx{false, nullptr};
    h_t = Tensor::zeros({n, b.cfg.latent_dim});
    h_f = Tensor::zeros({n, b.cfg.latent_dim});
    h_w = Tensor::zeros({n, b.cfg.latent_dim});
    for (size_t start = 0; start < n; start += chunk) {
        std::vector<size_t> idx;
        for (size_t i = start; i < std::min(n, start + chunk); ++i) idx.push_back(i);
        Tensor ht = b.f_t.forward(take_rows(views.time, idx), ctx);
        Tensor hf = b.f_f.forward(take_rows(views.mag, idx), take_rows(views.phase, idx), ctx);
        Tensor hw = b.f_w.forward(take_rows(views.scalogram, idx), ctx);
        const size_t d = b.cfg.latent_dim;
        std::copy_n(ht.value().data(), idx.size() * d, h_t.mutable_value().data() + start * d);
        std::copy_n(hf.value().data(), idx.size() * d, h_f.mutable_value().data() + start * d);
        std::copy_n(hw.value().data(), idx.size() * d, h_w.mutable_value().data() + start * d);
    }
}

/// Algorithm-1 phase two: freeze the encoders, drop projectors and embedding
/// mappers from the optimization, and train the representation mappers.
inline RunLog train_latent_mappers(ModelBundle& b, const DatasetViews& views) {
    if (b.phase != Phase::pretrained)
        throw ContractError("train_latent_mappers: bundle must be in the pretrained phase");
    const TrainConfig& cfg = b.cfg;

    Tensor h_t, h_f, h_w;
    encode_all(b, views, h_t, h_f, h_w);

    b.attach_random_repr_mappers();
    Adam adam(b.repr_mapper_parameters());
    CounterRng shuffle_rng(cfg.seed, 3);
    RunLog log;

    for (size_t epoch = 0; epoch < cfg.mapper_epochs; ++epoch) {
        const double lr = cosine_lr(epoch, std::max<size_t>(cfg.mapper_epochs, 1), cfg.lr_mapper);
        for (const auto& batch : detail::epoch_batches(views.n(), cfg.batch_size, shuffle_rng)) {
            Tensor bt = take_rows(h_t, batch);
            Tensor bf = take_rows(h_f, batch);
            Tensor bw = take_rows(h_w, batch);
            LossReport row;
            adam.zero_grad();
            {
                Tape tape;
                Tensor lf = mapping_loss_single(b.phi_hf, bt, bf);
                Tensor lw = mapping_loss_single(b.phi_hw, bt, bw);
                Tensor l = add(lf, lw);
                row.l_map = l.item();
                row.total = l.item();
                tape.backward(l);
            }
            adam.step(lr);
            log.rows.push_back(row);
        }
    }
    b.phase = Phase::mappers_trained;
    return log;
}

// ---------------------------------------------------------------------------
// Checkpoint: magic "FPCK", u32 version, length-prefixed key=value config
// lines, then named tensors. Loading rebuilds the structure from the config
// and validates every tensor shape.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> bundle_config_lines(const ModelBundle& b) {
    auto kv = [](const std::string& k, const std::string& v) { return k + "=" + v; };
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    const TrainConfig& c = b.cfg;
    return {
        kv("phase", phase_name(b.phase)),
        kv("seed", std::to_string(b.seed)),
        kv("batch_size", std::to_string(c.batch_size)),
        kv("epochs", std::to_string(c.epochs)),
        kv("mapper_epochs", std::to_string(c.mapper_epochs)),
        kv("lr_pretrain", fmt(c.lr_pretrain)),
        kv("lr_mapper", fmt(c.lr_mapper)),
        kv("tau", fmt(c.tau)),
        kv("deterministic", c.deterministic ? "1" : "0"),
        kv("include_positive", c.include_positive_in_denominator ? "1" : "0"),
        kv("detach_map_targets", c.detach_map_targets ? "1" : "0"),
        kv("latent_dim", std::to_string(c.latent_dim)),
        kv("blocks", std::to_string(c.blocks)),
        kv("width_time", std::to_string(c.width_time)),
        kv("width_fourier", std::to_string(c.width_fourier)),
        kv("width_wavelet", std::to_string(c.width_wavelet)),
        kv("proj_hidden", std::to_string(c.proj_hidden)),
        kv("dropout", fmt(c.dropout)),
        kv("time_channels", std::to_string(b.tcfg.channels_in)),
        kv("time_length", std::to_string(b.tcfg.length_in)),
        kv("fourier_channels", std::to_string(b.fcfg.channels_in)),
        kv("fourier_bins", std::to_string(b.fcfg.length_in)),
        kv("wavelet_channels", std::to_string(b.wcfg.channels_in)),
        kv("wavelet_length", std::to_string(b.wcfg.length_in)),
        kv("wavelet_scales", std::to_string(b.wcfg.num_scales)),
    };
}

}  // namespace detail

inline void save_bundle(const ModelBundle& b, const std::string& path) {
    BinaryWriter w(path);
    w.magic("FPCK");
    w.u32(1);
    const auto lines = detail::bundle_config_lines(b);
    w.u32(static_cast<uint32_t>(lines.size()));
    for (const auto& line : lines) w.str(line);
    const auto named = b.named_tensors();
    w.u32(static_cast<uint32_t>(named.size()));
    for (const auto& [name, t] : named) {
        w.str(name);
        write_tensor(w, t);
    }
    w.close();
}

inline ModelBundle load_bundle(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic("FPCK", "bundle checkpoint");
    const uint32_t version = r.u32();
    if (version != 1) throw IoError("bundle checkpoint: unsupported version");

    std::map<std::string, std::string> kv;
    const uint32_t n_lines = r.u32();
    for (uint32_t i = 0; i < n_lines; ++i) {
        const std::string line = r.str();
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError("bundle checkpoint: malformed config line");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto need = [&](const std::string& k) {
        auto it = kv.find(k);
        if (it == kv.end()) throw IoError("bundle checkpoint: missing config key " + k);
        return it->second;
    };

    TrainConfig cfg;
    cfg.batch_size = std::stoull(need("batch_size"));
    cfg.epochs = std::stoull(need("epochs"));
    cfg.mapper_epochs = std::stoull(need("mapper_epochs"));
    cfg.lr_pretrain = std::stod(need("lr_pretrain"));
    cfg.lr_mapper = std::stod(need("lr_mapper"));
    cfg.tau = std::stod(need("tau"));
    cfg.seed = std::stoull(need("seed"));
    cfg.deterministic = need("deterministic") == "1";
    cfg.include_positive_in_denominator = need("include_positive") == "1";
    cfg.detach_map_targets = need("detach_map_targets") == "1";
    cfg.latent_dim = std::stoull(need("latent_dim"));
    cfg.blocks = std::stoull(need("blocks"));
    cfg.width_time = std::stoull(need("width_time"));
    cfg.width_fourier = std::stoull(need("width_fourier"));
    cfg.width_wavelet = std::stoull(need("width_wavelet"));
    cfg.proj_hidden = std::stoull(need("proj_hidden"));
    cfg.dropout = std::stod(need("dropout"));

    // Rebuild the structure from recorded dimensions.
    DatasetViews dims;
    const size_t tc = std::stoull(need("time_channels")), tl = std::stoull(need("time_length"));
    const size_t fc = std::stoull(need("fourier_channels")), fb = std::stoull(need("fourier_bins"));
    const size_t wc = std::stoull(need("wavelet_channels")), wl = std::stoull(need("wavelet_length"));
    const size_t ws = std::stoull(need("wavelet_scales"));
    dims.time = Tensor::zeros({1, tc, tl});
    dims.mag = Tensor::zeros({1, fc, fb});
    dims.phase = Tensor::zeros({1, fc, fb});
    dims.scalogram = Tensor::zeros({1, wc, ws, wl});
    ModelBundle b = ModelBundle::build(cfg, dims);

    const std::string phase = need("phase");
    if (phase == "mappers_trained") {
        b.attach_random_repr_mappers();
        b.phase = Phase::mappers_trained;
    } else if (phase == "pretrained") {
        b.phase = Phase::pretrained;
    } else {
        b.phase = Phase::initialized;
    }

    std::map<std::string, Tensor> loaded;
    const uint32_t n_tensors = r.u32();
    for (uint32_t i = 0; i < n_tensors; ++i) {
        const std::string name = r.str();
        loaded[name] = read_tensor(r);
    }

    NamedTensors slots = b.named_tensors();
    if (slots.size() != loaded.size()) throw IoError("bundle checkpoint: tensor count mismatch");
    for (auto& [name, t] : slots) {
        auto it = loaded.find(name);
        if (it == loaded.end()) throw IoError("bundle checkpoint: missing tensor " + name);
        if (it->second.shape() != t.shape())
            throw IoError("bundle checkpoint: shape mismatch for " + name);
        t.mutable_value() = it->second.value();
    }
    return b;
}

}  // namespace frameproj
