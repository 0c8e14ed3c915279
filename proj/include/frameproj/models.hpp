#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "frameproj/frames.hpp"
#include "frameproj/rng.hpp"
#include "frameproj/signal.hpp"
#include "frameproj/tensor.hpp"

namespace frameproj {

// Desk-scale versions of the four network families: a 1-D residual encoder
// for raw windows, a two-branch (amplitude/phase) encoder for spectra, a 2-D
// pyramid encoder for scalograms, a two-layer projector, and the lightweight
// conv/deconv latent mapper. All parameters are f64 tensors initialized with
// fan-in-scaled uniform draws from a single sequential stream.

enum class EncoderFamily { time, fourier, wavelet };

inline const char* family_name(EncoderFamily f) {
    switch (f) {
        case EncoderFamily::time: return "time";
        case EncoderFamily::fourier: return "fourier";
        case EncoderFamily::wavelet: return "wavelet";
    }
    return "?";
}

struct EncoderConfig {
    EncoderFamily family = EncoderFamily::time;
    size_t channels_in = 1;
    size_t length_in = 128;  // L for time/wavelet, bin count K for fourier
    size_t num_scales = 48;  // wavelet only
    size_t blocks = 2;
    size_t width = 16;  // base channel count (pyramid N for the wavelet family)
    size_t latent_dim = 64;
    double dropout = 0.0;

    void validate() const {
        if (latent_dim < 8) throw ConfigError("EncoderConfig: latent_dim must be >= 8");
        if (blocks < 1) throw ConfigError("EncoderConfig: blocks must be >= 1");
        if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("EncoderConfig: dropout in [0,1)");
    }
};

/// Forward-pass context: training toggles batch statistics and dropout; the
/// RNG is only consulted when dropout is active.
struct TrainContext {
    bool training = false;
    CounterRng* rng = nullptr;
};

namespace detail {

inline size_t conv_out_len(size_t l, size_t k, size_t s, size_t p) {
    if (k > l + 2 * p) throw ConfigError("layer input too short for kernel");
    return (l + 2 * p - k) / s + 1;
}

inline void init_uniform(Tensor& t, size_t fan_in, CounterRng& rng) {
    const double bound = std::sqrt(1.0 / double(fan_in));
    for (double& v : t.mutable_value()) v = rng.uniform(-bound, bound);
}

inline Tensor apply_dropout(const Tensor& x, double p, const TrainContext& ctx) {
    if (!ctx.training || p <= 0.0) return x;
    if (ctx.rng == nullptr) throw ContractError("dropout requires an RNG in training mode");
    Tensor mask = Tensor::zeros(x.shape());
    const double keep = 1.0 - p;
    for (double& m : mask.mutable_value()) m = ctx.rng->uniform() < keep ? 1.0 / keep : 0.0;
    return mul(x, mask);
}

}  // namespace detail

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

struct Conv1dLayer {
    Tensor w, b;
    int stride = 1, pad = 0;

    static Conv1dLayer make(size_t ci, size_t co, size_t k, int stride, int pad) {
        Conv1dLayer l;
        l.w = Tensor::zeros({co, ci, k}, true);
        l.b = Tensor::zeros({co}, true);
        l.stride = stride;
        l.pad = pad;
        return l;
    }
    Tensor forward(const Tensor& x) const { return conv1d(x, w, b, stride, pad); }
    void init(CounterRng& rng) {
        const size_t fan_in = w.dim(1) * w.dim(2);
        detail::init_uniform(w, fan_in, rng);
        detail::init_uniform(b, fan_in, rng);
    }
    void params(std::vector<Tensor>& out) const { out.push_back(w); out.push_back(b); }
    void named(const std::string& p, NamedTensors& out) const {
        out.push_back({p + ".w", w});
        out.push_back({p + ".b", b});
    }
};

struct ConvT1dLayer {
    Tensor w, b;  // (Ci, Co, K) in the layout of the paired forward conv
    int stride = 1, pad = 0, out_pad = 0;

    static ConvT1dLayer make(size_t ci, size_t co, size_t k, int stride, int pad, int out_pad) {
        ConvT1dLayer l;
        l.w = Tensor::zeros({ci, co, k}, true);
        l.b = Tensor::zeros({co}, true);
        l.stride = stride;
        l.pad = pad;
        l.out_pad = out_pad;
        return l;
    }
    Tensor forward(const Tensor& x) const { return conv_transpose1d(x, w, b, stride, pad, out_pad); }
    void init(CounterRng& rng) {
        const size_t fan_in = w.dim(1) * w.dim(2);
        detail::init_uniform(w, fan_in, rng);
        detail::init_uniform(b, fan_in, rng);
    }
    void params(std::vector<Tensor>& out) const { out.push_back(w); out.push_back(b); }
    void named(const std::string& p, NamedTensors& out) const {
        out.push_back({p + ".w", w});
        out.push_back({p + ".b", b});
    }
};

struct Conv2dLayer {
    Tensor w, b;
    int stride = 1, pad = 0;

    static Conv2dLayer make(size_t ci, size_t co, size_t k, int stride, int pad) {
        Conv2dLayer l;
        l.w = Tensor::zeros({co, ci, k, k}, true);
        l.b = Tensor::zeros({co}, true);
        l.stride = stride;
        l.pad = pad;
        return l;
    }
    Tensor forward(const Tensor& x) const { return conv2d(x, w, b, stride, pad); }
    void init(CounterRng& rng) {
        const size_t fan_in = w.dim(1) * w.dim(2) * w.dim(3);
        detail::init_uniform(w, fan_in, rng);
        detail::init_uniform(b, fan_in, rng);
    }
    void params(std::vector<Tensor>& out) const { out.push_back(w); out.push_back(b); }
    void named(const std::string& p, NamedTensors& out) const {
        out.push_back({p + ".w", w});
        out.push_back({p + ".b", b});
    }
};

struct AffineLayer {
    Tensor w, b;  // (in, out)

    static AffineLayer make(size_t in, size_t out) {
        AffineLayer l;
        l.w = Tensor::zeros({in, out}, true);
        l.b = Tensor::zeros({out}, true);
        return l;
    }
    Tensor forward(const Tensor& x) const { return add_rowvec(matmul(x, w), b); }
    void init(CounterRng& rng) {
        const size_t fan_in = w.dim(0);
        detail::init_uniform(w, fan_in, rng);
        detail::init_uniform(b, fan_in, rng);
    }
    void params(std::vector<Tensor>& out) const { out.push_back(w); out.push_back(b); }
    void named(const std::string& p, NamedTensors& out) const {
        out.push_back({p + ".w", w});
        out.push_back({p + ".b", b});
    }
};

struct BatchNormLayer {
    Tensor gamma, beta;
    Tensor run_mean, run_var;  // non-trainable op state, shared into checkpoints
    double momentum = 0.1, eps = 1e-5;

    static BatchNormLayer make(size_t c) {
        BatchNormLayer l;
        l.gamma = Tensor::full({c}, 1.0, true);
        l.beta = Tensor::zeros({c}, true);
        l.run_mean = Tensor::zeros({c});
        l.run_var = Tensor::full({c}, 1.0);
        return l;
    }
    Tensor forward(const Tensor& x, const TrainContext& ctx) {
        return batch_norm(x, gamma, beta, run_mean.mutable_value(), run_var.mutable_value(),
                          ctx.training, momentum, eps);
    }
    void init(CounterRng&) {
        for (double& v : gamma.mutable_value()) v = 1.0;
        for (double& v : beta.mutable_value()) v = 0.0;
        for (double& v : run_mean.mutable_value()) v = 0.0;
        for (double& v : run_var.mutable_value()) v = 1.0;
    }
    void params(std::vector<Tensor>& out) const { out.push_back(gamma); out.push_back(beta); }
    void named(const std::string& p, NamedTensors& out) const {
        out.push_back({p + ".gamma", gamma});
        out.push_back({p + ".beta", beta});
        out.push_back({p + ".run_mean", run_mean});
        out.push_back({p + ".run_var", run_var});
    }
};

// ---------------------------------------------------------------------------
// Time encoder: conv stem, residual blocks with x2 downsampling, GAP, affine
// ---------------------------------------------------------------------------

struct ResBlock1d {
    Conv1dLayer c1, c2, skip;
    BatchNormLayer b1, b2, bskip;

    static ResBlock1d make(size_t ci, size_t co) {
        ResBlock1d r;
        r.c1 = Conv1dLayer::make(ci, co, 5, 2, 2);
        r.b1 = BatchNormLayer::make(co);
        r.c2 = Conv1dLayer::make(co, co, 5, 1, 2);
        r.b2 = BatchNormLayer::make(co);
        r.skip = Conv1dLayer::make(ci, co, 1, 2, 0);
        r.bskip = BatchNormLayer::make(co);
        return r;
    }
    Tensor forward(const Tensor& x, double dropout, const TrainContext& ctx) {
        Tensor h = relu(b1.forward(c1.forward(x), ctx));
        h = detail::apply_dropout(h, dropout, ctx);
        h = b2.forward(c2.forward(h), ctx);
        Tensor s = bskip.forward(skip.forward(x), ctx);
        return relu(add(h, s));
    }
    void init(CounterRng& rng) {
        c1.init(rng); b1.init(rng); c2.init(rng); b2.init(rng); skip.init(rng); bskip.init(rng);
    }
    void params(std::vector<Tensor>& out) const {
        c1.params(out); b1.params(out); c2.params(out); b2.params(out);
        skip.params(out); bskip.params(out);
    }
    void named(const std::string& p, NamedTensors& out) const {
        c1.named(p + ".c1", out); b1.named(p + ".b1", out);
        c2.named(p + ".c2", out); b2.named(p + ".b2", out);
        skip.named(p + ".skip", out); bskip.named(p + ".bskip", out);
    }
};

struct TimeEncoder {
    EncoderConfig cfg;
    Conv1dLayer stem;
    BatchNormLayer bn0;
    std::vector<ResBlock1d> blocks;
    AffineLayer head;

    Tensor forward(const Tensor& x, const TrainContext& ctx) {
        Tensor h = relu(bn0.forward(stem.forward(x), ctx));
        for (auto& blk : blocks) h = blk.forward(h, cfg.dropout, ctx);
        return head.forward(global_avg_pool(h));
    }
    void init(CounterRng& rng) {
        stem.init(rng);
        bn0.init(rng);
        for (auto& b : blocks) b.init(rng);
        head.init(rng);
    }
    void params(std::vector<Tensor>& out) const {
        stem.params(out);
        bn0.params(out);
        for (const auto& b : blocks) b.params(out);
        head.params(out);
    }
    void named(const std::string& p, NamedTensors& out) const {
        stem.named(p + ".stem", out);
        bn0.named(p + ".bn0", out);
        for (size_t i = 0; i < blocks.size(); ++i) blocks[i].named(p + ".block" + std::to_string(i), out);
        head.named(p + ".head", out);
    }
};

inline TimeEncoder build_time_encoder(const EncoderConfig& cfg) {
    if (cfg.family != EncoderFamily::time) throw ContractError("build_time_encoder: wrong family");
    cfg.validate();
    TimeEncoder e;
    e.cfg = cfg;
    e.stem = Conv1dLayer::make(cfg.channels_in, cfg.width, 5, 2, 2);
    e.bn0 = BatchNormLayer::make(cfg.width);
    size_t len = detail::conv_out_len(cfg.length_in, 5, 2, 2);
    size_t ch = cfg.width;
    for (size_t i = 0; i < cfg.blocks; ++i) {
        const size_t co = 2 * cfg.width;
        e.blocks.push_back(ResBlock1d::make(ch, co));
        ch = co;
        len = detail::conv_out_len(len, 5, 2, 2);
    }
    if (len < 4)
        throw ConfigError("build_time_encoder: input length " + std::to_string(cfg.length_in) +
                          " too short for " + std::to_string(cfg.blocks) + " blocks");
    e.head = AffineLayer::make(ch, cfg.latent_dim);
    return e;
}

// ---------------------------------------------------------------------------
// Fourier encoder: parallel amplitude and phase conv branches, concatenated
// ---------------------------------------------------------------------------

struct FourierBranch {
    Conv1dLayer c1, c2;
    BatchNormLayer b1, b2;
    AffineLayer head;

    static FourierBranch make(size_t ci, size_t width, size_t out_dim) {
        FourierBranch br;
        br.c1 = Conv1dLayer::make(ci, width, 3, 2, 1);
        br.b1 = BatchNormLayer::make(width);
        br.c2 = Conv1dLayer::make(width, 2 * width, 3, 2, 1);
        br.b2 = BatchNormLayer::make(2 * width);
        br.head = AffineLayer::make(2 * width, out_dim);
        return br;
    }
    Tensor forward(const Tensor& x, double dropout, const TrainContext& ctx) {
        Tensor h = relu(b1.forward(c1.forward(x), ctx));
        h = detail::apply_dropout(h, dropout, ctx);
        h = relu(b2.forward(c2.forward(h), ctx));
        return head.forward(global_avg_pool(h));
    }
    void init(CounterRng& rng) { c1.init(rng); b1.init(rng); c2.init(rng); b2.init(rng); head.init(rng); }
    void params(std::vector<Tensor>& out) const {
        c1.params(out); b1.params(out); c2.params(out); b2.params(out); head.params(out);
    }
    void named(const std::string& p, NamedTensors& out) const {
        c1.named(p + ".c1", out); b1.named(p + ".b1", out);
        c2.named(p + ".c2", out); b2.named(p + ".b2", out);
        head.named(p + ".head", out);
    }
};

struct FourierEncoder {
    EncoderConfig cfg;
    FourierBranch amplitude, phase;

    /// mag and ph are (N, C, K) tensors from a SpectralView.
    Tensor forward(const Tensor& mag, const Tensor& ph, const TrainContext& ctx) {
        Tensor za = amplitude.forward(mag, cfg.dropout, ctx);
        Tensor zp = phase.forward(ph, cfg.dropout, ctx);
        return concat_axis1(za, zp);
    }
    void init(CounterRng& rng) { amplitude.init(rng); phase.init(rng); }
    void params(std::vector<Tensor>& out) const { amplitude.params(out); phase.params(out); }
    void named(const std::string& p, NamedTensors& out) const {
        amplitude.named(p + ".amp", out);
        phase.named(p + ".phase", out);
    }
};

inline FourierEncoder build_fourier_encoder(const EncoderConfig& cfg) {
    if (cfg.family != EncoderFamily::fourier) throw ContractError("build_fourier_encoder: wrong family");
    cfg.validate();
    if (cfg.latent_dim % 2 != 0) throw ConfigError("build_fourier_encoder: latent_dim must be even");
    FourierEncoder e;
    e.cfg = cfg;
    e.amplitude = FourierBranch::make(cfg.channels_in, cfg.width, cfg.latent_dim / 2);
    e.phase = FourierBranch::make(cfg.channels_in, cfg.width, cfg.latent_dim / 2);
    return e;
}

// ---------------------------------------------------------------------------
// Wavelet encoder: 2-D conv pyramid with pooled-input channel merges
// ---------------------------------------------------------------------------

struct WaveletEncoder {
    EncoderConfig cfg;
    size_t time_pool = 1;  // pre-pool factor bounding the time axis near 64
    Conv2dLayer c1, c2, c3;
    BatchNormLayer b1, b2, b3;
    AffineLayer head;

    /// x is an (N, C, S, L) scalogram tensor.
    Tensor forward(const Tensor& x, const TrainContext& ctx) {
        Tensor x0 = time_pool > 1 ? avg_pool2d(x, 1, int(time_pool), 1, int(time_pool)) : x;
        Tensor half = avg_pool2d(x0, 2, 2, 2, 2);
        Tensor quarter = avg_pool2d(x0, 4, 4, 4, 4);
        Tensor h = relu(b1.forward(c1.forward(x0), ctx));
        h = detail::apply_dropout(h, cfg.dropout, ctx);
        h = avg_pool2d(h, 2, 2, 2, 2);
        h = concat_axis1(h, half);
        h = relu(b2.forward(c2.forward(h), ctx));
        h = avg_pool2d(h, 2, 2, 2, 2);
        h = concat_axis1(h, quarter);
        h = relu(b3.forward(c3.forward(h), ctx));
        h = avg_pool2d(h, 2, 2, 2, 2);
        const size_t n = h.dim(0), c = h.dim(1);
        Tensor flat = global_avg_pool(reshape(h, {n, c, h.dim(2) * h.dim(3)}));
        return head.forward(flat);
    }
    void init(CounterRng& rng) {
        c1.init(rng); b1.init(rng); c2.init(rng); b2.init(rng); c3.init(rng); b3.init(rng);
        head.init(rng);
    }
    void params(std::vector<Tensor>& out) const {
        c1.params(out); b1.params(out); c2.params(out); b2.params(out); c3.params(out); b3.params(out);
        head.params(out);
    }
    void named(const std::string& p, NamedTensors& out) const {
        c1.named(p + ".c1", out); b1.named(p + ".b1", out);
        c2.named(p + ".c2", out); b2.named(p + ".b2", out);
        c3.named(p + ".c3", out); b3.named(p + ".b3", out);
        head.named(p + ".head", out);
    }
};

inline WaveletEncoder build_wavelet_encoder(const EncoderConfig& cfg) {
    if (cfg.family != EncoderFamily::wavelet) throw ContractError("build_wavelet_encoder: wrong family");
    cfg.validate();
    if (cfg.num_scales < 8 || cfg.length_in < 8)
        throw ConfigError("build_wavelet_encoder: scalogram must be at least 8 x 8");
    WaveletEncoder e;
    e.cfg = cfg;
    e.time_pool = (cfg.length_in + 63) / 64;
    const size_t n = cfg.width;  // pyramid base channel count
    const size_t c = cfg.channels_in;
    e.c1 = Conv2dLayer::make(c, n, 3, 1, 1);
    e.b1 = BatchNormLayer::make(n);
    e.c2 = Conv2dLayer::make(n + c, 2 * n, 3, 1, 1);
    e.b2 = BatchNormLayer::make(2 * n);
    e.c3 = Conv2dLayer::make(2 * n + c, 3 * n, 3, 1, 1);
    e.b3 = BatchNormLayer::make(3 * n);
    e.head = AffineLayer::make(3 * n, cfg.latent_dim);
    return e;
}

// ---------------------------------------------------------------------------
// Projector and latent mapper
// ---------------------------------------------------------------------------

struct Projector {
    AffineLayer a1, a2;

    Tensor forward(const Tensor& h) const { return a2.forward(relu(a1.forward(h))); }
    void init(CounterRng& rng) { a1.init(rng); a2.init(rng); }
    void params(std::vector<Tensor>& out) const { a1.params(out); a2.params(out); }
    void named(const std::string& p, NamedTensors& out) const {
        a1.named(p + ".a1", out);
        a2.named(p + ".a2", out);
    }
};

inline Projector build_projector(size_t d_in, size_t d_hidden, size_t d_out) {
    if (d_in < 1 || d_hidden < 1 || d_out < 1) throw ConfigError("build_projector: dims must be >= 1");
    Projector p;
    p.a1 = AffineLayer::make(d_in, d_hidden);
    p.a2 = AffineLayer::make(d_hidden, d_out);
    return p;
}

/// Treats a d-vector as a 1-channel sequence: conv (1 -> 64, k3, s2) then
/// transposed conv (64 -> 1, k3, s2) restoring the length. 449 parameters
/// for any even d.
struct LatentMapper {
    Conv1dLayer down;
    ConvT1dLayer up;

    Tensor forward(const Tensor& z) const {
        const size_t n = z.dim(0), d = z.dim(1);
        Tensor h = relu(down.forward(reshape(z, {n, 1, d})));
        return reshape(up.forward(h), {n, d});
    }
    void init(CounterRng& rng) { down.init(rng); up.init(rng); }
    void params(std::vector<Tensor>& out) const { down.params(out); up.params(out); }
    void named(const std::string& p, NamedTensors& out) const {
        down.named(p + ".down", out);
        up.named(p + ".up", out);
    }
};

inline LatentMapper build_mapper(size_t latent_len) {
    if (latent_len % 2 != 0) throw ConfigError("build_mapper: latent length must be even");
    LatentMapper m;
    m.down = Conv1dLayer::make(1, 64, 3, 2, 1);
    m.up = ConvT1dLayer::make(64, 1, 3, 2, 1, 1);
    return m;
}

inline size_t parameter_count(const std::vector<Tensor>& params) {
    size_t n = 0;
    for (const auto& p : params) n += p.size();
    return n;
}

// ---------------------------------------------------------------------------
// Encoder dispatch
// ---------------------------------------------------------------------------

/// N x d matrix of representations or embeddings in one domain.
struct EmbeddingSet {
    Tensor values;
    Tensor normalized(double eps = 1e-12) const { return l2_normalize(values, eps); }
    size_t n() const { return values.dim(0); }
    size_t dim() const { return values.dim(1); }
};

using Encoder = std::variant<TimeEncoder, FourierEncoder, WaveletEncoder>;

/// Encoder input in tensor form. Spectral views carry two planes.
struct ViewInput {
    EncoderFamily family;
    Tensor a;  // time window / magnitudes / scalogram
    Tensor b;  // phases (fourier only)

    static ViewInput time(Tensor x) { return {EncoderFamily::time, std::move(x), Tensor()}; }
    static ViewInput spectral(Tensor mag, Tensor ph) {
        return {EncoderFamily::fourier, std::move(mag), std::move(ph)};
    }
    static ViewInput scalogram(Tensor s) { return {EncoderFamily::wavelet, std::move(s), Tensor()}; }
};

inline EmbeddingSet forward_encode(Encoder& enc, const ViewInput& view, const TrainContext& ctx) {
    if (auto* t = std::get_if<TimeEncoder>(&enc)) {
        if (view.family != EncoderFamily::time)
            throw ContractError("forward_encode: time encoder fed a non-time view");
        return {t->forward(view.a, ctx)};
    }
    if (auto* f = std::get_if<FourierEncoder>(&enc)) {
        if (view.family != EncoderFamily::fourier)
            throw ContractError("forward_encode: fourier encoder fed a non-spectral view");
        return {f->forward(view.a, view.b, ctx)};
    }
    auto& w = std::get<WaveletEncoder>(enc);
    if (view.family != EncoderFamily::wavelet)
        throw ContractError("forward_encode: wavelet encoder fed a non-scalogram view");
    return {w.forward(view.a, ctx)};
}

// ---------------------------------------------------------------------------
// View tensors: turn batches and cached views into encoder inputs
// ---------------------------------------------------------------------------

inline Tensor time_tensor(const SignalBatch& b) {
    return Tensor::from({b.n, b.channels, b.length}, b.samples);
}

inline Tensor magnitude_tensor(const SpectralView& v) {
    return Tensor::from({v.n, v.channels, v.bins}, v.magnitudes);
}

inline Tensor phase_tensor(const SpectralView& v) {
    return Tensor::from({v.n, v.channels, v.bins}, v.phases);
}

inline Tensor scalogram_tensor(const ScalogramView& v) {
    return Tensor::from({v.n, v.channels, v.num_scales, v.length}, v.coefficients);
}

}  // namespace frameproj
