#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "frameproj/errors.hpp"
#include "frameproj/io.hpp"
#include "frameproj/sha256.hpp"
#include "frameproj/signal.hpp"

namespace frameproj {

// The two fixed projections: an orthonormal positive-frequency DFT and a
// Gabor/Morlet continuous wavelet transform
//
//   F(k)    = (1/sqrt(L)) * sum_n x(n) exp(-j 2 pi k n / L),   k = 0..floor(L/2)
//   W(a,b)  = (1/sqrt(a)) * sum_n x(n) conj(psi((n-b)/a)),
//   psi(t)  = exp(-t^2 / (2 sigma^2)) exp(j 2 pi xi t)
//
// The wavelet support is truncated at |t| <= 4 sigma with zero padding at the
// window boundaries; b ranges over every sample index.

struct WaveletConfig {
    size_t num_scales = 48;
    double scale_lo = 1.0;
    double scale_hi = 128.0;
    double sigma = 1.0;
    double xi = 5.0 / (2.0 * M_PI);  // cycles per unit of t; 2*pi*xi*t == 5t
    bool store_complex = false;
};

struct SpectralView {
    size_t n = 0, channels = 0, bins = 0;     // bins = floor(L/2)+1
    std::vector<double> magnitudes;           // n * channels * bins
    std::vector<double> phases;               // radians in (-pi, pi]; 0 for zero bins
};

struct ScalogramView {
    size_t n = 0, channels = 0, num_scales = 0, length = 0;
    std::vector<double> coefficients;  // |W|, n * channels * num_scales * length
    std::vector<double> scales;
    double sigma = 1.0;
    double xi = 5.0 / (2.0 * M_PI);
    // Complex planes, populated only when requested.
    std::vector<double> real_part;
    std::vector<double> imag_part;
    std::vector<std::string> warnings;
};

struct FrameBoundReport {
    double a_lower = 0.0;
    double b_upper = 0.0;
    double ratio = 0.0;
    size_t n_probes = 0;
};

// ---------------------------------------------------------------------------
// Orthonormal DFT
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_pow2(size_t v) { return v != 0 && (v & (v - 1)) == 0; }

/// Iterative radix-2 complex FFT, unnormalized.
inline void fft_radix2(std::vector<std::complex<double>>& a) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / double(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

}  // namespace detail

/// Number of positive-frequency bins for length L.
inline size_t dft_bins(size_t L) { return L / 2 + 1; }

/// Orthonormal DFT of a real signal, positive frequencies only.
/// Power-of-two lengths take a radix-2 FFT; other lengths use precomputed
/// twiddles indexed modulo L. The two paths agree to 1e-10.
inline std::vector<std::complex<double>> dft_ortho(const double* x, size_t L) {
    if (L < 2) throw DimensionError("dft_ortho: L must be >= 2");
    for (size_t i = 0; i < L; ++i)
        if (!std::isfinite(x[i])) throw NumericError("dft_ortho: non-finite input");
    const size_t K = dft_bins(L);
    const double norm = 1.0 / std::sqrt(double(L));
    std::vector<std::complex<double>> out(K);
    if (detail::is_pow2(L)) {
        std::vector<std::complex<double>> buf(L);
        for (size_t i = 0; i < L; ++i) buf[i] = x[i];
        detail::fft_radix2(buf);
        for (size_t k = 0; k < K; ++k) out[k] = buf[k] * norm;
    } else {
        std::vector<std::complex<double>> tw(L);
        for (size_t m = 0; m < L; ++m) {
            const double ang = -2.0 * M_PI * double(m) / double(L);
            tw[m] = {std::cos(ang), std::sin(ang)};
        }
        for (size_t k = 0; k < K; ++k) {
            std::complex<double> acc(0.0, 0.0);
            size_t idx = 0;
            for (size_t n = 0; n < L; ++n) {
                acc += x[n] * tw[idx];
                idx += k;
                if (idx >= L) idx -= L;
            }
            out[k] = acc * norm;
        }
    }
    return out;
}

inline std::vector<std::complex<double>> dft_ortho(const std::vector<double>& x) {
    return dft_ortho(x.data(), x.size());
}

/// Reconstruct the full two-sided spectrum from positive bins via conjugate
/// symmetry of real inputs: F(L-k) = conj(F(k)).
inline std::vector<std::complex<double>> full_spectrum(const std::vector<std::complex<double>>& pos,
                                                       size_t L) {
    if (pos.size() != dft_bins(L)) throw DimensionError("full_spectrum: bin count mismatch");
    std::vector<std::complex<double>> full(L);
    for (size_t k = 0; k < pos.size(); ++k) full[k] = pos[k];
    for (size_t k = 1; k < L - pos.size() + 1; ++k) full[L - k] = std::conj(pos[k]);
    return full;
}

/// Magnitude/phase decomposition of per-sample spectra.
inline SpectralView to_polar_view(const SignalBatch& batch) {
    const size_t K = dft_bins(batch.length);
    SpectralView v;
    v.n = batch.n;
    v.channels = batch.channels;
    v.bins = K;
    v.magnitudes.resize(batch.n * batch.channels * K);
    v.phases.resize(batch.n * batch.channels * K);
    for (size_t i = 0; i < batch.n; ++i)
        for (size_t c = 0; c < batch.channels; ++c) {
            const auto spec = dft_ortho(batch.window(i, c), batch.length);
            double* mag = v.magnitudes.data() + (i * batch.channels + c) * K;
            double* ph = v.phases.data() + (i * batch.channels + c) * K;
            for (size_t k = 0; k < K; ++k) {
                mag[k] = std::abs(spec[k]);
                if (mag[k] == 0.0) {
                    ph[k] = 0.0;
                } else {
                    double p = std::atan2(spec[k].imag(), spec[k].real());
                    if (p <= -M_PI) p = M_PI;
                    ph[k] = p;
                }
            }
        }
    return v;
}

/// Polar decomposition of a single spectrum: (magnitude, phase) pairs.
inline std::vector<std::pair<double, double>> to_polar(const std::vector<std::complex<double>>& spec) {
    std::vector<std::pair<double, double>> out(spec.size());
    for (size_t k = 0; k < spec.size(); ++k) {
        const double m = std::abs(spec[k]);
        double p = 0.0;
        if (m != 0.0) {
            p = std::atan2(spec[k].imag(), spec[k].real());
            if (p <= -M_PI) p = M_PI;
        }
        out[k] = {m, p};
    }
    return out;
}

/// Per-sample ratio of full-spectrum energy to signal energy; 1 for an
/// orthonormal transform, and defined as 1 for the zero signal.
inline std::vector<double> verify_parseval(const SignalBatch& batch) {
    std::vector<double> ratios(batch.n);
    for (size_t i = 0; i < batch.n; ++i) {
        double sig = 0.0, spec = 0.0;
        for (size_t c = 0; c < batch.channels; ++c) {
            const double* x = batch.window(i, c);
            for (size_t t = 0; t < batch.length; ++t) sig += x[t] * x[t];
            const auto full = full_spectrum(dft_ortho(x, batch.length), batch.length);
            for (const auto& f : full) spec += std::norm(f);
        }
        ratios[i] = sig == 0.0 ? 1.0 : spec / sig;
    }
    return ratios;
}

// ---------------------------------------------------------------------------
// Gabor / Morlet wavelet transform
// ---------------------------------------------------------------------------

/// Logarithmically spaced scales; endpoints are exact.
inline std::vector<double> morlet_scales(size_t num = 48, double lo = 1.0, double hi = 128.0) {
    if (num < 2) throw ConfigError("morlet_scales: num must be >= 2");
    if (!(lo > 0.0) || !(lo < hi)) throw ConfigError("morlet_scales: need 0 < lo < hi");
    std::vector<double> s(num);
    const double ratio = hi / lo;
    for (size_t i = 0; i < num; ++i) s[i] = lo * std::pow(ratio, double(i) / double(num - 1));
    s.front() = lo;
    s.back() = hi;
    return s;
}

namespace detail {

/// Conjugated, truncated wavelet taps for one scale, including the 1/sqrt(a)
/// factor: taps[m + r] = conj(psi(m/a)) / sqrt(a) for m in [-r, r].
inline void wavelet_taps(double a, double sigma, double xi, std::vector<double>& re,
                         std::vector<double>& im, long& radius) {
    radius = static_cast<long>(std::floor(4.0 * sigma * a));
    const size_t w = static_cast<size_t>(2 * radius + 1);
    re.resize(w);
    im.resize(w);
    const double inv_sqrt_a = 1.0 / std::sqrt(a);
    for (long m = -radius; m <= radius; ++m) {
        const double t = double(m) / a;
        const double env = std::exp(-t * t / (2.0 * sigma * sigma)) * inv_sqrt_a;
        const double ang = 2.0 * M_PI * xi * t;
        re[size_t(m + radius)] = env * std::cos(ang);
        im[size_t(m + radius)] = -env * std::sin(ang);
    }
}

}  // namespace detail

inline ScalogramView gabor_cwt(const SignalBatch& batch, const std::vector<double>& scales,
                               double sigma, double xi, bool store_complex = false) {
    if (!(sigma > 0.0)) throw ConfigError("gabor_cwt: sigma must be positive");
    if (scales.empty()) throw ConfigError("gabor_cwt: need at least one scale");
    for (double v : batch.samples)
        if (!std::isfinite(v)) throw NumericError("gabor_cwt: non-finite input");

    const size_t S = scales.size(), L = batch.length;
    ScalogramView view;
    view.n = batch.n;
    view.channels = batch.channels;
    view.num_scales = S;
    view.length = L;
    view.scales = scales;
    view.sigma = sigma;
    view.xi = xi;
    view.coefficients.assign(batch.n * batch.channels * S * L, 0.0);
    if (store_complex) {
        view.real_part.assign(view.coefficients.size(), 0.0);
        view.imag_part.assign(view.coefficients.size(), 0.0);
    }
    const double a_max = *std::max_element(scales.begin(), scales.end());
    if (a_max * 4.0 * sigma >= 8.0 * double(L))
        view.warnings.push_back("largest scale support exceeds 8x window length; coefficients are "
                                "dominated by boundary truncation");

    std::vector<double> tre, tim;
    for (size_t si = 0; si < S; ++si) {
        long r = 0;
        detail::wavelet_taps(scales[si], sigma, xi, tre, tim, r);
        for (size_t i = 0; i < batch.n; ++i)
            for (size_t c = 0; c < batch.channels; ++c) {
                const double* x = batch.window(i, c);
                const size_t base = ((i * batch.channels + c) * S + si) * L;
                for (size_t b = 0; b < L; ++b) {
                    const long m0 = std::max(-r, -long(b));
                    const long m1 = std::min(r, long(L) - 1 - long(b));
                    double acc_re = 0.0, acc_im = 0.0;
                    const double* xs = x + long(b) + m0;
                    const double* wr = tre.data() + (m0 + r);
                    const double* wi = tim.data() + (m0 + r);
                    const long span = m1 - m0 + 1;
                    for (long m = 0; m < span; ++m) {
                        acc_re += xs[m] * wr[m];
                        acc_im += xs[m] * wi[m];
                    }
                    view.coefficients[base + b] = std::sqrt(acc_re * acc_re + acc_im * acc_im);
                    if (store_complex) {
                        view.real_part[base + b] = acc_re;
                        view.imag_part[base + b] = acc_im;
                    }
                }
            }
    }
    return view;
}

inline ScalogramView gabor_cwt(const SignalBatch& batch, const WaveletConfig& cfg) {
    return gabor_cwt(batch, morlet_scales(cfg.num_scales, cfg.scale_lo, cfg.scale_hi), cfg.sigma,
                     cfg.xi, cfg.store_complex);
}

// ---------------------------------------------------------------------------
// Frame bounds
// ---------------------------------------------------------------------------

/// Empirical frame-inequality bounds of the truncated Gabor system: min and
/// max over unit-normalized probes of sum_{a,b} |W_x(a,b)|^2.
inline FrameBoundReport estimate_frame_bounds(const std::vector<double>& scales, double sigma,
                                              double xi, const SignalBatch& probes) {
    if (probes.n == 0) throw ContractError("estimate_frame_bounds: no probes");
    SignalBatch unit = probes;
    for (size_t i = 0; i < unit.n; ++i)
        for (size_t c = 0; c < unit.channels; ++c) {
            double* x = unit.window(i, c);
            double e = 0.0;
            for (size_t t = 0; t < unit.length; ++t) e += x[t] * x[t];
            if (e == 0.0) throw DegenerateVectorError("estimate_frame_bounds: zero-norm probe");
            const double inv = 1.0 / std::sqrt(e);
            for (size_t t = 0; t < unit.length; ++t) x[t] *= inv;
        }
    const ScalogramView view = gabor_cwt(unit, scales, sigma, xi);
    FrameBoundReport rep;
    rep.n_probes = unit.n * unit.channels;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    const size_t plane = view.num_scales * view.length;
    for (size_t p = 0; p < rep.n_probes; ++p) {
        double energy = 0.0;
        const double* w = view.coefficients.data() + p * plane;
        for (size_t t = 0; t < plane; ++t) energy += w[t] * w[t];
        lo = std::min(lo, energy);
        hi = std::max(hi, energy);
    }
    rep.a_lower = lo;
    rep.b_upper = hi;
    rep.ratio = hi / lo;
    return rep;
}

// ---------------------------------------------------------------------------
// View cache
//
// One file per view: magic "FPVC", u32 version = 1, 32-byte content hash,
// u32 view kind (1 = spectral, 2 = scalogram), kind-specific transform
// parameters, shape header (u32 rank, u32 per dimension), f64 payload.
// Spectral payload shape is (2, N, C, K): plane 0 magnitudes, plane 1 phases.
// ---------------------------------------------------------------------------

inline Sha256::Digest view_content_hash(const SignalBatch& batch, const WaveletConfig& cfg) {
    Sha256 h;
    h.update("FPVC", 4);
    h.update_u64(batch.n);
    h.update_u64(batch.channels);
    h.update_u64(batch.length);
    h.update_f64(batch.sample_rate);
    h.update_f64s(batch.samples);
    h.update_u32(static_cast<uint32_t>(cfg.num_scales));
    h.update_f64(cfg.scale_lo);
    h.update_f64(cfg.scale_hi);
    h.update_f64(cfg.sigma);
    h.update_f64(cfg.xi);
    return h.finish();
}

namespace detail {

inline void write_view_header(BinaryWriter& w, const Sha256::Digest& hash, uint32_t kind) {
    w.magic("FPVC");
    w.u32(1);
    w.bytes(hash.data(), hash.size());
    w.u32(kind);
}

inline Sha256::Digest read_view_header(BinaryReader& r, uint32_t expect_kind) {
    r.expect_magic("FPVC", "view cache");
    const uint32_t version = r.u32();
    if (version != 1) throw IoError("view cache: unsupported version");
    Sha256::Digest hash;
    r.bytes(hash.data(), hash.size());
    const uint32_t kind = r.u32();
    if (kind != expect_kind) throw IoError("view cache: wrong view kind");
    return hash;
}

inline void write_shape(BinaryWriter& w, const std::vector<size_t>& dims) {
    w.u32(static_cast<uint32_t>(dims.size()));
    for (size_t d : dims) w.u32(static_cast<uint32_t>(d));
}

inline std::vector<size_t> read_shape(BinaryReader& r) {
    const uint32_t rank = r.u32();
    if (rank > 8) throw IoError("view cache: implausible rank");
    std::vector<size_t> dims(rank);
    for (auto& d : dims) d = r.u32();
    return dims;
}

}  // namespace detail

inline void save_spectral(const std::string& path, const SpectralView& v, const Sha256::Digest& hash) {
    BinaryWriter w(path);
    detail::write_view_header(w, hash, 1);
    detail::write_shape(w, {2, v.n, v.channels, v.bins});
    w.f64s(v.magnitudes);
    w.f64s(v.phases);
    w.close();
}

inline SpectralView load_spectral(const std::string& path, const Sha256::Digest& expected) {
    BinaryReader r(path);
    const auto hash = detail::read_view_header(r, 1);
    if (hash != expected) throw StaleCacheError("spectral view does not match dataset/parameters");
    const auto dims = detail::read_shape(r);
    if (dims.size() != 4 || dims[0] != 2) throw IoError("spectral view: bad shape header");
    SpectralView v;
    v.n = dims[1];
    v.channels = dims[2];
    v.bins = dims[3];
    const size_t plane = v.n * v.channels * v.bins;
    v.magnitudes = r.f64s(plane);
    v.phases = r.f64s(plane);
    return v;
}

inline void save_scalogram(const std::string& path, const ScalogramView& v, const Sha256::Digest& hash) {
    BinaryWriter w(path);
    detail::write_view_header(w, hash, 2);
    w.u32(static_cast<uint32_t>(v.scales.size()));
    w.f64s(v.scales);
    w.f64(v.sigma);
    w.f64(v.xi);
    detail::write_shape(w, {v.n, v.channels, v.num_scales, v.length});
    w.f64s(v.coefficients);
    w.close();
}

inline ScalogramView load_scalogram(const std::string& path, const Sha256::Digest& expected) {
    BinaryReader r(path);
    const auto hash = detail::read_view_header(r, 2);
    if (hash != expected) throw StaleCacheError("scalogram view does not match dataset/parameters");
    ScalogramView v;
    const uint32_t S = r.u32();
    v.scales = r.f64s(S);
    v.sigma = r.f64();
    v.xi = r.f64();
    const auto dims = detail::read_shape(r);
    if (dims.size() != 4 || dims[2] != S) throw IoError("scalogram view: bad shape header");
    v.n = dims[0];
    v.channels = dims[1];
    v.num_scales = dims[2];
    v.length = dims[3];
    v.coefficients = r.f64s(v.n * v.channels * v.num_scales * v.length);
    return v;
}

struct CachedViews {
    SpectralView spectral;
    ScalogramView scalogram;
    Sha256::Digest hash;
};

/// Compute both views and write them under dir/ as spectral.fpvc and
/// scalogram.fpvc, keyed by a content hash of (data, transform parameters).
inline CachedViews cache_views(const SignalBatch& batch, const WaveletConfig& cfg,
                               const std::string& dir) {
    CachedViews out;
    out.hash = view_content_hash(batch, cfg);
    out.spectral = to_polar_view(batch);
    out.scalogram = gabor_cwt(batch, cfg);
    save_spectral(dir + "/spectral.fpvc", out.spectral, out.hash);
    save_scalogram(dir + "/scalogram.fpvc", out.scalogram, out.hash);
    return out;
}

/// Reload previously cached views, validating them against the batch and
/// parameters they claim to be derived from.
inline CachedViews load_views(const SignalBatch& batch, const WaveletConfig& cfg,
                              const std::string& dir) {
    CachedViews out;
    out.hash = view_content_hash(batch, cfg);
    out.spectral = load_spectral(dir + "/spectral.fpvc", out.hash);
    out.scalogram = load_scalogram(dir + "/scalogram.fpvc", out.hash);
    return out;
}

}  // namespace frameproj
