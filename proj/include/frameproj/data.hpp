#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "frameproj/errors.hpp"
#include "frameproj/io.hpp"
#include "frameproj/rng.hpp"
#include "frameproj/sha256.hpp"
#include "frameproj/signal.hpp"

namespace frameproj {

// Synthetic datasets carrying both global-frequency structure (class-specific
// sinusoid sets) and local-transient structure (one Gaussian burst per window
// at a class-specific timescale), so both projections see class signal.
// Generation is counter-based per sample: byte-identical for a fixed
// (config, seed) regardless of generation order.

enum class LabelKind : uint8_t { none = 0, class_id = 1, target = 2 };
enum class Split : uint8_t { train = 0, val = 1, test = 2 };

struct ClassSpec {
    std::vector<double> frequencies_hz;
    double transient_width = 4.0;      // samples
    double transient_amplitude = 1.0;  // 0 disables the burst
};

struct SyntheticConfig {
    size_t n_classes = 3;
    size_t samples_per_class = 300;
    size_t length = 128;
    double sample_rate = 32.0;
    std::vector<ClassSpec> classes = {
        {{3.0}, 2.0, 1.0},
        {{6.0}, 6.0, 1.0},
        {{10.0}, 18.0, 1.0},
    };
    double noise_std = 0.1;
    double train_fraction = 2.0 / 3.0;
    double val_fraction = 0.0;

    // Regression band (generate_synthetic_regression).
    double band_lo_hz = 2.0;
    double band_hi_hz = 12.0;
    double harmonic_amplitude = 0.3;
    double target_scale = 1.0;  // e.g. 60 for a beats-per-minute-like target

    void validate() const {
        if (n_classes < 1 || classes.size() != n_classes)
            throw ConfigError("SyntheticConfig: class spec count must equal n_classes");
        if (length < 8) throw ConfigError("SyntheticConfig: length must be >= 8");
        for (const auto& c : classes) {
            if (c.frequencies_hz.empty()) throw ConfigError("SyntheticConfig: class without frequencies");
            for (double f : c.frequencies_hz)
                if (!(f < sample_rate / 2.0))
                    throw ConfigError("SyntheticConfig: frequency >= Nyquist");
        }
        if (!(band_hi_hz < sample_rate / 2.0)) throw ConfigError("SyntheticConfig: band >= Nyquist");
        if (!(band_lo_hz > 0.0) || !(band_lo_hz < band_hi_hz))
            throw ConfigError("SyntheticConfig: bad regression band");
        if (train_fraction < 0 || val_fraction < 0 || train_fraction + val_fraction > 1.0)
            throw ConfigError("SyntheticConfig: bad split fractions");
    }

    std::string manifest(uint64_t seed, const std::string& task) const {
        std::ostringstream os;
        os << "task=" << task << "\n";
        os << "rng=" << CounterRng::algorithm_name() << "\n";
        os << "seed=" << seed << "\n";
        os << "n_classes=" << n_classes << "\n";
        os << "samples_per_class=" << samples_per_class << "\n";
        os << "length=" << length << "\n";
        os << "sample_rate=" << sample_rate << "\n";
        for (size_t c = 0; c < classes.size(); ++c) {
            os << "class" << c << ".frequencies=";
            for (size_t i = 0; i < classes[c].frequencies_hz.size(); ++i)
                os << (i ? ";" : "") << classes[c].frequencies_hz[i];
            os << "\nclass" << c << ".transient_width=" << classes[c].transient_width << "\n";
            os << "class" << c << ".transient_amplitude=" << classes[c].transient_amplitude << "\n";
        }
        os << "noise_std=" << noise_std << "\n";
        os << "train_fraction=" << train_fraction << "\n";
        os << "val_fraction=" << val_fraction << "\n";
        os << "band_lo_hz=" << band_lo_hz << "\nband_hi_hz=" << band_hi_hz << "\n";
        os << "harmonic_amplitude=" << harmonic_amplitude << "\n";
        os << "target_scale=" << target_scale << "\n";
        return os.str();
    }
};

struct LabeledDataset {
    SignalBatch batch;
    LabelKind label_kind = LabelKind::none;
    std::vector<double> labels;  // class ids or regression targets
    std::vector<Split> splits;
    std::string manifest;

    std::vector<size_t> split_indices(Split s) const {
        std::vector<size_t> out;
        for (size_t i = 0; i < splits.size(); ++i)
            if (splits[i] == s) out.push_back(i);
        return out;
    }

    /// Rows of one split as a standalone dataset.
    LabeledDataset subset(Split s) const {
        const auto idx = split_indices(s);
        LabeledDataset out;
        out.batch = SignalBatch(idx.size(), batch.channels, batch.length, batch.sample_rate);
        out.label_kind = label_kind;
        out.manifest = manifest;
        for (size_t i = 0; i < idx.size(); ++i) {
            std::copy_n(batch.samples.data() + idx[i] * batch.channels * batch.length,
                        batch.channels * batch.length,
                        out.batch.samples.data() + i * batch.channels * batch.length);
            if (label_kind != LabelKind::none) out.labels.push_back(labels[idx[i]]);
            out.splits.push_back(s);
        }
        return out;
    }

    std::string content_hash() const {
        Sha256 h;
        h.update_u64(batch.n);
        h.update_u64(batch.channels);
        h.update_u64(batch.length);
        h.update_f64(batch.sample_rate);
        h.update_f64s(batch.samples);
        h.update_u32(uint32_t(label_kind));
        h.update_f64s(labels);
        for (Split s : splits) h.update_u32(uint32_t(s));
        return Sha256::hex(h.finish());
    }
};

namespace detail {

/// Per-sample splits laid out class-contiguously: within each class, the
/// first train_fraction go to train, then val, then test.
inline Split split_of(size_t index_in_class, size_t per_class, const SyntheticConfig& cfg) {
    const size_t n_train = size_t(std::floor(cfg.train_fraction * double(per_class)));
    const size_t n_val = size_t(std::floor(cfg.val_fraction * double(per_class)));
    if (index_in_class < n_train) return Split::train;
    if (index_in_class < n_train + n_val) return Split::val;
    return Split::test;
}

}  // namespace detail

inline LabeledDataset generate_synthetic_classification(const SyntheticConfig& cfg, uint64_t seed) {
    cfg.validate();
    const size_t n = cfg.n_classes * cfg.samples_per_class;
    LabeledDataset ds;
    ds.batch = SignalBatch(n, 1, cfg.length, cfg.sample_rate);
    ds.label_kind = LabelKind::class_id;
    ds.labels.resize(n);
    ds.splits.resize(n);
    ds.manifest = cfg.manifest(seed, "classification");

    for (size_t c = 0; c < cfg.n_classes; ++c) {
        const ClassSpec& spec = cfg.classes[c];
        for (size_t j = 0; j < cfg.samples_per_class; ++j) {
            const size_t i = c * cfg.samples_per_class + j;
            CounterRng rng(seed, 1000 + i);  // one stream per sample
            double* x = ds.batch.window(i, 0);

            for (double f : spec.frequencies_hz) {
                const double phase = rng.uniform(0.0, 2.0 * M_PI);
                const double w = 2.0 * M_PI * f / cfg.sample_rate;
                for (size_t t = 0; t < cfg.length; ++t) x[t] += std::sin(w * double(t) + phase);
            }
            if (spec.transient_amplitude != 0.0) {
                const double margin = 2.0 * spec.transient_width;
                const double lo = std::min(margin, double(cfg.length) / 4.0);
                const double center = rng.uniform(lo, double(cfg.length) - lo);
                const double w2 = 2.0 * spec.transient_width * spec.transient_width;
                for (size_t t = 0; t < cfg.length; ++t) {
                    const double dt = double(t) - center;
                    x[t] += spec.transient_amplitude * std::exp(-dt * dt / w2);
                }
            }
            if (cfg.noise_std > 0.0)
                for (size_t t = 0; t < cfg.length; ++t) x[t] += rng.normal(0.0, cfg.noise_std);

            ds.labels[i] = double(c);
            ds.splits[i] = detail::split_of(j, cfg.samples_per_class, cfg);
        }
    }
    return ds;
}

inline LabeledDataset generate_synthetic_regression(const SyntheticConfig& cfg, uint64_t seed) {
    cfg.validate();
    const size_t n = cfg.n_classes * cfg.samples_per_class;  // same budget as classification
    LabeledDataset ds;
    ds.batch = SignalBatch(n, 1, cfg.length, cfg.sample_rate);
    ds.label_kind = LabelKind::target;
    ds.labels.resize(n);
    ds.splits.resize(n);
    ds.manifest = cfg.manifest(seed, "regression");

    for (size_t i = 0; i < n; ++i) {
        CounterRng rng(seed, 2000000 + i);
        double* x = ds.batch.window(i, 0);
        const double f = rng.uniform(cfg.band_lo_hz, cfg.band_hi_hz);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double w = 2.0 * M_PI * f / cfg.sample_rate;
        const bool harmonic_ok = 2.0 * f < cfg.sample_rate / 2.0;
        const double phase2 = rng.uniform(0.0, 2.0 * M_PI);
        for (size_t t = 0; t < cfg.length; ++t) {
            x[t] = std::sin(w * double(t) + phase);
            if (harmonic_ok && cfg.harmonic_amplitude != 0.0)
                x[t] += cfg.harmonic_amplitude * std::sin(2.0 * w * double(t) + phase2);
        }
        if (cfg.noise_std > 0.0)
            for (size_t t = 0; t < cfg.length; ++t) x[t] += rng.normal(0.0, cfg.noise_std);
        ds.labels[i] = f * cfg.target_scale;
        ds.splits[i] = detail::split_of(i % cfg.samples_per_class, cfg.samples_per_class, cfg);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Normalization and windowing
// ---------------------------------------------------------------------------

struct ZScoreResult {
    SignalBatch batch;
    std::vector<uint8_t> degenerate;  // n * channels flags: centered only
};

/// Per-channel per-window z-score with population std. Windows with
/// std <= 1e-12 are centered and flagged instead of divided.
inline ZScoreResult zscore_normalize(const SignalBatch& in) {
    ZScoreResult res;
    res.batch = in;
    res.degenerate.assign(in.n * in.channels, 0);
    for (size_t i = 0; i < in.n; ++i)
        for (size_t c = 0; c < in.channels; ++c) {
            double* x = res.batch.window(i, c);
            double mean = 0.0;
            for (size_t t = 0; t < in.length; ++t) mean += x[t];
            mean /= double(in.length);
            double var = 0.0;
            for (size_t t = 0; t < in.length; ++t) {
                x[t] -= mean;
                var += x[t] * x[t];
            }
            const double sd = std::sqrt(var / double(in.length));
            if (sd > 1e-12) {
                const double inv = 1.0 / sd;
                for (size_t t = 0; t < in.length; ++t) x[t] *= inv;
            } else {
                res.degenerate[i * in.channels + c] = 1;
            }
        }
    return res;
}

/// Slide a window over a continuous multichannel series (C x T, row-major
/// per channel); the trailing remainder is dropped.
inline SignalBatch window_signal(const std::vector<double>& series, size_t channels, size_t win_len,
                                 size_t stride, double sample_rate = 1.0) {
    if (channels == 0 || series.size() % channels != 0)
        throw DimensionError("window_signal: series length not divisible by channel count");
    const size_t total = series.size() / channels;
    if (win_len == 0 || stride == 0) throw ContractError("window_signal: win_len and stride must be > 0");
    if (win_len > total) throw ContractError("window_signal: window longer than series");
    const size_t n = (total - win_len) / stride + 1;
    SignalBatch out(n, channels, win_len, sample_rate);
    for (size_t i = 0; i < n; ++i)
        for (size_t c = 0; c < channels; ++c)
            std::copy_n(series.data() + c * total + i * stride, win_len, out.window(i, c));
    return out;
}

// ---------------------------------------------------------------------------
// Dataset file: magic "FPDS", u32 version, u32 n, u32 C, u32 L,
// u8 label kind, u8 split-present flag, f64 samples, labels
// (i32 class ids or f64 targets), u8 splits. The generation manifest rides
// in a sidecar "<path>.manifest" so the binary layout stays as specified.
// ---------------------------------------------------------------------------

inline void write_dataset(const LabeledDataset& ds, const std::string& path) {
    BinaryWriter w(path);
    w.magic("FPDS");
    w.u32(1);
    w.u32(uint32_t(ds.batch.n));
    w.u32(uint32_t(ds.batch.channels));
    w.u32(uint32_t(ds.batch.length));
    w.u8(uint8_t(ds.label_kind));
    w.u8(ds.splits.empty() ? 0 : 1);
    w.f64s(ds.batch.samples);
    if (ds.label_kind == LabelKind::class_id)
        for (double v : ds.labels) w.i32(int32_t(v));
    else if (ds.label_kind == LabelKind::target)
        for (double v : ds.labels) w.f64(v);
    if (!ds.splits.empty())
        for (Split s : ds.splits) w.u8(uint8_t(s));
    w.close();

    std::ofstream mf(path + ".manifest");
    if (!mf) throw IoError("cannot write manifest beside " + path);
    mf << "sample_rate=" << ds.batch.sample_rate << "\n" << ds.manifest;
}

inline LabeledDataset read_dataset(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic("FPDS", "dataset");
    if (r.u32() != 1) throw IoError("dataset: unsupported version");
    LabeledDataset ds;
    const size_t n = r.u32(), c = r.u32(), l = r.u32();
    ds.label_kind = LabelKind(r.u8());
    const bool has_splits = r.u8() != 0;
    ds.batch = SignalBatch(n, c, l);
    ds.batch.samples = r.f64s(n * c * l);
    if (ds.label_kind == LabelKind::class_id) {
        ds.labels.resize(n);
        for (auto& v : ds.labels) v = double(r.i32());
    } else if (ds.label_kind == LabelKind::target) {
        ds.labels = r.f64s(n);
    }
    if (has_splits) {
        ds.splits.resize(n);
        for (auto& s : ds.splits) s = Split(r.u8());
    }
    std::ifstream mf(path + ".manifest");
    if (mf) {
        std::ostringstream os;
        std::string first_line;
        std::getline(mf, first_line);  // sample_rate=...
        if (first_line.rfind("sample_rate=", 0) == 0)
            ds.batch.sample_rate = std::stod(first_line.substr(12));
        os << mf.rdbuf();
        ds.manifest = os.str();
    }
    return ds;
}

// ---------------------------------------------------------------------------
// CSV ingestion. The schema declares how rows map onto windows:
//   layout=flattened     one row per window: C*L sample columns, then label
//   layout=per_timestep  one row per timestep: C channel columns (windowing
//                        is applied afterwards via window_signal)
// ---------------------------------------------------------------------------

struct CsvSchema {
    enum class Layout { flattened, per_timestep } layout = Layout::flattened;
    size_t channels = 1;
    size_t length = 128;        // flattened window length
    bool has_label = false;     // label in the last column
    LabelKind label_kind = LabelKind::class_id;
    double sample_rate = 1.0;
};

inline LabeledDataset read_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open csv: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ParseError("not a number: '" + cell + "'", line_no);
            }
        }
        const size_t expect = (schema.layout == CsvSchema::Layout::flattened
                                   ? schema.channels * schema.length
                                   : schema.channels) +
                              (schema.has_label ? 1 : 0);
        if (row.size() != expect)
            throw ParseError("expected " + std::to_string(expect) + " columns, got " +
                                 std::to_string(row.size()),
                             line_no);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("empty csv", 0);

    LabeledDataset ds;
    if (schema.layout == CsvSchema::Layout::flattened) {
        ds.batch = SignalBatch(rows.size(), schema.channels, schema.length, schema.sample_rate);
        for (size_t i = 0; i < rows.size(); ++i) {
            std::copy_n(rows[i].data(), schema.channels * schema.length,
                        ds.batch.samples.data() + i * schema.channels * schema.length);
            if (schema.has_label) ds.labels.push_back(rows[i].back());
        }
    } else {
        std::vector<double> series(schema.channels * rows.size());
        for (size_t t = 0; t < rows.size(); ++t)
            for (size_t c = 0; c < schema.channels; ++c) series[c * rows.size() + t] = rows[t][c];
        ds.batch = window_signal(series, schema.channels, schema.length, schema.length,
                                 schema.sample_rate);
        // per-timestep labels are not windowed; leave unlabeled
    }
    ds.label_kind = schema.has_label && schema.layout == CsvSchema::Layout::flattened
                        ? schema.label_kind
                        : LabelKind::none;
    ds.manifest = "source=csv\npath=" + path + "\n";
    return ds;
}

}  // namespace frameproj
