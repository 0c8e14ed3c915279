#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "frameproj/errors.hpp"

namespace frameproj {

/// A batch of raw time-domain windows: N samples x C channels x L timesteps,
/// row-major. Labels are optional and live in the dataset layer.
struct SignalBatch {
    size_t n = 0;
    size_t channels = 0;
    size_t length = 0;
    std::vector<double> samples;  // n * channels * length
    double sample_rate = 1.0;     // Hz, metadata only

    SignalBatch() = default;
    SignalBatch(size_t n_, size_t c_, size_t l_, double rate = 1.0)
        : n(n_), channels(c_), length(l_), samples(n_ * c_ * l_, 0.0), sample_rate(rate) {}

    double* window(size_t i, size_t c) { return samples.data() + (i * channels + c) * length; }
    const double* window(size_t i, size_t c) const {
        return samples.data() + (i * channels + c) * length;
    }

    void validate() const {
        if (samples.size() != n * channels * length)
            throw DimensionError("SignalBatch: buffer size does not match (n, C, L)");
        if (length < 8) throw DimensionError("SignalBatch: L must be >= 8");
        for (double v : samples)
            if (!std::isfinite(v)) throw NumericError("SignalBatch: non-finite sample");
    }
};

}  // namespace frameproj
