#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "frameproj/errors.hpp"
#include "frameproj/objectives.hpp"
#include "frameproj/rng.hpp"

namespace frameproj {

// Numerical validation of the two geometric propositions.
//
// Proposition 1 (invariance lower bound): if an encoder is invariant to an
// unintended transformation, K duplicated negatives with similarity 1-delta
// force NT-Xent >= log(1 + K exp(-delta/tau)); at delta = 0 this is
// log(K+1). Checked by constructing batches with exact inner products and
// evaluating the actual loss.
//
// Proposition 2 (angle concentration vs pairwise spread): same-index angles
// of independent uniform sphere samples concentrate at pi/2 with
// Var[<u,v>] = 1/d and Levy tail 2 exp(-(d-2) eps^2 / 2), while pairwise
// angle differences can reach +-pi, realized here by the proof's explicit
// construction in the orthogonal complement.

struct AngleStats {
    std::vector<double> same_sample_angles;  // radians in [0, pi]
    std::vector<double> delta_ij;            // signed, in [-pi, pi]
    double mean_same = 0.0, std_same = 0.0, min_same = 0.0, max_same = 0.0;
    double mean_delta = 0.0, std_delta = 0.0, min_delta = 0.0, max_delta = 0.0;
};

struct InvarianceBatchSpec {
    size_t k_near = 1;   // K >= 1 near-positive negatives
    double delta = 0.0;  // similarity deficit of the near-positives
    size_t n_far = 0;    // R far (orthogonal) negatives
    size_t dim = 16;
    double s_pos = 1.0;

    void validate() const {
        if (k_near < 1) throw ContractError("InvarianceBatchSpec: K must be >= 1");
        if (delta < 0.0 || delta >= 1.0) throw ContractError("InvarianceBatchSpec: delta in [0,1)");
        if (dim < 3) throw ContractError("InvarianceBatchSpec: dim must be >= 3");
        if (s_pos < -1.0 || s_pos > 1.0) throw ContractError("InvarianceBatchSpec: s_pos in [-1,1]");
    }
};

struct InvarianceBatch {
    std::vector<double> anchor;
    std::vector<double> positive;
    std::vector<std::vector<double>> negatives;  // K near-positives then R far
};

struct BoundCheckReport {
    double measured_loss = 0.0;
    double analytic_bound = 0.0;
    double slack = 0.0;  // measured - bound
    bool pass = false;
};

// ---------------------------------------------------------------------------
// Angles
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> unit_row(const std::vector<double>& m, size_t i, size_t d) {
    std::vector<double> v(m.begin() + long(i * d), m.begin() + long((i + 1) * d));
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 < 1e-24) throw DegenerateVectorError("angle computation: zero row");
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
    return v;
}

inline double angle_between(const std::vector<double>& u, const std::vector<double>& v) {
    double dot = 0.0;
    for (size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
    return std::acos(std::clamp(dot, -1.0, 1.0));
}

inline void summarize(const std::vector<double>& xs, double& mean, double& sd, double& lo,
                      double& hi) {
    if (xs.empty()) {
        mean = sd = lo = hi = 0.0;
        return;
    }
    mean = 0.0;
    lo = xs[0];
    hi = xs[0];
    for (double x : xs) {
        mean += x;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    mean /= double(xs.size());
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    sd = std::sqrt(acc / double(xs.size()));
}

}  // namespace detail

/// theta_i = arccos <h_a_i, h_b_i> on unit-normalized rows of (N x d) sets.
inline std::vector<double> same_sample_angles(const std::vector<double>& h_a,
                                              const std::vector<double>& h_b, size_t n, size_t d) {
    if (h_a.size() != n * d || h_b.size() != n * d)
        throw DimensionError("same_sample_angles: sets must both be (N x d)");
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i)
        out[i] = detail::angle_between(detail::unit_row(h_a, i, d), detail::unit_row(h_b, i, d));
    return out;
}

/// Delta_ij = arccos<a_i,a_j> - arccos<b_i,b_j> for all i < j.
inline std::vector<double> pairwise_angle_spread(const std::vector<double>& h_a,
                                                 const std::vector<double>& h_b, size_t n, size_t d) {
    if (n < 2) throw ContractError("pairwise_angle_spread: needs N >= 2");
    if (h_a.size() != n * d || h_b.size() != n * d)
        throw DimensionError("pairwise_angle_spread: sets must both be (N x d)");
    std::vector<std::vector<double>> ua(n), ub(n);
    for (size_t i = 0; i < n; ++i) {
        ua[i] = detail::unit_row(h_a, i, d);
        ub[i] = detail::unit_row(h_b, i, d);
    }
    std::vector<double> out;
    out.reserve(n * (n - 1) / 2);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j)
            out.push_back(detail::angle_between(ua[i], ua[j]) - detail::angle_between(ub[i], ub[j]));
    return out;
}

inline AngleStats angle_stats(const std::vector<double>& h_a, const std::vector<double>& h_b,
                              size_t n, size_t d) {
    AngleStats s;
    s.same_sample_angles = same_sample_angles(h_a, h_b, n, d);
    s.delta_ij = pairwise_angle_spread(h_a, h_b, n, d);
    detail::summarize(s.same_sample_angles, s.mean_same, s.std_same, s.min_same, s.max_same);
    detail::summarize(s.delta_ij, s.mean_delta, s.std_delta, s.min_delta, s.max_delta);
    return s;
}

/// Levy tail bound: Pr(|<u,v>| > eps) <= 2 exp(-(d-2) eps^2 / 2).
inline double levy_bound(size_t d, double eps) {
    if (d < 3) throw ContractError("levy_bound: d must be >= 3");
    if (!(eps > 0.0) || eps >= 1.0) throw ContractError("levy_bound: eps in (0,1)");
    return 2.0 * std::exp(-double(d - 2) * eps * eps / 2.0);
}

/// Euclidean distances per unordered pair in both spaces, scatter-ready.
inline std::vector<std::pair<double, double>> pairwise_l2_table(const std::vector<double>& h_a,
                                                                const std::vector<double>& h_b,
                                                                size_t n, size_t d) {
    if (n < 2) throw ContractError("pairwise_l2_table: needs N >= 2");
    if (h_a.size() != n * d || h_b.size() != n * d)
        throw DimensionError("pairwise_l2_table: sets must both be (N x d)");
    auto dist = [&](const std::vector<double>& m, size_t i, size_t j) {
        double acc = 0.0;
        for (size_t k = 0; k < d; ++k) {
            const double diff = m[i * d + k] - m[j * d + k];
            acc += diff * diff;
        }
        return std::sqrt(acc);
    };
    std::vector<std::pair<double, double>> out;
    out.reserve(n * (n - 1) / 2);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) out.push_back({dist(h_a, i, j), dist(h_b, i, j)});
    return out;
}

struct Histogram {
    std::vector<double> edges;   // bins + 1 values
    std::vector<size_t> counts;  // bins values
};

/// Uniform-bin histogram over [lo, hi]; counts conserve the sample count.
inline Histogram radial_histogram(const std::vector<double>& angles, size_t bins, double lo,
                                  double hi) {
    if (bins < 4) throw ContractError("radial_histogram: bins must be >= 4");
    if (!(lo < hi)) throw ContractError("radial_histogram: empty range");
    Histogram h;
    h.edges.resize(bins + 1);
    for (size_t i = 0; i <= bins; ++i) h.edges[i] = lo + (hi - lo) * double(i) / double(bins);
    h.counts.assign(bins, 0);
    for (double a : angles) {
        long b = long(std::floor((a - lo) / (hi - lo) * double(bins)));
        b = std::clamp(b, long(0), long(bins) - 1);
        ++h.counts[size_t(b)];
    }
    return h;
}

inline Histogram radial_histogram(const std::vector<double>& angles, size_t bins) {
    return radial_histogram(angles, bins, 0.0, M_PI);
}

// ---------------------------------------------------------------------------
// Proposition 1
// ---------------------------------------------------------------------------

/// Build anchor/positive/negatives with exact inner products against the
/// anchor: <a,p> = s_pos, <a,n_k> = 1-delta for the K near-positives, and
/// <a,r> = 0 for the R far negatives. Each vector uses its own direction in
/// the anchor's orthogonal complement, which needs d >= 2 + K + R.
inline InvarianceBatch build_invariance_batch(const InvarianceBatchSpec& spec) {
    spec.validate();
    const size_t needed = 2 + spec.k_near + spec.n_far;
    if (spec.dim < needed)
        throw ConstructionError("build_invariance_batch: dim " + std::to_string(spec.dim) +
                                " too small for " + std::to_string(needed) + " directions");
    const size_t d = spec.dim;
    auto basis_vec = [d](size_t axis) {
        std::vector<double> v(d, 0.0);
        v[axis] = 1.0;
        return v;
    };
    auto combine = [d](double c0, const std::vector<double>& e0, double c1,
                       const std::vector<double>& e1) {
        std::vector<double> v(d, 0.0);
        for (size_t i = 0; i < d; ++i) v[i] = c0 * e0[i] + c1 * e1[i];
        return v;
    };

    InvarianceBatch batch;
    batch.anchor = basis_vec(0);
    batch.positive = combine(spec.s_pos, basis_vec(0), std::sqrt(std::max(0.0, 1.0 - spec.s_pos * spec.s_pos)),
                             basis_vec(1));
    size_t axis = 2;
    const double near_sim = 1.0 - spec.delta;
    for (size_t k = 0; k < spec.k_near; ++k)
        batch.negatives.push_back(combine(near_sim, basis_vec(0),
                                          std::sqrt(std::max(0.0, 1.0 - near_sim * near_sim)),
                                          basis_vec(axis++)));
    for (size_t r = 0; r < spec.n_far; ++r) batch.negatives.push_back(basis_vec(axis++));
    return batch;
}

/// log(1 + K exp(-delta/tau)); log(K+1) at delta = 0.
inline double ntxent_lower_bound(size_t k, double delta, double tau) {
    if (k < 1) throw ContractError("ntxent_lower_bound: K must be >= 1");
    if (delta < 0.0 || delta >= 1.0) throw ContractError("ntxent_lower_bound: delta in [0,1)");
    if (!(tau > 0.0)) throw ContractError("ntxent_lower_bound: tau must be positive");
    return std::log(1.0 + double(k) * std::exp(-delta / tau));
}

/// Evaluate the actual NT-Xent loss (positive-in-denominator convention) on
/// the constructed batch and compare against the analytic bound.
inline BoundCheckReport check_invariance_bound(const InvarianceBatchSpec& spec, double tau) {
    const InvarianceBatch batch = build_invariance_batch(spec);
    BoundCheckReport rep;
    rep.measured_loss = ntxent_anchor(batch.anchor, batch.positive, batch.negatives, tau, true);
    rep.analytic_bound = ntxent_lower_bound(spec.k_near, spec.delta, tau);
    rep.slack = rep.measured_loss - rep.analytic_bound;
    rep.pass = rep.slack >= -1e-9;
    return rep;
}

// ---------------------------------------------------------------------------
// Sphere sampling and emitters
// ---------------------------------------------------------------------------

/// N independent Unif(S^{d-1}) rows.
inline std::vector<double> sample_sphere_matrix(size_t n, size_t d, CounterRng& rng) {
    std::vector<double> m(n * d);
    for (size_t i = 0; i < n; ++i) {
        const auto v = rng.unit_sphere(d);
        std::copy(v.begin(), v.end(), m.begin() + long(i * d));
    }
    return m;
}

inline std::string angles_csv(const AngleStats& s) {
    std::string out = "kind,value\n";
    char buf[64];
    for (double a : s.same_sample_angles) {
        std::snprintf(buf, sizeof buf, "same,%.12g\n", a);
        out += buf;
    }
    for (double dd : s.delta_ij) {
        std::snprintf(buf, sizeof buf, "delta,%.12g\n", dd);
        out += buf;
    }
    return out;
}

inline std::string histogram_csv(const Histogram& h) {
    std::string out = "bin_lo,bin_hi,count\n";
    char buf[96];
    for (size_t i = 0; i < h.counts.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%zu\n", h.edges[i], h.edges[i + 1], h.counts[i]);
        out += buf;
    }
    return out;
}

inline std::string l2_table_csv(const std::vector<std::pair<double, double>>& table) {
    std::string out = "d_a,d_b\n";
    char buf[80];
    for (const auto& [da, db] : table) {
        std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", da, db);
        out += buf;
    }
    return out;
}

/// Self-contained polar-histogram SVG (wedge area tracks bin count).
inline std::string histogram_svg(const Histogram& h, double angle_lo, double angle_hi,
                                 const std::string& title) {
    const double cx = 200, cy = 210, rmax = 170;
    size_t peak = 1;
    for (size_t c : h.counts) peak = std::max(peak, c);
    std::string svg =
        "<svg xmlns='http://www.w3.org/2000/svg' width='400' height='420' viewBox='0 0 400 420'>\n"
        "<rect width='400' height='420' fill='white'/>\n<text x='200' y='24' text-anchor='middle' "
        "font-family='sans-serif' font-size='14'>" + title + "</text>\n";
    char buf[512];
    for (size_t i = 0; i < h.counts.size(); ++i) {
        if (h.counts[i] == 0) continue;
        const double r = rmax * std::sqrt(double(h.counts[i]) / double(peak));
        // Map [angle_lo, angle_hi] onto the upper half arc, left to right.
        const double t0 = M_PI * (1.0 - (h.edges[i] - angle_lo) / (angle_hi - angle_lo));
        const double t1 = M_PI * (1.0 - (h.edges[i + 1] - angle_lo) / (angle_hi - angle_lo));
        const double x0 = cx + r * std::cos(t0), y0 = cy - r * std::sin(t0);
        const double x1 = cx + r * std::cos(t1), y1 = cy - r * std::sin(t1);
        std::snprintf(buf, sizeof buf,
                      "<path d='M %.2f %.2f L %.2f %.2f A %.2f %.2f 0 0 1 %.2f %.2f Z' "
                      "fill='#4878cf' fill-opacity='0.7' stroke='#2a4d8f' stroke-width='0.5'/>\n",
                      cx, cy, x0, y0, r, r, x1, y1);
        svg += buf;
    }
    svg += "<line x1='30' y1='210' x2='370' y2='210' stroke='#999'/>\n</svg>\n";
    return svg;
}

}  // namespace frameproj
