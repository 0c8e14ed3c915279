#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "frameproj/models.hpp"
#include "frameproj/tensor.hpp"

namespace frameproj {

// The pretraining losses. For anchor i in domain d against candidates in
// domain d':
//
//   l_i = -log  exp(s(i,i)/tau) / sum_k exp(s(i,k)/tau)
//
// with s cosine similarity, the positive being the same sample index in the
// other domain and negatives the remaining rows of the candidate set. The
// positive term appears in the denominator by default; the strict
// "negatives only" denominator is available behind include_positive=false.
// Rows are stabilized by subtracting the (detached) row maximum before
// exponentiation.
//
// The instance-discrimination total sums the symmetrized (1/2N) means over
// the three unordered domain pairs. The mapping loss is an L1 distance
// summed over embedding coordinates and averaged over the batch only.

struct TemperatureConfig {
    double tau = 0.2;
    void validate() const {
        if (!(tau > 0.0)) throw ConfigError("TemperatureConfig: tau must be positive");
    }
};

struct LossReport {
    double l_id = 0.0;
    double l_map = 0.0;
    double total = 0.0;
    std::map<std::string, double> per_pair;  // directed means, keys like "t->F"

    static const std::vector<std::string>& pair_keys() {
        static const std::vector<std::string> keys = {"t->F", "F->t", "t->W", "W->t", "F->W", "W->F"};
        return keys;
    }
};

inline double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) throw DimensionError("cosine_similarity: length mismatch");
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        uu += u[i] * u[i];
        vv += v[i] * v[i];
        uv += u[i] * v[i];
    }
    const double nu = std::sqrt(uu), nv = std::sqrt(vv);
    if (nu < 1e-12 || nv < 1e-12) throw DegenerateVectorError("cosine_similarity: near-zero vector");
    return std::clamp(uv / (nu * nv), -1.0, 1.0);
}

/// Per-anchor NT-Xent losses for row-aligned sets (N values).
inline Tensor ntxent_pair(const Tensor& anchors, const Tensor& candidates, double tau,
                          bool include_positive = true) {
    if (anchors.rank() != 2 || candidates.rank() != 2)
        throw DimensionError("ntxent_pair: expects (N,d) sets");
    if (anchors.shape() != candidates.shape()) throw DimensionError("ntxent_pair: shape mismatch");
    if (anchors.dim(0) < 2) throw ContractError("ntxent_pair: needs at least 2 samples");
    if (!(tau > 0.0)) throw ConfigError("ntxent_pair: tau must be positive");

    Tensor sims = scale(matmul(l2_normalize(anchors), transpose(l2_normalize(candidates))), 1.0 / tau);
    Tensor rowmax = row_max_detached(sims);
    Tensor shifted_exp = exp(sub_colvec(sims, rowmax));
    Tensor denom = include_positive ? row_sum(shifted_exp)
                                    : sub(row_sum(shifted_exp), take_diag(shifted_exp));
    Tensor lse = add(log(denom), rowmax);
    return sub(lse, take_diag(sims));
}

/// NT-Xent loss of a single anchor against an explicit candidate set
/// (positive first, then negatives). Same stabilized formula as the batch
/// form, on plain similarity values.
inline double ntxent_anchor(const std::vector<double>& anchor, const std::vector<double>& positive,
                            const std::vector<std::vector<double>>& negatives, double tau,
                            bool include_positive = true) {
    if (!(tau > 0.0)) throw ConfigError("ntxent_anchor: tau must be positive");
    if (negatives.empty()) throw ContractError("ntxent_anchor: needs at least one negative");
    const double s_pos = cosine_similarity(anchor, positive) / tau;
    std::vector<double> terms;
    terms.reserve(negatives.size() + 1);
    if (include_positive) terms.push_back(s_pos);
    for (const auto& neg : negatives) terms.push_back(cosine_similarity(anchor, neg) / tau);
    double m = s_pos;
    for (double t : terms) m = std::max(m, t);
    double denom = 0.0;
    for (double t : terms) denom += std::exp(t - m);
    return (std::log(denom) + m) - s_pos;
}

/// L_ID with its per-direction report. Keys follow LossReport::pair_keys().
inline std::pair<Tensor, std::map<std::string, double>> instance_discrimination_loss(
    const Tensor& z_t, const Tensor& z_f, const Tensor& z_w, double tau,
    bool include_positive = true) {
    if (z_t.shape() != z_f.shape() || z_t.shape() != z_w.shape())
        throw ContractError("instance_discrimination_loss: sets must be row-aligned with equal dims");
    const double n = double(z_t.dim(0));
    std::map<std::string, double> per_pair;
    auto directed = [&](const Tensor& a, const Tensor& b, const std::string& key) {
        Tensor losses = ntxent_pair(a, b, tau, include_positive);
        per_pair[key] = sum(losses).item() / n;
        return losses;
    };
    Tensor tf = directed(z_t, z_f, "t->F"), ft = directed(z_f, z_t, "F->t");
    Tensor tw = directed(z_t, z_w, "t->W"), wt = directed(z_w, z_t, "W->t");
    Tensor fw = directed(z_f, z_w, "F->W"), wf = directed(z_w, z_f, "W->F");
    Tensor l_id = scale(add(sum(tf), sum(ft)), 1.0 / (2.0 * n));
    l_id = add(l_id, scale(add(sum(tw), sum(wt)), 1.0 / (2.0 * n)));
    l_id = add(l_id, scale(add(sum(fw), sum(wf)), 1.0 / (2.0 * n)));
    return {l_id, per_pair};
}

/// L_map over row-aligned sets: mean-over-batch L1 distance between mapped
/// time embeddings and each target domain. detach_targets cuts the gradient
/// path into the target branches.
inline Tensor mapping_loss(const LatentMapper& phi_f, const LatentMapper& phi_w, const Tensor& z_t,
                           const Tensor& z_f, const Tensor& z_w, bool detach_targets = false) {
    const double inv_n = 1.0 / double(z_t.dim(0));
    const Tensor tf = detach_targets ? z_f.clone() : z_f;
    const Tensor tw = detach_targets ? z_w.clone() : z_w;
    Tensor lf = scale(l1_norm(sub(phi_f.forward(z_t), tf)), inv_n);
    Tensor lw = scale(l1_norm(sub(phi_w.forward(z_t), tw)), inv_n);
    return add(lf, lw);
}

/// Single-mapper variant (representation-mapper phase trains each alone).
inline Tensor mapping_loss_single(const LatentMapper& phi, const Tensor& h_t, const Tensor& target) {
    return scale(l1_norm(sub(phi.forward(h_t), target)), 1.0 / double(h_t.dim(0)));
}

inline Tensor total_pretrain_loss(const Tensor& l_id, const Tensor& l_map) {
    if (!std::isfinite(l_id.item()) || !std::isfinite(l_map.item()))
        throw NumericError("total_pretrain_loss: non-finite component");
    return add(l_id, l_map);
}

// One CSV row per step: step, l_id, l_map, total, then the six directed means.
inline std::string runlog_csv_header() {
    std::string s = "step,l_id,l_map,total";
    for (const auto& k : LossReport::pair_keys()) s += "," + k;
    return s + "\n";
}

inline std::string runlog_csv_row(size_t step, const LossReport& r) {
    char buf[64];
    std::string s = std::to_string(step);
    auto app = [&](double v) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        s += buf;
    };
    app(r.l_id);
    app(r.l_map);
    app(r.total);
    for (const auto& k : LossReport::pair_keys()) app(r.per_pair.count(k) ? r.per_pair.at(k) : 0.0);
    return s + "\n";
}

}  // namespace frameproj
