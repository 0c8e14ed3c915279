#pragma once

#include <optional>
#include <string>
#include <vector>

#include "frameproj/trainer.hpp"

namespace frameproj {

// Inference path: only the time encoder and the representation mappers run;
// the concatenated features [h_t ; phi_hF(h_t) ; phi_hW(h_t)] feed a single
// affine probe trained on frozen features.

struct FeatureMatrix {
    Tensor values;  // (N, D), D = 3 * latent_dim
    std::string bundle_hash;
    std::string dataset_hash;

    size_t n() const { return values.dim(0); }
    size_t dim() const { return values.dim(1); }
    std::string content_hash() const {
        Sha256 h;
        h.update_u64(values.dim(0));
        h.update_u64(values.dim(1));
        h.update_f64s(values.value());
        return Sha256::hex(h.finish());
    }
};

enum class ProbeTask { classification, regression };

struct LinearProbe {
    AffineLayer layer;  // (D, n_out)
    ProbeTask task = ProbeTask::classification;
    Tensor forward(const Tensor& features) const { return layer.forward(features); }
};

struct MetricsReport {
    // classification
    double accuracy = 0.0, macro_f1 = 0.0, weighted_f1 = 0.0, kappa = 0.0;
    // regression
    double mae = 0.0, rmse = 0.0, pearson = 0.0, mape = 0.0;
    bool degenerate_variance = false;  // pearson reported as 0 for flat series
    ProbeTask task = ProbeTask::classification;
};

/// Algorithm-2 feature extraction on time-domain windows only.
inline FeatureMatrix extract_features(ModelBundle& bundle, const SignalBatch& batch,
                                      size_t chunk = 256) {
    if (bundle.phase != Phase::mappers_trained)
        throw ContractError("extract_features: bundle must be in the mappers_trained phase");
    const TrainContext ctx{false, nullptr};
    const size_t n = batch.n, d = bundle.cfg.latent_dim;
    Tensor x = time_tensor(batch);
    FeatureMatrix fm;
    fm.values = Tensor::zeros({n, 3 * d});
    for (size_t start = 0; start < n; start += chunk) {
        std::vector<size_t> idx;
        for (size_t i = start; i < std::min(n, start + chunk); ++i) idx.push_back(i);
        Tensor h_t = bundle.f_t.forward(take_rows(x, idx), ctx);
        Tensor h_f = bundle.phi_hf.forward(h_t);
        Tensor h_w = bundle.phi_hw.forward(h_t);
        Tensor row = concat_axis1(concat_axis1(h_t, h_f), h_w);
        std::copy_n(row.value().data(), idx.size() * 3 * d,
                    fm.values.mutable_value().data() + start * 3 * d);
    }
    fm.bundle_hash = bundle.parameter_hash();
    {
        Sha256 h;
        h.update_u64(batch.n);
        h.update_u64(batch.channels);
        h.update_u64(batch.length);
        h.update_f64s(batch.samples);
        fm.dataset_hash = Sha256::hex(h.finish());
    }
    return fm;
}

// ---------------------------------------------------------------------------
// Probe training
// ---------------------------------------------------------------------------

/// Softmax cross-entropy over logits with integer class labels.
inline Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<size_t>& labels) {
    Tensor rowmax = row_max_detached(logits);
    Tensor lse = add(log(row_sum(exp(sub_colvec(logits, rowmax)))), rowmax);
    return mean(sub(lse, pick(logits, labels)));
}

inline Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    Tensor d = sub(pred, target);
    return mean(mul(d, d));
}

struct ProbeConfig {
    double lr = 0.03;
    size_t epochs = 100;
    uint64_t seed = 7;
};

/// Full-batch Adam with cosine decay on a single affine layer. Features are
/// constants: nothing backpropagates into the bundle.
inline LinearProbe train_linear_probe(const FeatureMatrix& features,
                                      const std::vector<double>& targets, ProbeTask task,
                                      size_t n_out, const ProbeConfig& cfg = {}) {
    if (features.n() != targets.size())
        throw ContractError("train_linear_probe: feature/label count mismatch");
    if (n_out < 1) throw ContractError("train_linear_probe: n_out must be >= 1");

    LinearProbe probe;
    probe.task = task;
    probe.layer = AffineLayer::make(features.dim(), n_out);
    CounterRng rng(cfg.seed, 0);
    probe.layer.init(rng);
    if (cfg.epochs == 0) return probe;

    std::vector<size_t> class_labels;
    Tensor target_tensor;
    if (task == ProbeTask::classification) {
        class_labels.reserve(targets.size());
        for (double t : targets) {
            if (t < 0 || t >= double(n_out) || t != std::floor(t))
                throw ContractError("train_linear_probe: labels must be class ids below n_out");
            class_labels.push_back(size_t(t));
        }
    } else {
        if (n_out != 1) throw ContractError("train_linear_probe: regression uses n_out == 1");
        target_tensor = Tensor::from({targets.size(), 1}, targets);
    }

    std::vector<Tensor> params;
    probe.layer.params(params);
    Adam adam(params);
    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(epoch, cfg.epochs, cfg.lr);
        adam.zero_grad();
        {
            Tape tape;
            Tensor logits = probe.layer.forward(features.values);
            Tensor loss = task == ProbeTask::classification
                              ? softmax_cross_entropy(logits, class_labels)
                              : mse_loss(logits, target_tensor);
            tape.backward(loss);
        }
        adam.step(lr);
    }
    return probe;
}

inline std::vector<size_t> predict_classes(const LinearProbe& probe, const FeatureMatrix& features) {
    Tensor logits = probe.forward(features.values);
    const size_t n = logits.dim(0), k = logits.dim(1);
    std::vector<size_t> out(n);
    for (size_t i = 0; i < n; ++i) {
        size_t best = 0;
        for (size_t j = 1; j < k; ++j)
            if (logits.value()[i * k + j] > logits.value()[i * k + best]) best = j;
        out[i] = best;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline MetricsReport classification_metrics(const std::vector<size_t>& pred,
                                            const std::vector<double>& labels, size_t k) {
    if (pred.empty() || pred.size() != labels.size())
        throw ContractError("classification_metrics: empty or mismatched input");
    std::vector<std::vector<double>> cm(k, std::vector<double>(k, 0.0));
    for (size_t i = 0; i < pred.size(); ++i) {
        const size_t truth = size_t(labels[i]);
        if (truth >= k || pred[i] >= k)
            throw ContractError("classification_metrics: label out of range");
        cm[truth][pred[i]] += 1.0;
    }
    const double n = double(pred.size());

    MetricsReport rep;
    rep.task = ProbeTask::classification;
    double correct = 0.0;
    for (size_t c = 0; c < k; ++c) correct += cm[c][c];
    rep.accuracy = correct / n;

    double macro = 0.0, weighted = 0.0;
    for (size_t c = 0; c < k; ++c) {
        double tp = cm[c][c], fn = 0.0, fp = 0.0, support = 0.0;
        for (size_t j = 0; j < k; ++j) {
            if (j != c) {
                fn += cm[c][j];
                fp += cm[j][c];
            }
            support += cm[c][j];
        }
        const double denom = 2.0 * tp + fp + fn;
        const double f1 = denom > 0.0 ? 2.0 * tp / denom : 0.0;  // absent classes contribute 0
        macro += f1;
        weighted += f1 * support;
    }
    rep.macro_f1 = macro / double(k);
    rep.weighted_f1 = weighted / n;

    // Cohen's kappa: (p_o - p_e) / (1 - p_e).
    double pe = 0.0;
    for (size_t c = 0; c < k; ++c) {
        double row = 0.0, col = 0.0;
        for (size_t j = 0; j < k; ++j) {
            row += cm[c][j];
            col += cm[j][c];
        }
        pe += (row / n) * (col / n);
    }
    rep.kappa = pe < 1.0 ? (rep.accuracy - pe) / (1.0 - pe) : 1.0;
    return rep;
}

inline MetricsReport regression_metrics(const std::vector<double>& preds,
                                        const std::vector<double>& targets, bool want_mape = false) {
    if (preds.empty() || preds.size() != targets.size())
        throw ContractError("regression_metrics: empty or mismatched input");
    const size_t n = preds.size();

    MetricsReport rep;
    rep.task = ProbeTask::regression;
    double abs_sum = 0.0, sq_sum = 0.0, mape_sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double t = targets[i];
        if (!std::isfinite(t)) throw ContractError("regression_metrics: non-finite target");
        const double e = preds[i] - t;
        abs_sum += std::abs(e);
        sq_sum += e * e;
        if (want_mape) {
            if (std::abs(t) <= 1e-9) throw MetricError("regression_metrics: MAPE needs |target| > 1e-9");
            mape_sum += std::abs(e / t);
        }
    }
    rep.mae = abs_sum / double(n);
    rep.rmse = std::sqrt(sq_sum / double(n));
    if (want_mape) rep.mape = 100.0 * mape_sum / double(n);

    double mp = 0.0, mt = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mp += preds[i];
        mt += targets[i];
    }
    mp /= double(n);
    mt /= double(n);
    double vp = 0.0, vt = 0.0, cov = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dp = preds[i] - mp, dt = targets[i] - mt;
        vp += dp * dp;
        vt += dt * dt;
        cov += dp * dt;
    }
    if (vp <= 0.0 || vt <= 0.0) {
        rep.pearson = 0.0;
        rep.degenerate_variance = true;
    } else {
        rep.pearson = cov / std::sqrt(vp * vt);
    }
    return rep;
}

inline MetricsReport evaluate_classification(const LinearProbe& probe, const FeatureMatrix& features,
                                             const std::vector<double>& labels) {
    if (features.n() == 0 || labels.size() != features.n())
        throw ContractError("evaluate_classification: empty or mismatched input");
    return classification_metrics(predict_classes(probe, features), labels, probe.layer.w.dim(1));
}

inline MetricsReport evaluate_regression(const LinearProbe& probe, const FeatureMatrix& features,
                                         const std::vector<double>& targets, bool want_mape = false) {
    if (features.n() == 0 || targets.size() != features.n())
        throw ContractError("evaluate_regression: empty or mismatched input");
    return regression_metrics(probe.forward(features.values).value(), targets, want_mape);
}

inline std::string metrics_csv(const MetricsReport& r) {
    char buf[256];
    if (r.task == ProbeTask::classification) {
        std::snprintf(buf, sizeof buf, "accuracy,macro_f1,weighted_f1,kappa\n%.6f,%.6f,%.6f,%.6f\n",
                      r.accuracy, r.macro_f1, r.weighted_f1, r.kappa);
    } else {
        std::snprintf(buf, sizeof buf,
                      "mae,rmse,pearson,mape,degenerate_variance\n%.6f,%.6f,%.6f,%.6f,%d\n", r.mae,
                      r.rmse, r.pearson, r.mape, r.degenerate_variance ? 1 : 0);
    }
    return buf;
}

inline std::string metrics_text(const MetricsReport& r) {
    char buf[256];
    if (r.task == ProbeTask::classification) {
        std::snprintf(buf, sizeof buf,
                      "accuracy     %.4f\nmacro F1     %.4f\nweighted F1  %.4f\nkappa        %.4f\n",
                      r.accuracy, r.macro_f1, r.weighted_f1, r.kappa);
    } else {
        std::snprintf(buf, sizeof buf, "MAE      %.4f\nRMSE     %.4f\npearson  %.4f\nMAPE     %.4f%s\n",
                      r.mae, r.rmse, r.pearson, r.mape,
                      r.degenerate_variance ? "  (degenerate variance)" : "");
    }
    return buf;
}

}  // namespace frameproj
