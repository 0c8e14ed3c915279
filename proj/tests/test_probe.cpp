#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "frameproj/data.hpp"
#include "frameproj/probe.hpp"

using namespace frameproj;

namespace {

FeatureMatrix features_from(Tensor values) {
    FeatureMatrix fm;
    fm.values = std::move(values);
    return fm;
}

ModelBundle random_bundle(uint64_t seed) {
    SyntheticConfig dcfg;
    dcfg.samples_per_class = 2;
    dcfg.length = 32;
    auto ds = generate_synthetic_classification(dcfg, seed);
    WaveletConfig wcfg;
    wcfg.num_scales = 8;
    wcfg.scale_hi = 16.0;
    CachedViews views;
    views.spectral = to_polar_view(ds.batch);
    views.scalogram = gabor_cwt(ds.batch, wcfg);
    TrainConfig cfg;
    cfg.latent_dim = 16;
    cfg.blocks = 1;
    cfg.width_time = 4;
    cfg.width_fourier = 4;
    cfg.width_wavelet = 4;
    cfg.proj_hidden = 16;
    cfg.seed = seed;
    return ModelBundle::build_random(cfg, make_dataset_views(ds.batch, views));
}

}  // namespace

TEST_CASE("extract_features") {
    ModelBundle bundle = random_bundle(1);
    SignalBatch batch(4, 1, 32);
    CounterRng rng(2);
    for (double& v : batch.samples) v = rng.uniform(-1.0, 1.0);
    // duplicate row 2 into row 3
    std::copy_n(batch.window(2, 0), 32, batch.window(3, 0));

    FeatureMatrix fm = extract_features(bundle, batch);
    CHECK(fm.dim() == 3 * 16);
    CHECK(fm.n() == 4);
    for (size_t j = 0; j < fm.dim(); ++j)
        CHECK(fm.values.value()[2 * fm.dim() + j] == fm.values.value()[3 * fm.dim() + j]);
    CHECK_FALSE(fm.bundle_hash.empty());
    CHECK_FALSE(fm.dataset_hash.empty());

    SECTION("wrong phase rejected") {
        ModelBundle fresh = bundle;
        fresh.phase = Phase::pretrained;
        CHECK_THROWS_AS(extract_features(fresh, batch), ContractError);
    }
    SECTION("wiring check: constant mappers expose the concat layout") {
        for (Tensor& p : bundle.repr_mapper_parameters())
            for (double& v : p.mutable_value()) v = 0.0;
        bundle.phi_hf.up.b.mutable_value()[0] = 3.5;
        bundle.phi_hw.up.b.mutable_value()[0] = -2.5;
        FeatureMatrix wired = extract_features(bundle, batch);
        const TrainContext ctx{false, nullptr};
        Tensor h_t = bundle.f_t.forward(time_tensor(batch), ctx);
        for (size_t i = 0; i < 4; ++i)
            for (size_t j = 0; j < 16; ++j) {
                CHECK(wired.values.value()[i * 48 + j] == h_t.value()[i * 16 + j]);
                CHECK(wired.values.value()[i * 48 + 16 + j] == 3.5);
                CHECK(wired.values.value()[i * 48 + 32 + j] == -2.5);
            }
    }
}

TEST_CASE("linear probe training") {
    SECTION("separable two-class toy reaches accuracy 1") {
        const size_t n = 40, d = 4;
        Tensor f = Tensor::zeros({n, d});
        std::vector<double> labels(n);
        CounterRng rng(3);
        for (size_t i = 0; i < n; ++i) {
            const int cls = i % 2;
            labels[i] = cls;
            for (size_t j = 0; j < d; ++j)
                f.mutable_value()[i * d + j] = rng.normal(cls ? 2.0 : -2.0, 0.3);
        }
        FeatureMatrix fm = features_from(f);
        LinearProbe probe = train_linear_probe(fm, labels, ProbeTask::classification, 2);
        CHECK(evaluate_classification(probe, fm, labels).accuracy == 1.0);
    }
    SECTION("shuffled labels sit at chance on held-out data") {
        const size_t n = 600, d = 8, k = 3;
        Tensor f = Tensor::zeros({n, d});
        std::vector<double> labels(n);
        CounterRng rng(4);
        for (size_t i = 0; i < n; ++i) {
            labels[i] = double(i % k);  // balanced, independent of features
            for (size_t j = 0; j < d; ++j) f.mutable_value()[i * d + j] = rng.normal();
        }
        std::vector<size_t> train_idx, test_idx;
        for (size_t i = 0; i < n; ++i) (i < n / 2 ? train_idx : test_idx).push_back(i);
        FeatureMatrix train_fm = features_from(take_rows(f, train_idx));
        FeatureMatrix test_fm = features_from(take_rows(f, test_idx));
        std::vector<double> train_y(labels.begin(), labels.begin() + long(n / 2));
        std::vector<double> test_y(labels.begin() + long(n / 2), labels.end());
        LinearProbe probe = train_linear_probe(train_fm, train_y, ProbeTask::classification, k);
        const double acc = evaluate_classification(probe, test_fm, test_y).accuracy;
        CHECK(std::abs(acc - 1.0 / 3.0) <= 0.08);
    }
    SECTION("zero epochs returns the initialization") {
        FeatureMatrix fm = features_from(Tensor::zeros({4, 3}));
        ProbeConfig cfg;
        cfg.epochs = 0;
        LinearProbe probe = train_linear_probe(fm, {0, 1, 0, 1}, ProbeTask::classification, 2, cfg);
        LinearProbe fresh;
        fresh.layer = AffineLayer::make(3, 2);
        CounterRng rng(cfg.seed, 0);
        fresh.layer.init(rng);
        CHECK(probe.layer.w.value() == fresh.layer.w.value());
        CHECK(probe.layer.b.value() == fresh.layer.b.value());
    }
    SECTION("probe training never mutates the features") {
        CounterRng rng(5);
        Tensor f = Tensor::zeros({20, 6});
        for (double& v : f.mutable_value()) v = rng.normal();
        FeatureMatrix fm = features_from(f);
        const std::string before = fm.content_hash();
        std::vector<double> labels(20);
        for (size_t i = 0; i < 20; ++i) labels[i] = double(i % 2);
        train_linear_probe(fm, labels, ProbeTask::classification, 2);
        CHECK(fm.content_hash() == before);
    }
    SECTION("label mismatch rejected") {
        FeatureMatrix fm = features_from(Tensor::zeros({4, 3}));
        CHECK_THROWS_AS(train_linear_probe(fm, {0, 1}, ProbeTask::classification, 2), ContractError);
    }
}

TEST_CASE("classification metrics") {
    SECTION("perfect predictions") {
        const auto rep = classification_metrics({0, 1, 2, 0}, {0, 1, 2, 0}, 3);
        CHECK(rep.accuracy == 1.0);
        CHECK(rep.macro_f1 == 1.0);
        CHECK(rep.weighted_f1 == 1.0);
        CHECK(rep.kappa == 1.0);
    }
    SECTION("constant predictor on two balanced classes") {
        const auto rep = classification_metrics({0, 0, 0, 0}, {0, 0, 1, 1}, 2);
        CHECK(rep.accuracy == 0.5);
        CHECK(rep.kappa == Catch::Approx(0.0).margin(1e-15));
    }
    SECTION("hand-counted 3x3 confusion matrix") {
        // rows = truth, cols = prediction: [[5,1,0],[1,4,1],[0,1,5]]
        std::vector<double> truth;
        std::vector<size_t> pred;
        auto fill = [&](size_t t, size_t p, size_t count) {
            for (size_t i = 0; i < count; ++i) {
                truth.push_back(double(t));
                pred.push_back(p);
            }
        };
        fill(0, 0, 5); fill(0, 1, 1);
        fill(1, 0, 1); fill(1, 1, 4); fill(1, 2, 1);
        fill(2, 1, 1); fill(2, 2, 5);
        const auto rep = classification_metrics(pred, truth, 3);
        CHECK(rep.accuracy == Catch::Approx(14.0 / 18.0).margin(1e-12));
        // direct-count oracle: F1 = 2tp / (2tp + fp + fn) per class
        const double f1_0 = 2.0 * 5 / (2.0 * 5 + 1 + 1);
        const double f1_1 = 2.0 * 4 / (2.0 * 4 + 2 + 2);
        const double f1_2 = 2.0 * 5 / (2.0 * 5 + 1 + 1);
        CHECK(rep.macro_f1 == Catch::Approx((f1_0 + f1_1 + f1_2) / 3.0).margin(1e-12));
        CHECK(rep.weighted_f1 ==
              Catch::Approx((6 * f1_0 + 6 * f1_1 + 6 * f1_2) / 18.0).margin(1e-12));
        const double pe = (6.0 / 18) * (6.0 / 18) * 3.0;
        CHECK(rep.kappa == Catch::Approx((14.0 / 18.0 - pe) / (1.0 - pe)).margin(1e-12));
    }
    SECTION("kappa below accuracy above chance, random instances") {
        CounterRng rng(6);
        for (int trial = 0; trial < 20; ++trial) {
            const size_t n = 60, k = 3;
            std::vector<double> truth(n);
            std::vector<size_t> pred(n);
            for (size_t i = 0; i < n; ++i) {
                truth[i] = double(rng.uniform_int(k));
                pred[i] = rng.uniform() < 0.6 ? size_t(truth[i]) : rng.uniform_int(k);
            }
            const auto rep = classification_metrics(pred, truth, k);
            if (rep.accuracy >= 1.0 / k) CHECK(rep.kappa <= rep.accuracy + 1e-12);
        }
    }
}

TEST_CASE("regression metrics") {
    SECTION("exact predictions") {
        const auto rep = regression_metrics({1, 2, 3}, {1, 2, 3});
        CHECK(rep.mae == 0.0);
        CHECK(rep.rmse == 0.0);
        CHECK(rep.pearson == Catch::Approx(1.0).margin(1e-12));
        CHECK_FALSE(rep.degenerate_variance);
    }
    SECTION("flat targets flag degenerate variance") {
        const auto rep = regression_metrics({1, 2, 3}, {2, 2, 2});
        CHECK(rep.mae == Catch::Approx(2.0 / 3.0).margin(1e-12));
        CHECK(rep.rmse == Catch::Approx(std::sqrt(2.0 / 3.0)).margin(1e-12));
        CHECK(rep.pearson == 0.0);
        CHECK(rep.degenerate_variance);
    }
    SECTION("constant offset") {
        const auto rep = regression_metrics({2.5, 3.5, 4.5}, {1.0, 2.0, 3.0});
        CHECK(rep.mae == Catch::Approx(1.5).margin(1e-12));
        CHECK(rep.rmse == Catch::Approx(1.5).margin(1e-12));
        CHECK(rep.pearson == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("MAPE guards zero targets") {
        CHECK_THROWS_AS(regression_metrics({1, 2}, {0, 2}, true), MetricError);
        const auto rep = regression_metrics({1.1, 1.8}, {1.0, 2.0}, true);
        CHECK(rep.mape == Catch::Approx(100.0 * (0.1 / 1.0 + 0.2 / 2.0) / 2.0).margin(1e-9));
    }
    SECTION("RMSE dominates MAE on random instances") {
        CounterRng rng(7);
        for (int trial = 0; trial < 30; ++trial) {
            std::vector<double> p(10), t(10);
            for (size_t i = 0; i < 10; ++i) {
                p[i] = rng.normal();
                t[i] = rng.normal();
            }
            const auto rep = regression_metrics(p, t);
            CHECK(rep.rmse >= rep.mae - 1e-12);
        }
    }
}

TEST_CASE("regression probe on a linear target") {
    const size_t n = 80, d = 3;
    Tensor f = Tensor::zeros({n, d});
    std::vector<double> targets(n);
    CounterRng rng(8);
    for (size_t i = 0; i < n; ++i) {
        double t = 0.0;
        for (size_t j = 0; j < d; ++j) {
            f.mutable_value()[i * d + j] = rng.normal();
            t += double(j + 1) * f.value()[i * d + j];
        }
        targets[i] = t;
    }
    FeatureMatrix fm = features_from(f);
    ProbeConfig cfg;
    cfg.epochs = 800;
    cfg.lr = 0.05;
    LinearProbe probe = train_linear_probe(fm, targets, ProbeTask::regression, 1, cfg);
    const auto rep = evaluate_regression(probe, fm, targets);
    CHECK(rep.pearson > 0.99);
    CHECK(rep.rmse < 0.2);
}
