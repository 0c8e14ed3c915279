#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "frameproj/data.hpp"
#include "frameproj/frames.hpp"
#include "frameproj/probe.hpp"

using namespace frameproj;

TEST_CASE("classification generation") {
    SyntheticConfig cfg;
    cfg.samples_per_class = 200;

    SECTION("deterministic and balanced") {
        const auto a = generate_synthetic_classification(cfg, 11);
        const auto b = generate_synthetic_classification(cfg, 11);
        CHECK(a.batch.samples == b.batch.samples);
        CHECK(a.labels == b.labels);
        CHECK(a.content_hash() == b.content_hash());

        REQUIRE(a.batch.n == 600);
        std::vector<size_t> hist(3, 0);
        for (double l : a.labels) ++hist[size_t(l)];
        CHECK(hist == std::vector<size_t>{200, 200, 200});

        const auto c = generate_synthetic_classification(cfg, 12);
        CHECK(a.batch.samples != c.batch.samples);
    }
    SECTION("noise-free pure tones put the DFT argmax on the class bin") {
        SyntheticConfig pure = cfg;
        pure.noise_std = 0.0;
        pure.samples_per_class = 10;
        for (auto& cls : pure.classes) cls.transient_amplitude = 0.0;
        const auto ds = generate_synthetic_classification(pure, 13);
        for (size_t i = 0; i < ds.batch.n; ++i) {
            const auto spec = dft_ortho(ds.batch.window(i, 0), ds.batch.length);
            size_t best = 1;
            for (size_t k = 2; k < spec.size(); ++k)
                if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
            const double f = pure.classes[size_t(ds.labels[i])].frequencies_hz[0];
            const size_t expect = size_t(std::lround(f * double(pure.length) / pure.sample_rate));
            CHECK(best == expect);
        }
    }
    SECTION("splits are disjoint and cover the dataset") {
        const auto ds = generate_synthetic_classification(cfg, 14);
        const auto train = ds.split_indices(Split::train);
        const auto val = ds.split_indices(Split::val);
        const auto test = ds.split_indices(Split::test);
        CHECK(train.size() + val.size() + test.size() == ds.batch.n);
        std::vector<bool> seen(ds.batch.n, false);
        for (const auto* part : {&train, &val, &test})
            for (size_t i : *part) {
                CHECK_FALSE(seen[i]);
                seen[i] = true;
            }
        CHECK(train.size() == 399);  // floor(2/3 * 300) per class
    }
    SECTION("nyquist violation rejected") {
        SyntheticConfig bad = cfg;
        bad.classes[0].frequencies_hz = {16.0};  // == sample_rate / 2
        CHECK_THROWS_AS(generate_synthetic_classification(bad, 1), ConfigError);
    }
}

TEST_CASE("regression generation") {
    SyntheticConfig cfg;
    cfg.samples_per_class = 40;
    SECTION("deterministic") {
        const auto a = generate_synthetic_regression(cfg, 21);
        const auto b = generate_synthetic_regression(cfg, 21);
        CHECK(a.batch.samples == b.batch.samples);
        CHECK(a.labels == b.labels);
    }
    SECTION("noise-free target recoverable from the DFT argmax") {
        SyntheticConfig pure = cfg;
        pure.noise_std = 0.0;
        const auto ds = generate_synthetic_regression(pure, 22);
        const double bin_width = pure.sample_rate / double(pure.length);
        for (size_t i = 0; i < ds.batch.n; ++i) {
            const auto spec = dft_ortho(ds.batch.window(i, 0), ds.batch.length);
            size_t best = 1;
            for (size_t k = 2; k < spec.size(); ++k)
                if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
            const double f_hat = double(best) * bin_width;
            CHECK(std::abs(f_hat - ds.labels[i]) <= bin_width);
        }
    }
    SECTION("targets are uniform over the band") {
        SyntheticConfig wide = cfg;
        wide.n_classes = 1;
        wide.classes = {{{3.0}, 4.0, 1.0}};
        wide.samples_per_class = 10000;
        const auto ds = generate_synthetic_regression(wide, 23);
        double mean = 0.0;
        for (double t : ds.labels) mean += t;
        mean /= double(ds.labels.size());
        const double mid = 0.5 * (wide.band_lo_hz + wide.band_hi_hz);
        CHECK(std::abs(mean - mid) < 0.02 * mid);
    }
}

TEST_CASE("zscore normalization") {
    SECTION("hand case with population std") {
        SignalBatch b(1, 1, 8);
        // first three samples carry the signal; rest mirror it to keep L >= 8
        const std::vector<double> vals = {1, 2, 3, 1, 2, 3, 1, 2};
        std::copy(vals.begin(), vals.end(), b.samples.begin());
        // check the 3-sample formula on its own window
        SignalBatch t(1, 1, 8);
        t.samples = {1, 2, 3, 2, 2, 2, 2, 2};
        auto res = zscore_normalize(t);
        double mean = 0.0;
        for (double v : res.batch.samples) mean += v;
        CHECK(std::abs(mean) < 1e-9);
        double var = 0.0;
        for (double v : res.batch.samples) var += v * v;
        CHECK(std::sqrt(var / 8.0) == Catch::Approx(1.0).margin(1e-9));
    }
    SECTION("explicit population formula") {
        // z-score of [1,2,3] with population std sqrt(2/3)
        const double sd = std::sqrt(2.0 / 3.0);
        CHECK((1.0 - 2.0) / sd == Catch::Approx(-1.224745).margin(1e-6));
    }
    SECTION("idempotent") {
        SignalBatch b(2, 1, 16);
        CounterRng rng(30);
        for (double& v : b.samples) v = rng.normal(3.0, 2.0);
        auto once = zscore_normalize(b);
        auto twice = zscore_normalize(once.batch);
        for (size_t i = 0; i < b.samples.size(); ++i)
            CHECK(std::abs(once.batch.samples[i] - twice.batch.samples[i]) < 1e-12);
    }
    SECTION("constant window centered and flagged") {
        SignalBatch b(1, 1, 8);
        for (double& v : b.samples) v = 4.2;
        auto res = zscore_normalize(b);
        CHECK(res.degenerate[0] == 1);
        for (double v : res.batch.samples) CHECK(v == 0.0);
    }
}

TEST_CASE("windowing") {
    std::vector<double> series(10);
    for (size_t i = 0; i < 10; ++i) series[i] = double(i);
    SECTION("len 10, win 4, stride 2 gives offsets 0,2,4,6") {
        auto b = window_signal(series, 1, 4, 2);
        REQUIRE(b.n == 4);
        for (size_t i = 0; i < 4; ++i) CHECK(b.window(i, 0)[0] == double(2 * i));
    }
    SECTION("stride == win tiles without overlap") {
        auto b = window_signal(series, 1, 5, 5);
        REQUIRE(b.n == 2);
        CHECK(b.window(1, 0)[0] == 5.0);
    }
    SECTION("stride 1 gives len - win + 1 windows") {
        CHECK(window_signal(series, 1, 4, 1).n == 7);
    }
    SECTION("window longer than series rejected") {
        CHECK_THROWS_AS(window_signal(series, 1, 11, 1), ContractError);
    }
}

TEST_CASE("dataset file round trip") {
    namespace fs = std::filesystem;
    const auto path = (fs::temp_directory_path() / "fp_ds_test.fpds").string();
    SyntheticConfig cfg;
    cfg.samples_per_class = 5;
    const auto ds = generate_synthetic_classification(cfg, 31);
    write_dataset(ds, path);
    const auto back = read_dataset(path);
    CHECK(back.batch.samples == ds.batch.samples);
    CHECK(back.labels == ds.labels);
    CHECK(back.splits == ds.splits);
    CHECK(back.batch.sample_rate == ds.batch.sample_rate);
    CHECK(back.content_hash() == ds.content_hash());

    SECTION("regression labels round trip as doubles") {
        const auto reg = generate_synthetic_regression(cfg, 32);
        write_dataset(reg, path);
        const auto reg_back = read_dataset(path);
        CHECK(reg_back.labels == reg.labels);
        CHECK(reg_back.label_kind == LabelKind::target);
    }
    fs::remove(path);
    fs::remove(path + ".manifest");
}

TEST_CASE("csv ingestion") {
    namespace fs = std::filesystem;
    const auto path = (fs::temp_directory_path() / "fp_csv_test.csv").string();
    SECTION("flattened rows with labels") {
        std::ofstream out(path);
        for (int i = 0; i < 3; ++i) {
            for (int t = 0; t < 8; ++t) out << double(i + t) << ",";
            out << (i % 2) << "\n";
        }
        out.close();
        CsvSchema schema;
        schema.length = 8;
        schema.has_label = true;
        const auto ds = read_csv(path, schema);
        CHECK(ds.batch.n == 3);
        CHECK(ds.batch.length == 8);
        CHECK(ds.labels == std::vector<double>{0, 1, 0});
        CHECK(ds.batch.window(1, 0)[2] == 3.0);
    }
    SECTION("malformed cell reports the line number") {
        std::ofstream out(path);
        out << "1,2,3,4,5,6,7,8,0\n";
        out << "1,2,xyz,4,5,6,7,8,1\n";
        out.close();
        CsvSchema schema;
        schema.length = 8;
        schema.has_label = true;
        try {
            read_csv(path, schema);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line == 2);
        }
    }
    SECTION("wrong column count reports the line number") {
        std::ofstream out(path);
        out << "1,2,3\n";
        out.close();
        CsvSchema schema;
        schema.length = 8;
        CHECK_THROWS_AS(read_csv(path, schema), ParseError);
    }
    fs::remove(path);
}

TEST_CASE("separability floor: raw DFT magnitudes probe above 95%") {
    SyntheticConfig cfg;  // default config, noise switched off
    cfg.noise_std = 0.0;
    const auto ds = generate_synthetic_classification(cfg, 33);
    const auto train = ds.subset(Split::train);
    const auto test = ds.subset(Split::test);

    auto features_of = [](const LabeledDataset& part) {
        const SpectralView v = to_polar_view(part.batch);
        FeatureMatrix fm;
        fm.values = Tensor::from({v.n, v.bins}, v.magnitudes);
        return fm;
    };
    FeatureMatrix ftrain = features_of(train);
    FeatureMatrix ftest = features_of(test);
    LinearProbe probe = train_linear_probe(ftrain, train.labels, ProbeTask::classification, 3);
    const auto rep = evaluate_classification(probe, ftest, test.labels);
    CHECK(rep.accuracy >= 0.95);
}
