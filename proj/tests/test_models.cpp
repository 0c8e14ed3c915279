#include <catch2/catch_amalgamated.hpp>

#include <cstring>

#include "frameproj/gradcheck.hpp"
#include "frameproj/models.hpp"

using namespace frameproj;

namespace {

Tensor random_input(std::vector<size_t> shape, uint64_t seed) {
    Tensor t = Tensor::zeros(std::move(shape));
    CounterRng rng(seed);
    for (double& v : t.mutable_value()) v = rng.uniform(-1.0, 1.0);
    return t;
}

EncoderConfig desk_time_cfg() {
    return {EncoderFamily::time, 1, 128, 0, 2, 16, 64, 0.0};
}

}  // namespace

TEST_CASE("time encoder shape and parameter count") {
    auto enc = build_time_encoder(desk_time_cfg());
    CounterRng rng(1);
    enc.init(rng);
    Tensor x = random_input({3, 1, 128}, 2);
    Tensor h = enc.forward(x, {false, nullptr});
    CHECK(h.shape() == std::vector<size_t>{3, 64});

    // Parameter walk oracle: conv = co*ci*k + co, bn = 2c, affine = in*out + out.
    auto conv_n = [](size_t co, size_t ci, size_t k) { return co * ci * k + co; };
    const size_t stem = conv_n(16, 1, 5) + 2 * 16;
    const size_t block0 = conv_n(32, 16, 5) + 2 * 32 + conv_n(32, 32, 5) + 2 * 32 +
                          conv_n(32, 16, 1) + 2 * 32;
    const size_t block1 = conv_n(32, 32, 5) + 2 * 32 + conv_n(32, 32, 5) + 2 * 32 +
                          conv_n(32, 32, 1) + 2 * 32;
    const size_t head = 32 * 64 + 64;
    std::vector<Tensor> params;
    enc.params(params);
    CHECK(parameter_count(params) == stem + block0 + block1 + head);

    SECTION("zeroed final affine collapses to its bias") {
        for (double& v : enc.head.w.mutable_value()) v = 0.0;
        CounterRng r2(3);
        for (double& v : enc.head.b.mutable_value()) v = r2.uniform(-1.0, 1.0);
        Tensor out = enc.forward(x, {false, nullptr});
        for (size_t i = 0; i < out.dim(0); ++i)
            for (size_t j = 0; j < 64; ++j)
                CHECK(out.value()[i * 64 + j] == enc.head.b.value()[j]);
    }
    SECTION("length too short for the block count") {
        EncoderConfig bad = desk_time_cfg();
        bad.length_in = 16;
        CHECK_THROWS_AS(build_time_encoder(bad), ConfigError);
    }
}

TEST_CASE("fourier encoder branches") {
    EncoderConfig cfg{EncoderFamily::fourier, 1, 65, 0, 2, 16, 64, 0.0};
    auto enc = build_fourier_encoder(cfg);
    CounterRng rng(4);
    enc.init(rng);
    Tensor mag = random_input({5, 1, 65}, 5);
    Tensor ph = random_input({5, 1, 65}, 6);
    Tensor z = enc.forward(mag, ph, {false, nullptr});
    CHECK(z.shape() == std::vector<size_t>{5, 64});

    SECTION("amplitude half is independent of the phase input") {
        Tensor ph2 = random_input({5, 1, 65}, 7);
        Tensor z2 = enc.forward(mag, ph2, {false, nullptr});
        for (size_t i = 0; i < 5; ++i)
            for (size_t j = 0; j < 32; ++j) CHECK(z.value()[i * 64 + j] == z2.value()[i * 64 + j]);
    }
    SECTION("zero inputs give per-sample-identical outputs") {
        Tensor zm = Tensor::zeros({4, 1, 65});
        Tensor zp = Tensor::zeros({4, 1, 65});
        Tensor out = enc.forward(zm, zp, {false, nullptr});
        for (size_t i = 1; i < 4; ++i)
            for (size_t j = 0; j < 64; ++j)
                CHECK(out.value()[i * 64 + j] == out.value()[j]);
    }
    SECTION("parameter count matches the walk oracle") {
        auto conv_n = [](size_t co, size_t ci, size_t k) { return co * ci * k + co; };
        const size_t branch = conv_n(16, 1, 3) + 2 * 16 + conv_n(32, 16, 3) + 2 * 32 +
                              (32 * 32 + 32);
        std::vector<Tensor> params;
        enc.params(params);
        CHECK(parameter_count(params) == 2 * branch);
    }
    SECTION("odd latent dim rejected") {
        EncoderConfig bad = cfg;
        bad.latent_dim = 63;
        CHECK_THROWS_AS(build_fourier_encoder(bad), ConfigError);
    }
}

TEST_CASE("wavelet encoder") {
    EncoderConfig cfg{EncoderFamily::wavelet, 1, 128, 48, 2, 8, 64, 0.0};
    auto enc = build_wavelet_encoder(cfg);
    CounterRng rng(8);
    enc.init(rng);
    Tensor x = random_input({2, 1, 48, 128}, 9);
    Tensor h = enc.forward(x, {false, nullptr});
    CHECK(h.shape() == std::vector<size_t>{2, 64});

    SECTION("constant scalogram gives per-sample-identical outputs") {
        Tensor c = Tensor::full({3, 1, 48, 128}, 0.7);
        Tensor out = enc.forward(c, {false, nullptr});
        for (size_t i = 1; i < 3; ++i)
            for (size_t j = 0; j < 64; ++j)
                CHECK(out.value()[i * 64 + j] == Catch::Approx(out.value()[j]).margin(1e-12));
    }
    SECTION("parameter count matches the walk oracle") {
        auto conv_n = [](size_t co, size_t ci, size_t k) { return co * ci * k * k + co; };
        const size_t expect = conv_n(8, 1, 3) + 2 * 8 + conv_n(16, 9, 3) + 2 * 16 +
                              conv_n(24, 17, 3) + 2 * 24 + (24 * 64 + 64);
        std::vector<Tensor> params;
        enc.params(params);
        CHECK(parameter_count(params) == expect);
    }
    SECTION("tiny grids rejected") {
        EncoderConfig bad = cfg;
        bad.num_scales = 4;
        CHECK_THROWS_AS(build_wavelet_encoder(bad), ConfigError);
    }
}

TEST_CASE("projector") {
    auto proj = build_projector(16, 32, 8);
    CounterRng rng(10);
    proj.init(rng);
    Tensor x = random_input({6, 16}, 11);
    CHECK(proj.forward(x).shape() == std::vector<size_t>{6, 8});

    SECTION("zero weights collapse to the output bias") {
        for (double& v : proj.a1.w.mutable_value()) v = 0.0;
        for (double& v : proj.a2.w.mutable_value()) v = 0.0;
        Tensor out = proj.forward(x);
        for (size_t i = 0; i < 6; ++i)
            for (size_t j = 0; j < 8; ++j) CHECK(out.value()[i * 8 + j] == proj.a2.b.value()[j]);
    }
    SECTION("gradient check") {
        std::vector<Tensor> params;
        proj.params(params);
        Tensor dir = random_input({6, 8}, 12);
        CHECK(grad_check([&] { return sum(mul(proj.forward(x), dir)); }, params) < 1e-6);
    }
}

TEST_CASE("latent mapper") {
    auto mapper = build_mapper(64);
    CounterRng rng(13);
    mapper.init(rng);

    SECTION("exactly 449 parameters, independent of d") {
        std::vector<Tensor> params;
        mapper.params(params);
        CHECK(parameter_count(params) == 449);
        auto m128 = build_mapper(128);
        params.clear();
        m128.params(params);
        CHECK(parameter_count(params) == 449);
    }
    SECTION("length round trip for even d") {
        CHECK(mapper.forward(random_input({3, 64}, 14)).shape() == std::vector<size_t>{3, 64});
        auto m128 = build_mapper(128);
        m128.init(rng);
        CHECK(m128.forward(random_input({2, 128}, 15)).shape() == std::vector<size_t>{2, 128});
    }
    SECTION("zero input propagates biases identically across samples") {
        Tensor out = mapper.forward(Tensor::zeros({4, 64}));
        for (size_t i = 1; i < 4; ++i)
            for (size_t j = 0; j < 64; ++j) CHECK(out.value()[i * 64 + j] == out.value()[j]);
    }
    SECTION("odd length rejected") {
        CHECK_THROWS_AS(build_mapper(63), ConfigError);
    }
    SECTION("gradient check") {
        std::vector<Tensor> params;
        mapper.params(params);
        Tensor z = random_input({4, 64}, 16);
        Tensor dir = random_input({4, 64}, 17);
        // relu composition: kink-adjacent coordinates cost a decade over the
        // elementwise 1e-6 budget
        CHECK(grad_check([&] { return sum(mul(mapper.forward(z), dir)); }, params) < 1e-5);
    }
}

TEST_CASE("initialization") {
    SECTION("same seed reproduces bit-identical parameters") {
        auto e1 = build_time_encoder(desk_time_cfg());
        auto e2 = build_time_encoder(desk_time_cfg());
        CounterRng r1(42), r2(42);
        e1.init(r1);
        e2.init(r2);
        std::vector<Tensor> p1, p2;
        e1.params(p1);
        e2.params(p2);
        for (size_t i = 0; i < p1.size(); ++i) CHECK(p1[i].value() == p2[i].value());

        CounterRng r3(43);
        e2.init(r3);
        p2.clear();
        e2.params(p2);
        bool any_diff = false;
        for (size_t i = 0; i < p1.size(); ++i)
            if (p1[i].value() != p2[i].value()) any_diff = true;
        CHECK(any_diff);
    }
    SECTION("fan-in scaled moments") {
        auto layer = AffineLayer::make(64, 160);  // 10240 draws
        CounterRng rng(44);
        layer.init(rng);
        double acc = 0.0;
        for (double v : layer.w.value()) acc += v * v;
        const double sd = std::sqrt(acc / double(layer.w.size()));
        const double theory = std::sqrt(1.0 / 64.0) / std::sqrt(3.0);
        CHECK(sd > 0.8 * theory);
        CHECK(sd < 1.2 * theory);
    }
}

TEST_CASE("forward purity and batch equivariance") {
    auto enc = build_time_encoder(desk_time_cfg());
    CounterRng rng(45);
    enc.init(rng);
    Tensor x = random_input({6, 1, 128}, 46);

    SECTION("eval forward is bit-identical across calls") {
        Tensor a = enc.forward(x, {false, nullptr});
        Tensor b = enc.forward(x, {false, nullptr});
        CHECK(std::memcmp(a.value().data(), b.value().data(), a.size() * sizeof(double)) == 0);
    }
    SECTION("permuting the batch permutes outputs identically") {
        const std::vector<size_t> perm = {3, 0, 5, 1, 4, 2};
        Tensor xp = take_rows(x, perm);
        Tensor out = enc.forward(x, {true, nullptr});
        Tensor outp = enc.forward(xp, {true, nullptr});
        for (size_t i = 0; i < perm.size(); ++i)
            for (size_t j = 0; j < 64; ++j)
                CHECK(outp.value()[i * 64 + j] ==
                      Catch::Approx(out.value()[perm[i] * 64 + j]).margin(1e-12));
    }
}

TEST_CASE("encoder plus projector composition gradient") {
    EncoderConfig cfg{EncoderFamily::time, 1, 32, 0, 1, 4, 8, 0.0};
    auto enc = build_time_encoder(cfg);
    auto proj = build_projector(8, 8, 8);
    CounterRng rng(47);
    enc.init(rng);
    proj.init(rng);
    std::vector<Tensor> params;
    enc.params(params);
    proj.params(params);
    CHECK(parameter_count(params) < 10000);

    Tensor x = random_input({4, 1, 32}, 48);
    Tensor dir = random_input({4, 8}, 49);
    // Keep |loss| small: finite differences of an O(1) function carry ~1e-11
    // cancellation noise, which the 1e-8 denominator floor would otherwise
    // surface as ~1e-3 on dead-relu coordinates whose true gradient is 0.
    auto f = [&] {
        Tensor h = enc.forward(x, {true, nullptr});
        return scale(sum(mul(proj.forward(h), dir)), 0.01);
    };
    CHECK(grad_check(f, params) <= 1e-4);
}

TEST_CASE("forward_encode dispatch") {
    EncoderConfig cfg{EncoderFamily::time, 1, 128, 0, 2, 8, 64, 0.0};
    Encoder enc = build_time_encoder(cfg);
    CounterRng rng(50);
    std::get<TimeEncoder>(enc).init(rng);
    Tensor x = random_input({2, 1, 128}, 51);

    EmbeddingSet h = forward_encode(enc, ViewInput::time(x), {false, nullptr});
    CHECK(h.n() == 2);
    CHECK(h.dim() == 64);
    Tensor hn = h.normalized();
    for (size_t i = 0; i < 2; ++i) {
        double norm2 = 0.0;
        for (size_t j = 0; j < 64; ++j) norm2 += hn.value()[i * 64 + j] * hn.value()[i * 64 + j];
        CHECK(std::sqrt(norm2) == Catch::Approx(1.0).margin(1e-12));
    }

    CHECK_THROWS_AS(forward_encode(enc, ViewInput::scalogram(random_input({2, 1, 48, 128}, 52)),
                                   TrainContext{false, nullptr}),
                    ContractError);
}
