#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "frameproj/objectives.hpp"
#include "frameproj/rng.hpp"

using namespace frameproj;

namespace {

Tensor random_rows(size_t n, size_t d, uint64_t seed) {
    Tensor t = Tensor::zeros({n, d});
    CounterRng rng(seed);
    for (double& v : t.mutable_value()) v = rng.uniform(-1.0, 1.0);
    return t;
}

std::vector<double> row_of(const Tensor& t, size_t i) {
    const size_t d = t.dim(1);
    return {t.value().begin() + long(i * d), t.value().begin() + long((i + 1) * d)};
}

// Naive per-anchor double-loop oracle, no stabilization.
std::vector<double> ntxent_oracle(const Tensor& a, const Tensor& b, double tau,
                                  bool include_positive) {
    const size_t n = a.dim(0);
    std::vector<double> out(n);
    for (size_t i = 0; i < n; ++i) {
        const double pos = std::exp(cosine_similarity(row_of(a, i), row_of(b, i)) / tau);
        double denom = include_positive ? pos : 0.0;
        for (size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            denom += std::exp(cosine_similarity(row_of(a, i), row_of(b, k)) / tau);
        }
        out[i] = -std::log(pos / denom);
    }
    return out;
}

}  // namespace

TEST_CASE("cosine similarity") {
    CHECK(cosine_similarity({1, 2, 3}, {1, 2, 3}) == 1.0);
    CHECK(cosine_similarity({1, 0}, {0, 1}) == 0.0);
    CHECK(cosine_similarity({1, 2}, {-1, -2}) == Catch::Approx(-1.0).margin(1e-12));
    CHECK_THROWS_AS(cosine_similarity({1e-13, 0}, {1, 0}), DegenerateVectorError);
}

TEST_CASE("ntxent analytic cases") {
    SECTION("aligned positive with orthogonal negative") {
        Tensor z = Tensor::from({2, 2}, {1, 0, 0, 1});
        for (double tau : {0.2, 0.5, 1.0}) {
            Tensor losses = ntxent_pair(z, z, tau);
            const double expect = std::log(1.0 + std::exp(-1.0 / tau));
            CHECK(losses.value()[0] == Catch::Approx(expect).margin(1e-9));
            CHECK(losses.value()[1] == Catch::Approx(expect).margin(1e-9));
        }
        Tensor l1 = ntxent_pair(z, z, 1.0);
        CHECK(l1.value()[0] == Catch::Approx(0.313262).margin(1e-6));
    }
    SECTION("all-identical embeddings give log N") {
        for (size_t n : {2ul, 8ul}) {
            Tensor z = Tensor::zeros({n, 3});
            for (size_t i = 0; i < n; ++i) {
                z.mutable_value()[i * 3 + 0] = 0.6;
                z.mutable_value()[i * 3 + 2] = 0.8;
            }
            Tensor losses = ntxent_pair(z, z, 0.7);
            for (size_t i = 0; i < n; ++i)
                CHECK(losses.value()[i] == Catch::Approx(std::log(double(n))).margin(1e-9));
        }
    }
    SECTION("contracts") {
        CHECK_THROWS_AS(ntxent_pair(random_rows(1, 4, 1), random_rows(1, 4, 2), 0.2), ContractError);
        CHECK_THROWS_AS(ntxent_pair(random_rows(4, 4, 1), random_rows(4, 4, 2), 0.0), ConfigError);
    }
}

TEST_CASE("ntxent matches the double-loop oracle") {
    Tensor a = random_rows(8, 5, 3);
    Tensor b = random_rows(8, 5, 4);
    for (bool include : {true, false}) {
        Tensor got = ntxent_pair(a, b, 0.3, include);
        const auto want = ntxent_oracle(a, b, 0.3, include);
        for (size_t i = 0; i < 8; ++i)
            CHECK(std::abs(got.value()[i] - want[i]) < 1e-12);
    }
}

TEST_CASE("ntxent properties") {
    SECTION("losses are non-negative with the positive in the denominator") {
        for (uint64_t seed = 10; seed < 15; ++seed) {
            Tensor a = random_rows(6, 4, seed);
            Tensor b = random_rows(6, 4, seed + 100);
            Tensor losses = ntxent_pair(a, b, 0.2);
            for (double l : losses.value()) CHECK(l >= -1e-12);
        }
    }
    SECTION("decreasing tau sharpens aligned batches") {
        Tensor a = random_rows(6, 8, 20);
        Tensor l_small = ntxent_pair(a, a, 0.2);
        Tensor l_mid = ntxent_pair(a, a, 0.5);
        Tensor l_big = ntxent_pair(a, a, 1.0);
        for (size_t i = 0; i < 6; ++i) {
            CHECK(l_small.value()[i] <= l_mid.value()[i] + 1e-12);
            CHECK(l_mid.value()[i] <= l_big.value()[i] + 1e-12);
        }
    }
}

TEST_CASE("instance discrimination loss") {
    SECTION("identical sets give 3 log 2") {
        Tensor z = Tensor::from({2, 2}, {1, 0, 0, 1});
        auto [l_id, pairs] = instance_discrimination_loss(z, z, z, 1.0);
        // every directed term is log(1 + e^{-1}), and the identical-triple
        // case with aligned rows: s_pos = 1, negative similarity 0
        const double per = std::log(1.0 + std::exp(-1.0));
        CHECK(l_id.item() == Catch::Approx(3.0 * per).margin(1e-9));
        CHECK(pairs.size() == 6);
        for (const auto& [k, v] : pairs) CHECK(v == Catch::Approx(per).margin(1e-9));
    }
    SECTION("all-equal rows give 3 log 2 at any tau") {
        Tensor z = Tensor::zeros({2, 3});
        for (size_t i = 0; i < 2; ++i) {
            z.mutable_value()[i * 3] = 1.0;
        }
        auto [l_id, pairs] = instance_discrimination_loss(z, z, z, 0.4);
        CHECK(l_id.item() == Catch::Approx(3.0 * std::log(2.0)).margin(1e-9));
    }
    SECTION("invariant under positive rescaling") {
        Tensor zt = random_rows(6, 5, 30), zf = random_rows(6, 5, 31), zw = random_rows(6, 5, 32);
        auto [base, p0] = instance_discrimination_loss(zt, zf, zw, 0.2);
        auto scaled = [&](const Tensor& t, double c) {
            Tensor out = t.clone();
            for (double& v : out.mutable_value()) v *= c;
            return out;
        };
        // power-of-two scaling is exact in floating point
        auto [s4, p4] = instance_discrimination_loss(scaled(zt, 4.0), scaled(zf, 4.0),
                                                     scaled(zw, 4.0), 0.2);
        CHECK(s4.item() == base.item());
        auto [s5, p5] = instance_discrimination_loss(scaled(zt, 5.0), scaled(zf, 5.0),
                                                     scaled(zw, 5.0), 0.2);
        CHECK(s5.item() == Catch::Approx(base.item()).margin(1e-12));
    }
    SECTION("matches a brute-force oracle") {
        Tensor zt = random_rows(6, 4, 40), zf = random_rows(6, 4, 41), zw = random_rows(6, 4, 42);
        auto [l_id, pairs] = instance_discrimination_loss(zt, zf, zw, 0.3);
        double want = 0.0;
        const std::vector<std::pair<const Tensor*, const Tensor*>> unordered = {
            {&zt, &zf}, {&zt, &zw}, {&zf, &zw}};
        for (auto [a, b] : unordered) {
            const auto fwd = ntxent_oracle(*a, *b, 0.3, true);
            const auto bwd = ntxent_oracle(*b, *a, 0.3, true);
            double acc = 0.0;
            for (size_t i = 0; i < fwd.size(); ++i) acc += fwd[i] + bwd[i];
            want += acc / (2.0 * 6.0);
        }
        CHECK(l_id.item() == Catch::Approx(want).margin(1e-12));
    }
}

TEST_CASE("mapping loss") {
    auto phi_f = build_mapper(4);
    auto phi_w = build_mapper(4);
    // zero parameters: mapper output is identically zero
    SECTION("zero mapper against explicit targets") {
        Tensor z_t = random_rows(1, 4, 50);
        Tensor target = Tensor::from({1, 4}, {1, -1, 0.5, -0.5});
        Tensor l = mapping_loss_single(phi_f, z_t, target);
        CHECK(l.item() == Catch::Approx(3.0).margin(1e-12));  // |1|+|-1|+|.5|+|-.5|

        Tensor t2 = Tensor::from({1, 2}, {1.0, -1.0});
        auto phi2 = build_mapper(2);
        CHECK(mapping_loss_single(phi2, random_rows(1, 2, 51), t2).item() ==
              Catch::Approx(2.0).margin(1e-12));
    }
    SECTION("mapper output equal to target gives zero") {
        CounterRng rng(52);
        phi_f.init(rng);
        Tensor z_t = random_rows(3, 4, 53);
        Tensor target = phi_f.forward(z_t);
        CHECK(mapping_loss_single(phi_f, z_t, target.clone()).item() == 0.0);
    }
    SECTION("matches the elementwise-abs oracle") {
        CounterRng rng(54);
        phi_f.init(rng);
        phi_w.init(rng);
        Tensor z_t = random_rows(5, 4, 55), z_f = random_rows(5, 4, 56), z_w = random_rows(5, 4, 57);
        Tensor got = mapping_loss(phi_f, phi_w, z_t, z_f, z_w);
        Tensor ef = phi_f.forward(z_t), ew = phi_w.forward(z_t);
        double want = 0.0;
        for (size_t i = 0; i < ef.size(); ++i) want += std::abs(ef.value()[i] - z_f.value()[i]);
        for (size_t i = 0; i < ew.size(); ++i) want += std::abs(ew.value()[i] - z_w.value()[i]);
        want /= 5.0;
        CHECK(got.item() == Catch::Approx(want).margin(1e-12));
    }
}

TEST_CASE("total pretrain loss") {
    CHECK(total_pretrain_loss(Tensor::scalar(2.0), Tensor::scalar(0.5)).item() == 2.5);
    CHECK(total_pretrain_loss(Tensor::scalar(1.7), Tensor::scalar(0.0)).item() == 1.7);

    SECTION("gradient of the sum equals the sum of component gradients") {
        Tensor z = random_rows(4, 6, 60);
        z.set_requires_grad(true);
        auto phi = build_mapper(6);
        CounterRng rng(61);
        phi.init(rng);
        Tensor target = random_rows(4, 6, 62);

        auto grads_of = [&](bool with_id, bool with_map) {
            z.zero_grad();
            Tape tape;
            Tensor loss = Tensor::scalar(0.0);
            if (with_id) {
                auto [l_id, rep] = instance_discrimination_loss(z, z, z, 0.5);
                loss = add(loss, l_id);
            }
            if (with_map) loss = add(loss, mapping_loss_single(phi, z, target));
            tape.backward(loss);
            return z.grad();
        };
        const auto joint = grads_of(true, true);
        const auto g_id = grads_of(true, false);
        const auto g_map = grads_of(false, true);
        for (size_t i = 0; i < joint.size(); ++i)
            CHECK(std::abs(joint[i] - (g_id[i] + g_map[i])) < 1e-10);
    }
}

TEST_CASE("runlog csv serialization") {
    LossReport r;
    r.l_id = 1.5;
    r.l_map = 0.25;
    r.total = 1.75;
    for (const auto& k : LossReport::pair_keys()) r.per_pair[k] = 0.25;
    const std::string header = runlog_csv_header();
    CHECK(header == "step,l_id,l_map,total,t->F,F->t,t->W,W->t,F->W,W->F\n");
    const std::string row = runlog_csv_row(3, r);
    CHECK(row.substr(0, 2) == "3,");
    CHECK(row.find("1.75") != std::string::npos);
}
