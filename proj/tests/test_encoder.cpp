#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "ts2rep/checkpoint.hpp"
#include "ts2rep/encoder.hpp"

using namespace ts2rep;
using namespace ts2rep::encoder;

namespace {

Batch random_batch(int64_t B, int64_t T, int64_t F, uint64_t seed) {
    Rng rng(seed);
    Batch b{B, T, F, {}};
    b.values.resize(static_cast<size_t>(B * T * F));
    for (auto& v : b.values) v = rng.uniform(-2.0, 2.0);
    return b;
}

}  // namespace

TEST_CASE("init_params is deterministic per seed") {
    EncoderConfig cfg{3, 8, 6, 2};
    auto a = init_params<float>(cfg, 42);
    auto b = init_params<float>(cfg, 42);
    REQUIRE(a.named.size() == b.named.size());
    for (size_t i = 0; i < a.named.size(); ++i) {
        CHECK(a.named[i].first == b.named[i].first);
        CHECK(a.named[i].second->data == b.named[i].second->data);
    }
    auto c = init_params<float>(cfg, 43);
    bool any_diff = false;
    for (size_t i = 0; i < a.named.size(); ++i)
        if (a.named[i].second->data != c.named[i].second->data) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("parameter layout: depth hidden blocks plus an output block, dilation 2^l") {
    EncoderConfig cfg{1, 64, 320, 10};
    auto p = init_params<float>(cfg, 1);
    CHECK(p.find("proj.W")->shape == tensor::Shape{64, 1});
    CHECK(p.find("block9.conv1.k")->shape == tensor::Shape{64, 64, 3});
    CHECK(p.find("block10.conv1.k")->shape == tensor::Shape{320, 64, 3});
    CHECK(p.find("block10.skip.W")->shape == tensor::Shape{320, 64});
    CHECK_THROWS_AS(p.find("block11.conv1.k"), ArgumentError);
    // block l dilates by 2^l: block 9 -> 512
    CHECK((int64_t{1} << 9) == 512);
    CHECK(receptive_field_radius(2) == 14);
}

TEST_CASE("project_input handles NaN by zero-substitution plus forced masking") {
    EncoderConfig cfg{2, 4, 3, 1};
    auto p = init_params<double>(cfg, 7, false);
    Batch b = random_batch(2, 5, 2, 3);
    b.values[(1 * 5 + 2) * 2 + 0] = std::nan("");  // series 1, timestamp 2, feature 0

    auto plan = MaskPlan::all_ones(2, 5);
    auto latent = project_input(p, b, plan);
    CHECK(latent->shape == tensor::Shape{2, 5, 4});
    CHECK(plan.keep[1 * 5 + 2] == 0);  // NaN timestamp is now masked
    CHECK(plan.keep[0 * 5 + 2] == 1);
    for (const auto v : latent->data) CHECK(std::isfinite(v));
}

TEST_CASE("projection keeps a constant nonzero coordinate with W=[[1],[0]], b=[0,1]") {
    EncoderConfig cfg{1, 2, 3, 1};
    auto p = init_params<double>(cfg, 0, false);
    p.find("proj.W")->data = {1.0, 0.0};
    p.find("proj.b")->data = {0.0, 1.0};
    Batch b = random_batch(1, 6, 1, 11);
    auto plan = MaskPlan::all_ones(1, 6);
    auto latent = project_input(p, b, plan);
    for (int64_t t = 0; t < 6; ++t) {
        CHECK(latent->data[t * 2 + 0] == doctest::Approx(b.values[t]));
        CHECK(latent->data[t * 2 + 1] == 1.0);  // never collides with the zero mask vector
    }
}

TEST_CASE("zero weights and zero input give zero latent") {
    EncoderConfig cfg{2, 3, 2, 1};
    auto p = init_params<double>(cfg, 1, false);
    std::fill(p.find("proj.W")->data.begin(), p.find("proj.W")->data.end(), 0.0);
    std::fill(p.find("proj.b")->data.begin(), p.find("proj.b")->data.end(), 0.0);
    Batch b{1, 4, 2, std::vector<double>(8, 0.0)};
    auto plan = MaskPlan::all_ones(1, 4);
    auto latent = project_input(p, b, plan);
    for (double v : latent->data) CHECK(v == 0.0);
}

TEST_CASE("apply_mask modes") {
    auto latent = tensor::from_values<double>({1, 5, 2}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
    auto ones = apply_mask(latent, MaskPlan::all_ones(1, 5));
    CHECK(ones->data == latent->data);
    auto zeros = apply_mask(latent, MaskPlan::all_zeros(1, 5));
    for (double v : zeros->data) CHECK(v == 0.0);
    auto last = apply_mask(latent, MaskPlan::mask_last(1, 5));
    for (int i = 0; i < 8; ++i) CHECK(last->data[i] == latent->data[i]);
    CHECK(last->data[8] == 0.0);
    CHECK(last->data[9] == 0.0);
}

TEST_CASE("bernoulli_half mask rate over 10,000 samples is 0.5 +/- 0.02") {
    Rng rng(123);
    auto plan = MaskPlan::bernoulli_half(100, 100, rng);
    double kept = 0;
    for (auto v : plan.keep) kept += v;
    const double rate = 1.0 - kept / 10000.0;  // fraction masked
    CHECK(rate > 0.48);
    CHECK(rate < 0.52);
}

TEST_CASE("encode shape contract and purity") {
    EncoderConfig cfg{2, 6, 5, 2};
    auto p = init_params<double>(cfg, 5, false);

    SUBCASE("T=1 gives B x 1 x K") {
        Batch b = random_batch(3, 1, 2, 1);
        auto r = encode(p, b, MaskPlan::all_ones(3, 1));
        CHECK(r->shape == tensor::Shape{3, 1, 5});
    }
    SUBCASE("output length always equals input length") {
        for (int64_t T : {1, 2, 3, 7, 19, 64}) {
            Batch b = random_batch(2, T, 2, T);
            auto r = encode(p, b, MaskPlan::all_ones(2, T));
            CHECK(r->shape == tensor::Shape{2, T, 5});
        }
    }
    SUBCASE("identical rows with identical masks produce identical representations") {
        Batch b = random_batch(1, 9, 2, 2);
        Batch dup{2, 9, 2, {}};
        dup.values = b.values;
        dup.values.insert(dup.values.end(), b.values.begin(), b.values.end());
        auto r = encode(p, dup, MaskPlan::all_ones(2, 9));
        for (int64_t i = 0; i < 9 * 5; ++i) CHECK(r->data[i] == r->data[9 * 5 + i]);
    }
    SUBCASE("encode is a pure function of its inputs") {
        Batch b = random_batch(2, 7, 2, 3);
        auto r1 = encode(p, b, MaskPlan::all_ones(2, 7));
        auto r2 = encode(p, b, MaskPlan::all_ones(2, 7));
        CHECK(r1->data == r2->data);
    }
    SUBCASE("feature mismatch names both dimensions") {
        Batch b = random_batch(1, 4, 3, 4);
        CHECK_THROWS_AS(encode(p, b, MaskPlan::all_ones(1, 4)), DimensionError);
    }
}

TEST_CASE("perturbations stay inside the analytic receptive field") {
    EncoderConfig cfg{1, 4, 3, 2};
    auto p = init_params<double>(cfg, 9, false);
    const int64_t T = 64, t0 = 32;
    const int64_t radius = receptive_field_radius(cfg.depth);
    REQUIRE(radius == 14);

    Batch base = random_batch(1, T, 1, 5);
    Batch bumped = base;
    bumped.values[t0] += 1.0;

    auto r0 = encode(p, base, MaskPlan::all_ones(1, T));
    auto r1 = encode(p, bumped, MaskPlan::all_ones(1, T));
    double change_at_t0 = 0.0;
    for (int64_t t = 0; t < T; ++t) {
        double diff = 0;
        for (int64_t k = 0; k < 3; ++k) diff = std::max(diff, std::fabs(r0->data[t * 3 + k] - r1->data[t * 3 + k]));
        if (t == t0) change_at_t0 = diff;
        if (std::llabs(t - t0) > radius) CHECK(diff == 0.0);
    }
    CHECK(change_at_t0 > 0.0);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    EncoderConfig cfg{3, 8, 6, 2};
    auto p = init_params<float>(cfg, 77, false);
    const auto bytes = checkpoint::to_bytes(p);
    auto q = checkpoint::from_bytes(bytes);
    CHECK(q.config.input_dims == 3);
    CHECK(q.config.hidden_dims == 8);
    CHECK(q.config.output_dims == 6);
    CHECK(q.config.depth == 2);
    CHECK(checkpoint::to_bytes(q) == bytes);

    const std::string path = "ckpt_roundtrip_test.ts2v";
    checkpoint::save(p, path);
    auto loaded = checkpoint::load(path);
    CHECK(checkpoint::to_bytes(loaded) == bytes);
    std::remove(path.c_str());

    std::vector<uint8_t> junk{'n', 'o', 'p', 'e', 0, 0, 0, 0};
    CHECK_THROWS_AS(checkpoint::from_bytes(junk), DataError);
}

TEST_CASE("encode regression hash is stable for a fixed seed and input") {
    EncoderConfig cfg{2, 8, 6, 3};
    auto p = init_params<double>(cfg, 2024, false);
    Batch b = random_batch(2, 16, 2, 99);
    auto r = encode(p, b, MaskPlan::all_ones(2, 16));

    // quantize to 1e-9 to make the digest robust to benign FP reassociation
    uint64_t h = 0xcbf29ce484222325ull;
    for (double v : r->data) {
        const auto q = static_cast<int64_t>(std::llround(v * 1e9));
        h = fnv1a64(&q, sizeof(q), h);
    }
    // golden value recorded from the first verified run of this configuration
    CHECK(h == 0x5bfb56cda74e4e7bull);
}
