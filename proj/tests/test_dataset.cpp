#include <filesystem>

#include "csda/dataset.hpp"
#include "csda/rng.hpp"
#include "doctest.h"

using namespace csda;

namespace {

DepthSample blank(int w, int h) {
    DepthSample s;
    s.width = w;
    s.height = h;
    s.depth.assign(static_cast<std::size_t>(w) * h, 0.0f);
    s.labels.assign(static_cast<std::size_t>(w) * h, 0);
    return s;
}

// centered square of foreground
DepthSample square_sample(int wh, int side, float depth_value = 1.0f) {
    auto s = blank(wh, wh);
    const int lo = (wh - side) / 2;
    for (int r = lo; r < lo + side; ++r)
        for (int c = lo; c < lo + side; ++c) {
            s.depth_at(r, c) = depth_value;
            s.label_at(r, c) = 1;
        }
    return s;
}

}  // namespace

TEST_CASE("minmax_normalize maps foreground extremes to 0 and 1") {
    auto s = blank(4, 1);
    s.depth = {0.0f, 2.0f, 4.0f, 3.0f};
    s.labels = {0, 1, 1, 1};
    const auto out = minmax_normalize(s);
    CHECK(out.depth[0] == 0.0f);
    CHECK(out.depth[1] == 0.0f);  // foreground min
    CHECK(out.depth[2] == 1.0f);
    CHECK(out.depth[3] == 0.5f);
    CHECK(out.labels == s.labels);
}

TEST_CASE("minmax_normalize degenerate range maps to 0.5 and is idempotent on [0,1]") {
    auto s = square_sample(8, 4, 2.5f);
    const auto out = minmax_normalize(s);
    for (std::size_t i = 0; i < out.depth.size(); ++i)
        if (out.labels[i] != 0) CHECK(out.depth[i] == 0.5f);

    auto ramp = blank(4, 1);
    ramp.depth = {0.0f, 0.0f, 1.0f, 0.25f};
    ramp.labels = {0, 1, 1, 1};
    const auto once = minmax_normalize(ramp);
    const auto twice = minmax_normalize(once);
    CHECK(once.depth == twice.depth);

    CHECK_THROWS_AS(minmax_normalize(blank(4, 4)), std::invalid_argument);
}

TEST_CASE("covariance scale factors: identity and analytic ratios") {
    std::vector<DepthSample> set_a, set_b;
    set_a.push_back(square_sample(64, 20));
    set_b.push_back(square_sample(64, 20));
    const auto [sv, sh] = covariance_scale_factors(set_a, set_b);
    CHECK(sv == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sh == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("covariance scale factors recover a known anisotropic scaling") {
    // reference = synthetic rescaled by (2, 2) about its centroid
    std::vector<DepthSample> synth{square_sample(128, 24)};
    std::vector<DepthSample> ref{rescale(synth[0], 2.0, 2.0)};
    const auto [sv, sh] = covariance_scale_factors(synth, ref);
    CHECK(sv == doctest::Approx(2.0).epsilon(0.05));
    CHECK(sh == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("covariance scale factors reject collinear foreground") {
    auto line = blank(32, 32);
    for (int c = 4; c < 28; ++c) {
        line.depth_at(16, c) = 1.0f;
        line.label_at(16, c) = 1;
    }
    std::vector<DepthSample> a{line}, b{square_sample(32, 10)};
    CHECK_THROWS_AS(covariance_scale_factors(a, b), std::invalid_argument);
}

TEST_CASE("rescale identity and factor-2 pixel counts") {
    const auto s = square_sample(64, 10);
    const auto same = rescale(s, 1.0, 1.0);
    CHECK(same.depth == s.depth);
    CHECK(same.labels == s.labels);

    const auto big = rescale(s, 2.0, 2.0);
    // side should come out 20 +- 1
    int rmin = 64, rmax = -1, cmin = 64, cmax = -1;
    for (int r = 0; r < 64; ++r)
        for (int c = 0; c < 64; ++c)
            if (big.label_at(r, c) != 0) {
                rmin = std::min(rmin, r);
                rmax = std::max(rmax, r);
                cmin = std::min(cmin, c);
                cmax = std::max(cmax, c);
            }
    CHECK(std::abs((rmax - rmin + 1) - 20) <= 1);
    CHECK(std::abs((cmax - cmin + 1) - 20) <= 1);
    for (std::size_t i = 0; i < big.depth.size(); ++i)
        CHECK((big.depth[i] == 0.0f) == (big.labels[i] == 0));

    // collapse to under 10 foreground pixels
    CHECK_THROWS_AS(rescale(s, 0.01, 0.01), std::invalid_argument);
}

TEST_CASE("hflip mirrors and is an involution") {
    auto s = blank(8, 8);
    s.depth_at(3, 2) = 1.0f;
    s.label_at(3, 2) = 4;
    const auto f = hflip_sample(s);
    CHECK(f.label_at(3, 8 - 1 - 2) == 4);
    CHECK(f.depth_at(3, 5) == 1.0f);
    const auto ff = hflip_sample(f);
    CHECK(ff.depth == s.depth);
    CHECK(ff.labels == s.labels);
}

TEST_CASE("rotate(0) is exact identity") {
    Rng rng(3);
    auto s = blank(16, 16);
    for (int i = 0; i < 40; ++i) {
        const int r = static_cast<int>(rng.uniform_index(16));
        const int c = static_cast<int>(rng.uniform_index(16));
        s.depth_at(r, c) = static_cast<float>(rng.uniform(0.5, 2.0));
        s.label_at(r, c) = static_cast<std::uint8_t>(1 + rng.uniform_index(5));
    }
    const auto out = rotate_sample(s, 0.0);
    CHECK(out.depth == s.depth);
    CHECK(out.labels == s.labels);
}

TEST_CASE("augment keeps depth/label alignment and is deterministic") {
    const auto s = square_sample(32, 12, 1.3f);
    const auto a = augment(s, {}, 999);
    const auto b = augment(s, {}, 999);
    CHECK(a.depth == b.depth);
    CHECK(a.labels == b.labels);
    for (std::size_t i = 0; i < a.depth.size(); ++i)
        CHECK((a.depth[i] == 0.0f) == (a.labels[i] == 0));
    CHECK(a.foreground_count() > 0);
}

TEST_CASE("class weights formula and normalization") {
    // two classes, counts 90/10 -> normalized (0.2, 1.8)
    const auto w = class_weights({90, 10});
    REQUIRE(w.size() == 2);
    CHECK(w[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(1.8).epsilon(1e-12));

    const auto balanced = class_weights({50, 50, 50, 50});
    for (double v : balanced) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

    const auto some = class_weights({1000, 10, 5, 200});
    for (double v : some) {
        CHECK(v > 0.0);
        CHECK(std::isfinite(v));
    }

    CHECK_THROWS_WITH_AS(class_weights({10, 0, 5}), doctest::Contains("class 1"),
                         std::invalid_argument);
}

TEST_CASE("make_splits counts, disjointness, determinism") {
    std::vector<int> ids(10);
    for (int i = 0; i < 10; ++i) ids[static_cast<std::size_t>(i)] = i;
    const auto s1 = make_splits(ids, 0.2, 7);
    CHECK(s1.test_configs.size() == 2);
    CHECK(s1.train_configs.size() == 8);
    for (int t : s1.test_configs)
        for (int tr : s1.train_configs) CHECK(t != tr);
    const auto s2 = make_splits(ids, 0.2, 7);
    CHECK(s1.test_configs == s2.test_configs);
    CHECK_THROWS_AS(make_splits(ids, 0.0, 7), std::invalid_argument);
    CHECK_THROWS_AS(make_splits(ids, 1.0, 7), std::invalid_argument);
    CHECK_THROWS_AS(make_splits({1}, 0.5, 7), std::invalid_argument);
}

TEST_CASE("dataset label audit counts reads per domain") {
    Dataset ds;
    auto synth = square_sample(8, 4);
    synth.domain = Domain::synthetic;
    auto real = square_sample(8, 4);
    real.domain = Domain::surrogate_real;
    ds.add(synth);
    ds.add(real);
    CHECK(ds.label_reads(Domain::synthetic) == 0);
    CHECK(ds.label_reads(Domain::surrogate_real) == 0);
    (void)ds.depth_of(0);
    (void)ds.depth_of(1);
    CHECK(ds.label_reads(Domain::surrogate_real) == 0);
    (void)ds.labels_of(0);
    CHECK(ds.label_reads(Domain::synthetic) == 1);
    CHECK(ds.label_reads(Domain::surrogate_real) == 0);
    (void)ds.labels_of(1);
    CHECK(ds.label_reads(Domain::surrogate_real) == 1);
    ds.reset_label_audit();
    CHECK(ds.label_reads(Domain::synthetic) == 0);
}

TEST_CASE("class pixel counts equal a direct recount") {
    Dataset ds;
    auto s = square_sample(16, 6);
    s.label_at(2, 2) = 3;
    s.depth_at(2, 2) = 0.7f;
    ds.add(s);
    const auto counts = ds.class_pixel_counts();
    std::vector<std::int64_t> direct(kClassCount, 0);
    for (auto l : s.labels) direct[l]++;
    CHECK(counts == direct);
}
