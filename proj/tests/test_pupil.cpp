#include <cmath>

#include <doctest.h>

#include "gzk/pupil.hpp"
#include "gzk/random.hpp"
#include "gzk/synth.hpp"
#include "oracles/components.hpp"
#include "oracles/morphology.hpp"
#include "oracles/percentile.hpp"
#include "support.hpp"

using namespace gzk;
using namespace gzk::pupil;
using testing::error_of;

namespace {

BinaryImage random_binary(Rng& rng, int w, int h, double density) {
    BinaryImage img(w, h);
    for (auto& v : img.data) v = rng.bernoulli(density) ? 1 : 0;
    return img;
}

BinaryImage from_rows(const std::vector<std::string>& rows) {
    BinaryImage img(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) img.at(x, y) = rows[y][x] == '#' ? 1 : 0;
    return img;
}

const EyePolygon kWideEye{{{2, 12}, {12, 2}, {28, 2}, {38, 12}, {28, 22}, {12, 22}}};

}  // namespace

TEST_CASE("nearest-rank percentile matches the sort oracle") {
    Rng rng(3);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(400);
        std::vector<std::uint8_t> v(n);
        for (auto& x : v) x = static_cast<std::uint8_t>(rng.uniform_index(256));
        for (int p : {2, 50, 98}) CHECK(nearest_rank_percentile(v, p) == oracle::percentile(v, p));
    }
    std::vector<std::uint8_t> ramp(100);
    for (int i = 0; i < 100; ++i) ramp[i] = static_cast<std::uint8_t>(i);
    CHECK(nearest_rank_percentile(ramp, 2) == 1);
    CHECK(nearest_rank_percentile(ramp, 98) == 97);
    CHECK(error_of([] { nearest_rank_percentile({}, 2); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("rescaling maps the 2nd and 98th percentiles to 0 and 1") {
    GrayImage img(4, 4, std::uint8_t{200});
    for (int x = 0; x < 4; ++x) img.at(x, 0) = 0;
    BinaryImage mask(4, 4, 1);
    const auto r = rescale_intensity(img, mask);
    CHECK(r.at(0, 0) == 0.0);
    CHECK(r.at(2, 3) == 1.0);

    mask.at(3, 3) = 0;
    const auto m = rescale_intensity(img, mask);
    CHECK(m.at(3, 3) == 1.0);

    CHECK(error_of([] { rescale_intensity(GrayImage(5, 5, std::uint8_t{90}), BinaryImage(5, 5, 1)); }) ==
          ErrorCode::DegenerateIntensity);
    CHECK(error_of([] { rescale_intensity(GrayImage(5, 5, std::uint8_t{90}), BinaryImage(5, 5, 0)); }) ==
          ErrorCode::InvalidArgument);
}

TEST_CASE("binarize marks pixels strictly below the threshold") {
    RealImage img{3, 1, {0.02, 0.05, 0.2}};
    const auto b = binarize(img, 0.05);
    CHECK(b.data == std::vector<std::uint8_t>{1, 0, 0});
}

TEST_CASE("polygon mask uses pixel centers") {
    const EyePolygon square{{{1, 1}, {3, 1}, {5, 1}, {5, 5}, {3, 5}, {1, 5}}};
    const auto m = polygon_mask(7, 7, square);
    CHECK(m.at(3, 3) == 1);
    CHECK(m.at(0, 0) == 0);
    CHECK(m.at(6, 3) == 0);
}

TEST_CASE("window one leaves images unchanged") {
    Rng rng(1);
    const auto img = random_binary(rng, 13, 9, 0.5);
    CHECK(morph_open(img, 1) == img);
    CHECK(morph_close(img, 1) == img);
}

TEST_CASE("opening removes an isolated pixel") {
    BinaryImage img(9, 9);
    img.at(4, 4) = 1;
    CHECK(morph_open(img, 3) == BinaryImage(9, 9));
}

TEST_CASE("pixels beyond the border count as background") {
    const BinaryImage full(6, 5, 1);
    const auto e = erode(full, 3);
    CHECK(e.at(0, 0) == 0);
    CHECK(e.at(2, 2) == 1);
    const auto c = morph_close(full, 3);
    CHECK(c.at(0, 2) == 0);
    CHECK(c.at(3, 2) == 1);
}

TEST_CASE("morphology matches the brute-force oracle") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int w = 8 + static_cast<int>(rng.uniform_index(25));
        const int h = 8 + static_cast<int>(rng.uniform_index(25));
        const auto img = random_binary(rng, w, h, rng.uniform(0.2, 0.8));
        for (int win : {1, 3, 5, 7}) {
            REQUIRE(erode(img, win) == oracle::erode(img, win));
            REQUIRE(dilate(img, win) == oracle::dilate(img, win));
            REQUIRE(morph_open(img, win) == oracle::open(img, win));
            REQUIRE(morph_close(img, win) == oracle::close(img, win));
        }
    }
}

TEST_CASE("opening and closing are idempotent") {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const auto img = random_binary(rng, 20, 16, 0.5);
        for (int win : {3, 5}) {
            const auto o = morph_open(img, win);
            CHECK(morph_open(o, win) == o);
            const auto c = morph_close(img, win);
            CHECK(morph_close(c, win) == c);
        }
    }
}

TEST_CASE("even or non-positive windows are rejected") {
    const BinaryImage img(4, 4);
    CHECK(error_of([&] { morph_open(img, 2); }) == ErrorCode::InvalidArgument);
    CHECK(error_of([&] { morph_close(img, 0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("largest circular blob") {
    SUBCASE("single square") {
        const auto b = largest_circular_blob(from_rows({
            ".......",
            ".#####.",
            ".#####.",
            ".#####.",
            ".#####.",
            ".#####.",
            ".......",
        }));
        REQUIRE(b);
        CHECK(b->area == 25);
        CHECK(b->centroid == Point2{3.0, 3.0});
    }
    SUBCASE("a long bar loses to a smaller square") {
        const auto b = largest_circular_blob(from_rows({
            "##########.....",
            "...........###.",
            "...........###.",
            "...........###.",
        }));
        REQUIRE(b);
        CHECK(b->area == 9);
        CHECK(b->centroid == Point2{12.0, 2.0});
    }
    SUBCASE("diagonal neighbours join") {
        const auto b = largest_circular_blob(from_rows({
            "#....",
            ".#...",
            "..#..",
            "...#.",
            "....#",
        }));
        REQUIRE(b);
        CHECK(b->area == 5);
        CHECK(b->bbox_width == 5);
    }
    SUBCASE("below the minimum area") {
        CHECK_FALSE(largest_circular_blob(from_rows({"##..", "##..", "...."})));
    }
    SUBCASE("equal areas keep the first in raster order") {
        const auto b = largest_circular_blob(from_rows({
            "###....",
            "###..##",
            "###..##",
            ".....##",
            ".....##",
            ".....#.",
        }));
        REQUIRE(b);
        CHECK(b->centroid == Point2{1.0, 1.0});
    }
}

TEST_CASE("blob search matches the flood-fill oracle") {
    Rng rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        const auto img = random_binary(rng, 6 + static_cast<int>(rng.uniform_index(30)),
                                       6 + static_cast<int>(rng.uniform_index(20)), rng.uniform(0.1, 0.7));
        const auto got = largest_circular_blob(img);
        const auto want = oracle::largest_circular_blob(img);
        REQUIRE(got.has_value() == want.has_value());
        if (!got) continue;
        CHECK(got->area == want->area);
        CHECK(got->bbox_width == want->bbox_width);
        CHECK(got->bbox_height == want->bbox_height);
        CHECK(got->centroid.x == doctest::Approx(want->centroid.x).epsilon(1e-12));
        CHECK(got->centroid.y == doctest::Approx(want->centroid.y).epsilon(1e-12));
    }
}

TEST_CASE("closed eye detection") {
    CHECK(eye_is_closed({{{0, 10}, {10, 9}, {30, 9}, {40, 10}, {30, 12}, {10, 12}}}));
    CHECK_FALSE(eye_is_closed(kWideEye));
}

TEST_CASE("grid parsing and validation") {
    const PupilGrid def;
    CHECK(def.triples().size() == 27);
    CHECK(def.triples().front() == PupilParams{0.03, 1, 1});
    CHECK(PupilGrid::parse(def.to_string()).triples() == def.triples());
    CHECK(error_of([] { PupilGrid::parse("0.1,0.2"); }) == ErrorCode::InvalidArgument);
    CHECK(error_of([] { PupilGrid::parse("0.1,0.2,0.3,1,2,3,1,3,5"); }) == ErrorCode::InvalidArgument);
    CHECK(error_of([] { PupilGrid::parse("0.1,1.2,0.3,1,3,5,1,3,5"); }) == ErrorCode::InvalidArgument);
    CHECK(error_of([] { PupilGrid::parse("0.1,x,0.3,1,3,5,1,3,5"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("detector finds a rendered pupil") {
    Rng rng(5);
    const Point2 truth{20.0, 12.0};
    const auto crop = synth::render_eye(40, 24, kWideEye, truth, 5.0, 0.02, rng);
    const auto r = detect_pupil(crop, kWideEye);
    REQUIRE(r.detected());
    CHECK(std::hypot(r.center->x - truth.x, r.center->y - truth.y) < 2.0);
    REQUIRE(r.chosen_params);

    SUBCASE("chosen triple yields the largest blob of the grid") {
        const auto rescaled = rescale_intensity(crop, kWideEye);
        for (const auto& p : PupilGrid{}.triples()) {
            const auto b = evaluate_params(rescaled, p);
            if (b) CHECK(b->area <= r.blob_area);
            if (b && b->area == r.blob_area) CHECK_FALSE(p < *r.chosen_params);
        }
        const auto chosen = evaluate_params(rescaled, *r.chosen_params);
        REQUIRE(chosen);
        CHECK(chosen->area == r.blob_area);
    }
    SUBCASE("detection is deterministic") {
        const auto again = detect_pupil(crop, kWideEye);
        CHECK(again.center == r.center);
        CHECK(again.chosen_params == r.chosen_params);
    }
}

TEST_CASE("detector failure statuses") {
    const EyePolygon closed{{{2, 12}, {12, 11}, {28, 11}, {38, 12}, {28, 13}, {12, 13}}};
    Rng rng(6);
    const auto crop = synth::render_eye(40, 24, kWideEye, {20, 12}, 4.0, 0.02, rng);
    CHECK(detect_pupil(crop, closed).status == PupilStatus::EyeClosed);
    CHECK(detect_pupil(GrayImage(40, 24, std::uint8_t{180}), kWideEye).status == PupilStatus::NoBlob);
    GrayImage line(40, 24, std::uint8_t{200});
    for (int x = 0; x < 40; ++x) line.at(x, 12) = 10;
    CHECK(detect_pupil(line, kWideEye).status == PupilStatus::NoBlob);
}

TEST_CASE("detected center lies inside the crop") {
    Rng rng(8);
    for (int i = 0; i < 30; ++i) {
        const Point2 c{rng.uniform(14, 26), rng.uniform(9, 15)};
        const auto crop = synth::render_eye(40, 24, kWideEye, c, rng.uniform(3, 6), 0.04, rng);
        const auto r = detect_pupil(crop, kWideEye);
        if (!r.detected()) continue;
        CHECK(r.center->x >= 0);
        CHECK(r.center->x <= 39);
        CHECK(r.center->y >= 0);
        CHECK(r.center->y <= 23);
        CHECK(r.blob_area >= kMinBlobArea);
    }
}
