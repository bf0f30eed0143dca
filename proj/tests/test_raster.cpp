// Copyright 2026 The hoikit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <filesystem>

#include "hoikit/raster.hpp"
#include "hoikit/rng.hpp"

using hoikit::Raster;
using hoikit::Rgb;

TEST_CASE("ppm io round-trips pixels losslessly") {
    namespace fs = std::filesystem;
    hoikit::Rng rng(11);
    Raster img(37, 23);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            img.set(x, y, {static_cast<uint8_t>(rng.uniform_int(256)),
                           static_cast<uint8_t>(rng.uniform_int(256)),
                           static_cast<uint8_t>(rng.uniform_int(256))});
    fs::path dir = fs::temp_directory_path() / "hoikit_raster_test";
    fs::create_directories(dir);
    fs::path p = dir / "round.ppm";
    hoikit::write_ppm(img, p.string());
    Raster back = hoikit::read_ppm(p.string());
    CHECK(back == img);
    fs::remove_all(dir);
}

TEST_CASE("drawing clips at the borders") {
    Raster img(16, 16, {0, 0, 0});
    hoikit::fill_rect(img, -5, -5, 30, 3, {255, 0, 0});
    hoikit::fill_disk(img, 0, 15, 4, {0, 255, 0});
    hoikit::draw_line(img, -3, 8, 20, 8, {0, 0, 255});
    CHECK(img.get(0, 0) == Rgb{255, 0, 0});
    CHECK(img.get(15, 3) == Rgb{255, 0, 0});
    CHECK(img.get(0, 15) == Rgb{0, 255, 0});
    CHECK(img.get(8, 8) == Rgb{0, 0, 255});
}

TEST_CASE("fill_rect covers exactly the requested pixels") {
    Raster img(20, 20, {0, 0, 0});
    hoikit::fill_rect(img, 3, 5, 10, 12, {200, 100, 50});
    int painted = 0;
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x)
            if (img.get(x, y) == Rgb{200, 100, 50}) {
                ++painted;
                CHECK(x >= 3);
                CHECK(x <= 10);
                CHECK(y >= 5);
                CHECK(y <= 12);
            }
    CHECK(painted == 8 * 8);
}

TEST_CASE("glyph shapes are distinguishable") {
    // Every shape primitive must paint a different pixel pattern on the same
    // bounding box, otherwise scene categories collapse visually.
    auto render = [](auto&& draw) {
        Raster img(16, 16, {0, 0, 0});
        draw(img);
        return img.data;
    };
    Rgb c{255, 255, 255};
    auto rect = render([&](Raster& i) { hoikit::fill_rect(i, 2, 2, 13, 13, c); });
    auto disk = render([&](Raster& i) { hoikit::fill_disk(i, 8, 8, 6, c); });
    auto ring = render([&](Raster& i) { hoikit::fill_ring(i, 8, 8, 6, 3, c); });
    auto tri = render([&](Raster& i) { hoikit::fill_triangle_up(i, 2, 2, 13, 13, c); });
    auto dia = render([&](Raster& i) { hoikit::fill_diamond(i, 2, 2, 13, 13, c); });
    auto cross = render([&](Raster& i) { hoikit::fill_cross(i, 2, 2, 13, 13, c); });
    auto outline = render([&](Raster& i) { hoikit::draw_rect_outline(i, 2, 2, 13, 13, c, 2); });
    std::vector<std::vector<uint8_t>> all{rect, disk, ring, tri, dia, cross, outline};
    for (size_t i = 0; i < all.size(); ++i)
        for (size_t j = i + 1; j < all.size(); ++j) CHECK(all[i] != all[j]);
}

TEST_CASE("draw_text paints known glyphs and blocks unknown ones") {
    Raster img(64, 16, {0, 0, 0});
    hoikit::draw_text(img, 1, 1, "AB", {255, 255, 255});
    int lit = 0;
    for (auto v : img.data) lit += v > 0;
    CHECK(lit > 0);
    Raster blk(16, 16, {0, 0, 0});
    hoikit::draw_text(blk, 1, 1, "\x01", {255, 255, 255});
    int blk_lit = 0;
    for (auto v : blk.data) blk_lit += v == 255;
    CHECK(blk_lit == 5 * 7 * 3);  // full 5x7 block, three channels
}

TEST_CASE("raster_to_rows maps bytes to unit-interval doubles") {
    Raster img(2, 2, {0, 0, 0});
    img.set(0, 0, {255, 0, 0});
    img.set(1, 0, {0, 128, 0});
    img.set(0, 1, {0, 0, 51});
    auto rows = hoikit::raster_to_rows(img);
    REQUIRE(rows.size() == 12);
    CHECK(rows[0] == 1.0);
    CHECK(rows[4] == doctest::Approx(128.0 / 255.0));
    CHECK(rows[8] == doctest::Approx(51.0 / 255.0));
    CHECK(rows[11] == 0.0);
}

TEST_CASE("crop_resize_rows is identity-like on an axis-aligned exact crop") {
    Raster img(8, 8, {0, 0, 0});
    hoikit::fill_rect(img, 2, 2, 5, 5, {255, 255, 255});
    // Crop exactly the white square and resize to 4x4: every sample center
    // falls strictly inside the white region.
    auto rows = hoikit::crop_resize_rows(img, 2, 2, 6, 6, 4, 4);
    REQUIRE(rows.size() == 48);
    for (double v : rows) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("crop_resize_rows interpolates between pixels") {
    Raster img(2, 2, {0, 0, 0});
    img.set(1, 0, {255, 255, 255});
    img.set(1, 1, {255, 255, 255});
    // One output pixel sampled at the midpoint of a black and a white column.
    auto rows = hoikit::crop_resize_rows(img, 0, 0, 2, 2, 1, 1);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == doctest::Approx(0.5));
}

TEST_CASE("crop_resize_rows rejects sub-2x2 crops") {
    Raster img(16, 16);
    CHECK_THROWS(hoikit::crop_resize_rows(img, 4, 4, 5, 8, 4, 4));
    CHECK_THROWS(hoikit::crop_resize_rows(img, 15.5, 0, 20, 8, 4, 4));  // clamps to 0.5 wide
    CHECK_NOTHROW(hoikit::crop_resize_rows(img, 4, 4, 6, 6, 4, 4));
}
