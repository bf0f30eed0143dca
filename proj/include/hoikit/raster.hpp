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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hoikit {

struct Rgb {
    uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

// Interleaved 8-bit RGB raster. Lossless on disk as binary PPM (P6).
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> data;  // size = width * height * 3

    Raster() = default;
    Raster(int w, int h, Rgb fill = {255, 255, 255});

    Rgb get(int x, int y) const {
        size_t i = 3 * (static_cast<size_t>(y) * width + x);
        return {data[i], data[i + 1], data[i + 2]};
    }
    void set(int x, int y, Rgb c) {
        if (x < 0 || y < 0 || x >= width || y >= height) return;
        size_t i = 3 * (static_cast<size_t>(y) * width + x);
        data[i] = c.r;
        data[i + 1] = c.g;
        data[i + 2] = c.b;
    }

    bool operator==(const Raster&) const = default;
};

void write_ppm(const Raster& img, const std::string& path);
Raster read_ppm(const std::string& path);

// Drawing primitives. Coordinates are pixels; shapes clip at the borders.
void fill_rect(Raster& img, int x0, int y0, int x1, int y1, Rgb c);
void draw_rect_outline(Raster& img, int x0, int y0, int x1, int y1, Rgb c, int thickness = 1);
void fill_disk(Raster& img, int cx, int cy, int radius, Rgb c);
void fill_ring(Raster& img, int cx, int cy, int r_outer, int r_inner, Rgb c);
void fill_triangle_up(Raster& img, int x0, int y0, int x1, int y1, Rgb c);
void fill_diamond(Raster& img, int x0, int y0, int x1, int y1, Rgb c);
void fill_cross(Raster& img, int x0, int y0, int x1, int y1, Rgb c);
void draw_line(Raster& img, int x0, int y0, int x1, int y1, Rgb c);

// 5x7 bitmap font, uppercase letters, digits and basic punctuation; unknown
// characters render as a filled block. Scale 1 means 5x7 pixels per glyph.
void draw_text(Raster& img, int x, int y, const std::string& text, Rgb c, int scale = 1);

// Pixels as doubles in [0,1], row-major (y*width+x) rows, 3 columns (r,g,b).
std::vector<double> raster_to_rows(const Raster& img);

// Bilinear crop-and-resize of the region [x0,x1)x[y0,y1) (pixel units, clamped
// to the image) to out_w x out_h, returned in raster_to_rows layout.
// Throws if the clamped region is smaller than 2x2 pixels.
std::vector<double> crop_resize_rows(const Raster& img, double x0, double y0, double x1, double y1,
                                     int out_w, int out_h);

}  // namespace hoikit
