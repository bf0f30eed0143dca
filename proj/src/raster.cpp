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

#include "hoikit/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hoikit {

Raster::Raster(int w, int h, Rgb fill) : width(w), height(h), data(static_cast<size_t>(w) * h * 3) {
    for (size_t i = 0; i < data.size(); i += 3) {
        data[i] = fill.r;
        data[i + 1] = fill.g;
        data[i + 2] = fill.b;
    }
}

void write_ppm(const Raster& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_ppm: cannot open " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
}

Raster read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_ppm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P6") throw std::runtime_error("read_ppm: not a P6 file: " + path);
    auto next_int = [&in, &path]() {
        // Skip whitespace and '#' comments between header tokens.
        int c = in.get();
        while (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '#') {
            if (c == '#') {
                while (c != '\n' && c != EOF) c = in.get();
            }
            c = in.get();
        }
        int v = 0;
        bool any = false;
        while (c >= '0' && c <= '9') {
            v = v * 10 + (c - '0');
            any = true;
            c = in.get();
        }
        if (!any) throw std::runtime_error("read_ppm: malformed header in " + path);
        return v;
    };
    int w = next_int();
    int h = next_int();
    int maxval = next_int();
    if (maxval != 255) throw std::runtime_error("read_ppm: only maxval 255 supported");
    Raster img(w, h);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size())) {
        throw std::runtime_error("read_ppm: truncated pixel data in " + path);
    }
    return img;
}

void fill_rect(Raster& img, int x0, int y0, int x1, int y1, Rgb c) {
    x0 = std::max(0, x0);
    y0 = std::max(0, y0);
    x1 = std::min(img.width - 1, x1);
    y1 = std::min(img.height - 1, y1);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) img.set(x, y, c);
}

void draw_rect_outline(Raster& img, int x0, int y0, int x1, int y1, Rgb c, int thickness) {
    for (int t = 0; t < thickness; ++t) {
        for (int x = x0 + t; x <= x1 - t; ++x) {
            img.set(x, y0 + t, c);
            img.set(x, y1 - t, c);
        }
        for (int y = y0 + t; y <= y1 - t; ++y) {
            img.set(x0 + t, y, c);
            img.set(x1 - t, y, c);
        }
    }
}

void fill_disk(Raster& img, int cx, int cy, int radius, Rgb c) {
    for (int y = cy - radius; y <= cy + radius; ++y)
        for (int x = cx - radius; x <= cx + radius; ++x) {
            int dx = x - cx, dy = y - cy;
            if (dx * dx + dy * dy <= radius * radius) img.set(x, y, c);
        }
}

void fill_ring(Raster& img, int cx, int cy, int r_outer, int r_inner, Rgb c) {
    for (int y = cy - r_outer; y <= cy + r_outer; ++y)
        for (int x = cx - r_outer; x <= cx + r_outer; ++x) {
            int dx = x - cx, dy = y - cy;
            int d2 = dx * dx + dy * dy;
            if (d2 <= r_outer * r_outer && d2 >= r_inner * r_inner) img.set(x, y, c);
        }
}

void fill_triangle_up(Raster& img, int x0, int y0, int x1, int y1, Rgb c) {
    int h = y1 - y0;
    if (h <= 0) return;
    double cx = 0.5 * (x0 + x1);
    double half_base = 0.5 * (x1 - x0);
    for (int y = y0; y <= y1; ++y) {
        double f = static_cast<double>(y - y0) / h;  // 0 at apex, 1 at base
        int half = static_cast<int>(std::floor(f * half_base));
        for (int x = static_cast<int>(cx) - half; x <= static_cast<int>(cx) + half; ++x)
            img.set(x, y, c);
    }
}

void fill_diamond(Raster& img, int x0, int y0, int x1, int y1, Rgb c) {
    double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
    double rx = std::max(1.0, 0.5 * (x1 - x0)), ry = std::max(1.0, 0.5 * (y1 - y0));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
            if (std::abs(x - cx) / rx + std::abs(y - cy) / ry <= 1.0) img.set(x, y, c);
}

void fill_cross(Raster& img, int x0, int y0, int x1, int y1, Rgb c) {
    int w = x1 - x0 + 1, h = y1 - y0 + 1;
    int bar_w = std::max(1, w / 3), bar_h = std::max(1, h / 3);
    int cx0 = x0 + (w - bar_w) / 2, cy0 = y0 + (h - bar_h) / 2;
    fill_rect(img, cx0, y0, cx0 + bar_w - 1, y1, c);
    fill_rect(img, x0, cy0, x1, cy0 + bar_h - 1, c);
}

void draw_line(Raster& img, int x0, int y0, int x1, int y1, Rgb c) {
    int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        img.set(x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

namespace {

// 5x7 font, one byte per row, low 5 bits used (bit 4 = leftmost column).
struct Glyph {
    char ch;
    uint8_t rows[7];
};

const Glyph kFont[] = {
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const uint8_t* find_glyph(char ch) {
    if (ch >= 'a' && ch <= 'z') ch = static_cast<char>(ch - 'a' + 'A');
    for (const auto& g : kFont)
        if (g.ch == ch) return g.rows;
    return nullptr;
}

}  // namespace

void draw_text(Raster& img, int x, int y, const std::string& text, Rgb c, int scale) {
    int cursor = x;
    for (char ch : text) {
        const uint8_t* rows = find_glyph(ch);
        for (int ry = 0; ry < 7; ++ry) {
            uint8_t bits = rows ? rows[ry] : 0x1F;
            for (int rx = 0; rx < 5; ++rx) {
                if (bits & (1 << (4 - rx))) {
                    for (int sy = 0; sy < scale; ++sy)
                        for (int sx = 0; sx < scale; ++sx)
                            img.set(cursor + rx * scale + sx, y + ry * scale + sy, c);
                }
            }
        }
        cursor += 6 * scale;
    }
}

std::vector<double> raster_to_rows(const Raster& img) {
    std::vector<double> out(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) out[i] = img.data[i] / 255.0;
    return out;
}

std::vector<double> crop_resize_rows(const Raster& img, double x0, double y0, double x1, double y1,
                                     int out_w, int out_h) {
    x0 = std::clamp(x0, 0.0, static_cast<double>(img.width));
    x1 = std::clamp(x1, 0.0, static_cast<double>(img.width));
    y0 = std::clamp(y0, 0.0, static_cast<double>(img.height));
    y1 = std::clamp(y1, 0.0, static_cast<double>(img.height));
    double cw = x1 - x0, ch = y1 - y0;
    if (cw < 2.0 || ch < 2.0) {
        throw std::runtime_error("crop_resize_rows: crop smaller than 2x2 raster units");
    }
    std::vector<double> out(static_cast<size_t>(out_w) * out_h * 3);
    for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
            // Sample at the center of each destination pixel.
            double sx = x0 + (ox + 0.5) * cw / out_w - 0.5;
            double sy = y0 + (oy + 0.5) * ch / out_h - 0.5;
            int ix = static_cast<int>(std::floor(sx));
            int iy = static_cast<int>(std::floor(sy));
            double fx = sx - ix, fy = sy - iy;
            auto at = [&](int px, int py) {
                px = std::clamp(px, 0, img.width - 1);
                py = std::clamp(py, 0, img.height - 1);
                return img.get(px, py);
            };
            Rgb p00 = at(ix, iy), p10 = at(ix + 1, iy), p01 = at(ix, iy + 1), p11 = at(ix + 1, iy + 1);
            size_t base = 3 * (static_cast<size_t>(oy) * out_w + ox);
            const double c00[3] = {p00.r / 255.0, p00.g / 255.0, p00.b / 255.0};
            const double c10[3] = {p10.r / 255.0, p10.g / 255.0, p10.b / 255.0};
            const double c01[3] = {p01.r / 255.0, p01.g / 255.0, p01.b / 255.0};
            const double c11[3] = {p11.r / 255.0, p11.g / 255.0, p11.b / 255.0};
            for (int k = 0; k < 3; ++k) {
                double top = c00[k] * (1 - fx) + c10[k] * fx;
                double bot = c01[k] * (1 - fx) + c11[k] * fx;
                out[base + k] = top * (1 - fy) + bot * fy;
            }
        }
    }
    return out;
}

}  // namespace hoikit
