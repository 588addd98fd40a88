#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "stitchsim/error.hpp"
#include "stitchsim/geometry.hpp"

namespace stitchsim {

struct Pixel {
    int col = 0;
    int row = 0;
    friend bool operator==(Pixel, Pixel) = default;
};

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t value = 0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), value) {
        if (w <= 0 || h <= 0) throw ValidationError("image dimensions must be positive");
    }

    bool contains(int col, int row) const { return col >= 0 && row >= 0 && col < width && row < height; }
    std::uint8_t& at(int col, int row) { return pixels[static_cast<std::size_t>(row) * width + col]; }
    std::uint8_t at(int col, int row) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

// Known planar similarity between image and world (mm). Image rows grow
// downward, world y grows upward.
struct CameraModel {
    int width = 161;
    int height = 161;
    double scale = 0.5;    // mm per pixel
    Vec2 origin_offset;    // world position of the center of pixel (0,0)
    Vec2 needle_px{80.0, 80.0};

    Vec2 pixel_to_world(Vec2 px) const { return {origin_offset.x + px.x * scale, origin_offset.y - px.y * scale}; }
    Vec2 pixel_to_world(Pixel p) const { return pixel_to_world(Vec2{double(p.col), double(p.row)}); }
    Vec2 world_to_pixel(Vec2 w) const { return {(w.x - origin_offset.x) / scale, (origin_offset.y - w.y) / scale}; }
    Vec2 needle_world() const { return pixel_to_world(needle_px); }

    void validate() const {
        if (!(scale > 0.0)) throw ValidationError("camera scale must be > 0");
        if (width <= 0 || height <= 0) throw ValidationError("camera image size must be positive");
        if (needle_px.x < 0 || needle_px.y < 0 || needle_px.x > width - 1 || needle_px.y > height - 1)
            throw ValidationError("needle pixel outside the image");
    }

    // Square camera centered on the needle, which sits at the world origin.
    static CameraModel needle_camera(double scale = 0.5, int size = 161) {
        CameraModel cam;
        cam.width = cam.height = size;
        cam.scale = scale;
        const double c = (size - 1) / 2.0;
        cam.needle_px = {c, c};
        cam.origin_offset = {-c * scale, c * scale};
        return cam;
    }

    // Overhead camera covering [min.x, min.x + w*scale] x [.., min.y + h*scale].
    static CameraModel overhead(Vec2 world_min, int w, int h, double scale) {
        CameraModel cam;
        cam.width = w;
        cam.height = h;
        cam.scale = scale;
        cam.origin_offset = {world_min.x, world_min.y + (h - 1) * scale};
        cam.needle_px = {(w - 1) / 2.0, (h - 1) / 2.0};
        return cam;
    }
};

// Binary PGM (P5), maxval 255.
inline void write_pgm(std::ostream& os, const GrayImage& img) {
    os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
}

inline GrayImage read_pgm(std::istream& is) {
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    is >> magic >> w >> h >> maxval;
    if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255) throw ValidationError("not an 8-bit binary PGM");
    is.get();
    GrayImage img(w, h);
    is.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!is) throw ValidationError("truncated PGM data");
    return img;
}

}  // namespace stitchsim
