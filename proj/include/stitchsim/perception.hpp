#pragma once

// Both camera paths on synthetic frames: the overhead pose estimator and the
// needle camera measuring the distance from needle to garment edge.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <random>
#include <span>
#include <vector>

#include "stitchsim/digital_thread.hpp"
#include "stitchsim/error.hpp"
#include "stitchsim/geometry.hpp"
#include "stitchsim/image.hpp"

namespace stitchsim {

struct RenderParams {
    double fill = 190.0;
    double background = 50.0;
    double noise_sd = 0.0;
    std::uint64_t seed = 0;
};

// Pixel-center sampling of the posed contour (even-odd rule), plus optional
// Gaussian pixel noise.
inline GrayImage render_garment(const DigitalThread& thread, const Pose2& pose, const CameraModel& camera,
                                const RenderParams& params) {
    camera.validate();
    if (params.fill == params.background) throw ValidationError("fill and background intensities must differ");

    const Polyline ring = transform(thread.contour, pose);
    GrayImage img(camera.width, camera.height);
    std::vector<std::uint8_t> inside(img.pixels.size(), 0);
    std::size_t inside_count = 0;
    std::vector<double> crossings;
    const std::size_t n = ring.size();
    for (int row = 0; row < camera.height; ++row) {
        const Vec2 left = camera.pixel_to_world(Vec2{0.0, double(row)});
        const double y = left.y;
        crossings.clear();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            const Vec2 a = ring[i], b = ring[j];
            if ((a.y > y) != (b.y > y)) crossings.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
        }
        if (crossings.empty()) continue;
        std::sort(crossings.begin(), crossings.end());
        for (int col = 0; col < camera.width; ++col) {
            const double x = left.x + col * camera.scale;
            const auto above = crossings.end() - std::upper_bound(crossings.begin(), crossings.end(), x);
            if (above % 2 == 1) {
                inside[static_cast<std::size_t>(row) * camera.width + col] = 1;
                ++inside_count;
            }
        }
    }
    if (inside_count == 0) throw ValidationError("garment entirely outside the camera frame");

    std::mt19937_64 rng(params.seed);
    std::normal_distribution<double> noise(0.0, params.noise_sd > 0.0 ? params.noise_sd : 1.0);
    for (std::size_t k = 0; k < img.pixels.size(); ++k) {
        double v = inside[k] ? params.fill : params.background;
        if (params.noise_sd > 0.0) v += noise(rng);
        img.pixels[k] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    return img;
}

struct CannyThresholds {
    double low = 0.0;
    double high = 0.0;
};

// Median intensity over every pixel of every frame in the window;
// thresholds sit 50% below and above it, high clamped to 255.
inline CannyThresholds dynamic_thresholds(std::span<const GrayImage> frames) {
    if (frames.empty()) throw ValidationError("threshold window is empty");
    std::array<std::uint64_t, 256> hist{};
    std::uint64_t total = 0;
    for (const GrayImage& f : frames) {
        for (std::uint8_t v : f.pixels) ++hist[v];
        total += f.pixels.size();
    }
    auto value_at_rank = [&](std::uint64_t rank) {
        std::uint64_t seen = 0;
        for (int v = 0; v < 256; ++v) {
            seen += hist[v];
            if (seen > rank) return double(v);
        }
        return 255.0;
    };
    const double median =
        total % 2 == 1 ? value_at_rank(total / 2) : 0.5 * (value_at_rank(total / 2 - 1) + value_at_rank(total / 2));
    return {0.5 * median, std::min(1.5 * median, 255.0)};
}

// Float image used between the Canny stages.
struct FloatImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    FloatImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.0) {}
    double& at(int c, int r) { return data[static_cast<std::size_t>(r) * width + c]; }
    double at(int c, int r) const { return data[static_cast<std::size_t>(r) * width + c]; }
    double clamped(int c, int r) const { return at(std::clamp(c, 0, width - 1), std::clamp(r, 0, height - 1)); }
};

// 5x5 separable Gaussian, sigma 1, replicated borders.
inline FloatImage gaussian_blur(const GrayImage& img, double sigma = 1.0) {
    std::array<double, 5> k{};
    double sum = 0.0;
    for (int i = -2; i <= 2; ++i) sum += k[i + 2] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    for (double& v : k) v /= sum;

    FloatImage tmp(img.width, img.height), out(img.width, img.height);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            double acc = 0.0;
            for (int i = -2; i <= 2; ++i) acc += k[i + 2] * img.at(std::clamp(c + i, 0, img.width - 1), r);
            tmp.at(c, r) = acc;
        }
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            double acc = 0.0;
            for (int i = -2; i <= 2; ++i) acc += k[i + 2] * tmp.clamped(c, r + i);
            out.at(c, r) = acc;
        }
    return out;
}

struct Gradients {
    FloatImage gx, gy, magnitude;
};

inline Gradients sobel(const FloatImage& f) {
    Gradients g{FloatImage(f.width, f.height), FloatImage(f.width, f.height), FloatImage(f.width, f.height)};
    for (int r = 0; r < f.height; ++r)
        for (int c = 0; c < f.width; ++c) {
            const double gx = (f.clamped(c + 1, r - 1) + 2.0 * f.clamped(c + 1, r) + f.clamped(c + 1, r + 1)) -
                              (f.clamped(c - 1, r - 1) + 2.0 * f.clamped(c - 1, r) + f.clamped(c - 1, r + 1));
            const double gy = (f.clamped(c - 1, r + 1) + 2.0 * f.clamped(c, r + 1) + f.clamped(c + 1, r + 1)) -
                              (f.clamped(c - 1, r - 1) + 2.0 * f.clamped(c, r - 1) + f.clamped(c + 1, r - 1));
            g.gx.at(c, r) = gx;
            g.gy.at(c, r) = gy;
            g.magnitude.at(c, r) = std::sqrt(gx * gx + gy * gy);
        }
    return g;
}

// Keeps pixels that are local maxima across the (quantized) gradient direction.
inline FloatImage non_max_suppression(const Gradients& g) {
    const int w = g.magnitude.width, h = g.magnitude.height;
    FloatImage out(w, h);
    for (int r = 1; r + 1 < h; ++r)
        for (int c = 1; c + 1 < w; ++c) {
            const double m = g.magnitude.at(c, r);
            if (m == 0.0) continue;
            // Direction folded into [0, 180) and binned at 22.5/67.5/112.5/157.5 deg
            // by slope comparison instead of atan2.
            double gx = g.gx.at(c, r), gy = g.gy.at(c, r);
            if (gy < 0.0) { gx = -gx; gy = -gy; }
            constexpr double kTan22 = 0.41421356237309503, kTan67 = 2.4142135623730949;
            int dc = 1, dr = 0;
            if (gy >= kTan67 * std::fabs(gx)) { dc = 0; dr = 1; }
            else if (gy >= kTan22 * std::fabs(gx)) { dc = gx > 0.0 ? 1 : -1; dr = 1; }
            const double before = g.magnitude.at(c - dc, r - dr);
            const double after = g.magnitude.at(c + dc, r + dr);
            if (m > before && m >= after) out.at(c, r) = m;
        }
    return out;
}

// Strong pixels (>= high) seed 8-connected growth through weak ones (>= low).
inline std::vector<Pixel> hysteresis(const FloatImage& nms, double low, double high) {
    const int w = nms.width, h = nms.height;
    std::vector<std::uint8_t> state(static_cast<std::size_t>(w) * h, 0);  // 1 candidate, 2 accepted
    std::vector<Pixel> stack;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const double m = nms.at(c, r);
            if (m <= 0.0 || m < low) continue;
            state[static_cast<std::size_t>(r) * w + c] = 1;
            if (m >= high) {
                state[static_cast<std::size_t>(r) * w + c] = 2;
                stack.push_back({c, r});
            }
        }
    std::vector<Pixel> edges = stack;
    while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
                const int c = p.col + dc, r = p.row + dr;
                if (c < 0 || r < 0 || c >= w || r >= h) continue;
                auto& s = state[static_cast<std::size_t>(r) * w + c];
                if (s == 1) {
                    s = 2;
                    stack.push_back({c, r});
                    edges.push_back({c, r});
                }
            }
    }
    std::sort(edges.begin(), edges.end(), [](Pixel a, Pixel b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
    return edges;
}

inline std::vector<Pixel> detect_edges(const GrayImage& img, double low, double high) {
    if (!(low >= 0.0) || !(low < high)) throw ValidationError("Canny thresholds need 0 <= low < high");
    return hysteresis(non_max_suppression(sobel(gaussian_blur(img))), low, high);
}

struct EdgeMeasurement {
    double edge_dist = 0.0;  // mm, positive with the needle on the garment side
    Vec2 nearest_edge_point;  // world mm
    double timestamp = 0.0;
    bool valid = false;
};

inline constexpr int kDefaultRoiHalfExtent = 64;

// Nearest edge pixel to the needle inside the ROI (square around the
// needle, trimmed to the inscribed disc). Sign: positive when the needle
// is on the same side of the edge as the interior hint.
inline EdgeMeasurement needle_edge_distance(std::span<const Pixel> edges, const CameraModel& camera,
                                            int roi_half_extent, Vec2 garment_interior_hint) {
    if (roi_half_extent <= 0) throw ValidationError("roi_half_extent must be > 0");
    const Vec2 needle = camera.needle_px;
    double best = std::numeric_limits<double>::infinity();
    const Pixel* nearest = nullptr;
    for (const Pixel& p : edges) {
        const double dc = p.col - needle.x, dr = p.row - needle.y;
        if (std::fabs(dc) > roi_half_extent || std::fabs(dr) > roi_half_extent) continue;
        const double d = std::hypot(dc, dr);
        if (d <= roi_half_extent && d < best) {
            best = d;
            nearest = &p;
        }
    }
    EdgeMeasurement m;
    if (!nearest) return m;
    const Vec2 needle_w = camera.needle_world();
    const Vec2 edge_w = camera.pixel_to_world(*nearest);
    const double dist = distance(needle_w, edge_w);
    // Side test against a line fitted through the edge pixels around the
    // nearest one; the single pixel is too coarse when the needle is close.
    constexpr double kFitRadius = 4.0;  // px
    Vec2 mean;
    std::vector<Vec2> local;
    for (const Pixel& p : edges) {
        if (std::fabs(p.col - nearest->col) > kFitRadius || std::fabs(p.row - nearest->row) > kFitRadius) continue;
        if (std::hypot(p.col - nearest->col, p.row - nearest->row) > kFitRadius) continue;
        local.push_back(camera.pixel_to_world(p));
        mean += local.back();
    }
    Vec2 normal = needle_w - edge_w;
    Vec2 anchor = edge_w;
    if (local.size() >= 3) {
        mean = mean / static_cast<double>(local.size());
        double sxx = 0.0, sxy = 0.0, syy = 0.0;
        for (const Vec2& q : local) {
            const Vec2 d = q - mean;
            sxx += d.x * d.x, sxy += d.x * d.y, syy += d.y * d.y;
        }
        const double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
        normal = perp_left(Vec2{std::cos(angle), std::sin(angle)});
        anchor = mean;
    }
    const double needle_side = dot(needle_w - anchor, normal), hint_side = dot(garment_interior_hint - anchor, normal);
    const bool garment_side = needle_side * hint_side >= 0.0;
    m.edge_dist = garment_side ? dist : -dist;
    m.nearest_edge_point = edge_w;
    m.valid = true;
    return m;
}

// Exact signed distance from the needle to the posed contour (positive inside).
inline EdgeMeasurement oracle_edge_distance(const DigitalThread& thread, const Pose2& garment_pose, Vec2 needle_world) {
    const SignedDistance sd = signed_distance_to_ring(thread.contour, garment_pose.apply_inverse(needle_world));
    return {sd.value, garment_pose.apply(sd.nearest), 0.0, true};
}

struct PoseEstimate {
    double x = 0.0;  // mm
    double y = 0.0;  // mm
    double theta = 0.0;
    Vec2 grasp_point;  // world mm
    double score = 0.0;

    Pose2 pose() const { return {x, y, theta}; }
};

struct PoseEstimatorParams {
    int difference_threshold = 25;
    std::size_t min_component_pixels = 100;
    double coarse_step_deg = 1.0;
    double refine_tolerance_deg = 0.05;
    std::size_t coarse_max_points = 240;
};

namespace detail {

struct Component {
    std::vector<Pixel> pixels;
    std::vector<Pixel> boundary;
};

inline Component largest_component(const std::vector<std::uint8_t>& mask, int w, int h) {
    std::vector<int> label(mask.size(), -1);
    Component best;
    std::vector<Pixel> queue;
    int next = 0;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            const std::size_t idx = static_cast<std::size_t>(r) * w + c;
            if (!mask[idx] || label[idx] >= 0) continue;
            queue.clear();
            queue.push_back({c, r});
            label[idx] = next;
            for (std::size_t q = 0; q < queue.size(); ++q) {
                const Pixel p = queue[q];
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int cc = p.col + dc, rr = p.row + dr;
                        if (cc < 0 || rr < 0 || cc >= w || rr >= h) continue;
                        const std::size_t j = static_cast<std::size_t>(rr) * w + cc;
                        if (mask[j] && label[j] < 0) {
                            label[j] = next;
                            queue.push_back({cc, rr});
                        }
                    }
            }
            if (queue.size() > best.pixels.size()) {
                best.pixels = queue;
                best.boundary.clear();
                for (const Pixel& p : queue) {
                    const std::array<Pixel, 4> nb{{{p.col + 1, p.row}, {p.col - 1, p.row}, {p.col, p.row + 1}, {p.col, p.row - 1}}};
                    for (const Pixel& n : nb) {
                        if (n.col < 0 || n.row < 0 || n.col >= w || n.row >= h ||
                            label[static_cast<std::size_t>(n.row) * w + n.col] != next) {
                            best.boundary.push_back(p);
                            break;
                        }
                    }
                }
            }
            ++next;
        }
    return best;
}

inline double mean_match_distance(std::span<const Vec2> points, std::span<const Vec2> template_ring, double theta) {
    double sum = 0.0;
    for (const Vec2& p : points) sum += closest_point_on_polyline(template_ring, rotate(p, -theta)).distance;
    return sum / static_cast<double>(points.size());
}

}  // namespace detail

// Background subtraction, largest blob, then centroid alignment and an
// orientation search (coarse grid + golden section) against the template.
inline PoseEstimate estimate_pose(const GrayImage& img, const GrayImage& background, const DigitalThread& templ,
                                  const CameraModel& camera, const PoseEstimatorParams& params = {}) {
    if (img.width != background.width || img.height != background.height)
        throw ValidationError("image and background differ in size");
    std::vector<std::uint8_t> mask(img.pixels.size());
    for (std::size_t k = 0; k < mask.size(); ++k)
        mask[k] = std::abs(int(img.pixels[k]) - int(background.pixels[k])) > params.difference_threshold;

    const detail::Component blob = detail::largest_component(mask, img.width, img.height);
    if (blob.pixels.size() < params.min_component_pixels) throw RuntimeFailure("garment not found");

    Vec2 centroid;
    for (const Pixel& p : blob.pixels) centroid += camera.pixel_to_world(p);
    centroid = centroid / static_cast<double>(blob.pixels.size());

    std::vector<Vec2> boundary;
    boundary.reserve(blob.boundary.size());
    for (const Pixel& p : blob.boundary) boundary.push_back(camera.pixel_to_world(p) - centroid);

    const Vec2 templ_centroid = templ.centroid();
    Polyline ring;
    ring.reserve(templ.contour.size());
    for (const Vec2& v : templ.contour) ring.push_back(v - templ_centroid);

    std::vector<Vec2> coarse;
    const std::size_t stride = std::max<std::size_t>(1, boundary.size() / params.coarse_max_points);
    for (std::size_t i = 0; i < boundary.size(); i += stride) coarse.push_back(boundary[i]);

    double best_theta = 0.0, best_cost = std::numeric_limits<double>::infinity();
    const int steps = static_cast<int>(std::lround(360.0 / params.coarse_step_deg));
    for (int i = 0; i < steps; ++i) {
        const double theta = deg_to_rad(i * params.coarse_step_deg);
        const double cost = detail::mean_match_distance(coarse, ring, theta);
        if (cost < best_cost) {
            best_cost = cost;
            best_theta = theta;
        }
    }

    // golden-section refinement around the coarse optimum
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = best_theta - deg_to_rad(params.coarse_step_deg);
    double b = best_theta + deg_to_rad(params.coarse_step_deg);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = detail::mean_match_distance(boundary, ring, c);
    double fd = detail::mean_match_distance(boundary, ring, d);
    while (b - a > deg_to_rad(params.refine_tolerance_deg)) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - phi * (b - a);
            fc = detail::mean_match_distance(boundary, ring, c);
        } else {
            a = c; c = d; fc = fd;
            d = a + phi * (b - a);
            fd = detail::mean_match_distance(boundary, ring, d);
        }
    }
    const double theta = 0.5 * (a + b);
    const double cost = detail::mean_match_distance(boundary, ring, theta);

    PoseEstimate est;
    est.theta = wrap_angle(theta);
    const Vec2 t = centroid - rotate(templ_centroid, theta);
    est.x = t.x;
    est.y = t.y;
    est.score = 1.0 / (1.0 + cost);

    // Grasp at the centroid unless a concave outline puts it outside; then the
    // blob pixel deepest inside the matched contour.
    const Polyline posed = transform(templ.contour, est.pose());
    est.grasp_point = centroid;
    if (signed_distance_to_ring(posed, centroid).value <= 0.0) {
        double deepest = -std::numeric_limits<double>::infinity();
        for (const Pixel& p : blob.pixels) {
            const Vec2 w = camera.pixel_to_world(p);
            const double sd = signed_distance_to_ring(posed, w).value;
            if (sd > deepest) {
                deepest = sd;
                est.grasp_point = w;
            }
        }
    }
    return est;
}

}  // namespace stitchsim
