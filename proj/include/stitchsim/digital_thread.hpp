#pragma once

// Garment drawing -> sewing geometry. Entities in the seam color are chained
// into the seam path, everything else into the closed cut contour.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "stitchsim/dxf.hpp"
#include "stitchsim/error.hpp"
#include "stitchsim/geometry.hpp"

namespace stitchsim {

inline constexpr double kChainGapTolerance = 0.5;   // mm
inline constexpr double kClosureTolerance = 1e-6;   // mm
inline constexpr double kDefaultChordError = 0.01;  // mm

struct SeamSpec {
    int seam_color_index = dxf::kColorRed;
    double seam_allowance = 20.0;  // mm
    double stitch_length = 3.0;    // mm

    void validate() const {
        if (!(seam_allowance > 0.0)) throw ValidationError("seam_allowance must be > 0");
        if (!(stitch_length > 0.0)) throw ValidationError("stitch_length must be > 0");
    }
};

struct DigitalThread {
    Polyline contour;  // closed, counter-clockwise, garment frame (mm)
    Polyline seam;     // needle path, garment frame (mm)
    SeamSpec spec;

    double seam_length() const { return polyline_length(seam); }
    double contour_length() const { return polyline_length(contour); }
    Vec2 centroid() const { return area_centroid(contour); }
};

namespace detail {

inline Vec2 eval_bspline(const dxf::Spline& s, std::span<const double> knots, double u) {
    const int p = s.degree;
    const int n = static_cast<int>(s.control_points.size());
    int k = p;
    if (u >= knots[n]) {
        k = n - 1;
        while (k > p && knots[k] == knots[k + 1]) --k;
    } else {
        while (k < n - 1 && !(u < knots[k + 1])) ++k;
    }
    // de Boor
    std::vector<Vec2> d(static_cast<std::size_t>(p) + 1);
    for (int j = 0; j <= p; ++j) d[j] = s.control_points[k - p + j];
    for (int r = 1; r <= p; ++r) {
        for (int j = p; j >= r; --j) {
            const double denom = knots[k + 1 + j - r] - knots[k - p + j];
            const double alpha = denom > 0.0 ? (u - knots[k - p + j]) / denom : 0.0;
            d[j] = d[j - 1] * (1.0 - alpha) + d[j] * alpha;
        }
    }
    return d[p];
}

inline std::vector<double> clamped_uniform_knots(std::size_t n_ctrl, int degree) {
    const std::size_t p = static_cast<std::size_t>(degree);
    std::vector<double> knots(n_ctrl + p + 1, 0.0);
    const std::size_t spans = n_ctrl - p;
    for (std::size_t i = 1; i < spans; ++i) knots[p + i] = static_cast<double>(i) / static_cast<double>(spans);
    for (std::size_t i = n_ctrl; i < knots.size(); ++i) knots[i] = 1.0;
    return knots;
}

// Dyadic refinement of [a, b]: split while probes stray from the chord.
// Halving the tolerance only refines further, so samples only ever get added.
inline void refine_spline(const dxf::Spline& s, std::span<const double> knots, double a, double b, Vec2 pa,
                          Vec2 pb, double tol, int depth, Polyline& out) {
    constexpr int kProbes = 32;
    constexpr double kMargin = 0.95;  // probes can miss the true peak between them
    double worst = 0.0;
    for (int i = 1; i < kProbes; ++i) {
        const double u = a + (b - a) * i / kProbes;
        const Vec2 q = eval_bspline(s, knots, u);
        worst = std::max(worst, distance(q, closest_point_on_segment(pa, pb, q)));
    }
    if (worst > kMargin * tol && depth < 30) {
        const double m = 0.5 * (a + b);
        const Vec2 pm = eval_bspline(s, knots, m);
        refine_spline(s, knots, a, m, pa, pm, tol, depth + 1, out);
        refine_spline(s, knots, m, b, pm, pb, tol, depth + 1, out);
    } else {
        out.push_back(pb);
    }
}

}  // namespace detail

// Evaluates a spline at parameter u in its (clamped) knot domain.
inline Vec2 evaluate_spline(const dxf::Spline& s, double u) {
    const std::vector<double> knots =
        s.knots.empty() ? detail::clamped_uniform_knots(s.control_points.size(), s.degree) : s.knots;
    return detail::eval_bspline(s, knots, u);
}

// Discretizes an entity into a polyline whose chords stay within
// max_chord_error of the exact curve. Lines come back untouched.
inline Polyline sample_entity(const dxf::Entity& entity, double max_chord_error) {
    if (!(max_chord_error > 0.0)) throw ValidationError("max_chord_error must be > 0");
    dxf::validate(entity);

    return std::visit(
        [&](const auto& g) -> Polyline {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, dxf::Line>) {
                if (g.start == g.end) throw ValidationError("LINE: zero length");
                return {g.start, g.end};
            } else if constexpr (std::is_same_v<T, dxf::LwPolyline>) {
                Polyline pts = g.vertices;
                if (g.closed && pts.front() != pts.back()) pts.push_back(pts.front());
                if (polyline_length(pts) == 0.0) throw ValidationError("LWPOLYLINE: zero length");
                return pts;
            } else if constexpr (std::is_same_v<T, dxf::Arc>) {
                double sweep = std::fmod(g.end_deg - g.start_deg, 360.0);
                if (sweep <= 0.0) sweep += 360.0;
                const double sweep_rad = deg_to_rad(sweep);
                // sagitta r(1 - cos(step/2)) <= tol
                const double max_step =
                    max_chord_error >= g.radius ? kPi : 2.0 * std::acos(1.0 - max_chord_error / g.radius);
                const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(sweep_rad / max_step)));
                const double a0 = deg_to_rad(g.start_deg);
                Polyline pts;
                pts.reserve(n + 1);
                for (std::size_t i = 0; i <= n; ++i) {
                    const double a = a0 + sweep_rad * static_cast<double>(i) / static_cast<double>(n);
                    pts.push_back(g.center + Vec2{std::cos(a), std::sin(a)} * g.radius);
                }
                return pts;
            } else {
                const std::vector<double> knots =
                    g.knots.empty() ? detail::clamped_uniform_knots(g.control_points.size(), g.degree) : g.knots;
                const int n = static_cast<int>(g.control_points.size());
                const double u0 = knots[g.degree], u1 = knots[n];
                if (!(u1 > u0)) throw ValidationError("SPLINE: empty parameter domain");
                std::vector<double> breaks;
                for (int i = g.degree; i <= n; ++i)
                    if (breaks.empty() || knots[i] > breaks.back()) breaks.push_back(knots[i]);
                Polyline pts{detail::eval_bspline(g, knots, u0)};
                for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
                    const Vec2 pa = pts.back();
                    const Vec2 pb = detail::eval_bspline(g, knots, breaks[i + 1]);
                    detail::refine_spline(g, knots, breaks[i], breaks[i + 1], pa, pb, max_chord_error, 0, pts);
                }
                if (polyline_length(pts) == 0.0) throw ValidationError("SPLINE: zero length");
                return pts;
            }
        },
        entity.geometry);
}

namespace detail {

inline std::string fmt_point(Vec2 p) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "(%.10g, %.10g)", p.x, p.y);
    return buf;
}

inline bool lex_less(Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }

struct Chain {
    Polyline points;
    bool closed = false;
};

// Joins pieces end-to-start. Endpoints closer than gap_tol are one node;
// each node must join at most two piece ends, and all pieces must form a
// single path or loop.
inline Chain chain_pieces(const std::vector<Polyline>& pieces, double gap_tol, const std::string& what) {
    const std::size_t m = pieces.size();
    const std::size_t ends = 2 * m;
    auto end_point = [&](std::size_t e) { return e % 2 == 0 ? pieces[e / 2].front() : pieces[e / 2].back(); };

    std::vector<std::size_t> parent(ends);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (std::size_t a = 0; a < ends; ++a)
        for (std::size_t b = a + 1; b < ends; ++b)
            if (distance(end_point(a), end_point(b)) <= gap_tol) parent[find(a)] = find(b);

    std::vector<std::vector<std::size_t>> members(ends);
    for (std::size_t e = 0; e < ends; ++e) members[find(e)].push_back(e);
    std::vector<Vec2> node_pos(ends);
    std::vector<std::size_t> free_ends;
    for (std::size_t r = 0; r < ends; ++r) {
        if (members[r].empty()) continue;
        if (members[r].size() > 2)
            throw ValidationError(what + ": ambiguous chain, " + std::to_string(members[r].size()) +
                                  " ends meet at " + fmt_point(end_point(members[r][0])));
        Vec2 sum;
        for (std::size_t e : members[r]) sum += end_point(e);
        node_pos[r] = sum / static_cast<double>(members[r].size());
        if (members[r].size() == 1) free_ends.push_back(members[r][0]);
    }

    std::vector<bool> used(m, false);
    std::size_t start_end = free_ends.empty() ? 0 : free_ends[0];
    if (!free_ends.empty()) {
        // deterministic choice: the lexicographically smallest free end
        for (std::size_t e : free_ends)
            if (lex_less(end_point(e), end_point(start_end))) start_end = e;
    }

    Chain chain;
    std::size_t node = find(start_end);
    chain.points.push_back(node_pos[node]);
    std::size_t next_end = start_end;
    for (std::size_t count = 0; count < m; ++count) {
        const std::size_t piece = next_end / 2;
        used[piece] = true;
        const Polyline& pts = pieces[piece];
        const bool forward = next_end % 2 == 0;
        const std::size_t k = pts.size();
        for (std::size_t j = 1; j + 1 < k; ++j) {
            const Vec2 p = forward ? pts[j] : pts[k - 1 - j];
            if (p != chain.points.back()) chain.points.push_back(p);
        }
        const std::size_t far_end = forward ? next_end + 1 : next_end - 1;
        node = find(far_end);
        chain.points.push_back(node_pos[node]);

        // continue through the other end sharing this node
        std::size_t candidate = ends;
        for (std::size_t e : members[node])
            if (e != far_end && !used[e / 2]) candidate = e;
        if (candidate == ends) break;
        next_end = candidate;
    }

    const std::size_t used_count = static_cast<std::size_t>(std::count(used.begin(), used.end(), true));
    if (used_count != m)
        throw ValidationError(what + ": " + std::to_string(m - used_count) +
                              " entities are disconnected from the main chain");
    chain.closed = free_ends.empty();
    if (chain.closed) chain.points.back() = chain.points.front();
    return chain;
}

// Counter-clockwise, starting at the lexicographically smallest vertex.
inline Polyline canonical_ring(Polyline ring) {
    if (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
    if (signed_area(ring) < 0.0) std::reverse(ring.begin(), ring.end());
    const auto first = std::min_element(ring.begin(), ring.end(), lex_less);
    std::rotate(ring.begin(), first, ring.end());
    ring.push_back(ring.front());
    return ring;
}

}  // namespace detail

// Splits the drawing into seam and contour by color and chains each one.
inline DigitalThread extract_thread(const std::vector<dxf::Entity>& entities, const SeamSpec& spec,
                                    double max_chord_error = kDefaultChordError) {
    spec.validate();
    std::vector<Polyline> seam_pieces, contour_pieces;
    for (const dxf::Entity& e : entities)
        (e.color_index == spec.seam_color_index ? seam_pieces : contour_pieces)
            .push_back(sample_entity(e, max_chord_error));

    if (seam_pieces.empty())
        throw ValidationError("seam not designated: no entity with color index " +
                              std::to_string(spec.seam_color_index));
    if (contour_pieces.empty()) throw ValidationError("no contour entities in drawing");

    // The seam may be open, so free ends are fine there.
    detail::Chain seam = detail::chain_pieces(seam_pieces, kChainGapTolerance, "seam");

    detail::Chain contour = detail::chain_pieces(contour_pieces, kChainGapTolerance, "contour");
    if (!contour.closed) {
        throw ValidationError("open contour: gap between " + detail::fmt_point(contour.points.front()) + " and " +
                              detail::fmt_point(contour.points.back()));
    }

    DigitalThread thread;
    thread.contour = detail::canonical_ring(std::move(contour.points));
    if (seam.closed) {
        thread.seam = detail::canonical_ring(std::move(seam.points));
    } else {
        thread.seam = std::move(seam.points);
        if (detail::lex_less(thread.seam.back(), thread.seam.front()))
            std::reverse(thread.seam.begin(), thread.seam.end());
    }
    thread.spec = spec;

    if (!is_simple_ring(thread.contour)) throw ValidationError("contour self-intersects");
    if (std::fabs(signed_area(thread.contour)) == 0.0) throw ValidationError("contour has zero area");
    for (const Vec2& v : thread.seam) {
        if (signed_distance_to_ring(thread.contour, v).value < -kClosureTolerance)
            throw ValidationError("seam vertex " + detail::fmt_point(v) + " lies outside the contour");
    }
    return thread;
}

// Entities reproducing a thread: closed contour polyline plus seam polyline.
inline std::vector<dxf::Entity> thread_to_entities(const DigitalThread& thread) {
    dxf::Entity contour;
    Polyline ring(thread.contour.begin(), thread.contour.end() - 1);
    contour.geometry = dxf::LwPolyline{std::move(ring), true};
    contour.color_index = thread.spec.seam_color_index == dxf::kColorWhite ? 8 : dxf::kColorWhite;
    contour.layer = "CONTOUR";

    dxf::Entity seam;
    const bool closed = is_closed(thread.seam, kClosureTolerance);
    Polyline seam_pts = thread.seam;
    if (closed) seam_pts.pop_back();
    seam.geometry = dxf::LwPolyline{std::move(seam_pts), closed};
    seam.color_index = thread.spec.seam_color_index;
    seam.layer = "SEAM";
    return {contour, seam};
}

inline std::string write_thread_dxf(const DigitalThread& thread) {
    dxf::HeaderVars header{thread.spec.seam_allowance, thread.spec.stitch_length, thread.spec.seam_color_index};
    return dxf::write(thread_to_entities(thread), header);
}

}  // namespace stitchsim
