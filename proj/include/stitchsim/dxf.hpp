#pragma once

// Reader and writer for the small ASCII DXF subset garment cutters emit:
// LINE, LWPOLYLINE, ARC and SPLINE in the ENTITIES section, plus a few
// custom HEADER variables carrying sewing metadata.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>
#include <variant>
#include <vector>

#include "stitchsim/error.hpp"
#include "stitchsim/geometry.hpp"

namespace stitchsim::dxf {

inline constexpr int kColorByLayer = 256;
inline constexpr int kColorRed = 1;
inline constexpr int kColorWhite = 7;

struct Line {
    Vec2 start;
    Vec2 end;
    friend bool operator==(const Line&, const Line&) = default;
};

struct LwPolyline {
    std::vector<Vec2> vertices;
    bool closed = false;
    friend bool operator==(const LwPolyline&, const LwPolyline&) = default;
};

// Counter-clockwise from start_deg to end_deg, as DXF defines arcs.
struct Arc {
    Vec2 center;
    double radius = 0.0;
    double start_deg = 0.0;
    double end_deg = 0.0;
    friend bool operator==(const Arc&, const Arc&) = default;
};

struct Spline {
    int degree = 3;
    std::vector<Vec2> control_points;
    std::vector<double> knots;  // empty: clamped uniform is synthesized
    friend bool operator==(const Spline&, const Spline&) = default;
};

enum class EntityKind { Line, LwPolyline, Arc, Spline };

inline const char* to_string(EntityKind k) {
    switch (k) {
        case EntityKind::Line: return "LINE";
        case EntityKind::LwPolyline: return "LWPOLYLINE";
        case EntityKind::Arc: return "ARC";
        case EntityKind::Spline: return "SPLINE";
    }
    return "?";
}

struct Entity {
    std::variant<Line, LwPolyline, Arc, Spline> geometry;
    int color_index = kColorByLayer;
    std::string layer = "0";
    std::size_t source_line = 0;

    EntityKind kind() const { return static_cast<EntityKind>(geometry.index()); }
};

// Sewing metadata found in the HEADER section ($SEAMALLOWANCE, $STITCHLENGTH,
// $SEAMCOLOR). All optional; sidecar configs override them.
struct HeaderVars {
    std::optional<double> seam_allowance;
    std::optional<double> stitch_length;
    std::optional<int> seam_color_index;
};

struct Document {
    std::vector<Entity> entities;
    std::size_t skipped = 0;
    std::map<std::string, std::size_t> skipped_kinds;
    HeaderVars header;
};

// Throws ValidationError naming the violated invariant.
inline void validate(const Entity& e) {
    auto fail = [&](const std::string& msg) {
        throw ValidationError(std::string(to_string(e.kind())) + ": " + msg);
    };
    std::visit(
        [&](const auto& g) {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, LwPolyline>) {
                if (g.vertices.size() < 2) fail("needs at least 2 vertices");
            } else if constexpr (std::is_same_v<T, Arc>) {
                if (!(g.radius > 0.0)) fail("radius must be positive");
                if (std::fmod(std::fabs(g.end_deg - g.start_deg), 360.0) == 0.0)
                    fail("start and end angles coincide");
            } else if constexpr (std::is_same_v<T, Spline>) {
                if (g.degree != 2 && g.degree != 3) fail("degree must be 2 or 3");
                if (g.control_points.size() < static_cast<std::size_t>(g.degree) + 1)
                    fail("needs at least degree+1 control points");
                if (!g.knots.empty()) {
                    if (g.knots.size() != g.control_points.size() + g.degree + 1)
                        fail("knot count must equal control points + degree + 1");
                    for (std::size_t i = 1; i < g.knots.size(); ++i)
                        if (g.knots[i] < g.knots[i - 1]) fail("knot vector must be non-decreasing");
                }
            }
        },
        e.geometry);
}

namespace detail {

struct Group {
    int code;
    std::string value;
    std::size_t line;  // line of the code
};

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<Group> read_groups(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();

    std::vector<Group> groups;
    groups.reserve(lines.size() / 2);
    for (std::size_t i = 0; i < lines.size(); i += 2) {
        const std::string_view code_text = trim(lines[i]);
        int code = 0;
        const auto [ptr, ec] = std::from_chars(code_text.data(), code_text.data() + code_text.size(), code);
        if (code_text.empty() || ec != std::errc() || ptr != code_text.data() + code_text.size())
            throw ParseError("expected integer group code, got '" + std::string(code_text) + "'", i + 1);
        if (i + 1 >= lines.size())
            throw ParseError("group code " + std::to_string(code) + " has no value line", i + 1);
        groups.push_back({code, std::string(trim(lines[i + 1])), i + 1});
    }
    return groups;
}

inline double to_double(const Group& g) {
    double v = 0.0;
    const char* first = g.value.data();
    const char* last = first + g.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (g.value.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
        throw ParseError("group " + std::to_string(g.code) + ": bad number '" + g.value + "'", g.line + 1);
    return v;
}

inline int to_int(const Group& g) {
    int v = 0;
    const char* first = g.value.data();
    const char* last = first + g.value.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (g.value.empty() || ec != std::errc() || ptr != last)
        throw ParseError("group " + std::to_string(g.code) + ": bad integer '" + g.value + "'", g.line + 1);
    return v;
}

inline Entity build_entity(const std::string& kind, std::span<const Group> body, std::size_t line) {
    Entity e;
    e.source_line = line;
    auto truncated = [&](const std::string& what) -> ParseError {
        return ParseError("truncated " + kind + " entity: " + what, line);
    };

    std::optional<double> x10, y20, x11, y21, r40, a50, a51;
    LwPolyline poly;
    std::optional<int> declared_vertices;
    Spline spline;
    std::optional<int> degree, declared_knots, declared_ctrl;
    double pending_x = 0.0;  // spline control point awaiting its y
    bool has_pending_x = false;

    for (const Group& g : body) {
        switch (g.code) {
            case 8: e.layer = g.value; continue;
            case 62: e.color_index = to_int(g); continue;
            default: break;
        }
        if (kind == "LINE") {
            switch (g.code) {
                case 10: x10 = to_double(g); break;
                case 20: y20 = to_double(g); break;
                case 11: x11 = to_double(g); break;
                case 21: y21 = to_double(g); break;
                default: break;
            }
        } else if (kind == "LWPOLYLINE") {
            switch (g.code) {
                case 90: declared_vertices = to_int(g); break;
                case 70: poly.closed = (to_int(g) & 1) != 0; break;
                case 10: poly.vertices.push_back({to_double(g), std::nan("")}); break;
                case 20:
                    if (poly.vertices.empty() || !std::isnan(poly.vertices.back().y))
                        throw ParseError("LWPOLYLINE: group 20 without preceding 10", g.line);
                    poly.vertices.back().y = to_double(g);
                    break;
                default: break;  // 42 bulge and widths are ignored
            }
        } else if (kind == "ARC") {
            switch (g.code) {
                case 10: x10 = to_double(g); break;
                case 20: y20 = to_double(g); break;
                case 40: r40 = to_double(g); break;
                case 50: a50 = to_double(g); break;
                case 51: a51 = to_double(g); break;
                default: break;
            }
        } else if (kind == "SPLINE") {
            switch (g.code) {
                case 71: degree = to_int(g); break;
                case 72: declared_knots = to_int(g); break;
                case 73: declared_ctrl = to_int(g); break;
                case 40: spline.knots.push_back(to_double(g)); break;
                case 10:
                    if (has_pending_x) throw ParseError("SPLINE: control point x without y", g.line);
                    pending_x = to_double(g);
                    has_pending_x = true;
                    break;
                case 20:
                    if (!has_pending_x) throw ParseError("SPLINE: group 20 without preceding 10", g.line);
                    spline.control_points.push_back({pending_x, to_double(g)});
                    has_pending_x = false;
                    break;
                default: break;  // 70 flags, 74 fit count, fit points, weights
            }
        }
    }

    if (kind == "LINE") {
        if (!x10 || !y20 || !x11 || !y21) throw truncated("missing endpoint coordinates");
        e.geometry = Line{{*x10, *y20}, {*x11, *y21}};
    } else if (kind == "LWPOLYLINE") {
        for (const Vec2& v : poly.vertices)
            if (std::isnan(v.y)) throw truncated("vertex without y coordinate");
        if (declared_vertices && *declared_vertices != static_cast<int>(poly.vertices.size()))
            throw truncated("declared " + std::to_string(*declared_vertices) + " vertices, found " +
                            std::to_string(poly.vertices.size()));
        e.geometry = std::move(poly);
    } else if (kind == "ARC") {
        if (!x10 || !y20 || !r40 || !a50 || !a51) throw truncated("missing center, radius or angles");
        e.geometry = Arc{{*x10, *y20}, *r40, *a50, *a51};
    } else {
        if (has_pending_x) throw truncated("control point without y coordinate");
        if (!degree) throw truncated("missing degree (group 71)");
        spline.degree = *degree;
        if (declared_ctrl && *declared_ctrl != static_cast<int>(spline.control_points.size()))
            throw truncated("declared " + std::to_string(*declared_ctrl) + " control points, found " +
                            std::to_string(spline.control_points.size()));
        if (declared_knots && *declared_knots != static_cast<int>(spline.knots.size()))
            throw truncated("declared " + std::to_string(*declared_knots) + " knots, found " +
                            std::to_string(spline.knots.size()));
        e.geometry = std::move(spline);
    }

    try {
        validate(e);
    } catch (const ValidationError& err) {
        throw ParseError(err.what(), line);
    }
    return e;
}

inline void read_header(std::span<const Group> groups, std::size_t& i, HeaderVars& header) {
    std::string var;
    for (; i < groups.size(); ++i) {
        const Group& g = groups[i];
        if (g.code == 0) return;  // ENDSEC
        if (g.code == 9) {
            var = g.value;
            continue;
        }
        if (var == "$SEAMALLOWANCE" && g.code == 40) header.seam_allowance = to_double(g);
        else if (var == "$STITCHLENGTH" && g.code == 40) header.stitch_length = to_double(g);
        else if (var == "$SEAMCOLOR" && (g.code == 62 || g.code == 70)) header.seam_color_index = to_int(g);
    }
}

inline bool is_supported(const std::string& kind) {
    return kind == "LINE" || kind == "LWPOLYLINE" || kind == "ARC" || kind == "SPLINE";
}

}  // namespace detail

// Parses group-code/value text. Entities outside {LINE, LWPOLYLINE, ARC,
// SPLINE} are skipped and counted. Errors carry the 1-based line number.
inline Document parse(std::string_view text) {
    const std::vector<detail::Group> groups = detail::read_groups(text);
    Document doc;

    std::size_t i = 0;
    while (i < groups.size()) {
        const detail::Group& g = groups[i];
        if (g.code == 0 && g.value == "EOF") break;
        if (g.code != 0 || g.value != "SECTION") {
            ++i;
            continue;
        }
        if (i + 1 >= groups.size() || groups[i + 1].code != 2)
            throw ParseError("SECTION without name (group 2)", g.line);
        const std::string section = groups[i + 1].value;
        i += 2;

        if (section == "HEADER") {
            detail::read_header(groups, i, doc.header);
        } else if (section == "ENTITIES") {
            while (i < groups.size()) {
                const detail::Group& start = groups[i];
                if (start.code != 0)
                    throw ParseError("expected group 0 starting an entity, got group " + std::to_string(start.code),
                                     start.line);
                if (start.value == "ENDSEC") break;
                if (start.value == "EOF") throw ParseError("ENTITIES section not closed by ENDSEC", start.line);
                std::size_t end = i + 1;
                while (end < groups.size() && groups[end].code != 0) ++end;
                if (end == groups.size())
                    throw ParseError("truncated " + start.value + " entity: document ends inside it", start.line);
                if (detail::is_supported(start.value)) {
                    doc.entities.push_back(detail::build_entity(
                        start.value, std::span(groups).subspan(i + 1, end - i - 1), start.line));
                } else {
                    ++doc.skipped;
                    ++doc.skipped_kinds[start.value];
                }
                i = end;
            }
            if (i >= groups.size()) throw ParseError("ENTITIES section not closed by ENDSEC", groups.back().line);
        }

        while (i < groups.size() && !(groups[i].code == 0 && groups[i].value == "ENDSEC")) ++i;
        if (i >= groups.size()) throw ParseError("section " + section + " not closed by ENDSEC", groups.back().line);
        ++i;
    }
    return doc;
}

// Minimal writer: HEADER with sewing variables and an ENTITIES section.
// Coordinates use 17 significant digits so a parse restores them exactly.
inline std::string write(const std::vector<Entity>& entities, const HeaderVars& header = {}) {
    std::string out;
    auto pair = [&](int code, const std::string& value) {
        out += std::to_string(code);
        out += '\n';
        out += value;
        out += '\n';
    };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };

    pair(0, "SECTION");
    pair(2, "HEADER");
    if (header.seam_allowance) { pair(9, "$SEAMALLOWANCE"); pair(40, num(*header.seam_allowance)); }
    if (header.stitch_length) { pair(9, "$STITCHLENGTH"); pair(40, num(*header.stitch_length)); }
    if (header.seam_color_index) { pair(9, "$SEAMCOLOR"); pair(62, std::to_string(*header.seam_color_index)); }
    pair(0, "ENDSEC");

    pair(0, "SECTION");
    pair(2, "ENTITIES");
    for (const Entity& e : entities) {
        pair(0, to_string(e.kind()));
        pair(8, e.layer);
        pair(62, std::to_string(e.color_index));
        std::visit(
            [&](const auto& g) {
                using T = std::decay_t<decltype(g)>;
                if constexpr (std::is_same_v<T, Line>) {
                    pair(10, num(g.start.x)); pair(20, num(g.start.y));
                    pair(11, num(g.end.x)); pair(21, num(g.end.y));
                } else if constexpr (std::is_same_v<T, LwPolyline>) {
                    pair(90, std::to_string(g.vertices.size()));
                    pair(70, g.closed ? "1" : "0");
                    for (const Vec2& v : g.vertices) { pair(10, num(v.x)); pair(20, num(v.y)); }
                } else if constexpr (std::is_same_v<T, Arc>) {
                    pair(10, num(g.center.x)); pair(20, num(g.center.y));
                    pair(40, num(g.radius));
                    pair(50, num(g.start_deg)); pair(51, num(g.end_deg));
                } else {
                    pair(71, std::to_string(g.degree));
                    pair(72, std::to_string(g.knots.size()));
                    pair(73, std::to_string(g.control_points.size()));
                    for (double k : g.knots) pair(40, num(k));
                    for (const Vec2& v : g.control_points) { pair(10, num(v.x)); pair(20, num(v.y)); }
                }
            },
            e.geometry);
    }
    pair(0, "ENDSEC");
    pair(0, "EOF");
    return out;
}

}  // namespace stitchsim::dxf
