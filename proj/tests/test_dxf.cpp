#include <gtest/gtest.h>

#include <string>

#include "stitchsim/dxf.hpp"
#include "support/gen.hpp"

using namespace stitchsim;

namespace {

std::string entities(const std::string& body) {
    return "0\nSECTION\n2\nENTITIES\n" + body + "0\nENDSEC\n0\nEOF\n";
}

const char* kLine = "0\nLINE\n8\n0\n62\n1\n10\n0.0\n20\n0.0\n30\n0.0\n11\n100.0\n21\n0.0\n31\n0.0\n";

std::string error_of(const std::string& text) {
    try {
        dxf::parse(text);
    } catch (const ParseError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Dxf, SingleLine) {
    const dxf::Document doc = dxf::parse(entities(kLine));
    ASSERT_EQ(doc.entities.size(), 1u);
    const dxf::Entity& e = doc.entities[0];
    EXPECT_EQ(e.kind(), dxf::EntityKind::Line);
    EXPECT_EQ(e.color_index, 1);
    const auto& line = std::get<dxf::Line>(e.geometry);
    EXPECT_EQ(line.start, (Vec2{0, 0}));
    EXPECT_EQ(line.end, (Vec2{100, 0}));
}

TEST(Dxf, PolylineAndSplineFieldsMatchAuthoredValues) {
    const std::string body =
        "0\nLWPOLYLINE\n8\nCUT\n62\n7\n90\n4\n70\n1\n"
        "10\n0\n20\n0\n10\n50\n20\n0\n10\n50\n20\n30\n10\n0\n20\n30\n"
        "0\nSPLINE\n8\nCUT\n62\n5\n70\n8\n71\n3\n72\n8\n73\n4\n"
        "40\n0\n40\n0\n40\n0\n40\n0\n40\n1\n40\n1\n40\n1\n40\n1\n"
        "10\n0\n20\n0\n30\n0\n10\n10\n20\n20\n30\n0\n10\n30\n20\n20\n30\n0\n10\n40\n20\n0\n30\n0\n";
    const dxf::Document doc = dxf::parse(entities(body));
    ASSERT_EQ(doc.entities.size(), 2u);
    EXPECT_EQ(doc.entities[0].kind(), dxf::EntityKind::LwPolyline);
    EXPECT_EQ(doc.entities[1].kind(), dxf::EntityKind::Spline);
    const auto& poly = std::get<dxf::LwPolyline>(doc.entities[0].geometry);
    EXPECT_TRUE(poly.closed);
    ASSERT_EQ(poly.vertices.size(), 4u);
    EXPECT_EQ(poly.vertices[2], (Vec2{50, 30}));
    EXPECT_EQ(doc.entities[0].layer, "CUT");
    const auto& sp = std::get<dxf::Spline>(doc.entities[1].geometry);
    EXPECT_EQ(sp.degree, 3);
    ASSERT_EQ(sp.control_points.size(), 4u);
    EXPECT_EQ(sp.control_points[1], (Vec2{10, 20}));
    EXPECT_EQ(sp.knots.size(), 8u);
    EXPECT_EQ(doc.entities[1].color_index, 5);
}

TEST(Dxf, UnsupportedKindsAreSkippedAndCounted) {
    const std::string body = std::string("0\nMTEXT\n8\n0\n10\n1\n20\n2\n1\nhello\n") + kLine + "0\nCIRCLE\n10\n0\n20\n0\n40\n5\n";
    const dxf::Document doc = dxf::parse(entities(body));
    EXPECT_EQ(doc.entities.size(), 1u);
    EXPECT_EQ(doc.skipped, 2u);
    EXPECT_EQ(doc.skipped_kinds.at("MTEXT"), 1u);
    EXPECT_EQ(doc.skipped_kinds.at("CIRCLE"), 1u);
}

TEST(Dxf, EntityOrderPreserved) {
    std::string body;
    for (int i = 0; i < 5; ++i)
        body += "0\nLINE\n62\n" + std::to_string(i + 1) + "\n10\n0\n20\n0\n11\n" + std::to_string(i + 1) + "\n21\n0\n";
    const dxf::Document doc = dxf::parse(entities(body));
    ASSERT_EQ(doc.entities.size(), 5u);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(doc.entities[i].color_index, i + 1);
}

TEST(Dxf, MalformedGroupCodeNamesLine) {
    const std::string text = entities("0\nLINE\nxx\n1\n");
    const std::string msg = error_of(text);
    EXPECT_NE(msg.find("line 7"), std::string::npos) << msg;
    try {
        dxf::parse(text);
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 7u);
    }
}

TEST(Dxf, BadNumberNamesLine) {
    const std::string msg = error_of(entities("0\nLINE\n10\nabc\n20\n0\n11\n1\n21\n0\n"));
    EXPECT_NE(msg.find("line 8"), std::string::npos) << msg;
}

TEST(Dxf, OddNumberOfLinesIsMalformed) {
    EXPECT_FALSE(error_of("0\nSECTION\n2\n").empty());
}

TEST(Dxf, TruncatedEntityNamesKind) {
    EXPECT_NE(error_of(entities("0\nARC\n10\n0\n20\n0\n40\n5\n")).find("truncated ARC"), std::string::npos);
    EXPECT_NE(error_of(entities("0\nLINE\n10\n0\n20\n0\n")).find("truncated LINE"), std::string::npos);
    EXPECT_NE(error_of("0\nSECTION\n2\nENTITIES\n0\nSPLINE\n71\n3\n").find("SPLINE"), std::string::npos);
    EXPECT_NE(error_of(entities("0\nLWPOLYLINE\n90\n3\n10\n0\n20\n0\n10\n1\n20\n0\n")).find("truncated LWPOLYLINE"),
              std::string::npos);
}

TEST(Dxf, EntityInvariantsEnforced) {
    EXPECT_NE(error_of(entities("0\nARC\n10\n0\n20\n0\n40\n0\n50\n0\n51\n90\n")).find("radius"), std::string::npos);
    EXPECT_NE(error_of(entities("0\nARC\n10\n0\n20\n0\n40\n5\n50\n10\n51\n370\n")).find("angle"), std::string::npos);
    EXPECT_FALSE(error_of(entities("0\nLWPOLYLINE\n10\n0\n20\n0\n")).empty());
    // degree 4 not supported
    EXPECT_FALSE(error_of(entities("0\nSPLINE\n71\n4\n10\n0\n20\n0\n10\n1\n20\n0\n10\n2\n20\n0\n10\n3\n20\n0\n10\n4\n20\n0\n")).empty());
    // too few control points for degree 3
    EXPECT_FALSE(error_of(entities("0\nSPLINE\n71\n3\n10\n0\n20\n0\n10\n1\n20\n0\n10\n2\n20\n0\n")).empty());
    // decreasing knots
    EXPECT_FALSE(error_of(entities("0\nSPLINE\n71\n2\n40\n0\n40\n0\n40\n0\n40\n1\n40\n0.5\n40\n1\n"
                                   "10\n0\n20\n0\n10\n1\n20\n1\n10\n2\n20\n0\n"))
                     .empty());
}

TEST(Dxf, HeaderSewingVariables) {
    const std::string text =
        "0\nSECTION\n2\nHEADER\n9\n$ACADVER\n1\nAC1015\n9\n$SEAMALLOWANCE\n40\n15.5\n9\n$STITCHLENGTH\n40\n2.5\n"
        "9\n$SEAMCOLOR\n62\n3\n0\nENDSEC\n" +
        entities(kLine);
    const dxf::Document doc = dxf::parse(text);
    EXPECT_EQ(doc.header.seam_allowance, 15.5);
    EXPECT_EQ(doc.header.stitch_length, 2.5);
    EXPECT_EQ(doc.header.seam_color_index, 3);
    EXPECT_EQ(doc.entities.size(), 1u);
}

TEST(Dxf, CrlfAndPaddedCodesAccepted) {
    std::string text = entities(kLine);
    std::string crlf;
    for (char c : text) crlf += c == '\n' ? std::string("\r\n") : std::string(1, c);
    EXPECT_EQ(dxf::parse(crlf).entities.size(), 1u);
    EXPECT_EQ(dxf::parse("  0\nSECTION\n  2\nENTITIES\n  0\nLINE\n 10\n1\n 20\n2\n 11\n3\n 21\n4\n  0\nENDSEC\n  0\nEOF\n")
                  .entities.size(),
              1u);
}

TEST(Dxf, WriteParseRoundTripRandomEntities) {
    gen::Rng r(23);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<dxf::Entity> ents;
        for (int k = 0; k < 6; ++k) {
            dxf::Entity e;
            e.color_index = gen::uniform_int(r, 1, 255);
            e.layer = "L" + std::to_string(k);
            switch (gen::uniform_int(r, 0, 3)) {
                case 0: e.geometry = dxf::Line{{gen::uniform(r, -1e3, 1e3), gen::uniform(r, -1e3, 1e3)}, {gen::uniform(r, -1e3, 1e3), gen::uniform(r, -1e3, 1e3)}}; break;
                case 1: {
                    dxf::LwPolyline p;
                    for (int i = 0; i < 5; ++i) p.vertices.push_back({gen::uniform(r, -1e3, 1e3), gen::uniform(r, -1e3, 1e3)});
                    p.closed = gen::uniform_int(r, 0, 1) == 1;
                    e.geometry = p;
                    break;
                }
                case 2: e.geometry = dxf::Arc{{gen::uniform(r, -1e3, 1e3), gen::uniform(r, -1e3, 1e3)}, gen::uniform(r, 1, 500), gen::uniform(r, 0, 180), gen::uniform(r, 190, 359)}; break;
                default: {
                    dxf::Spline s;
                    s.degree = gen::uniform_int(r, 2, 3);
                    for (int i = 0; i < 6; ++i) s.control_points.push_back({gen::uniform(r, -1e3, 1e3), gen::uniform(r, -1e3, 1e3)});
                    if (gen::uniform_int(r, 0, 1)) s.knots = {0, 0, 0, 0, 0.3, 0.6, 1, 1, 1, 1};
                    if (!s.knots.empty() && s.degree == 2) s.knots = {0, 0, 0, 0.25, 0.5, 0.75, 1, 1, 1};
                    e.geometry = s;
                }
            }
            ents.push_back(e);
        }
        const dxf::Document doc = dxf::parse(dxf::write(ents));
        ASSERT_EQ(doc.entities.size(), ents.size());
        for (std::size_t i = 0; i < ents.size(); ++i) {
            EXPECT_EQ(doc.entities[i].kind(), ents[i].kind());
            EXPECT_EQ(doc.entities[i].color_index, ents[i].color_index);
            EXPECT_EQ(doc.entities[i].layer, ents[i].layer);
            EXPECT_EQ(doc.entities[i].geometry, ents[i].geometry);  // %.17g restores doubles exactly
        }
    }
}
