#include <doctest.h>

#include <algorithm>
#include <vector>

#include "ctxnav/oracle.hpp"
#include "ctxnav/render.hpp"

using namespace ctxnav;

namespace {

WorldState scene() {
    WorldState w;
    w.d = 6;
    w.agent = {{2, 2}, Orientation::up, 0};
    w.objects = {{Color::yellow, Shape::circle, 2, {1, 2}},
                 {Color::red, Shape::square, 4, {4, 4}},
                 {Color::blue, Shape::cylinder, 1, {5, 0}}};
    return w;
}

RenderSpec base_spec(RenderFormat fmt) {
    RenderSpec spec;
    spec.world = scene();
    spec.target_path = {{2, 2}, {1, 2}};
    spec.predicted_path = {{2, 2}, {2, 3}};
    spec.format = fmt;
    return spec;
}

// Every '<' must close and every opened tag must be matched: a cheap
// well-formedness proxy that catches unterminated elements.
bool tags_balanced(const std::string& svg) {
    int depth = 0;
    size_t i = 0;
    while ((i = svg.find('<', i)) != std::string::npos) {
        size_t end = svg.find('>', i);
        if (end == std::string::npos) return false;
        std::string tag = svg.substr(i + 1, end - i - 1);
        if (tag.rfind("?", 0) == 0) {
            // declaration
        } else if (tag.rfind("/", 0) == 0) {
            if (--depth < 0) return false;
        } else if (!tag.empty() && tag.back() != '/') {
            ++depth;
        }
        i = end + 1;
    }
    return depth == 0;
}

}  // namespace

TEST_CASE("path_of_follows_dynamics_and_dedupes") {
    WorldState w = scene();
    std::vector<ActionToken> actions = {ActionToken::L_turn, ActionToken::L_turn,
                                        ActionToken::walk, ActionToken::stay,
                                        ActionToken::walk};
    // Two turns (no movement), then two walks downward.
    std::vector<Position> path = path_of(w, actions);
    CHECK(path == std::vector<Position>{{2, 2}, {3, 2}, {4, 2}});

    // A blocked walk adds no duplicate cell.
    WorldState edge = w;
    edge.agent = {{0, 0}, Orientation::up, 0};
    std::vector<ActionToken> blocked = {ActionToken::walk};
    CHECK(path_of(edge, blocked) == std::vector<Position>{{0, 0}});
}

TEST_CASE("render_is_deterministic") {
    RenderSpec spec = base_spec(RenderFormat::svg);
    spec.attention = std::vector<double>(36, 1.0 / 36.0);
    CHECK(render(spec) == render(spec));
    RenderSpec txt = base_spec(RenderFormat::txt);
    txt.attention = spec.attention;
    CHECK(render(txt) == render(txt));
}

TEST_CASE("svg_is_tag_balanced_with_expected_elements") {
    RenderSpec spec = base_spec(RenderFormat::svg);
    std::vector<double> att(36, 0.0);
    att[7] = 1.0;  // cell (1,1) carries all the mass
    spec.attention = att;
    std::string svg = render(spec);
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(tags_balanced(svg));
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("circle") != std::string::npos);   // circle glyph
    CHECK(svg.find("<rect") != std::string::npos);    // square glyph / cells
    CHECK(svg.find("polyline") != std::string::npos); // paths
    CHECK(svg.find("polygon") != std::string::npos);  // agent arrow
}

TEST_CASE("svg_attention_shading_is_min_max_normalized") {
    RenderSpec spec = base_spec(RenderFormat::svg);

    // No attention: no grey shading anywhere (all cells white).
    std::string plain = render(spec);
    CHECK(plain.find("fill=\"rgb(255,255,255)\"") != std::string::npos);

    // A single hot cell: exactly one black cell, the rest white.
    std::vector<double> att(36, 0.0);
    att[7] = 1.0;
    spec.attention = att;
    std::string hot = render(spec);
    CHECK(hot.find("fill=\"rgb(0,0,0)\"") != std::string::npos);

    // Uniform attention normalizes to all-white (flat map).
    spec.attention = std::vector<double>(36, 1.0 / 36.0);
    std::string uniform = render(spec);
    CHECK(uniform.find("fill=\"rgb(0,0,0)\"") == std::string::npos);
}

TEST_CASE("txt_shows_deciles_glyphs_and_paths") {
    RenderSpec spec = base_spec(RenderFormat::txt);
    std::vector<double> att(36, 0.0);
    att[8] = 0.75;   // cell (1,2): also holds the circle
    att[14] = 0.25;  // cell (2,2): agent
    spec.attention = att;
    std::string txt = render(spec);
    CHECK(txt.find('9') != std::string::npos);  // 0.75 of max 0.75 -> top decile
    CHECK(txt.find('o') != std::string::npos);  // circle glyph
    CHECK(txt.find('s') != std::string::npos);  // square glyph
    CHECK(txt.find('c') != std::string::npos);  // cylinder glyph
    CHECK(txt.find('^') != std::string::npos);  // agent facing up
    CHECK(txt.find("target:") != std::string::npos);
    CHECK(txt.find("predicted:") != std::string::npos);

    // Six grid lines before the path legend.
    int newlines = 0;
    for (char ch : txt.substr(0, txt.find("target:"))) newlines += ch == '\n';
    CHECK(newlines >= 6);
}

TEST_CASE("validate_rejects_bad_specs") {
    RenderSpec ok = base_spec(RenderFormat::svg);
    CHECK_NOTHROW(ok.validate());

    RenderSpec short_att = ok;
    short_att.attention = std::vector<double>(35, 1.0 / 35.0);
    CHECK_THROWS_AS(short_att.validate(), ConfigError);

    RenderSpec bad_sum = ok;
    bad_sum.attention = std::vector<double>(36, 1.0);  // sums to 36
    CHECK_THROWS_AS(bad_sum.validate(), ConfigError);

    RenderSpec oob = ok;
    oob.predicted_path.push_back({6, 0});
    CHECK_THROWS_AS(oob.validate(), ConfigError);
}

TEST_CASE("path_rows_and_cols_share_the_grid_mapping") {
    // The oracle's own route, turned into a path, stays on the board and
    // starts at the agent.
    WorldState w = scene();
    Command cmd{Verb::walk, SizeAdj::none, std::nullopt, Shape::cylinder, Adverb::none};
    std::vector<ActionToken> plan = oracle(cmd, w);
    std::vector<Position> path = path_of(w, plan);
    CHECK(path.front() == w.agent.pos);
    CHECK(path.back() == Position{5, 0});
    for (Position p : path) {
        CHECK(p.row >= 0);
        CHECK(p.row < 6);
        CHECK(p.col >= 0);
        CHECK(p.col < 6);
    }
    // Rendering both formats with this real path succeeds.
    RenderSpec spec;
    spec.world = w;
    spec.predicted_path = path;
    spec.target_path = path;
    spec.format = RenderFormat::svg;
    CHECK(tags_balanced(render(spec)));
    spec.format = RenderFormat::txt;
    CHECK(!render(spec).empty());
}
