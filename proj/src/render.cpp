#include "ctxnav/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ctxnav/world_encoder.hpp"

namespace ctxnav {

namespace {

constexpr int kCell = 48;    // px per grid cell
constexpr int kMargin = 12;  // px border around the grid

const char* svg_color(Color c) {
    switch (c) {
        case Color::red: return "#d62728";
        case Color::green: return "#2ca02c";
        case Color::blue: return "#1f77b4";
        case Color::yellow: return "#e8c100";
    }
    return "#000000";
}

// Min-max normalization to [0,1]; a flat map (max == min) renders as all-zero
// so uniform attention gives identical cells.
std::vector<double> normalize(const std::vector<double>& a) {
    double lo = *std::min_element(a.begin(), a.end());
    double hi = *std::max_element(a.begin(), a.end());
    std::vector<double> out(a.size(), 0.0);
    if (hi > lo)
        for (size_t i = 0; i < a.size(); ++i) out[i] = (a[i] - lo) / (hi - lo);
    return out;
}

double cx(int col) { return kMargin + kCell * (col + 0.5); }
double cy(int row) { return kMargin + kCell * (row + 0.5); }

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

void svg_polyline(std::ostringstream& out, const std::vector<Position>& path,
                  const char* stroke, int width) {
    if (path.empty()) return;
    out << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << width
        << "\" stroke-linejoin=\"round\" stroke-linecap=\"round\" points=\"";
    for (size_t i = 0; i < path.size(); ++i) {
        if (i) out << " ";
        out << fmt("%.1f", cx(path[i].col)) << "," << fmt("%.1f", cy(path[i].row));
    }
    out << "\"/>\n";
    // A one-cell path would otherwise be invisible; mark it with a dot.
    if (path.size() == 1)
        out << "<circle cx=\"" << fmt("%.1f", cx(path[0].col)) << "\" cy=\""
            << fmt("%.1f", cy(path[0].row)) << "\" r=\"4\" fill=\"" << stroke << "\"/>\n";
}

std::string render_svg(const RenderSpec& spec) {
    const WorldState& w = spec.world;
    const int side = 2 * kMargin + kCell * w.d;
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << side << "\" height=\"" << side
        << "\" viewBox=\"0 0 " << side << " " << side << "\">\n";

    std::vector<double> shade;
    if (spec.attention) shade = normalize(*spec.attention);
    for (int r = 0; r < w.d; ++r) {
        for (int c = 0; c < w.d; ++c) {
            int grey = 255;
            if (!shade.empty()) {
                double g = shade[static_cast<size_t>(flat_cell(r, c, w.d))];
                grey = 255 - static_cast<int>(std::lround(g * 255.0));
            }
            out << "<rect x=\"" << (kMargin + kCell * c) << "\" y=\"" << (kMargin + kCell * r)
                << "\" width=\"" << kCell << "\" height=\"" << kCell << "\" fill=\"rgb(" << grey
                << "," << grey << "," << grey << ")\" stroke=\"#999999\" stroke-width=\"1\"/>\n";
        }
    }

    for (const ObjectSpec& o : w.objects) {
        // Glyph half-extent grows with object size (1..4).
        double h = kCell * (0.12 + 0.07 * o.size);
        double x = cx(o.pos.col), y = cy(o.pos.row);
        const char* fill = svg_color(o.color);
        switch (o.shape) {
            case Shape::circle:
                out << "<circle cx=\"" << fmt("%.1f", x) << "\" cy=\"" << fmt("%.1f", y)
                    << "\" r=\"" << fmt("%.1f", h) << "\" fill=\"" << fill
                    << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
                break;
            case Shape::square:
                out << "<rect x=\"" << fmt("%.1f", x - h) << "\" y=\"" << fmt("%.1f", y - h)
                    << "\" width=\"" << fmt("%.1f", 2 * h) << "\" height=\"" << fmt("%.1f", 2 * h)
                    << "\" fill=\"" << fill << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
                break;
            case Shape::cylinder:
                // Side view: a rect body with an elliptical cap.
                out << "<rect x=\"" << fmt("%.1f", x - h) << "\" y=\"" << fmt("%.1f", y - 0.7 * h)
                    << "\" width=\"" << fmt("%.1f", 2 * h) << "\" height=\""
                    << fmt("%.1f", 1.4 * h) << "\" rx=\"" << fmt("%.1f", 0.5 * h) << "\" fill=\""
                    << fill << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
                break;
        }
    }

    if (!spec.target_path.empty() || !spec.predicted_path.empty()) {
        svg_polyline(out, spec.target_path, "#00aa00", 5);
        svg_polyline(out, spec.predicted_path, "#ee0000", 2);
    }

    {
        // Agent: triangle pointing along its orientation.
        Position d = delta(w.agent.orientation);
        double x = cx(w.agent.pos.col), y = cy(w.agent.pos.row);
        double fx = d.col, fy = d.row;           // forward unit vector (px space)
        double px = -fy, py = fx;                // perpendicular
        double tip = kCell * 0.32, base = kCell * 0.20;
        out << "<polygon fill=\"#c03a9e\" stroke=\"#333333\" stroke-width=\"1\" points=\""
            << fmt("%.1f", x + fx * tip) << "," << fmt("%.1f", y + fy * tip) << " "
            << fmt("%.1f", x - fx * base + px * base) << ","
            << fmt("%.1f", y - fy * base + py * base) << " "
            << fmt("%.1f", x - fx * base - px * base) << ","
            << fmt("%.1f", y - fy * base - py * base) << "\"/>\n";
    }

    out << "</svg>\n";
    return out.str();
}

char orientation_glyph(Orientation o) {
    switch (o) {
        case Orientation::up: return '^';
        case Orientation::down: return 'v';
        case Orientation::left: return '<';
        case Orientation::right: return '>';
    }
    return '?';
}

char shape_glyph(Shape s) {
    switch (s) {
        case Shape::circle: return 'o';
        case Shape::square: return 's';
        case Shape::cylinder: return 'c';
    }
    return '?';
}

std::string render_txt(const RenderSpec& spec) {
    const WorldState& w = spec.world;
    std::vector<double> shade;
    if (spec.attention) shade = normalize(*spec.attention);
    std::ostringstream out;
    for (int r = 0; r < w.d; ++r) {
        for (int c = 0; c < w.d; ++c) {
            if (c) out << " ";
            char att = '.';
            if (!shade.empty()) {
                double g = shade[static_cast<size_t>(flat_cell(r, c, w.d))];
                att = static_cast<char>('0' + std::min(9, static_cast<int>(g * 10.0)));
            }
            char glyph = '.', extra = '.';
            if (const ObjectSpec* o = w.object_at({r, c})) {
                glyph = shape_glyph(o->shape);
                extra = static_cast<char>('0' + o->size);
            }
            if (w.agent.pos == Position{r, c}) glyph = orientation_glyph(w.agent.orientation);
            out << att << glyph << extra;
        }
        out << "\n";
    }
    auto path_line = [&](const char* label, const std::vector<Position>& path) {
        out << label;
        for (const Position& p : path) out << " (" << p.row << "," << p.col << ")";
        out << "\n";
    };
    path_line("target:", spec.target_path);
    path_line("predicted:", spec.predicted_path);
    return out.str();
}

}  // namespace

void RenderSpec::validate() const {
    world.validate();
    if (attention) {
        if (static_cast<int>(attention->size()) != world.d * world.d)
            throw ConfigError("render: attention length must be d*d");
        double sum = 0.0;
        for (double a : *attention) sum += a;
        if (std::abs(sum - 1.0) > 1e-6)
            throw ConfigError("render: attention must sum to 1 (got " + fmt("%.9g", sum) + ")");
    }
    auto check_path = [&](const std::vector<Position>& path, const char* what) {
        for (const Position& p : path)
            if (!world.in_bounds(p))
                throw ConfigError(std::string("render: ") + what + " path leaves the grid");
    };
    check_path(predicted_path, "predicted");
    check_path(target_path, "target");
}

std::string render(const RenderSpec& spec) {
    spec.validate();
    return spec.format == RenderFormat::svg ? render_svg(spec) : render_txt(spec);
}

std::vector<Position> path_of(const WorldState& w, std::span<const ActionToken> actions) {
    std::vector<Position> path{w.agent.pos};
    WorldState cur = w;
    for (ActionToken a : actions) {
        cur = step(cur, a).first;
        if (cur.agent.pos != path.back()) path.push_back(cur.agent.pos);
    }
    return path;
}

}  // namespace ctxnav
