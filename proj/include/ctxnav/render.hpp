#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ctxnav/world.hpp"

namespace ctxnav {

enum class RenderFormat : uint8_t { svg, txt };

// One renderable scene: a world, optional per-cell spatial attention (length
// d*d, flattened row-major to match the grid encoder), and two agent paths.
struct RenderSpec {
    WorldState world;
    std::optional<std::vector<double>> attention;  // sums to 1 +/- 1e-6
    std::vector<Position> predicted_path;          // drawn in red
    std::vector<Position> target_path;             // drawn in green
    RenderFormat format = RenderFormat::svg;

    void validate() const;  // ConfigError
};

// Deterministic rendering: identical spec -> identical bytes.  SVG shades each
// cell by min-max-normalized attention (white = 0, black = max), draws objects
// as shape glyphs sized by object size and filled by color, the agent as an
// oriented arrow, and paths as polylines through cell centers.  TXT shows
// attention deciles as digits plus glyph characters.
std::string render(const RenderSpec& spec);

// Cell sequence the agent visits while executing `actions` from `w`,
// starting position included.
std::vector<Position> path_of(const WorldState& w, std::span<const ActionToken> actions);

}  // namespace ctxnav
