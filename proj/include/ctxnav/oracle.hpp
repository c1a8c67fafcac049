#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxnav/world.hpp"

namespace ctxnav {

// ---------------------------------------------------------------------------
// Symbolic planner: expands a structured command into the canonical action
// sequence for a given world.  Used both to label generated episodes and as
// the reference against which learned predictions are scored.
// ---------------------------------------------------------------------------

enum class Verb : uint8_t { walk, push, pull };
enum class SizeAdj : uint8_t { none, small, big };
enum class Adverb : uint8_t { none, cautiously, hesitantly, while_spinning };

struct Command {
    Verb verb = Verb::walk;
    SizeAdj size_adj = SizeAdj::none;
    std::optional<Color> color;
    Shape shape = Shape::circle;
    Adverb adverb = Adverb::none;
    bool operator==(const Command&) const = default;
};

// Position of the unique object the command refers to.  Candidates are the
// objects matching the mentioned shape (and color, when given); "small"/"big"
// select the strict size minimum/maximum among candidates.  Throws
// AmbiguousReferentError when no unique referent exists (no candidate, or a
// size tie on the relevant extreme, or several candidates without a size
// adjective).
Position resolve(const Command& cmd, const WorldState& w);

// Shortest action sequence that moves the agent from its current pose onto
// `target`.  Cells holding objects other than the target are obstacles.
// Prefers the L-shaped column-first straight route when it is free; otherwise
// falls back to breadth-first search (neighbor order up, left, down, right).
// Turn prefixes are minimal, with L_turn chosen on the 180-degree tie.
// Throws UnreachableError when no route exists.
std::vector<ActionToken> plan_route(const WorldState& w, Position target);

// Manipulation suffix once the agent stands on the target.  walk contributes
// nothing; push/pull displace the object in (or against) the agent's facing
// direction until the next cell is blocked or out of bounds, emitting two
// tokens per cell for heavy objects and one otherwise.  `at_target` must be
// the state after the route has been executed.
std::vector<ActionToken> apply_verb(const WorldState& at_target, Verb verb);

// Decorates a plan with an adverb.  Movement units are single walks and
// whole per-cell shove groups (`tokens_per_move` consecutive push/pull
// tokens, 2 for heavy targets); inserting around whole units keeps heavy
// two-token shoves intact.  cautiously prefixes L_turn R_turn, hesitantly
// appends stay, while_spinning prefixes four L_turns.
std::vector<ActionToken> apply_adverb(std::span<const ActionToken> plan, Adverb adverb,
                                      int tokens_per_move = 1);

// Full expansion: resolve, route, manipulate, decorate.
std::vector<ActionToken> oracle(const Command& cmd, const WorldState& w);

// --- names ---

std::string to_string(Verb v);
std::string to_string(SizeAdj s);
std::string to_string(Adverb a);
Verb verb_from_string(const std::string& s);        // FormatError
SizeAdj size_adj_from_string(const std::string& s); // FormatError
Adverb adverb_from_string(const std::string& s);    // FormatError

}  // namespace ctxnav
