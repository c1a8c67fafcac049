#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxnav/errors.hpp"
#include "ctxnav/tensor.hpp"

namespace ctxnav {

// ---------------------------------------------------------------------------
// Grid world: a d x d board holding at most one object per cell plus an agent
// that may share a cell with an object.  All dynamics are deterministic.
// ---------------------------------------------------------------------------

enum class Color : uint8_t { red, green, blue, yellow };
enum class Shape : uint8_t { circle, square, cylinder };
enum class Orientation : uint8_t { left, right, up, down };
enum class ActionToken : uint8_t { walk, push, pull, stay, L_turn, R_turn };
enum class StepStatus : uint8_t { Ok, Blocked, NoObject };

constexpr int kNumColors = 4;
constexpr int kNumShapes = 3;
constexpr int kNumSizes = 4;  // sizes are 1..4
constexpr int kNumOrientations = 4;
constexpr int kNumActions = 6;

// Cell feature layout: one-hot color | one-hot shape | one-hot size |
// one-hot agent orientation | agent presence (2 channels, second reserved).
constexpr int kColorBase = 0;
constexpr int kShapeBase = kColorBase + kNumColors;
constexpr int kSizeBase = kShapeBase + kNumShapes;
constexpr int kOrientationBase = kSizeBase + kNumSizes;
constexpr int kAgentBase = kOrientationBase + kNumOrientations;
constexpr int kWorldChannels = kAgentBase + 2;  // 17

// Objects of size >= kHeavySize need two consecutive push (or pull) actions
// per cell of displacement.
constexpr int kHeavySize = 3;

struct Position {
    int row = 0;
    int col = 0;
    bool operator==(const Position&) const = default;
    bool operator<(const Position& o) const {
        return row != o.row ? row < o.row : col < o.col;
    }
};

struct ObjectSpec {
    Color color = Color::red;
    Shape shape = Shape::circle;
    int size = 1;  // 1..4
    Position pos;
    bool operator==(const ObjectSpec&) const = default;
};

inline bool is_heavy(const ObjectSpec& o) { return o.size >= kHeavySize; }

struct AgentState {
    Position pos;
    Orientation orientation = Orientation::up;
    // 1 while a heavy object under the agent has absorbed the first half of a
    // two-action shove; any action other than push/pull resets it to 0.
    int pending_shove = 0;
    bool operator==(const AgentState&) const = default;
};

struct WorldState {
    int d = 6;
    std::vector<ObjectSpec> objects;
    AgentState agent;

    bool in_bounds(Position p) const {
        return p.row >= 0 && p.row < d && p.col >= 0 && p.col < d;
    }
    // Index into `objects` of the object at p, or -1.
    int object_index_at(Position p) const;
    const ObjectSpec* object_at(Position p) const;

    // Throws CtxError if any structural invariant is violated (out-of-bounds
    // positions, two objects on one cell, size outside 1..4, pending_shove
    // set while the agent is not on a heavy object).
    void validate() const;
};

// --- direction helpers ---

// Row/col displacement of one step in the facing direction (up = row-1).
Position delta(Orientation o);
Orientation turn_left(Orientation o);   // up -> left -> down -> right -> up
Orientation turn_right(Orientation o);

// --- dynamics ---

// Applies one action.  Never throws; illegal moves return Blocked (bounds or
// occupied destination for shoves) or NoObject (push/pull with no object
// under the agent) and leave positions unchanged.
std::pair<WorldState, StepStatus> step(const WorldState& w, ActionToken a);

// Applies a sequence, collecting per-action statuses.
std::pair<WorldState, std::vector<StepStatus>> execute(const WorldState& w,
                                                       std::span<const ActionToken> actions);

// Success predicate: `final` matches the state produced by running
// `target_actions` from `initial` - agent position and the full object
// configuration must agree; agent orientation and pending_shove are ignored.
bool goal_check(const WorldState& final_state, const WorldState& initial,
                std::span<const ActionToken> target_actions);

// --- observation encoding ---

// One-hot cell features as a [d, d, kWorldChannels] tensor (see the channel
// layout constants above).  The agent contributes its orientation one-hot and
// presence bit at its cell; an object contributes color/shape/size one-hots.
Tensor encode_world(const WorldState& w);

// --- names (serialization / CLI) ---

std::string to_string(Color c);
std::string to_string(Shape s);
std::string to_string(Orientation o);
std::string to_string(ActionToken a);
Color color_from_string(const std::string& s);          // FormatError
Shape shape_from_string(const std::string& s);          // FormatError
Orientation orientation_from_string(const std::string& s);  // FormatError
ActionToken action_from_string(const std::string& s);   // FormatError

}  // namespace ctxnav
