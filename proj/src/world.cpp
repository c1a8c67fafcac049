#include "ctxnav/world.hpp"

#include <algorithm>

namespace ctxnav {

int WorldState::object_index_at(Position p) const {
    for (size_t i = 0; i < objects.size(); ++i)
        if (objects[i].pos == p) return static_cast<int>(i);
    return -1;
}

const ObjectSpec* WorldState::object_at(Position p) const {
    int i = object_index_at(p);
    return i < 0 ? nullptr : &objects[i];
}

void WorldState::validate() const {
    if (d <= 0) throw CtxError("world: non-positive grid size");
    if (!in_bounds(agent.pos)) throw CtxError("world: agent out of bounds");
    for (size_t i = 0; i < objects.size(); ++i) {
        const auto& o = objects[i];
        if (!in_bounds(o.pos)) throw CtxError("world: object out of bounds");
        if (o.size < 1 || o.size > kNumSizes) throw CtxError("world: object size outside 1..4");
        for (size_t j = i + 1; j < objects.size(); ++j)
            if (objects[j].pos == o.pos) throw CtxError("world: two objects share a cell");
    }
    if (agent.pending_shove != 0) {
        const ObjectSpec* under = object_at(agent.pos);
        if (under == nullptr || !is_heavy(*under))
            throw CtxError("world: pending_shove set but agent is not on a heavy object");
    }
}

Position delta(Orientation o) {
    switch (o) {
        case Orientation::up: return {-1, 0};
        case Orientation::down: return {1, 0};
        case Orientation::left: return {0, -1};
        case Orientation::right: return {0, 1};
    }
    return {0, 0};
}

Orientation turn_left(Orientation o) {
    switch (o) {
        case Orientation::up: return Orientation::left;
        case Orientation::left: return Orientation::down;
        case Orientation::down: return Orientation::right;
        case Orientation::right: return Orientation::up;
    }
    return o;
}

Orientation turn_right(Orientation o) {
    switch (o) {
        case Orientation::up: return Orientation::right;
        case Orientation::right: return Orientation::down;
        case Orientation::down: return Orientation::left;
        case Orientation::left: return Orientation::up;
    }
    return o;
}

std::pair<WorldState, StepStatus> step(const WorldState& w, ActionToken a) {
    WorldState n = w;
    switch (a) {
        case ActionToken::stay:
            n.agent.pending_shove = 0;
            return {n, StepStatus::Ok};
        case ActionToken::L_turn:
            n.agent.orientation = turn_left(n.agent.orientation);
            n.agent.pending_shove = 0;
            return {n, StepStatus::Ok};
        case ActionToken::R_turn:
            n.agent.orientation = turn_right(n.agent.orientation);
            n.agent.pending_shove = 0;
            return {n, StepStatus::Ok};
        case ActionToken::walk: {
            n.agent.pending_shove = 0;
            Position d0 = delta(n.agent.orientation);
            Position dest{n.agent.pos.row + d0.row, n.agent.pos.col + d0.col};
            // Walking is blocked by the board edge only; the agent may stand
            // on an object's cell (it has to, in order to manipulate it).
            if (!n.in_bounds(dest)) return {n, StepStatus::Blocked};
            n.agent.pos = dest;
            return {n, StepStatus::Ok};
        }
        case ActionToken::push:
        case ActionToken::pull: {
            int oi = n.object_index_at(n.agent.pos);
            if (oi < 0) return {n, StepStatus::NoObject};
            ObjectSpec& obj = n.objects[oi];
            Position d0 = delta(n.agent.orientation);
            if (a == ActionToken::pull) d0 = {-d0.row, -d0.col};
            if (is_heavy(obj) && n.agent.pending_shove == 0) {
                // First half of a heavy shove: builds up, nothing moves yet.
                n.agent.pending_shove = 1;
                return {n, StepStatus::Ok};
            }
            n.agent.pending_shove = 0;
            Position dest{obj.pos.row + d0.row, obj.pos.col + d0.col};
            if (!n.in_bounds(dest) || n.object_index_at(dest) >= 0)
                return {n, StepStatus::Blocked};
            obj.pos = dest;
            n.agent.pos = dest;  // the agent rides along with the object
            return {n, StepStatus::Ok};
        }
    }
    return {n, StepStatus::Ok};
}

std::pair<WorldState, std::vector<StepStatus>> execute(const WorldState& w,
                                                       std::span<const ActionToken> actions) {
    WorldState cur = w;
    std::vector<StepStatus> statuses;
    statuses.reserve(actions.size());
    for (ActionToken a : actions) {
        auto [next, st] = step(cur, a);
        cur = std::move(next);
        statuses.push_back(st);
    }
    return {cur, statuses};
}

namespace {
std::vector<ObjectSpec> sorted_objects(const WorldState& w) {
    std::vector<ObjectSpec> v = w.objects;
    std::sort(v.begin(), v.end(), [](const ObjectSpec& a, const ObjectSpec& b) {
        if (!(a.pos == b.pos)) return a.pos < b.pos;
        if (a.color != b.color) return a.color < b.color;
        if (a.shape != b.shape) return a.shape < b.shape;
        return a.size < b.size;
    });
    return v;
}
}  // namespace

bool goal_check(const WorldState& final_state, const WorldState& initial,
                std::span<const ActionToken> target_actions) {
    WorldState ref = execute(initial, target_actions).first;
    if (final_state.agent.pos != ref.agent.pos) return false;
    return sorted_objects(final_state) == sorted_objects(ref);
}

Tensor encode_world(const WorldState& w) {
    Tensor t = Tensor::zeros({w.d, w.d, kWorldChannels});
    auto buf = t.data();
    auto cell = [&](Position p) {
        return (static_cast<size_t>(p.row) * w.d + p.col) * kWorldChannels;
    };
    for (const auto& o : w.objects) {
        size_t base = cell(o.pos);
        buf[base + kColorBase + static_cast<int>(o.color)] = 1.0;
        buf[base + kShapeBase + static_cast<int>(o.shape)] = 1.0;
        buf[base + kSizeBase + (o.size - 1)] = 1.0;
    }
    size_t abase = cell(w.agent.pos);
    buf[abase + kOrientationBase + static_cast<int>(w.agent.orientation)] = 1.0;
    buf[abase + kAgentBase] = 1.0;
    return t;
}

// --- names ---

std::string to_string(Color c) {
    switch (c) {
        case Color::red: return "red";
        case Color::green: return "green";
        case Color::blue: return "blue";
        case Color::yellow: return "yellow";
    }
    return "?";
}

std::string to_string(Shape s) {
    switch (s) {
        case Shape::circle: return "circle";
        case Shape::square: return "square";
        case Shape::cylinder: return "cylinder";
    }
    return "?";
}

std::string to_string(Orientation o) {
    switch (o) {
        case Orientation::left: return "left";
        case Orientation::right: return "right";
        case Orientation::up: return "up";
        case Orientation::down: return "down";
    }
    return "?";
}

std::string to_string(ActionToken a) {
    switch (a) {
        case ActionToken::walk: return "walk";
        case ActionToken::push: return "push";
        case ActionToken::pull: return "pull";
        case ActionToken::stay: return "stay";
        case ActionToken::L_turn: return "L_turn";
        case ActionToken::R_turn: return "R_turn";
    }
    return "?";
}

Color color_from_string(const std::string& s) {
    if (s == "red") return Color::red;
    if (s == "green") return Color::green;
    if (s == "blue") return Color::blue;
    if (s == "yellow") return Color::yellow;
    throw FormatError("unknown color '" + s + "'");
}

Shape shape_from_string(const std::string& s) {
    if (s == "circle") return Shape::circle;
    if (s == "square") return Shape::square;
    if (s == "cylinder") return Shape::cylinder;
    throw FormatError("unknown shape '" + s + "'");
}

Orientation orientation_from_string(const std::string& s) {
    if (s == "left") return Orientation::left;
    if (s == "right") return Orientation::right;
    if (s == "up") return Orientation::up;
    if (s == "down") return Orientation::down;
    throw FormatError("unknown orientation '" + s + "'");
}

ActionToken action_from_string(const std::string& s) {
    if (s == "walk") return ActionToken::walk;
    if (s == "push") return ActionToken::push;
    if (s == "pull") return ActionToken::pull;
    if (s == "stay") return ActionToken::stay;
    if (s == "L_turn") return ActionToken::L_turn;
    if (s == "R_turn") return ActionToken::R_turn;
    throw FormatError("unknown action '" + s + "'");
}

}  // namespace ctxnav
