#include "ctxnav/oracle.hpp"

#include <array>
#include <deque>
#include <map>

namespace ctxnav {

Position resolve(const Command& cmd, const WorldState& w) {
    std::vector<const ObjectSpec*> candidates;
    for (const auto& o : w.objects) {
        if (o.shape != cmd.shape) continue;
        if (cmd.color && o.color != *cmd.color) continue;
        candidates.push_back(&o);
    }
    auto describe = [&] {
        std::string s = to_string(cmd.size_adj) == "none" ? "" : to_string(cmd.size_adj) + " ";
        if (cmd.color) s += to_string(*cmd.color) + " ";
        return s + to_string(cmd.shape);
    };
    if (candidates.empty())
        throw AmbiguousReferentError("no object matches '" + describe() + "'");

    if (cmd.size_adj == SizeAdj::none) {
        if (candidates.size() > 1)
            throw AmbiguousReferentError("several objects match '" + describe() + "'");
        return candidates[0]->pos;
    }
    // "small"/"big" pick the strict size extreme among the candidates.
    bool want_min = cmd.size_adj == SizeAdj::small;
    const ObjectSpec* best = candidates[0];
    int ties = 1;
    for (size_t i = 1; i < candidates.size(); ++i) {
        int s = candidates[i]->size;
        if (s == best->size) {
            ++ties;
        } else if (want_min ? s < best->size : s > best->size) {
            best = candidates[i];
            ties = 1;
        }
    }
    if (ties > 1)
        throw AmbiguousReferentError("size tie between objects matching '" + describe() + "'");
    return best->pos;
}

namespace {

// L-cycle index: number of left turns from "up".
int lturn_index(Orientation o) {
    switch (o) {
        case Orientation::up: return 0;
        case Orientation::left: return 1;
        case Orientation::down: return 2;
        case Orientation::right: return 3;
    }
    return 0;
}

Orientation direction_of(Position from, Position to) {
    if (to.row == from.row - 1) return Orientation::up;
    if (to.row == from.row + 1) return Orientation::down;
    if (to.col == from.col - 1) return Orientation::left;
    return Orientation::right;
}

// Turn prefix rotating `from` to face `to`; minimal, L_turn on the 180 tie.
void emit_turns(std::vector<ActionToken>& out, Orientation from, Orientation to) {
    int k = (lturn_index(to) - lturn_index(from) + 4) % 4;
    if (k == 1) out.push_back(ActionToken::L_turn);
    else if (k == 2) { out.push_back(ActionToken::L_turn); out.push_back(ActionToken::L_turn); }
    else if (k == 3) out.push_back(ActionToken::R_turn);
}

std::vector<ActionToken> cells_to_actions(const WorldState& w,
                                          const std::vector<Position>& cells) {
    std::vector<ActionToken> out;
    Orientation facing = w.agent.orientation;
    Position cur = w.agent.pos;
    for (Position next : cells) {
        Orientation dir = direction_of(cur, next);
        emit_turns(out, facing, dir);
        out.push_back(ActionToken::walk);
        facing = dir;
        cur = next;
    }
    return out;
}

}  // namespace

std::vector<ActionToken> plan_route(const WorldState& w, Position target) {
    Position start = w.agent.pos;
    if (start == target) return {};
    if (!w.in_bounds(target)) throw UnreachableError("target cell is off the board");

    auto blocked = [&](Position p) { return !(p == target) && w.object_at(p) != nullptr; };

    // Column-first straight route (at most one corner, hence minimal turning).
    std::vector<Position> straight;
    {
        Position p = start;
        int cstep = target.col > p.col ? 1 : -1;
        while (p.col != target.col) { p.col += cstep; straight.push_back(p); }
        int rstep = target.row > p.row ? 1 : -1;
        while (p.row != target.row) { p.row += rstep; straight.push_back(p); }
    }
    bool clear = true;
    for (Position p : straight)
        if (blocked(p)) { clear = false; break; }
    if (clear) return cells_to_actions(w, straight);

    // Detour: breadth-first search over free cells.
    const std::array<Position, 4> kNeighborOrder{{{-1, 0}, {0, -1}, {1, 0}, {0, 1}}};
    std::map<Position, Position> parent;
    std::deque<Position> queue{start};
    parent[start] = start;
    bool found = false;
    while (!queue.empty() && !found) {
        Position p = queue.front();
        queue.pop_front();
        for (Position d0 : kNeighborOrder) {
            Position q{p.row + d0.row, p.col + d0.col};
            if (!w.in_bounds(q) || blocked(q) || parent.count(q)) continue;
            parent[q] = p;
            if (q == target) { found = true; break; }
            queue.push_back(q);
        }
    }
    if (!found) throw UnreachableError("no free path from agent to target");
    std::vector<Position> cells;
    for (Position p = target; !(p == start); p = parent[p]) cells.push_back(p);
    std::reverse(cells.begin(), cells.end());
    return cells_to_actions(w, cells);
}

std::vector<ActionToken> apply_verb(const WorldState& at_target, Verb verb) {
    if (verb == Verb::walk) return {};
    int oi = at_target.object_index_at(at_target.agent.pos);
    if (oi < 0) throw CtxError("apply_verb: agent is not standing on an object");
    ActionToken tok = verb == Verb::push ? ActionToken::push : ActionToken::pull;
    std::vector<ActionToken> unit(is_heavy(at_target.objects[oi]) ? 2 : 1, tok);

    std::vector<ActionToken> out;
    WorldState sim = at_target;
    for (;;) {
        Position before = sim.objects[oi].pos;
        auto [next, statuses] = execute(sim, unit);
        if (next.objects[oi].pos == before) break;  // blocked: stop shoving
        out.insert(out.end(), unit.begin(), unit.end());
        sim = std::move(next);
    }
    return out;
}

std::vector<ActionToken> apply_adverb(std::span<const ActionToken> plan, Adverb adverb,
                                      int tokens_per_move) {
    if (adverb == Adverb::none) return {plan.begin(), plan.end()};
    std::vector<ActionToken> out;
    size_t i = 0;
    while (i < plan.size()) {
        ActionToken t = plan[i];
        size_t unit_len = 1;
        bool is_move = t == ActionToken::walk;
        if (t == ActionToken::push || t == ActionToken::pull) {
            is_move = true;
            // Keep a whole per-cell shove group together so a heavy object's
            // two-token shove is never split by inserted actions.
            while (unit_len < static_cast<size_t>(tokens_per_move) &&
                   i + unit_len < plan.size() && plan[i + unit_len] == t)
                ++unit_len;
        }
        if (is_move) {
            switch (adverb) {
                case Adverb::cautiously:
                    out.push_back(ActionToken::L_turn);
                    out.push_back(ActionToken::R_turn);
                    break;
                case Adverb::while_spinning:
                    out.insert(out.end(), 4, ActionToken::L_turn);
                    break;
                default: break;
            }
        }
        out.insert(out.end(), plan.begin() + i, plan.begin() + i + unit_len);
        if (is_move && adverb == Adverb::hesitantly) out.push_back(ActionToken::stay);
        i += unit_len;
    }
    return out;
}

std::vector<ActionToken> oracle(const Command& cmd, const WorldState& w) {
    Position target = resolve(cmd, w);
    std::vector<ActionToken> plan = plan_route(w, target);
    WorldState at_target = execute(w, plan).first;
    std::vector<ActionToken> verb_part = apply_verb(at_target, cmd.verb);
    plan.insert(plan.end(), verb_part.begin(), verb_part.end());
    const ObjectSpec* obj = w.object_at(target);
    int tokens_per_move = (obj && is_heavy(*obj)) ? 2 : 1;
    return apply_adverb(plan, cmd.adverb, tokens_per_move);
}

// --- names ---

std::string to_string(Verb v) {
    switch (v) {
        case Verb::walk: return "walk";
        case Verb::push: return "push";
        case Verb::pull: return "pull";
    }
    return "?";
}

std::string to_string(SizeAdj s) {
    switch (s) {
        case SizeAdj::none: return "none";
        case SizeAdj::small: return "small";
        case SizeAdj::big: return "big";
    }
    return "?";
}

std::string to_string(Adverb a) {
    switch (a) {
        case Adverb::none: return "none";
        case Adverb::cautiously: return "cautiously";
        case Adverb::hesitantly: return "hesitantly";
        case Adverb::while_spinning: return "while_spinning";
    }
    return "?";
}

Verb verb_from_string(const std::string& s) {
    if (s == "walk") return Verb::walk;
    if (s == "push") return Verb::push;
    if (s == "pull") return Verb::pull;
    throw FormatError("unknown verb '" + s + "'");
}

SizeAdj size_adj_from_string(const std::string& s) {
    if (s == "none") return SizeAdj::none;
    if (s == "small") return SizeAdj::small;
    if (s == "big") return SizeAdj::big;
    throw FormatError("unknown size adjective '" + s + "'");
}

Adverb adverb_from_string(const std::string& s) {
    if (s == "none") return Adverb::none;
    if (s == "cautiously") return Adverb::cautiously;
    if (s == "hesitantly") return Adverb::hesitantly;
    if (s == "while_spinning") return Adverb::while_spinning;
    throw FormatError("unknown adverb '" + s + "'");
}

}  // namespace ctxnav
