#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ctxnav/oracle.hpp"
#include "ctxnav/rng.hpp"
#include "ctxnav/world.hpp"

namespace ctxnav {

// ---------------------------------------------------------------------------
// Episode generation, composition-based hold-out splits, and JSONL
// serialization.  Everything here is a pure function of the config seed.
// ---------------------------------------------------------------------------

enum class SplitTag : uint8_t {
    A_random,
    B_novel_direction,
    C_relativity,
    D_red_squares,
    E_yellow_squares,
    F_adverb_verb,
    G_class_inference,
};
constexpr int kNumSplits = 7;

std::string to_string(SplitTag t);
SplitTag split_from_string(const std::string& s);  // FormatError

struct Episode {
    std::string id;
    std::vector<std::string> instruction;
    WorldState world;
    Command command;
    Position target_pos;
    std::vector<ActionToken> target_actions;
    std::vector<SplitTag> splits;  // hold-out predicates the episode satisfies
};

struct GenConfig {
    uint64_t seed = 17;
    int n_train = 20000;
    int n_val = 1000;
    int n_test_per_split = 500;
    int d = 6;
    int min_objects = 2;
    int max_objects = 8;
    std::vector<Verb> verbs{Verb::walk, Verb::push, Verb::pull};
    std::vector<Adverb> adverbs{Adverb::none, Adverb::cautiously, Adverb::hesitantly,
                                Adverb::while_spinning};

    void validate() const;  // ConfigError
    std::string to_json() const;
    static GenConfig from_json(const std::string& text);  // FormatError
};

struct DatasetManifest {
    int format_version = 1;
    GenConfig config;
    std::map<std::string, int> counts;        // split name -> episode count
    std::map<std::string, std::string> files; // split name -> relative path
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<Episode> train;
    std::vector<Episode> val;
    std::array<std::vector<Episode>, kNumSplits> tests;  // indexed by SplitTag

    const std::vector<Episode>& test(SplitTag t) const {
        return tests[static_cast<int>(t)];
    }
};

// --- sampling ---

// Uniform draw of a command over the enabled verbs/adverbs; color is
// mentioned with probability 1/2, a size word appears with probability 1/2.
Command sample_command(Rng& rng, const GenConfig& cfg);

// A world in which `cmd` resolves uniquely: target object matching the
// mentioned attributes, a same-description distractor of strictly
// larger/smaller size whenever a size word is present, random other objects
// constrained to keep the referent unique, agent on its own free cell.
// Throws GenerationExhausted if the retry budget runs out.
WorldState sample_world(Rng& rng, const Command& cmd, const GenConfig& cfg);

// Surface form: "VERB (to)? the (SIZE)? (COLOR)? SHAPE (ADVERB)?"; "to"
// appears only after walk, and while_spinning renders as two tokens.
std::vector<std::string> phrase(const Command& cmd);

// Hold-out predicates (an episode may satisfy several):
//   B: target strictly south-west of the agent (greater row, smaller col)
//   C: target is a size-2 circle referred to as "small"
//   D: target is a red square
//   E: target is a yellow square and the command mentions a color
//   F: verb pull combined with while_spinning
//   G: verb push on a size-3 square
std::vector<SplitTag> assign_split(const Episode& e);

// --- generation / IO ---

// Writes train.jsonl, val.jsonl, test_A.jsonl .. test_G.jsonl and
// manifest.json into out_dir.  Byte-identical output for identical config.
DatasetManifest generate(const GenConfig& cfg, const std::filesystem::path& out_dir);

Dataset load(const std::filesystem::path& dir);                 // FormatError
std::vector<Episode> load_jsonl(const std::filesystem::path& file);  // FormatError

std::string episode_to_json_line(const Episode& e);
Episode episode_from_json_line(const std::string& line);  // FormatError

inline bool goal_check(const WorldState& final_state, const Episode& e) {
    return goal_check(final_state, e.world, e.target_actions);
}

}  // namespace ctxnav
