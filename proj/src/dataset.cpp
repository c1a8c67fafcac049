#include "ctxnav/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ctxnav {

using json = nlohmann::ordered_json;

std::string to_string(SplitTag t) {
    switch (t) {
        case SplitTag::A_random: return "A_random";
        case SplitTag::B_novel_direction: return "B_novel_direction";
        case SplitTag::C_relativity: return "C_relativity";
        case SplitTag::D_red_squares: return "D_red_squares";
        case SplitTag::E_yellow_squares: return "E_yellow_squares";
        case SplitTag::F_adverb_verb: return "F_adverb_verb";
        case SplitTag::G_class_inference: return "G_class_inference";
    }
    return "?";
}

SplitTag split_from_string(const std::string& s) {
    for (int i = 0; i < kNumSplits; ++i) {
        SplitTag t = static_cast<SplitTag>(i);
        if (to_string(t) == s) return t;
    }
    throw FormatError("unknown split tag '" + s + "'");
}

void GenConfig::validate() const {
    if (n_train <= 0 || n_val <= 0 || n_test_per_split <= 0)
        throw ConfigError("generation counts must be positive");
    if (d < 4) throw ConfigError("grid dimension must be at least 4");
    if (min_objects < 2)
        throw ConfigError("need at least 2 objects so size words can be informative");
    if (max_objects < min_objects) throw ConfigError("max_objects < min_objects");
    if (max_objects > d * d - 1)
        throw ConfigError("too many objects for the grid (agent needs a free cell)");
    if (verbs.empty()) throw ConfigError("no verbs enabled");
    if (adverbs.empty()) throw ConfigError("no adverbs enabled");
}

Command sample_command(Rng& rng, const GenConfig& cfg) {
    Command cmd;
    cmd.verb = cfg.verbs[rng.uniform_int(0, static_cast<int>(cfg.verbs.size()) - 1)];
    cmd.adverb = cfg.adverbs[rng.uniform_int(0, static_cast<int>(cfg.adverbs.size()) - 1)];
    cmd.shape = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
    if (rng.uniform_int(0, 1) == 1)
        cmd.color = static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
    if (rng.uniform_int(0, 1) == 1)
        cmd.size_adj = rng.uniform_int(0, 1) == 0 ? SizeAdj::small : SizeAdj::big;
    return cmd;
}

namespace {

// True when `o` falls into the referent candidate set of `cmd`.
bool matches_description(const ObjectSpec& o, const Command& cmd) {
    return o.shape == cmd.shape && (!cmd.color || o.color == *cmd.color);
}

}  // namespace

WorldState sample_world(Rng& rng, const Command& cmd, const GenConfig& cfg) {
    constexpr int kWorldRetries = 1000;
    for (int attempt = 0; attempt < kWorldRetries; ++attempt) {
        int n_objects = rng.uniform_int(cfg.min_objects, cfg.max_objects);

        std::vector<int> cells(static_cast<size_t>(cfg.d) * cfg.d);
        std::iota(cells.begin(), cells.end(), 0);
        rng.shuffle(cells);
        auto cell_pos = [&](int i) {
            return Position{cells[i] / cfg.d, cells[i] % cfg.d};
        };

        WorldState w;
        w.d = cfg.d;

        // Target first.
        ObjectSpec target;
        target.shape = cmd.shape;
        target.color = cmd.color ? *cmd.color : static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
        switch (cmd.size_adj) {
            case SizeAdj::none: target.size = rng.uniform_int(1, kNumSizes); break;
            case SizeAdj::small: target.size = rng.uniform_int(1, kNumSizes - 1); break;
            case SizeAdj::big: target.size = rng.uniform_int(2, kNumSizes); break;
        }
        target.pos = cell_pos(0);
        w.objects.push_back(target);

        // With a size word, force a same-description distractor on the other
        // side of the target's size so the word is informative.
        int next_cell = 1;
        if (cmd.size_adj != SizeAdj::none) {
            ObjectSpec distractor;
            distractor.shape = cmd.shape;
            distractor.color =
                cmd.color ? *cmd.color : static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
            distractor.size = cmd.size_adj == SizeAdj::small
                                  ? rng.uniform_int(target.size + 1, kNumSizes)
                                  : rng.uniform_int(1, target.size - 1);
            distractor.pos = cell_pos(next_cell++);
            w.objects.push_back(distractor);
        }

        // Fill the rest with random objects that keep the referent unique.
        bool ok = true;
        while (static_cast<int>(w.objects.size()) < n_objects) {
            ObjectSpec o;
            o.pos = cell_pos(next_cell);
            bool placed = false;
            for (int tries = 0; tries < 100; ++tries) {
                o.color = static_cast<Color>(rng.uniform_int(0, kNumColors - 1));
                o.shape = static_cast<Shape>(rng.uniform_int(0, kNumShapes - 1));
                o.size = rng.uniform_int(1, kNumSizes);
                if (matches_description(o, cmd)) {
                    if (cmd.size_adj == SizeAdj::none) continue;  // would break uniqueness
                    if (cmd.size_adj == SizeAdj::small && o.size <= target.size) continue;
                    if (cmd.size_adj == SizeAdj::big && o.size >= target.size) continue;
                }
                placed = true;
                break;
            }
            if (!placed) { ok = false; break; }
            ++next_cell;
            w.objects.push_back(o);
        }
        if (!ok) continue;

        w.agent.pos = cell_pos(next_cell);
        w.agent.orientation = static_cast<Orientation>(rng.uniform_int(0, kNumOrientations - 1));
        w.validate();
        return w;
    }
    throw GenerationExhaustedError("sample_world retry budget exceeded");
}

std::vector<std::string> phrase(const Command& cmd) {
    std::vector<std::string> out{to_string(cmd.verb)};
    if (cmd.verb == Verb::walk) out.push_back("to");
    out.push_back("the");
    if (cmd.size_adj != SizeAdj::none) out.push_back(to_string(cmd.size_adj));
    if (cmd.color) out.push_back(to_string(*cmd.color));
    out.push_back(to_string(cmd.shape));
    switch (cmd.adverb) {
        case Adverb::none: break;
        case Adverb::cautiously: out.push_back("cautiously"); break;
        case Adverb::hesitantly: out.push_back("hesitantly"); break;
        case Adverb::while_spinning:
            out.push_back("while");
            out.push_back("spinning");
            break;
    }
    return out;
}

std::vector<SplitTag> assign_split(const Episode& e) {
    const ObjectSpec* target = e.world.object_at(e.target_pos);
    if (target == nullptr) throw CtxError("assign_split: no object at target position");
    const Position agent = e.world.agent.pos;
    std::vector<SplitTag> out;
    if (e.target_pos.row > agent.row && e.target_pos.col < agent.col)
        out.push_back(SplitTag::B_novel_direction);
    if (target->shape == Shape::circle && target->size == 2 &&
        e.command.size_adj == SizeAdj::small)
        out.push_back(SplitTag::C_relativity);
    if (target->color == Color::red && target->shape == Shape::square)
        out.push_back(SplitTag::D_red_squares);
    if (target->color == Color::yellow && target->shape == Shape::square &&
        e.command.color.has_value())
        out.push_back(SplitTag::E_yellow_squares);
    if (e.command.adverb == Adverb::while_spinning && e.command.verb == Verb::pull)
        out.push_back(SplitTag::F_adverb_verb);
    if (e.command.verb == Verb::push && target->shape == Shape::square && target->size == 3)
        out.push_back(SplitTag::G_class_inference);
    return out;
}

// --- JSON serialization ---

namespace {

json config_to_json(const GenConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["n_train"] = c.n_train;
    j["n_val"] = c.n_val;
    j["n_test_per_split"] = c.n_test_per_split;
    j["d"] = c.d;
    j["min_objects"] = c.min_objects;
    j["max_objects"] = c.max_objects;
    json verbs = json::array();
    for (Verb v : c.verbs) verbs.push_back(to_string(v));
    j["verbs"] = verbs;
    json adverbs = json::array();
    for (Adverb a : c.adverbs) adverbs.push_back(to_string(a));
    j["adverbs"] = adverbs;
    return j;
}

// Absent keys keep their defaults so hand-written config files can be sparse;
// manifests always carry every key.
GenConfig config_from_json(const json& j) {
    GenConfig c;
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("n_train")) c.n_train = j.at("n_train").get<int>();
    if (j.contains("n_val")) c.n_val = j.at("n_val").get<int>();
    if (j.contains("n_test_per_split")) c.n_test_per_split = j.at("n_test_per_split").get<int>();
    if (j.contains("d")) c.d = j.at("d").get<int>();
    if (j.contains("min_objects")) c.min_objects = j.at("min_objects").get<int>();
    if (j.contains("max_objects")) c.max_objects = j.at("max_objects").get<int>();
    if (j.contains("verbs")) {
        c.verbs.clear();
        for (const auto& v : j.at("verbs"))
            c.verbs.push_back(verb_from_string(v.get<std::string>()));
    }
    if (j.contains("adverbs")) {
        c.adverbs.clear();
        for (const auto& a : j.at("adverbs"))
            c.adverbs.push_back(adverb_from_string(a.get<std::string>()));
    }
    return c;
}

json world_to_json(const WorldState& w) {
    json j;
    j["d"] = w.d;
    j["agent"] = {{"row", w.agent.pos.row},
                  {"col", w.agent.pos.col},
                  {"orientation", to_string(w.agent.orientation)}};
    json objs = json::array();
    for (const auto& o : w.objects)
        objs.push_back({{"row", o.pos.row},
                        {"col", o.pos.col},
                        {"color", to_string(o.color)},
                        {"shape", to_string(o.shape)},
                        {"size", o.size}});
    j["objects"] = objs;
    return j;
}

WorldState world_from_json(const json& j) {
    WorldState w;
    w.d = j.at("d").get<int>();
    const auto& a = j.at("agent");
    w.agent.pos = {a.at("row").get<int>(), a.at("col").get<int>()};
    w.agent.orientation = orientation_from_string(a.at("orientation").get<std::string>());
    for (const auto& oj : j.at("objects")) {
        ObjectSpec o;
        o.pos = {oj.at("row").get<int>(), oj.at("col").get<int>()};
        o.color = color_from_string(oj.at("color").get<std::string>());
        o.shape = shape_from_string(oj.at("shape").get<std::string>());
        o.size = oj.at("size").get<int>();
        w.objects.push_back(o);
    }
    return w;
}

}  // namespace

std::string GenConfig::to_json() const { return config_to_json(*this).dump(2); }

GenConfig GenConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& ex) {
        throw FormatError(std::string("generation config: ") + ex.what());
    }
    GenConfig c;
    try {
        c = config_from_json(j);
    } catch (const json::exception& ex) {
        throw FormatError(std::string("generation config: ") + ex.what());
    }
    c.validate();
    return c;
}

std::string episode_to_json_line(const Episode& e) {
    json j;
    j["id"] = e.id;
    j["instruction"] = e.instruction;
    j["world"] = world_to_json(e.world);
    json cmd;
    cmd["verb"] = to_string(e.command.verb);
    cmd["size_adj"] = to_string(e.command.size_adj);
    cmd["color"] = e.command.color ? json(to_string(*e.command.color)) : json(nullptr);
    cmd["shape"] = to_string(e.command.shape);
    cmd["adverb"] = to_string(e.command.adverb);
    j["command"] = cmd;
    j["target_pos"] = {{"row", e.target_pos.row}, {"col", e.target_pos.col}};
    json acts = json::array();
    for (ActionToken a : e.target_actions) acts.push_back(to_string(a));
    j["target_actions"] = acts;
    json splits = json::array();
    for (SplitTag t : e.splits) splits.push_back(to_string(t));
    j["splits"] = splits;
    return j.dump();
}

Episode episode_from_json_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& ex) {
        throw FormatError(std::string("bad JSON: ") + ex.what());
    }
    try {
        Episode e;
        e.id = j.at("id").get<std::string>();
        e.instruction = j.at("instruction").get<std::vector<std::string>>();
        e.world = world_from_json(j.at("world"));
        const auto& cj = j.at("command");
        e.command.verb = verb_from_string(cj.at("verb").get<std::string>());
        e.command.size_adj = size_adj_from_string(cj.at("size_adj").get<std::string>());
        if (!cj.at("color").is_null())
            e.command.color = color_from_string(cj.at("color").get<std::string>());
        e.command.shape = shape_from_string(cj.at("shape").get<std::string>());
        e.command.adverb = adverb_from_string(cj.at("adverb").get<std::string>());
        e.target_pos = {j.at("target_pos").at("row").get<int>(),
                        j.at("target_pos").at("col").get<int>()};
        for (const auto& a : j.at("target_actions"))
            e.target_actions.push_back(action_from_string(a.get<std::string>()));
        for (const auto& s : j.at("splits"))
            e.splits.push_back(split_from_string(s.get<std::string>()));
        return e;
    } catch (const json::exception& ex) {
        throw FormatError(std::string("bad episode record: ") + ex.what());
    }
}

// --- generation ---

DatasetManifest generate(const GenConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);

    std::vector<Episode> train, val;
    std::array<std::vector<Episode>, kNumSplits> tests;
    auto& test_a = tests[static_cast<int>(SplitTag::A_random)];

    auto full = [&] {
        if (static_cast<int>(train.size()) < cfg.n_train) return false;
        if (static_cast<int>(val.size()) < cfg.n_val) return false;
        for (const auto& t : tests)
            if (static_cast<int>(t.size()) < cfg.n_test_per_split) return false;
        return true;
    };

    const uint64_t stream_base = splitmix64(cfg.seed);
    const long long total_needed =
        cfg.n_train + cfg.n_val + (static_cast<long long>(kNumSplits)) * cfg.n_test_per_split;
    const long long budget = 400 * total_needed;
    long long attempt = 0;
    for (; attempt < budget && !full(); ++attempt) {
        Rng rng(splitmix64(stream_base + static_cast<uint64_t>(attempt)));
        Command cmd = sample_command(rng, cfg);
        Episode e;
        try {
            e.world = sample_world(rng, cmd, cfg);
            e.command = cmd;
            e.instruction = phrase(cmd);
            e.target_pos = resolve(cmd, e.world);
            e.target_actions = oracle(cmd, e.world);
        } catch (const AmbiguousReferentError&) {
            continue;
        } catch (const UnreachableError&) {
            continue;
        }
        e.id = "ep-" + std::to_string(attempt);
        e.splits = assign_split(e);

        if (e.splits.empty()) {
            if (static_cast<int>(train.size()) < cfg.n_train) train.push_back(e);
            else if (static_cast<int>(val.size()) < cfg.n_val) val.push_back(e);
            else if (static_cast<int>(test_a.size()) < cfg.n_test_per_split) test_a.push_back(e);
        } else {
            for (SplitTag t : e.splits) {
                auto& pool = tests[static_cast<int>(t)];
                if (static_cast<int>(pool.size()) < cfg.n_test_per_split) pool.push_back(e);
            }
        }
    }
    if (!full())
        throw GenerationExhaustedError("quota not reached after " + std::to_string(attempt) +
                                       " attempts");

    DatasetManifest m;
    m.config = cfg;
    auto write_split = [&](const std::string& name, const std::vector<Episode>& eps) {
        std::string fname = name + ".jsonl";
        std::ofstream out(out_dir / fname, std::ios::binary);
        if (!out) throw CtxError("cannot open " + (out_dir / fname).string() + " for writing");
        for (const auto& e : eps) out << episode_to_json_line(e) << "\n";
        m.counts[name] = static_cast<int>(eps.size());
        m.files[name] = fname;
    };
    write_split("train", train);
    write_split("val", val);
    for (int i = 0; i < kNumSplits; ++i)
        write_split("test_" + std::string(1, static_cast<char>('A' + i)),
                    tests[static_cast<size_t>(i)]);

    json mj;
    mj["format_version"] = m.format_version;
    mj["config"] = config_to_json(cfg);
    mj["counts"] = m.counts;
    mj["files"] = m.files;
    std::ofstream mout(out_dir / "manifest.json", std::ios::binary);
    mout << mj.dump(2) << "\n";
    return m;
}

// --- loading ---

std::vector<Episode> load_jsonl(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw FormatError("cannot open " + file.string());
    std::vector<Episode> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(episode_from_json_line(line));
        } catch (const FormatError& ex) {
            throw FormatError(file.filename().string() + ":" + std::to_string(line_no) + ": " +
                              ex.what());
        }
    }
    return out;
}

Dataset load(const std::filesystem::path& dir) {
    std::filesystem::path mpath = dir / "manifest.json";
    std::ifstream min(mpath, std::ios::binary);
    if (!min) throw FormatError("cannot open " + mpath.string());
    json mj;
    try {
        mj = json::parse(min);
    } catch (const json::exception& ex) {
        throw FormatError("manifest.json: " + std::string(ex.what()));
    }
    Dataset ds;
    try {
        int version = mj.at("format_version").get<int>();
        if (version != ds.manifest.format_version)
            throw FormatError("manifest.json: unsupported format_version " +
                              std::to_string(version));
        ds.manifest.config = config_from_json(mj.at("config"));
        for (const auto& [k, v] : mj.at("counts").items()) ds.manifest.counts[k] = v.get<int>();
        for (const auto& [k, v] : mj.at("files").items())
            ds.manifest.files[k] = v.get<std::string>();
    } catch (const json::exception& ex) {
        throw FormatError("manifest.json: " + std::string(ex.what()));
    }
    auto file_of = [&](const std::string& name) {
        auto it = ds.manifest.files.find(name);
        if (it == ds.manifest.files.end())
            throw FormatError("manifest.json: missing entry for split '" + name + "'");
        return dir / it->second;
    };
    ds.train = load_jsonl(file_of("train"));
    ds.val = load_jsonl(file_of("val"));
    for (int i = 0; i < kNumSplits; ++i)
        ds.tests[static_cast<size_t>(i)] =
            load_jsonl(file_of("test_" + std::string(1, static_cast<char>('A' + i))));
    return ds;
}

}  // namespace ctxnav
