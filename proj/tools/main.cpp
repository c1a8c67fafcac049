// ctxnav command-line front end: dataset generation, training, evaluation,
// prediction, dataset inspection, and scene rendering.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctxnav/dataset.hpp"
#include "ctxnav/model.hpp"
#include "ctxnav/render.hpp"
#include "ctxnav/train.hpp"

namespace {

using namespace ctxnav;

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw CtxError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw CtxError("cannot write " + p.string());
    out << bytes;
}

// "C" -> "test_C"; full names pass through.
std::string canonical_split(const std::string& s) {
    if (s.size() == 1 && s[0] >= 'A' && s[0] <= 'G') return "test_" + s;
    return s;
}

std::span<const Episode> split_of(const Dataset& ds, const std::string& name) {
    if (name == "train") return ds.train;
    if (name == "val") return ds.val;
    if (name.rfind("test_", 0) == 0 && name.size() == 6 && name[5] >= 'A' && name[5] <= 'G')
        return ds.tests[static_cast<size_t>(name[5] - 'A')];
    throw ConfigError("unknown split '" + name + "'");
}

const std::vector<std::string>& all_split_names() {
    static const std::vector<std::string> names = {
        "train",  "val",    "test_A", "test_B", "test_C",
        "test_D", "test_E", "test_F", "test_G"};
    return names;
}

// Locates an episode by id, optionally restricted to one split.
const Episode& find_episode(const Dataset& ds, const std::string& id,
                            const std::string& split) {
    std::vector<std::string> names =
        split.empty() ? all_split_names() : std::vector<std::string>{canonical_split(split)};
    for (const std::string& name : names)
        for (const Episode& e : split_of(ds, name))
            if (e.id == id) return e;
    throw CtxError("episode '" + id + "' not found" +
                   (split.empty() ? "" : " in split " + canonical_split(split)));
}

int run_gen(const std::string& config_path, const std::string& out_dir) {
    GenConfig cfg;
    if (!config_path.empty()) cfg = GenConfig::from_json(read_file(config_path));
    DatasetManifest m = generate(cfg, out_dir);
    std::cout << "wrote " << (std::filesystem::path(out_dir) / "manifest.json").string() << "\n";
    for (const auto& [name, count] : m.counts) std::cout << name << ": " << count << "\n";
    return 0;
}

int run_train(const std::string& data_dir, const std::string& out_dir,
              const std::string& config_path, std::optional<uint64_t> seed,
              const std::string& variant, std::optional<int> max_steps) {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = TrainConfig::from_json(read_file(config_path));
    if (seed) cfg.seed = *seed;
    if (!variant.empty()) cfg.variant = variant_from_string(variant);
    if (max_steps) cfg.max_steps = *max_steps;
    cfg.validate();
    Dataset ds = load(data_dir);
    TrainResult r = train(cfg, ds, out_dir);
    std::cout << "steps_run: " << r.steps_run << "\n"
              << "best_step: " << r.best_step << "\n"
              << "best_val_exact: " << r.best_val_exact << "\n"
              << "checkpoint: " << r.checkpoint_path.string() << "\n";
    return 0;
}

int run_eval(const std::string& data_dir, const std::string& ckpt,
             std::vector<std::string> splits, uint64_t seed) {
    Dataset ds = load(data_dir);
    ModelParams params = ModelParams::load(ckpt);
    if (splits.empty())
        splits = {"val", "test_A", "test_B", "test_C", "test_D", "test_E", "test_F", "test_G"};
    for (std::string& s : splits) s = canonical_split(s);
    EvalReport report = evaluate(params, ds, splits, seed);
    std::cout << report.to_json() << "\n";
    return 0;
}

int run_predict(const std::string& data_dir, const std::string& ckpt, const std::string& id,
                const std::string& split, int max_len) {
    Dataset ds = load(data_dir);
    ModelParams params = ModelParams::load(ckpt);
    const Episode& e = find_episode(ds, id, split);
    Prediction pred = greedy_decode(params, e, max_len);
    for (ActionToken a : pred.actions) std::cout << to_string(a) << "\n";
    return 0;
}

int run_viz(const std::string& data_dir, const std::string& id, const std::string& split,
            const std::string& ckpt, const std::string& out_path, const std::string& format,
            int attn_step, int max_len) {
    Dataset ds = load(data_dir);
    const Episode& e = find_episode(ds, id, split);
    RenderSpec spec;
    spec.world = e.world;
    spec.format = format == "txt" ? RenderFormat::txt : RenderFormat::svg;
    spec.target_path = path_of(e.world, e.target_actions);
    if (!ckpt.empty()) {
        ModelParams params = ModelParams::load(ckpt);
        Prediction pred = greedy_decode(params, e, max_len, /*record_attention=*/true);
        spec.predicted_path = path_of(e.world, pred.actions);
        if (!pred.alpha_s.empty()) {
            if (attn_step >= 0) {
                if (attn_step >= static_cast<int>(pred.alpha_s.size()))
                    throw ConfigError("--attention-step beyond decoded length " +
                                      std::to_string(pred.alpha_s.size()));
                spec.attention = pred.alpha_s[static_cast<size_t>(attn_step)];
            } else {
                // Default view: attention averaged over decode steps.
                std::vector<double> mean(pred.alpha_s[0].size(), 0.0);
                for (const auto& a : pred.alpha_s)
                    for (size_t i = 0; i < a.size(); ++i) mean[i] += a[i];
                for (double& v : mean) v /= static_cast<double>(pred.alpha_s.size());
                spec.attention = mean;
            }
        }
    }
    std::string bytes = render(spec);
    if (out_path.empty() || out_path == "-") std::cout << bytes;
    else {
        write_file(out_path, bytes);
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

int run_inspect(const std::string& data_dir) {
    Dataset ds = load(data_dir);
    std::cout << "dataset: " << data_dir << "\n";
    std::cout << "grid: " << ds.manifest.config.d << "x" << ds.manifest.config.d << "\n";
    std::cout << "splits:\n";
    for (const std::string& name : all_split_names())
        std::cout << "  " << name << ": " << split_of(ds, name).size() << "\n";

    std::vector<std::vector<std::string>> sentences;
    for (const Episode& e : ds.train) sentences.push_back(e.instruction);
    Vocab vocab = Vocab::build(sentences);
    std::cout << "vocab (" << vocab.size() << " entries, index 0 = padding):";
    for (int i = 1; i < vocab.size(); ++i) std::cout << " " << vocab.word(i);
    std::cout << "\n";

    std::map<size_t, int> hist;
    for (const Episode& e : ds.train) ++hist[e.target_actions.size()];
    std::cout << "action-length histogram (train):\n";
    for (const auto& [len, count] : hist)
        std::cout << "  " << len << ": " << count << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ctxnav: grounded-instruction navigation workbench"};
    app.require_subcommand(1);

    // Shared option storage.
    std::string data_dir, out_dir, config_path, ckpt, split, episode_id, format = "svg";
    std::string variant, viz_out;
    std::vector<std::string> splits;
    std::optional<uint64_t> seed_opt;
    std::optional<int> max_steps_opt;
    uint64_t eval_seed = 0;
    int attn_step = -1, max_len = 128;

    auto add_data = [&](CLI::App* cmd) {
        cmd->add_option("--data", data_dir, "dataset directory (env CTXNAV_DATA_DIR)")
            ->envname("CTXNAV_DATA_DIR")
            ->required();
    };

    CLI::App* gen = app.add_subcommand("gen", "generate a dataset");
    gen->add_option("--config", config_path, "generation config JSON file");
    gen->add_option("--out", out_dir, "output directory")->required();

    CLI::App* tr = app.add_subcommand("train", "train a model");
    add_data(tr);
    tr->add_option("--out", out_dir, "run directory for checkpoint and log")->required();
    tr->add_option("--config", config_path, "training config JSON file");
    tr->add_option("--seed", seed_opt, "override config seed");
    tr->add_option("--variant", variant, "model variant")
        ->check(CLI::IsMember({"full", "no_mp"}));
    tr->add_option("--max-steps", max_steps_opt, "override config max_steps");

    CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint; JSON report on stdout");
    add_data(ev);
    ev->add_option("--checkpoint", ckpt, "checkpoint file")->required();
    ev->add_option("--split", splits, "split name (repeatable; A..G shorthand ok)");
    ev->add_option("--seed", eval_seed, "seed recorded in the report");

    CLI::App* pr = app.add_subcommand("predict", "greedy-decode one episode");
    add_data(pr);
    pr->add_option("--checkpoint", ckpt, "checkpoint file")->required();
    pr->add_option("--episode-id", episode_id, "episode id")->required();
    pr->add_option("--split", split, "restrict the search to one split");
    pr->add_option("--max-len", max_len, "decode-length cap");

    CLI::App* vz = app.add_subcommand("viz", "render an episode to SVG or text");
    add_data(vz);
    vz->add_option("--episode-id", episode_id, "episode id")->required();
    vz->add_option("--split", split, "restrict the search to one split");
    vz->add_option("--checkpoint", ckpt, "optional checkpoint for prediction + attention");
    vz->add_option("--out", viz_out, "output file ('-' for stdout)");
    vz->add_option("--format", format, "svg or txt")->check(CLI::IsMember({"svg", "txt"}));
    vz->add_option("--attention-step", attn_step, "decode step whose attention to show (-1 = mean)");
    vz->add_option("--max-len", max_len, "decode-length cap");

    CLI::App* in = app.add_subcommand("inspect", "print dataset statistics");
    add_data(in);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return run_gen(config_path, out_dir);
        if (tr->parsed())
            return run_train(data_dir, out_dir, config_path, seed_opt, variant, max_steps_opt);
        if (ev->parsed()) return run_eval(data_dir, ckpt, splits, eval_seed);
        if (pr->parsed()) return run_predict(data_dir, ckpt, episode_id, split, max_len);
        if (vz->parsed())
            return run_viz(data_dir, episode_id, split, ckpt, viz_out, format, attn_step, max_len);
        if (in->parsed()) return run_inspect(data_dir);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
