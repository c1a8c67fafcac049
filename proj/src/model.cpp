#include "ctxnav/model.hpp"

#include <algorithm>

#include <json.hpp>

namespace ctxnav {

using json = nlohmann::ordered_json;

std::string to_string(Variant v) { return v == Variant::full ? "full" : "no_mp"; }

Variant variant_from_string(const std::string& s) {
    if (s == "full") return Variant::full;
    if (s == "no_mp") return Variant::no_mp;
    throw FormatError("unknown variant '" + s + "'");
}

void ModelConfig::validate() const {
    if (word_dim <= 0 || enc_hidden <= 0 || dim <= 0 || prop_dim <= 0 || rounds < 1 ||
        grid_d < 4 || max_instr_len < 1)
        throw ConfigError("model dimensions must be positive (rounds >= 1, grid >= 4)");
    if (4 * prop_dim != dim)
        throw ConfigError("4 * prop_dim must equal dim (node embeddings are 4 concatenated "
                          "property vectors)");
    if (2 * enc_hidden != dim)
        throw ConfigError("2 * enc_hidden must equal dim (word states are [forward; backward])");
}

std::string ModelConfig::to_json() const {
    json j;
    j["variant"] = ctxnav::to_string(variant);
    j["word_dim"] = word_dim;
    j["enc_hidden"] = enc_hidden;
    j["dim"] = dim;
    j["prop_dim"] = prop_dim;
    j["rounds"] = rounds;
    j["grid_d"] = grid_d;
    j["max_instr_len"] = max_instr_len;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& ex) {
        throw FormatError(std::string("model config: ") + ex.what());
    }
    ModelConfig c;
    try {
        c.variant = variant_from_string(j.at("variant").get<std::string>());
        c.word_dim = j.at("word_dim").get<int>();
        c.enc_hidden = j.at("enc_hidden").get<int>();
        c.dim = j.at("dim").get<int>();
        c.prop_dim = j.at("prop_dim").get<int>();
        c.rounds = j.at("rounds").get<int>();
        c.grid_d = j.at("grid_d").get<int>();
        c.max_instr_len = j.at("max_instr_len").get<int>();
    } catch (const json::exception& ex) {
        throw FormatError(std::string("model config: ") + ex.what());
    }
    c.validate();
    return c;
}

ModelParams ModelParams::init(const ModelConfig& cfg, const Vocab& vocab, uint64_t seed) {
    cfg.validate();
    ModelParams p;
    p.cfg = cfg;
    p.vocab = vocab;
    Rng rng(splitmix64(seed));
    ParamStore& ps = p.store;
    const int D = cfg.dim;          // 64
    const int E = cfg.enc_hidden;   // 32
    const int W = cfg.word_dim;     // 32
    const int F = 3 * D;            // 192 fused width
    const int S2 = 4 * E;           // 128 sentence summary width

    p.word_embed = ps.add("word_embed", {vocab.size(), W}, Init::embedding, 0, rng);
    auto add_lstm = [&](const std::string& prefix, int in, int hidden) {
        LstmParams l;
        l.w_x = ps.add(prefix + ".w_x", {in, 4 * hidden}, Init::scaled_uniform, in, rng);
        l.w_h = ps.add(prefix + ".w_h", {hidden, 4 * hidden}, Init::scaled_uniform, hidden, rng);
        l.b = ps.add(prefix + ".b", {1, 4 * hidden}, Init::zeros, 0, rng);
        l.hidden = hidden;
        return l;
    };
    p.enc_fwd = add_lstm("enc_fwd", W, E);
    p.enc_bwd = add_lstm("enc_bwd", W, E);
    p.w1 = ps.add("attn.w1", {D, 1}, Init::scaled_uniform, D, rng);
    for (int t = 1; t <= cfg.rounds; ++t)
        p.w2.push_back(ps.add("attn.w2." + std::to_string(t), {D, D}, Init::scaled_uniform, D, rng));
    p.w3 = ps.add("attn.w3", {S2, D}, Init::scaled_uniform, S2, rng);

    const int P = cfg.prop_dim;
    p.prop_color = ps.add("prop.color", {1 + kNumColors, P}, Init::embedding, 0, rng);
    p.prop_shape = ps.add("prop.shape", {1 + kNumShapes, P}, Init::embedding, 0, rng);
    p.prop_size = ps.add("prop.size", {1 + kNumSizes, P}, Init::embedding, 0, rng);
    p.prop_orient = ps.add("prop.orient", {1 + kNumOrientations, P}, Init::embedding, 0, rng);
    if (cfg.variant == Variant::full) {
        p.w4 = ps.add("mp.w4", {D, D}, Init::scaled_uniform, D, rng);
        p.w5 = ps.add("mp.w5", {D, D}, Init::scaled_uniform, D, rng);
        p.w6 = ps.add("mp.w6", {F, D}, Init::scaled_uniform, F, rng);
        p.w7 = ps.add("mp.w7", {F, D}, Init::scaled_uniform, F, rng);
        p.w8 = ps.add("mp.w8", {D, D}, Init::scaled_uniform, D, rng);
        p.w9 = ps.add("mp.w9", {F, D}, Init::scaled_uniform, F, rng);
        p.w10 = ps.add("mp.w10", {D, D}, Init::scaled_uniform, D, rng);
        p.w11 = ps.add("mp.w11", {2 * D, D}, Init::scaled_uniform, 2 * D, rng);
        p.w12 = ps.add("mp.w12", {2 * D, D}, Init::scaled_uniform, 2 * D, rng);
    } else {
        p.nomp_proj = ps.add("nomp.proj", {D, D}, Init::scaled_uniform, D, rng);
    }

    auto add_conv = [&](const std::string& prefix, int k) {
        Tensor w = ps.add(prefix + ".w", {D, k, k, D}, Init::scaled_uniform, k * k * D, rng);
        Tensor b = ps.add(prefix + ".b", {1, D}, Init::zeros, 0, rng);
        return std::make_pair(w, b);
    };
    std::tie(p.conv1_w, p.conv1_b) = add_conv("conv1", 1);
    std::tie(p.conv5_w, p.conv5_b) = add_conv("conv5", 5);
    std::tie(p.conv7_w, p.conv7_b) = add_conv("conv7", 7);

    p.dec_embed = ps.add("dec.embed", {kActionVocab, D}, Init::embedding, 0, rng);
    p.dec_lstm = add_lstm("dec", D + D + F, D);
    p.attn_c_w = ps.add("dec.attn_c.w", {D, D}, Init::scaled_uniform, D, rng);
    p.attn_c_v = ps.add("dec.attn_c.v", {D, 1}, Init::scaled_uniform, D, rng);
    p.attn_s_p = ps.add("dec.attn_s.p", {F, D}, Init::scaled_uniform, F, rng);
    p.attn_s_w = ps.add("dec.attn_s.w", {D, D}, Init::scaled_uniform, D, rng);
    p.attn_s_v = ps.add("dec.attn_s.v", {D, 1}, Init::scaled_uniform, D, rng);
    p.w_o = ps.add("dec.w_o", {D, kActionVocab}, Init::scaled_uniform, D, rng);
    p.w_init = ps.add("dec.w_init", {S2 + F, D}, Init::scaled_uniform, S2 + F, rng);
    return p;
}

void ModelParams::save(const std::filesystem::path& path,
                       const std::string& extra_meta_json) const {
    json meta;
    meta["format_version"] = 1;
    meta["model"] = json::parse(cfg.to_json());
    meta["vocab"] = json::parse(vocab.to_json());
    meta["extra"] = extra_meta_json.empty() ? json::object() : json::parse(extra_meta_json);
    save_checkpoint(path, meta.dump(), store);
}

std::string ModelParams::peek_meta(const std::filesystem::path& path) {
    return load_checkpoint(path).meta_json;
}

ModelParams ModelParams::load(const std::filesystem::path& path) {
    LoadedCheckpoint ckpt = load_checkpoint(path);
    json meta;
    try {
        meta = json::parse(ckpt.meta_json);
    } catch (const json::exception& ex) {
        throw CheckpointError("bad checkpoint meta: " + std::string(ex.what()));
    }
    try {
        if (meta.at("format_version").get<int>() != 1)
            throw CheckpointError("unsupported checkpoint format_version");
        ModelConfig cfg = ModelConfig::from_json(meta.at("model").dump());
        Vocab vocab = Vocab::from_json(meta.at("vocab").dump());
        ModelParams p = init(cfg, vocab, 0);
        restore_params(p.store, ckpt);
        return p;
    } catch (const json::exception& ex) {
        throw CheckpointError("bad checkpoint meta: " + std::string(ex.what()));
    } catch (const FormatError& ex) {
        throw CheckpointError(ex.what());
    }
}

// --- forward passes ---

EpisodeEncoding encode_episode(const ModelParams& p, const Episode& e) {
    EpisodeEncoding out;
    out.enc = encode_instruction(p, e.instruction);
    NodeInputs nodes = NodeInputs::from_world(e.world);
    Tensor node_out;
    if (p.cfg.variant == Variant::full) {
        std::vector<Tensor> contexts;
        contexts.reserve(static_cast<size_t>(p.cfg.rounds));
        for (int t = 1; t <= p.cfg.rounds; ++t)
            contexts.push_back(textual_context(p, t, out.enc).c);
        node_out = contextualize(p, nodes, contexts);
    } else {
        node_out = matmul(local_embed(p, nodes), p.nomp_proj);
    }
    out.grid = encode_grid_fused(p, node_out, nodes.cells, e.world.d);
    return out;
}

EpisodeLoss episode_loss(const ModelParams& p, const Episode& e) {
    EpisodeEncoding enc = encode_episode(p, e);
    DecoderCaches caches = prepare_decoder(p, enc.enc, enc.grid);
    DecoderState state = init_state(p, enc.enc, enc.grid);

    std::vector<int> targets;
    targets.reserve(e.target_actions.size() + 1);
    for (ActionToken a : e.target_actions) targets.push_back(action_id(a));
    targets.push_back(kEosId);

    std::vector<Tensor> logit_rows;
    logit_rows.reserve(targets.size());
    int prev = kSosId;
    for (int tgt : targets) {
        DecodeStepOut step = decode_step(p, state, prev, enc.enc, enc.grid, caches);
        logit_rows.push_back(step.logits);
        state = step.state;
        prev = tgt;  // teacher forcing
    }
    EpisodeLoss out;
    out.loss_sum = cross_entropy_sum(concat(logit_rows, 0), targets);
    out.tokens = static_cast<int>(targets.size());
    return out;
}

Prediction greedy_decode(const ModelParams& p, const Episode& e, int max_len,
                         bool record_attention) {
    NoGradGuard no_grad;
    EpisodeEncoding enc = encode_episode(p, e);
    DecoderCaches caches = prepare_decoder(p, enc.enc, enc.grid);
    DecoderState state = init_state(p, enc.enc, enc.grid);

    Prediction pred;
    int prev = kSosId;
    for (int step_i = 0; step_i < max_len; ++step_i) {
        DecodeStepOut step = decode_step(p, state, prev, enc.enc, enc.grid, caches);
        state = step.state;
        auto logits = step.logits.data();
        int best = 0;
        for (int t = 1; t < kActionVocab; ++t)
            if (logits[static_cast<size_t>(t)] > logits[static_cast<size_t>(best)]) best = t;
        if (record_attention) {
            auto a = step.alpha_s.data();
            pred.alpha_s.emplace_back(a.begin(), a.end());
        }
        if (best == kEosId) break;
        if (best < kNumActions) pred.actions.push_back(static_cast<ActionToken>(best));
        prev = best;
    }
    return pred;
}

}  // namespace ctxnav
