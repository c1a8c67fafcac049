#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ctxnav/action_decoder.hpp"
#include "ctxnav/context_mp.hpp"
#include "ctxnav/dataset.hpp"
#include "ctxnav/instruction_encoder.hpp"
#include "ctxnav/nn.hpp"
#include "ctxnav/vocab.hpp"
#include "ctxnav/world_encoder.hpp"

namespace ctxnav {

enum class Variant : uint8_t { full, no_mp };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);  // FormatError

struct ModelConfig {
    Variant variant = Variant::full;
    int word_dim = 32;     // word embedding size
    int enc_hidden = 32;   // recurrent encoder hidden size per direction
    int dim = 64;          // shared model width
    int prop_dim = 16;     // per-property embedding size
    int rounds = 4;        // message-passing rounds
    int grid_d = 6;
    int max_instr_len = 16;

    void validate() const;  // ConfigError
    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);  // FormatError
};

// All trainable state plus the vocabulary, with named handles into the
// underlying ParamStore.  The no_mp variant registers the property tables and
// a single 64x64 projection instead of the message-passing stack, so its
// parameter list witnesses that the ablation never touches those weights.
struct ModelParams {
    ModelConfig cfg;
    Vocab vocab;
    ParamStore store;

    // instruction encoder
    Tensor word_embed;
    LstmParams enc_fwd, enc_bwd;
    Tensor w1;                // [64, 1] word score map
    std::vector<Tensor> w2;   // rounds x [64, 64] round-specific projections
    Tensor w3;                // [128, 64] sentence-summary projection

    // object pipeline
    Tensor prop_color, prop_shape, prop_size, prop_orient;
    Tensor w4, w5;            // [64, 64] fuse gates
    Tensor w6, w7;            // [192, 64] edge-logit maps
    Tensor w8;                // [64, 64] context gate for logits
    Tensor w9;                // [192, 64] message map
    Tensor w10;               // [64, 64] context gate for messages
    Tensor w11;               // [128, 64] context update
    Tensor w12;               // [128, 64] output projection
    Tensor nomp_proj;         // [64, 64] ablation stand-in for w12's role

    // grid encoder
    Tensor conv1_w, conv1_b, conv5_w, conv5_b, conv7_w, conv7_b;

    // decoder
    Tensor dec_embed;         // [9, 64]
    LstmParams dec_lstm;      // input 320 = 64 + 64 + 192, hidden 64
    Tensor attn_c_w, attn_c_v;
    Tensor attn_s_p;          // [192, 64] grid-row projection for scoring
    Tensor attn_s_w, attn_s_v;
    Tensor w_o;               // [64, 9]
    Tensor w_init;            // [320, 64]

    static ModelParams init(const ModelConfig& cfg, const Vocab& vocab, uint64_t seed);

    void save(const std::filesystem::path& path, const std::string& extra_meta_json) const;
    static ModelParams load(const std::filesystem::path& path);   // CheckpointError
    static std::string peek_meta(const std::filesystem::path& path);
};

// --- episode-level forward passes ---

// Streams instruction + world through the full pipeline up to the grid
// encoding; shared by training and decoding.
struct EpisodeEncoding {
    EncodedInstruction enc;
    Tensor grid;  // [36, 192]
};
EpisodeEncoding encode_episode(const ModelParams& p, const Episode& e);

// Teacher-forced sum of token cross-entropies over the EOS-terminated target
// (no averaging; the caller normalizes by token count).
struct EpisodeLoss {
    Tensor loss_sum;  // scalar
    int tokens = 0;
};
EpisodeLoss episode_loss(const ModelParams& p, const Episode& e);

struct Prediction {
    std::vector<ActionToken> actions;
    // Per-step spatial attention (36 weights each), recorded when requested.
    std::vector<std::vector<double>> alpha_s;
};

// Greedy autoregressive decoding: argmax per step with ties broken toward the
// lowest token id, stop on EOS or after max_len steps; specials are stripped
// from the returned sequence.
Prediction greedy_decode(const ModelParams& p, const Episode& e, int max_len = 128,
                         bool record_attention = false);

}  // namespace ctxnav
