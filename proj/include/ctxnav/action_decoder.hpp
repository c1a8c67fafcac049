#pragma once

#include "ctxnav/instruction_encoder.hpp"
#include "ctxnav/tensor.hpp"
#include "ctxnav/world.hpp"

namespace ctxnav {

struct ModelParams;

// Action-token vocabulary for the decoder: the six world actions keep their
// enum values, followed by sequence specials.
constexpr int kSosId = 6;
constexpr int kEosId = 7;
constexpr int kPadId = 8;
constexpr int kActionVocab = 9;

inline int action_id(ActionToken a) { return static_cast<int>(a); }

struct DecoderState {
    Tensor h;  // [1, 64]
    Tensor c;  // [1, 64]
};

// Projections of the attention keys that do not depend on the decoding step;
// computing them once per episode keeps the per-step cost linear.
struct DecoderCaches {
    Tensor kc;  // [S, 64]  instruction keys through the score map
    Tensor ks;  // [36, 64] grid rows projected then through the score map
};

DecoderCaches prepare_decoder(const ModelParams& p, const EncodedInstruction& enc,
                              const Tensor& grid_enc);

// h_0 = tanh(W_init [s ; mean over grid rows]); cell state zero.
DecoderState init_state(const ModelParams& p, const EncodedInstruction& enc,
                        const Tensor& grid_enc);

struct DecodeStepOut {
    DecoderState state;
    Tensor logits;   // [1, kActionVocab]
    Tensor alpha_c;  // [S, 1]
    Tensor alpha_s;  // [36, 1]
};

// One autoregressive step: additive attention over word states keyed by the
// previous hidden state, additive attention over grid rows keyed by hidden +
// instruction context, then the LSTM consumes [token embedding ; c_c ; c_s].
DecodeStepOut decode_step(const ModelParams& p, const DecoderState& prev, int y_prev,
                          const EncodedInstruction& enc, const Tensor& grid_enc,
                          const DecoderCaches& caches);

}  // namespace ctxnav
