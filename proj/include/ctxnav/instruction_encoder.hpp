#pragma once

#include <span>
#include <string>

#include "ctxnav/tensor.hpp"

namespace ctxnav {

struct ModelParams;

// Per-word states and the sentence summary from the bidirectional recurrent
// encoder: h has one 64-dim row per word ([forward; backward] halves), s is
// the [1,128] concatenation [h_1 ; h_S].
struct EncodedInstruction {
    Tensor h;  // [S, 64]
    Tensor s;  // [1, 128]
};

// Throws EmptyInstruction / InstructionTooLong / UnknownToken.
EncodedInstruction encode_instruction(const ModelParams& p,
                                      std::span<const std::string> tokens);

struct TextualContext {
    Tensor c;      // [1, 64] attention-pooled word states
    Tensor alpha;  // [S, 1] attention weights
};

// Round-specific attention over word states: scores each word by a learned
// bilinear interaction between its state and a round-projected sentence
// summary; round is 1-based and must lie in 1..rounds (RoundOutOfRange).
TextualContext textual_context(const ModelParams& p, int round, const EncodedInstruction& enc);

}  // namespace ctxnav
