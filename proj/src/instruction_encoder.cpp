#include "ctxnav/instruction_encoder.hpp"

#include "ctxnav/model.hpp"

namespace ctxnav {

EncodedInstruction encode_instruction(const ModelParams& p,
                                      std::span<const std::string> tokens) {
    if (tokens.empty()) throw EmptyInstructionError();
    int S = static_cast<int>(tokens.size());
    if (S > p.cfg.max_instr_len)
        throw InstructionTooLongError(std::to_string(S) + " words, limit " +
                                      std::to_string(p.cfg.max_instr_len));
    std::vector<int> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(p.vocab.id(t));

    Tensor embeds = embedding(p.word_embed, ids);  // [S, word_dim]
    int H = p.cfg.enc_hidden;

    auto run_direction = [&](const LstmParams& lstm, bool reverse) {
        std::vector<Tensor> states(static_cast<size_t>(S));
        Tensor h = Tensor::zeros({1, H});
        Tensor c = Tensor::zeros({1, H});
        for (int k = 0; k < S; ++k) {
            int i = reverse ? S - 1 - k : k;
            Tensor x = narrow(embeds, 0, i, 1);
            auto [h2, c2] = lstm_cell(x, h, c, lstm);
            h = h2;
            c = c2;
            states[static_cast<size_t>(i)] = h;
        }
        return states;
    };
    std::vector<Tensor> fwd = run_direction(p.enc_fwd, false);
    std::vector<Tensor> bwd = run_direction(p.enc_bwd, true);

    std::vector<Tensor> rows;
    rows.reserve(static_cast<size_t>(S));
    for (int i = 0; i < S; ++i)
        rows.push_back(concat({fwd[static_cast<size_t>(i)], bwd[static_cast<size_t>(i)]}, 1));

    EncodedInstruction out;
    out.h = concat(rows, 0);                              // [S, 64]
    out.s = concat({rows.front(), rows.back()}, 1);       // [1, 128]
    return out;
}

TextualContext textual_context(const ModelParams& p, int round, const EncodedInstruction& enc) {
    if (round < 1 || round > p.cfg.rounds)
        throw RoundOutOfRangeError(std::to_string(round) + " not in 1.." +
                                   std::to_string(p.cfg.rounds));
    Tensor q = matmul(relu(matmul(enc.s, p.w3)), p.w2[static_cast<size_t>(round - 1)]);  // [1,64]
    Tensor scores = matmul(mul_rowvec(enc.h, q), p.w1);  // [S,1]
    TextualContext out;
    out.alpha = softmax(scores, 0);
    out.c = matmul(transpose(out.alpha), enc.h);  // [1,64]
    return out;
}

}  // namespace ctxnav
