#include "ctxnav/action_decoder.hpp"

#include "ctxnav/model.hpp"

namespace ctxnav {

DecoderCaches prepare_decoder(const ModelParams& p, const EncodedInstruction& enc,
                              const Tensor& grid_enc) {
    DecoderCaches caches;
    caches.kc = matmul(enc.h, p.attn_c_w);
    caches.ks = matmul(matmul(grid_enc, p.attn_s_p), p.attn_s_w);
    return caches;
}

DecoderState init_state(const ModelParams& p, const EncodedInstruction& enc,
                        const Tensor& grid_enc) {
    Tensor summary = concat({enc.s, mean_rows(grid_enc)}, 1);  // [1, 128+192]
    DecoderState st;
    st.h = tanh_op(matmul(summary, p.w_init));
    st.c = Tensor::zeros({1, p.cfg.dim});
    return st;
}

DecodeStepOut decode_step(const ModelParams& p, const DecoderState& prev, int y_prev,
                          const EncodedInstruction& enc, const Tensor& grid_enc,
                          const DecoderCaches& caches) {
    if (y_prev < 0 || y_prev >= kActionVocab)
        throw CtxError("decode_step: token id " + std::to_string(y_prev) + " out of range");

    DecodeStepOut out;
    // Additive attention over word states, keyed by the previous hidden state.
    Tensor key_c = matmul(prev.h, p.attn_c_w);
    Tensor e_c = matmul(tanh_op(add_rowvec(caches.kc, key_c)), p.attn_c_v);  // [S,1]
    out.alpha_c = softmax(e_c, 0);
    Tensor c_c = matmul(transpose(out.alpha_c), enc.h);  // [1,64]

    // Additive attention over grid rows, keyed by hidden + instruction context.
    Tensor key_s = matmul(add(prev.h, c_c), p.attn_s_w);
    Tensor e_s = matmul(tanh_op(add_rowvec(caches.ks, key_s)), p.attn_s_v);  // [36,1]
    out.alpha_s = softmax(e_s, 0);
    Tensor c_s = matmul(transpose(out.alpha_s), grid_enc);  // [1,192]

    std::array<int, 1> ids{y_prev};
    Tensor x = concat({embedding(p.dec_embed, ids), c_c, c_s}, 1);  // [1,320]
    auto [h, c] = lstm_cell(x, prev.h, prev.c, p.dec_lstm);
    out.state = {h, c};
    out.logits = matmul(h, p.w_o);
    return out;
}

}  // namespace ctxnav
