#include "fd_eval.hpp"

#include <cmath>

#include "ctxnav/action_decoder.hpp"

namespace ctxnav::fd {

namespace {

Eigen::Map<const RowMat> cmap(const Tensor& t) {
    return {t.data().data(), t.dim(0), t.rank() == 2 ? t.dim(1) : 1};
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// h,c updated in place; gate packing along 4H: input, forget, cell, output.
void lstm_step(const RowVec& gates, RowVec& h, RowVec& c) {
    int H = static_cast<int>(h.size());
    for (int j = 0; j < H; ++j) {
        double ig = sigmoid(gates[j]);
        double fg = sigmoid(gates[H + j]);
        double gc = std::tanh(gates[2 * H + j]);
        double og = sigmoid(gates[3 * H + j]);
        c[j] = fg * c[j] + ig * gc;
        h[j] = og * std::tanh(c[j]);
    }
}

void softmax_inplace(Eigen::VectorXd& v) {
    double m = v.maxCoeff();
    v = (v.array() - m).exp().matrix();
    v /= v.sum();
}

struct ConvSpec {
    int k;
    int pad;
    int col_offset;
};

constexpr ConvSpec kConvs[3] = {{1, 0, 0}, {5, 2, 64}, {7, 3, 128}};

}  // namespace

Stage stage_of(const std::string& name) {
    auto starts = [&](const char* prefix) { return name.rfind(prefix, 0) == 0; };
    if (name == "word_embed") return Stage::embed;
    if (starts("enc_fwd.") || starts("enc_bwd.")) return Stage::enc;
    if (starts("attn.")) return Stage::ctx;
    if (starts("prop.")) return Stage::loc;
    if (starts("mp.") || starts("nomp.")) return Stage::mp;
    if (starts("conv")) return Stage::grid;
    if (name == "dec.attn_c.w" || name == "dec.attn_s.p" || name == "dec.attn_s.w")
        return Stage::dec_caches;
    if (starts("dec.")) return Stage::dec_only;
    throw CtxError("fd: unknown parameter '" + name + "'");
}

FdEval::FdEval(const ModelParams& p, const Episode& e) : p_(p), e_(e) {
    S_ = static_cast<int>(e.instruction.size());
    for (const std::string& w : e.instruction) word_ids_.push_back(p.vocab.id(w));
    for (ActionToken a : e.target_actions) targets_.push_back(action_id(a));
    targets_.push_back(kEosId);
    nodes_ = NodeInputs::from_world(e.world);
    n_ = nodes_.n;
    G_ = e.world.d * e.world.d;
}

void FdEval::run_embed() {
    auto W = cmap(p_.word_embed);
    E_.resize(S_, p_.cfg.word_dim);
    for (int i = 0; i < S_; ++i) E_.row(i) = W.row(word_ids_[static_cast<size_t>(i)]);
}

void FdEval::run_enc() {
    const int H = p_.cfg.enc_hidden;
    Hc_.resize(S_, 2 * H);
    auto run = [&](const LstmParams& lp, bool reverse, int col0) {
        auto wx = cmap(lp.w_x), wh = cmap(lp.w_h), b = cmap(lp.b);
        RowVec h = RowVec::Zero(H), c = RowVec::Zero(H);
        RowVec gates(4 * H);
        for (int k = 0; k < S_; ++k) {
            int i = reverse ? S_ - 1 - k : k;
            gates.noalias() = E_.row(i) * wx;
            gates.noalias() += h * wh;
            gates += b.row(0);
            lstm_step(gates, h, c);
            Hc_.block(i, col0, 1, H) = h;
        }
    };
    run(p_.enc_fwd, false, 0);
    run(p_.enc_bwd, true, H);
    s_.resize(4 * H);
    s_ << Hc_.row(0), Hc_.row(S_ - 1);
}

void FdEval::run_ctx() {
    ctx_.assign(static_cast<size_t>(p_.cfg.rounds), RowVec());
    RowVec q0 = (s_ * cmap(p_.w3)).cwiseMax(0.0);
    auto w1 = cmap(p_.w1);
    for (int t = 0; t < p_.cfg.rounds; ++t) {
        RowVec q = q0 * cmap(p_.w2[static_cast<size_t>(t)]);
        Eigen::VectorXd scores(S_);
        for (int i = 0; i < S_; ++i)
            scores[i] = (Hc_.row(i).cwiseProduct(q) * w1)(0, 0);
        softmax_inplace(scores);
        ctx_[static_cast<size_t>(t)] = scores.transpose() * Hc_;
    }
}

void FdEval::run_loc() {
    const int P = p_.cfg.prop_dim;
    loc_.resize(n_, 4 * P);
    auto pc = cmap(p_.prop_color), ps = cmap(p_.prop_shape), pz = cmap(p_.prop_size),
         po = cmap(p_.prop_orient);
    for (int i = 0; i < n_; ++i) {
        size_t si = static_cast<size_t>(i);
        loc_.block(i, 0, 1, P) = pc.row(nodes_.color_ids[si]);
        loc_.block(i, P, 1, P) = ps.row(nodes_.shape_ids[si]);
        loc_.block(i, 2 * P, 1, P) = pz.row(nodes_.size_ids[si]);
        loc_.block(i, 3 * P, 1, P) = po.row(nodes_.orient_ids[si]);
    }
}

void FdEval::run_mp() {
    const int D = p_.cfg.dim;
    if (p_.cfg.variant != Variant::full) {
        nodeout_ = loc_ * cmap(p_.nomp_proj);
        return;
    }
    RowMat ctxm = loc_;
    RowMat fused(n_, 3 * D);
    for (int t = 0; t < p_.cfg.rounds; ++t) {
        fused.leftCols(D) = loc_;
        fused.middleCols(D, D) = ctxm;
        fused.rightCols(D) = (loc_ * cmap(p_.w4)).cwiseProduct(ctxm * cmap(p_.w5));
        RowMat agg;
        if (n_ == 1) {
            agg = RowMat::Zero(1, D);
        } else {
            const RowVec& ct = ctx_[static_cast<size_t>(t)];
            RowMat recv = fused * cmap(p_.w6);
            RowVec cw8 = ct * cmap(p_.w8);
            RowMat send = ((fused * cmap(p_.w7)).array().rowwise() * cw8.array()).matrix();
            RowMat logits = recv * send.transpose();
            for (int i = 0; i < n_; ++i) logits(i, i) += -1e9;
            for (int i = 0; i < n_; ++i) {
                Eigen::VectorXd row = logits.row(i).transpose();
                softmax_inplace(row);
                logits.row(i) = row.transpose();
            }
            RowVec cw10 = ct * cmap(p_.w10);
            RowMat msgs = ((fused * cmap(p_.w9)).array().rowwise() * cw10.array()).matrix();
            agg = logits * msgs;
        }
        RowMat cat(n_, 2 * D);
        cat.leftCols(D) = ctxm;
        cat.rightCols(D) = agg;
        ctxm = cat * cmap(p_.w11);
    }
    RowMat cat(n_, 2 * D);
    cat.leftCols(D) = loc_;
    cat.rightCols(D) = ctxm;
    nodeout_ = cat * cmap(p_.w12);
}

void FdEval::run_grid() {
    const int D = p_.cfg.dim;
    const int d = e_.world.d;
    grid_ = RowMat::Zero(G_, 3 * D);
    const Tensor* ws[3] = {&p_.conv1_w, &p_.conv5_w, &p_.conv7_w};
    const Tensor* bs[3] = {&p_.conv1_b, &p_.conv5_b, &p_.conv7_b};
    for (int br = 0; br < 3; ++br) {
        const ConvSpec& cs = kConvs[br];
        auto b = cmap(*bs[br]);
        for (int cell = 0; cell < G_; ++cell) grid_.block(cell, cs.col_offset, 1, D) += b.row(0);
        const double* wv = ws[br]->data().data();
        for (int i = 0; i < n_; ++i) {
            int qr = nodes_.cells[static_cast<size_t>(i)] / d;
            int qc = nodes_.cells[static_cast<size_t>(i)] % d;
            for (int ky = 0; ky < cs.k; ++ky) {
                int r = qr - ky + cs.pad;
                if (r < 0 || r >= d) continue;
                for (int kx = 0; kx < cs.k; ++kx) {
                    int c = qc - kx + cs.pad;
                    if (c < 0 || c >= d) continue;
                    double* dst = grid_.row(r * d + c).data() + cs.col_offset;
                    for (int oc = 0; oc < D; ++oc) {
                        const double* wrow =
                            wv + (static_cast<size_t>(oc) * cs.k * cs.k +
                                  static_cast<size_t>(ky) * cs.k + kx) * D;
                        double acc = 0.0;
                        for (int ci = 0; ci < D; ++ci) acc += wrow[ci] * nodeout_(i, ci);
                        dst[oc] += acc;
                    }
                }
            }
        }
    }
}

void FdEval::run_dec_caches() {
    kc_ = Hc_ * cmap(p_.attn_c_w);
    psw_ = cmap(p_.attn_s_p) * cmap(p_.attn_s_w);
    ks_ = grid_ * psw_;
    mean_g_ = grid_.colwise().mean();
}

double FdEval::decode_plain() const {
    const int D = p_.cfg.dim;
    auto wi = cmap(p_.w_init);
    RowVec pre(D);
    pre.noalias() = s_ * wi.topRows(s_.size());
    pre.noalias() += mean_g_ * wi.bottomRows(mean_g_.size());
    RowVec h = pre.array().tanh().matrix();
    RowVec c = RowVec::Zero(D);

    auto wcx = cmap(p_.attn_c_w), vc = cmap(p_.attn_c_v);
    auto wsx = cmap(p_.attn_s_w), vs = cmap(p_.attn_s_v);
    auto de = cmap(p_.dec_embed);
    auto wx = cmap(p_.dec_lstm.w_x), wh = cmap(p_.dec_lstm.w_h), lb = cmap(p_.dec_lstm.b);
    auto wo = cmap(p_.w_o);

    double loss = 0.0;
    int prev = kSosId;
    RowVec gates(4 * D), x(de.cols() + D + grid_.cols());
    for (int tgt : targets_) {
        RowVec key_c = h * wcx;
        Eigen::VectorXd ec(S_);
        for (int i = 0; i < S_; ++i)
            ec[i] = ((kc_.row(i) + key_c).array().tanh().matrix() * vc)(0, 0);
        softmax_inplace(ec);
        RowVec c_c = ec.transpose() * Hc_;

        RowVec key_s = (h + c_c) * wsx;
        Eigen::VectorXd es(G_);
        for (int j = 0; j < G_; ++j)
            es[j] = ((ks_.row(j) + key_s).array().tanh().matrix() * vs)(0, 0);
        softmax_inplace(es);
        RowVec c_s = es.transpose() * grid_;

        x << de.row(prev), c_c, c_s;
        gates.noalias() = x * wx;
        gates.noalias() += h * wh;
        gates += lb.row(0);
        lstm_step(gates, h, c);

        RowVec logits = h * wo;
        double m = logits.maxCoeff();
        loss += m + std::log((logits.array() - m).exp().sum()) - logits[tgt];
        prev = tgt;
    }
    return loss;
}

double FdEval::loss_from(Stage s) {
    fast_ready_ = false;
    switch (s) {
        case Stage::embed: run_embed(); [[fallthrough]];
        case Stage::enc: run_enc(); [[fallthrough]];
        case Stage::ctx: run_ctx(); [[fallthrough]];
        case Stage::loc: run_loc(); [[fallthrough]];
        case Stage::mp: run_mp(); [[fallthrough]];
        case Stage::grid: run_grid(); [[fallthrough]];
        case Stage::dec_caches: run_dec_caches(); [[fallthrough]];
        case Stage::dec_only: break;
    }
    return decode_plain();
}

double FdEval::loss_full() { return loss_from(Stage::embed); }

double FdEval::loss_for(const std::string& name) {
    Stage s = stage_of(name);
    if (s != Stage::dec_caches) return loss_from(s);
    fast_ready_ = false;
    // Finer granularity: rebuild only the cache the parameter feeds.
    if (name == "dec.attn_c.w") {
        kc_ = Hc_ * cmap(p_.attn_c_w);
    } else {
        psw_ = cmap(p_.attn_s_p) * cmap(p_.attn_s_w);
        ks_ = grid_ * psw_;
    }
    return decode_plain();
}

void FdEval::refresh_fast_caches() {
    auto wx = cmap(p_.dec_lstm.w_x);
    const int D = p_.cfg.dim;
    const int S2 = static_cast<int>(s_.size());
    xeW_ = cmap(p_.dec_embed) * wx.topRows(D);
    HWx_ = Hc_ * wx.middleRows(D, D);
    GWx_ = grid_ * wx.bottomRows(grid_.cols());
    auto wi = cmap(p_.w_init);
    sWi_ = s_ * wi.topRows(S2);
    mWi_ = mean_g_ * wi.bottomRows(mean_g_.size());
    fast_ready_ = true;
}

double FdEval::loss_with_grid_delta(std::span<const GridDelta> delta) {
    if (!fast_ready_) refresh_fast_caches();
    const int D = p_.cfg.dim;
    auto wi = cmap(p_.w_init);
    auto wx = cmap(p_.dec_lstm.w_x);
    const int wi_off = static_cast<int>(s_.size());

    // h0 via the cached linear pieces plus the sparse mean shift.
    RowVec pre = sWi_ + mWi_;
    for (const GridDelta& gd : delta)
        pre.noalias() += (gd.dv / static_cast<double>(G_)) * wi.row(wi_off + gd.col);
    RowVec h = pre.array().tanh().matrix();
    RowVec c = RowVec::Zero(D);

    // ks with the delta applied to the touched rows only.
    RowMat ksd = ks_;
    for (const GridDelta& gd : delta) ksd.row(gd.cell).noalias() += gd.dv * psw_.row(gd.col);

    auto wcx = cmap(p_.attn_c_w), vc = cmap(p_.attn_c_v);
    auto wsx = cmap(p_.attn_s_w), vs = cmap(p_.attn_s_v);
    auto wh = cmap(p_.dec_lstm.w_h), lb = cmap(p_.dec_lstm.b);
    auto wo = cmap(p_.w_o);

    double loss = 0.0;
    int prev = kSosId;
    RowVec gates(4 * D);
    for (int tgt : targets_) {
        RowVec key_c = h * wcx;
        Eigen::VectorXd ec(S_);
        for (int i = 0; i < S_; ++i)
            ec[i] = ((kc_.row(i) + key_c).array().tanh().matrix() * vc)(0, 0);
        softmax_inplace(ec);
        RowVec c_c = ec.transpose() * Hc_;

        RowVec key_s = (h + c_c) * wsx;
        Eigen::VectorXd es(G_);
        for (int j = 0; j < G_; ++j)
            es[j] = ((ksd.row(j) + key_s).array().tanh().matrix() * vs)(0, 0);
        softmax_inplace(es);

        // x * W_x assembled from the cached partial products; the grid delta
        // enters through the attention-weighted c_s term.
        gates = xeW_.row(prev);
        gates.noalias() += ec.transpose() * HWx_;
        gates.noalias() += es.transpose() * GWx_;
        for (const GridDelta& gd : delta)
            gates.noalias() += es[gd.cell] * gd.dv * wx.row(2 * D + gd.col);
        gates.noalias() += h * wh;
        gates += lb.row(0);
        lstm_step(gates, h, c);

        RowVec logits = h * wo;
        double m = logits.maxCoeff();
        loss += m + std::log((logits.array() - m).exp().sum()) - logits[tgt];
        prev = tgt;
    }
    return loss;
}

std::vector<GridDelta> FdEval::conv_weight_delta(int which_k, int flat_index, double dv) const {
    const ConvSpec& cs = kConvs[which_k];
    const int D = p_.cfg.dim;
    const int d = e_.world.d;
    int ci = flat_index % D;
    int rest = flat_index / D;
    int kx = rest % cs.k;
    rest /= cs.k;
    int ky = rest % cs.k;
    int oc = rest / cs.k;
    std::vector<GridDelta> out;
    for (int i = 0; i < n_; ++i) {
        int qr = nodes_.cells[static_cast<size_t>(i)] / d;
        int qc = nodes_.cells[static_cast<size_t>(i)] % d;
        int r = qr - ky + cs.pad, c = qc - kx + cs.pad;
        if (r < 0 || r >= d || c < 0 || c >= d) continue;
        int cell = r * d + c;
        double contrib = dv * nodeout_(i, ci);
        bool merged = false;
        for (GridDelta& gd : out)
            if (gd.cell == cell) {
                gd.dv += contrib;
                merged = true;
                break;
            }
        if (!merged) out.push_back({cell, cs.col_offset + oc, contrib});
    }
    return out;
}

std::vector<GridDelta> FdEval::conv_bias_delta(int which_k, int channel, double dv) const {
    const ConvSpec& cs = kConvs[which_k];
    std::vector<GridDelta> out;
    out.reserve(static_cast<size_t>(G_));
    for (int cell = 0; cell < G_; ++cell) out.push_back({cell, cs.col_offset + channel, dv});
    return out;
}

}  // namespace ctxnav::fd
