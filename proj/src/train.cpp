#include "ctxnav/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace ctxnav {

using json = nlohmann::ordered_json;

void TrainConfig::validate() const {
    if (lr <= 0 || lr_decay <= 0 || lr_decay > 1) throw ConfigError("bad learning-rate settings");
    if (lr_decay_every <= 0 || batch_size <= 0 || max_steps <= 0 || eval_interval <= 0 ||
        patience <= 0 || log_interval <= 0 || max_decode_len <= 0 || rounds < 1)
        throw ConfigError("train config values must be positive");
}

std::string TrainConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["variant"] = ctxnav::to_string(variant);
    j["lr"] = lr;
    j["lr_decay"] = lr_decay;
    j["lr_decay_every"] = lr_decay_every;
    j["rounds"] = rounds;
    j["batch_size"] = batch_size;
    j["max_steps"] = max_steps;
    j["eval_interval"] = eval_interval;
    j["patience"] = patience;
    j["log_interval"] = log_interval;
    j["max_decode_len"] = max_decode_len;
    j["stop_target"] = stop_target;
    return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& ex) {
        throw FormatError(std::string("train config: ") + ex.what());
    }
    TrainConfig c;
    auto opt = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    try {
        opt("seed", c.seed);
        if (j.contains("variant"))
            c.variant = variant_from_string(j.at("variant").get<std::string>());
        opt("lr", c.lr);
        opt("lr_decay", c.lr_decay);
        opt("lr_decay_every", c.lr_decay_every);
        opt("rounds", c.rounds);
        opt("batch_size", c.batch_size);
        opt("max_steps", c.max_steps);
        opt("eval_interval", c.eval_interval);
        opt("patience", c.patience);
        opt("log_interval", c.log_interval);
        opt("max_decode_len", c.max_decode_len);
        opt("stop_target", c.stop_target);
    } catch (const json::exception& ex) {
        throw FormatError(std::string("train config: ") + ex.what());
    }
    c.validate();
    return c;
}

double lr_at(const TrainConfig& cfg, long long step) {
    long long k = step / cfg.lr_decay_every;
    return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(k));
}

// --- log csv ---

std::string log_to_csv(std::span<const LogRow> rows) {
    std::string out = "step,lr,loss,val_exact\n";
    char buf[160];
    for (const LogRow& r : rows) {
        if (r.val_exact >= 0.0)
            std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g\n", r.step, r.lr, r.loss,
                          r.val_exact);
        else
            std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,\n", r.step, r.lr, r.loss);
        out += buf;
    }
    return out;
}

std::vector<LogRow> log_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "step,lr,loss,val_exact")
        throw FormatError("training log: missing header");
    std::vector<LogRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        LogRow r;
        std::vector<std::string> fields;
        std::string cur;
        for (char ch : line) {
            if (ch == ',') { fields.push_back(cur); cur.clear(); }
            else cur += ch;
        }
        fields.push_back(cur);
        if (fields.size() != 4)
            throw FormatError("training log line " + std::to_string(line_no) + ": bad field count");
        try {
            r.step = std::stoll(fields[0]);
            r.lr = std::stod(fields[1]);
            r.loss = std::stod(fields[2]);
            r.val_exact = fields[3].empty() ? -1.0 : std::stod(fields[3]);
        } catch (const std::exception&) {
            throw FormatError("training log line " + std::to_string(line_no) + ": bad number");
        }
        rows.push_back(r);
    }
    return rows;
}

// --- optimizer ---

void Adam::step(ParamStore& params, const GradSink& grads, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t_;
    double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    if (m_.size() < params.size()) {
        m_.resize(params.size());
        v_.resize(params.size());
    }
    for (size_t s = 0; s < params.size(); ++s) {
        if (s >= grads.slots.size() || grads.slots[s].empty()) continue;
        auto data = params.tensors()[s].data();
        const auto& g = grads.slots[s];
        auto& m = m_[s];
        auto& v = v_[s];
        if (m.size() != g.size()) m.assign(g.size(), 0.0);
        if (v.size() != g.size()) v.assign(g.size(), 0.0);
        for (size_t i = 0; i < g.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            double mhat = m[i] / c1;
            double vhat = v[i] / c2;
            data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

// --- evaluation ---

bool exact_match(std::span<const ActionToken> pred, std::span<const ActionToken> gold) {
    return pred.size() == gold.size() && std::equal(pred.begin(), pred.end(), gold.begin());
}

SplitResult evaluate_split(const ModelParams& p, std::span<const Episode> episodes,
                           int max_decode_len) {
    SplitResult r;
    r.examples = static_cast<int>(episodes.size());
    if (episodes.empty()) return r;
    int exact = 0, semantic = 0;
    for (const Episode& e : episodes) {
        Prediction pred = greedy_decode(p, e, max_decode_len);
        if (exact_match(pred.actions, e.target_actions)) ++exact;
        WorldState final_state = execute(e.world, pred.actions).first;
        if (goal_check(final_state, e)) ++semantic;
    }
    r.exact_pct = 100.0 * exact / r.examples;
    r.semantic_pct = 100.0 * semantic / r.examples;
    return r;
}

namespace {
std::string hex64(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}
}  // namespace

std::string EvalReport::to_json() const {
    json j;
    j["seed"] = seed;
    j["config_digest"] = config_digest;
    j["checkpoint_id"] = checkpoint_id;
    json s = json::object();
    for (const auto& [name, res] : splits)
        s[name] = {{"examples", res.examples},
                   {"exact_pct", res.exact_pct},
                   {"semantic_pct", res.semantic_pct}};
    j["splits"] = s;
    return j.dump(2);
}

EvalReport evaluate(const ModelParams& p, const Dataset& ds,
                    std::span<const std::string> split_names, uint64_t seed,
                    int max_decode_len) {
    EvalReport report;
    report.seed = seed;
    report.config_digest = hex64(fnv1a_str(p.cfg.to_json()));
    report.checkpoint_id = hex64(p.store.digest());
    for (const std::string& name : split_names) {
        std::span<const Episode> eps;
        if (name == "train") eps = ds.train;
        else if (name == "val") eps = ds.val;
        else if (name.rfind("test_", 0) == 0 && name.size() == 6 && name[5] >= 'A' &&
                 name[5] <= 'G')
            eps = ds.tests[static_cast<size_t>(name[5] - 'A')];
        else
            throw ConfigError("unknown split '" + name + "'");
        report.splits[name] = evaluate_split(p, eps, max_decode_len);
    }
    return report;
}

// --- training ---

TrainResult train(const TrainConfig& cfg, const Dataset& ds,
                  const std::filesystem::path& out_dir) {
    cfg.validate();
    if (ds.train.empty() || ds.val.empty()) throw CtxError("train: empty train or val split");
    std::filesystem::create_directories(out_dir);

    std::vector<std::vector<std::string>> sentences;
    sentences.reserve(ds.train.size());
    for (const Episode& e : ds.train) sentences.push_back(e.instruction);
    Vocab vocab = Vocab::build(sentences);
    {
        std::ofstream vout(out_dir / "vocab.json", std::ios::binary);
        vout << vocab.to_json() << "\n";
    }

    ModelConfig mc;
    mc.variant = cfg.variant;
    mc.rounds = cfg.rounds;
    mc.grid_d = ds.manifest.config.d;
    ModelParams params = ModelParams::init(mc, vocab, cfg.seed);

    Adam adam;
    Rng order_rng(splitmix64(cfg.seed + 0x0badc0de));
    std::vector<int> order(ds.train.size());
    std::iota(order.begin(), order.end(), 0);
    order_rng.shuffle(order);
    size_t cursor = 0;

    TrainResult result;
    result.checkpoint_path = out_dir / "checkpoint.bin";
    double best_val = -1.0;
    int patience_left = cfg.patience;
    bool saved = false;

    auto save_best = [&](long long step, double val) {
        json extra;
        extra["train"] = json::parse(cfg.to_json());
        extra["step"] = step;
        extra["val_exact"] = val;
        params.save(result.checkpoint_path, extra.dump());
        saved = true;
    };

    GradSink sink;
    long long step = 1;
    for (; step <= cfg.max_steps; ++step) {
        sink.reset();
        double loss_total = 0.0;
        long long token_total = 0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor >= order.size()) {
                order_rng.shuffle(order);
                cursor = 0;
            }
            const Episode& e = ds.train[static_cast<size_t>(order[cursor++])];
            EpisodeLoss el = episode_loss(params, e);
            loss_total += el.loss_sum.item();
            token_total += el.tokens;
            backward(el.loss_sum, sink);
        }
        double batch_loss = loss_total / static_cast<double>(token_total);
        if (!std::isfinite(batch_loss))
            throw CtxError("training diverged: non-finite loss at step " + std::to_string(step));
        sink.scale(1.0 / static_cast<double>(token_total));
        double lr = lr_at(cfg, step);
        adam.step(params.store, sink, lr);

        bool logged = false;
        if (step % cfg.log_interval == 0) {
            result.log.push_back({step, lr, batch_loss, -1.0});
            logged = true;
        }
        if (step % cfg.eval_interval == 0) {
            double val = evaluate_split(params, ds.val, cfg.max_decode_len).exact_pct;
            if (logged) result.log.back().val_exact = val;
            else result.log.push_back({step, lr, batch_loss, val});
            if (val > best_val) {
                best_val = val;
                result.best_step = step;
                patience_left = cfg.patience;
                save_best(step, val);
            } else if (--patience_left == 0) {
                break;
            }
            if (cfg.stop_target >= 0.0 && val >= cfg.stop_target) break;
        }
    }
    result.steps_run = std::min<long long>(step, cfg.max_steps);
    result.best_val_exact = best_val < 0 ? 0.0 : best_val;
    if (!saved) save_best(result.steps_run, best_val < 0 ? 0.0 : best_val);

    std::ofstream lout(out_dir / "log.csv", std::ios::binary);
    lout << log_to_csv(result.log);
    return result;
}

std::string aggregate_reports_json(std::span<const EvalReport> reports) {
    json j;
    j["runs"] = reports.size();
    json splits = json::object();
    if (!reports.empty()) {
        for (const auto& [name, first] : reports[0].splits) {
            std::vector<double> exact, semantic;
            for (const EvalReport& r : reports) {
                auto it = r.splits.find(name);
                if (it == r.splits.end()) continue;
                exact.push_back(it->second.exact_pct);
                semantic.push_back(it->second.semantic_pct);
            }
            auto stats = [](const std::vector<double>& xs) {
                double mean = std::accumulate(xs.begin(), xs.end(), 0.0) /
                              static_cast<double>(xs.size());
                double var = 0.0;
                for (double x : xs) var += (x - mean) * (x - mean);
                double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1))
                                          : 0.0;
                return std::make_pair(mean, sd);
            };
            auto [em, es] = stats(exact);
            auto [sm, ss] = stats(semantic);
            splits[name] = {{"examples", first.examples},
                            {"exact_mean", em},
                            {"exact_std", es},
                            {"semantic_mean", sm},
                            {"semantic_std", ss}};
        }
    }
    j["splits"] = splits;
    return j.dump(2);
}

}  // namespace ctxnav
