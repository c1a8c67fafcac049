#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ctxnav/dataset.hpp"
#include "ctxnav/model.hpp"

namespace ctxnav {

struct TrainConfig {
    uint64_t seed = 1;
    Variant variant = Variant::full;
    double lr = 1e-4;
    double lr_decay = 0.9;
    int lr_decay_every = 20000;
    int rounds = 4;
    int batch_size = 32;
    int max_steps = 50000;
    int eval_interval = 500;   // validation exact-match cadence (steps)
    int patience = 10;         // evaluations without improvement before stopping
    int log_interval = 50;
    int max_decode_len = 128;
    // Stop as soon as validation exact match reaches this percentage
    // (negative = disabled; training then runs to max_steps or patience).
    double stop_target = -1.0;

    void validate() const;  // ConfigError
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);  // FormatError
};

// Stepped decay: lr * decay^floor(step / decay_every), steps counted from 1.
double lr_at(const TrainConfig& cfg, long long step);

struct LogRow {
    long long step = 0;
    double lr = 0.0;
    double loss = 0.0;
    double val_exact = -1.0;  // < 0 when the row carries no evaluation
};

std::string log_to_csv(std::span<const LogRow> rows);
std::vector<LogRow> log_from_csv(const std::string& text);  // FormatError

struct TrainResult {
    std::filesystem::path checkpoint_path;
    std::vector<LogRow> log;
    double best_val_exact = 0.0;
    long long best_step = 0;
    long long steps_run = 0;
};

// Adaptive-moment optimizer (decoupled from the model; moments keyed by
// parameter slot).  beta1 0.9, beta2 0.999, eps 1e-8, bias-corrected.
class Adam {
  public:
    void step(ParamStore& params, const GradSink& grads, double lr);

  private:
    std::vector<std::vector<double>> m_, v_;
    long long t_ = 0;
};

bool exact_match(std::span<const ActionToken> pred, std::span<const ActionToken> gold);

struct SplitResult {
    int examples = 0;
    double exact_pct = 0.0;
    double semantic_pct = 0.0;
};

// Greedy-decodes every episode; exact match is full-sequence equality and
// semantic success means executing the prediction reaches the goal state.
SplitResult evaluate_split(const ModelParams& p, std::span<const Episode> episodes,
                           int max_decode_len = 128);

struct EvalReport {
    std::map<std::string, SplitResult> splits;
    uint64_t seed = 0;
    std::string config_digest;
    std::string checkpoint_id;

    std::string to_json() const;
};

EvalReport evaluate(const ModelParams& p, const Dataset& ds,
                    std::span<const std::string> split_names, uint64_t seed,
                    int max_decode_len = 128);

// Teacher-forced training with early stopping on validation exact match; the
// best checkpoint (by val exact match) is kept at out_dir/checkpoint.bin and
// the log at out_dir/log.csv.  Deterministic for fixed (config, dataset).
TrainResult train(const TrainConfig& cfg, const Dataset& ds,
                  const std::filesystem::path& out_dir);

// Mean and sample standard deviation per split across several reports
// (aggregation used by multi-seed comparisons).
std::string aggregate_reports_json(std::span<const EvalReport> reports);

}  // namespace ctxnav
