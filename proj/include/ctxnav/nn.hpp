#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <tuple>
#include <vector>

#include "ctxnav/rng.hpp"
#include "ctxnav/tensor.hpp"

namespace ctxnav {

// ---------------------------------------------------------------------------
// Trainable-parameter bookkeeping shared by the model and the optimizer.
//
// Weight matrices are stored input-major: a map R^in -> R^out is a [in, out]
// tensor applied as y = x W with x a [1, in] row vector.  fan_in for
// initialization is therefore the first axis (or kh*kw*Cin for conv kernels).
// ---------------------------------------------------------------------------

enum class Init {
    scaled_uniform,  // uniform in +/- 1/sqrt(fan_in)
    embedding,       // uniform in +/- 0.1
    zeros,
};

// Ordered name -> tensor registry; the insertion index doubles as the
// parameter's gradient slot.
class ParamStore {
  public:
    Tensor add(const std::string& name, std::vector<int> shape, Init init, int fan_in, Rng& rng);
    Tensor get(const std::string& name) const;  // CtxError if absent
    bool has(const std::string& name) const;
    int slot(const std::string& name) const;    // CtxError if absent

    const std::vector<std::string>& names() const { return names_; }
    const std::vector<Tensor>& tensors() const { return tensors_; }
    std::vector<Tensor>& tensors() { return tensors_; }
    size_t size() const { return tensors_.size(); }
    size_t total_elements() const;

    // FNV-1a over names, shapes and raw values; stable across runs.
    uint64_t digest() const;

  private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
};

// --- LSTM cell -------------------------------------------------------------

// Packed gate layout along the 4H axis: input, forget, cell, output.
struct LstmParams {
    Tensor w_x;  // [in, 4H]
    Tensor w_h;  // [H, 4H]
    Tensor b;    // [1, 4H]
    int hidden = 0;
};

// Standard formulation: i,f,o = sigmoid gates, g = tanh candidate,
// c' = f*c + i*g, h' = o*tanh(c').  x is [1,in]; h,c are [1,H].
std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c,
                                    const LstmParams& p);

// --- checkpoint container --------------------------------------------------

// Binary layout: magic "CTXNAV01", u64 meta length, UTF-8 meta JSON, u64
// parameter count, then per parameter: u32 name length, name, u32 rank,
// i32 dims, u64 element count, raw little-endian doubles.
struct LoadedCheckpoint {
    std::string meta_json;
    std::vector<std::tuple<std::string, std::vector<int>, std::vector<double>>> params;
};

void save_checkpoint(const std::filesystem::path& path, const std::string& meta_json,
                     const ParamStore& store);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);  // CheckpointError

// Copies checkpoint values into an already-built store; names and shapes must
// match exactly (CheckpointError otherwise).
void restore_params(ParamStore& store, const LoadedCheckpoint& ckpt);

// --- hashing ---------------------------------------------------------------

constexpr uint64_t kFnvOffset = 1469598103934665603ULL;
uint64_t fnv1a(const void* data, size_t n, uint64_t h = kFnvOffset);
uint64_t fnv1a_str(const std::string& s, uint64_t h = kFnvOffset);

}  // namespace ctxnav
