#include "ctxnav/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace ctxnav {

Tensor ParamStore::add(const std::string& name, std::vector<int> shape, Init init, int fan_in,
                       Rng& rng) {
    if (has(name)) throw CtxError("parameter '" + name + "' already registered");
    Tensor t = Tensor::zeros(std::move(shape));
    auto data = t.data();
    switch (init) {
        case Init::scaled_uniform: {
            if (fan_in <= 0) throw CtxError("parameter '" + name + "': fan_in must be positive");
            double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (double& x : data) x = rng.uniform(-bound, bound);
            break;
        }
        case Init::embedding:
            for (double& x : data) x = rng.uniform(-0.1, 0.1);
            break;
        case Init::zeros:
            break;
    }
    t.set_param_slot(static_cast<int>(tensors_.size()));
    names_.push_back(name);
    tensors_.push_back(t);
    return t;
}

bool ParamStore::has(const std::string& name) const {
    for (const auto& n : names_)
        if (n == name) return true;
    return false;
}

int ParamStore::slot(const std::string& name) const {
    for (size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return static_cast<int>(i);
    throw CtxError("unknown parameter '" + name + "'");
}

Tensor ParamStore::get(const std::string& name) const { return tensors_[slot(name)]; }

size_t ParamStore::total_elements() const {
    size_t n = 0;
    for (const auto& t : tensors_) n += t.numel();
    return n;
}

uint64_t ParamStore::digest() const {
    uint64_t h = kFnvOffset;
    for (size_t i = 0; i < tensors_.size(); ++i) {
        h = fnv1a_str(names_[i], h);
        const auto& shape = tensors_[i].shape();
        h = fnv1a(shape.data(), shape.size() * sizeof(int), h);
        auto d = tensors_[i].data();
        h = fnv1a(d.data(), d.size() * sizeof(double), h);
    }
    return h;
}

std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c,
                                    const LstmParams& p) {
    int H = p.hidden;
    Tensor gates = add(add(matmul(x, p.w_x), matmul(h, p.w_h)), p.b);  // [1,4H]
    Tensor i_g = sigmoid(narrow(gates, 1, 0, H));
    Tensor f_g = sigmoid(narrow(gates, 1, H, H));
    Tensor g_g = tanh_op(narrow(gates, 1, 2 * H, H));
    Tensor o_g = sigmoid(narrow(gates, 1, 3 * H, H));
    Tensor c_next = add(mul(f_g, c), mul(i_g, g_g));
    Tensor h_next = mul(o_g, tanh_op(c_next));
    return {h_next, c_next};
}

// --- checkpoint io ---

namespace {
constexpr char kMagic[8] = {'C', 'T', 'X', 'N', 'A', 'V', '0', '1'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const char* what) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw CheckpointError(std::string("truncated file while reading ") + what);
    return v;
}
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::string& meta_json,
                     const ParamStore& store) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
    out.write(kMagic, sizeof(kMagic));
    write_pod<uint64_t>(out, meta_json.size());
    out.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
    write_pod<uint64_t>(out, store.size());
    for (size_t i = 0; i < store.size(); ++i) {
        const std::string& name = store.names()[i];
        const Tensor& t = store.tensors()[i];
        write_pod<uint32_t>(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        const auto& shape = t.shape();
        write_pod<uint32_t>(out, static_cast<uint32_t>(shape.size()));
        for (int d : shape) write_pod<int32_t>(out, d);
        auto data = t.data();
        write_pod<uint64_t>(out, data.size());
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(double)));
    }
    if (!out) throw CheckpointError("write failed for " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError(path.string() + ": bad magic (not a checkpoint?)");
    LoadedCheckpoint ckpt;
    uint64_t meta_len = read_pod<uint64_t>(in, "meta length");
    ckpt.meta_json.resize(meta_len);
    if (!in.read(ckpt.meta_json.data(), static_cast<std::streamsize>(meta_len)))
        throw CheckpointError(path.string() + ": truncated meta");
    uint64_t count = read_pod<uint64_t>(in, "parameter count");
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t name_len = read_pod<uint32_t>(in, "name length");
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len))
            throw CheckpointError(path.string() + ": truncated name");
        uint32_t rank = read_pod<uint32_t>(in, "rank");
        std::vector<int> shape;
        size_t numel = 1;
        for (uint32_t r = 0; r < rank; ++r) {
            int32_t d = read_pod<int32_t>(in, "dimension");
            shape.push_back(d);
            numel *= static_cast<size_t>(d);
        }
        uint64_t n = read_pod<uint64_t>(in, "element count");
        if (n != numel)
            throw CheckpointError(path.string() + ": element count mismatch for '" + name + "'");
        std::vector<double> values(n);
        if (!in.read(reinterpret_cast<char*>(values.data()),
                     static_cast<std::streamsize>(n * sizeof(double))))
            throw CheckpointError(path.string() + ": truncated data for '" + name + "'");
        ckpt.params.emplace_back(std::move(name), std::move(shape), std::move(values));
    }
    return ckpt;
}

void restore_params(ParamStore& store, const LoadedCheckpoint& ckpt) {
    if (ckpt.params.size() != store.size())
        throw CheckpointError("checkpoint has " + std::to_string(ckpt.params.size()) +
                              " parameters, store expects " + std::to_string(store.size()));
    for (const auto& [name, shape, values] : ckpt.params) {
        int slot = -1;
        try {
            slot = store.slot(name);
        } catch (const CtxError&) {
            throw CheckpointError("checkpoint parameter '" + name + "' not present in model");
        }
        Tensor t = store.tensors()[static_cast<size_t>(slot)];
        if (t.shape() != shape)
            throw CheckpointError("shape mismatch for '" + name + "'");
        auto dst = t.data();
        std::copy(values.begin(), values.end(), dst.begin());
    }
}

uint64_t fnv1a(const void* data, size_t n, uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

uint64_t fnv1a_str(const std::string& s, uint64_t h) { return fnv1a(s.data(), s.size(), h); }

}  // namespace ctxnav
