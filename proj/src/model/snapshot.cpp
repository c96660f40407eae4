#include "model/snapshot.hpp"

#include "core/error.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <utility>

namespace marscache::model {

namespace {

constexpr std::array<char, 8> kMagic{'M', 'C', 'W', 'S', 'N', 'A', 'P', '1'};

std::uint64_t to_le(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return __builtin_bswap64(v);
    }
    return v;
}

class Writer {
  public:
    explicit Writer(const std::string & path) : out_(path, std::ios::binary) {
        if (!out_) {
            fail(ErrorKind::io, "cannot open '" + path + "' for writing");
        }
    }
    void bytes(const void * p, std::size_t n) { out_.write(static_cast<const char *>(p), static_cast<std::streamsize>(n)); }
    void u64(std::uint64_t v) {
        v = to_le(v);
        bytes(&v, sizeof v);
    }
    void f64(double d) { u64(std::bit_cast<std::uint64_t>(d)); }
    void finish(const std::string & path) {
        out_.flush();
        if (!out_) {
            fail(ErrorKind::io, "write to '" + path + "' failed");
        }
    }

  private:
    std::ofstream out_;
};

class Reader {
  public:
    explicit Reader(const std::string & path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) {
            fail(ErrorKind::io, "cannot open '" + path + "'");
        }
    }
    void bytes(void * p, std::size_t n) {
        in_.read(static_cast<char *>(p), static_cast<std::streamsize>(n));
        if (!in_) {
            fail(ErrorKind::io, "'" + path_ + "' is truncated");
        }
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        bytes(&v, sizeof v);
        return to_le(v);
    }
    double f64() { return std::bit_cast<double>(u64()); }

  private:
    std::ifstream in_;
    std::string   path_;
};

// Visits every tensor of `w` in a fixed order, as (name, matrix) pairs.
// Vectors are stored as 1 x n matrices.
void for_each_tensor(Weights & w, const std::function<void(const std::string &, core::Matrix &)> & fn) {
    auto vec = [&](const std::string & name, std::vector<double> & v) {
        core::Matrix m(1, v.size(), v);
        fn(name, m);
        v.assign(m.data().begin(), m.data().end());
    };
    fn("token_embedding", w.token_embedding);
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        const std::string p  = "layers." + std::to_string(l) + ".";
        LayerWeights &    lw = w.layers[l];
        fn(p + "wq", lw.wq);
        fn(p + "wk", lw.wk);
        fn(p + "wv", lw.wv);
        fn(p + "wo", lw.wo);
        fn(p + "w_up", lw.w_up);
        fn(p + "w_down", lw.w_down);
        vec(p + "attn_gain", lw.attn_gain);
        vec(p + "ffn_gain", lw.ffn_gain);
    }
    vec("final_gain", w.final_gain);
    fn("output_head", w.output_head);
}

}  // namespace

void save_weights(const Weights & weights, const std::string & path) {
    Weights copy = weights;
    Writer  out(path);
    out.bytes(kMagic.data(), kMagic.size());
    const ModelConfig & c = copy.config;
    out.u64(c.num_layers);
    out.u64(c.num_heads);
    out.u64(c.model_dim);
    out.u64(c.head_dim);
    out.u64(c.vocab_size);
    out.u64(c.mask_mode == MaskMode::causal ? 0 : 1);
    out.f64(c.rope_base);
    out.u64(c.group_boundaries.size());
    for (std::size_t b : c.group_boundaries) {
        out.u64(b);
    }

    // Vectors are visited as temporaries, so copy every tensor out eagerly.
    std::vector<std::pair<std::string, core::Matrix>> owned;
    for_each_tensor(copy, [&](const std::string & name, core::Matrix & m) { owned.emplace_back(name, m); });

    out.u64(owned.size());
    std::uint64_t offset = 0;
    for (const auto & [name, m] : owned) {
        out.u64(name.size());
        out.bytes(name.data(), name.size());
        out.u64(m.rows());
        out.u64(m.cols());
        out.u64(offset);
        offset += m.rows() * m.cols();
    }
    for (const auto & [name, m] : owned) {
        for (double d : m.data()) {
            out.f64(d);
        }
    }
    out.finish(path);
}

Weights load_weights(const std::string & path) {
    Reader               in(path);
    std::array<char, 8> magic{};
    in.bytes(magic.data(), magic.size());
    if (magic != kMagic) {
        fail(ErrorKind::io, "'" + path + "' is not a weight snapshot");
    }
    ModelConfig c;
    c.num_layers = in.u64();
    c.num_heads  = in.u64();
    c.model_dim  = in.u64();
    c.head_dim   = in.u64();
    c.vocab_size = in.u64();
    c.mask_mode  = in.u64() == 0 ? MaskMode::causal : MaskMode::bidirectional;
    c.rope_base  = in.f64();
    const std::uint64_t groups = in.u64();
    if (groups > c.num_layers) {
        fail(ErrorKind::io, "'" + path + "' has a corrupt group table");
    }
    c.group_boundaries.resize(groups);
    for (auto & b : c.group_boundaries) {
        b = in.u64();
    }
    c.validate();

    // Zero-filled weights with the right shapes; tensors are then matched by name.
    Weights w = init_weights(c, 0);
    struct Entry {
        std::string   name;
        std::uint64_t rows, cols, offset;
    };
    std::vector<Entry>  entries(in.u64());
    std::uint64_t       total = 0;
    for (auto & e : entries) {
        e.name.resize(in.u64());
        in.bytes(e.name.data(), e.name.size());
        e.rows   = in.u64();
        e.cols   = in.u64();
        e.offset = in.u64();
        total    = std::max(total, e.offset + e.rows * e.cols);
    }
    std::vector<double> data(total);
    for (double & d : data) {
        d = in.f64();
    }

    std::size_t matched = 0;
    for_each_tensor(w, [&](const std::string & name, core::Matrix & m) {
        for (const auto & e : entries) {
            if (e.name != name) {
                continue;
            }
            if (e.rows != m.rows() || e.cols != m.cols()) {
                fail(ErrorKind::io, "tensor '" + name + "' has unexpected shape in '" + path + "'");
            }
            std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(e.offset), e.rows * e.cols, m.data().begin());
            ++matched;
            return;
        }
        fail(ErrorKind::io, "tensor '" + name + "' missing from '" + path + "'");
    });
    if (matched != entries.size()) {
        fail(ErrorKind::io, "'" + path + "' holds unknown tensors");
    }
    return w;
}

}  // namespace marscache::model
