#include <bit>
#include <cmath>
#include <cstring>

#include "gzk/io.hpp"

namespace gzk::io {

// Layout (all integers little-endian, doubles as IEEE-754 bit patterns):
//   "GZKF" u16 version
//   u32 n_trees, u32 max_depth, u32 features_per_split, u32 min_samples_leaf,
//   u8 bootstrap, u64 rng_seed
//   u8 class_count, class_count x u8 region codes
//   u32 feature_dim
//   6 x u64 training class counts, u64 training seed
//   u32 tree_count, then per tree: u32 node_count and the nodes in preorder,
//   each a u8 tag: 1 = split (u32 feature, f64 threshold), 0 = leaf (6 x f64).

namespace {

constexpr char kMagic[4] = {'G', 'Z', 'K', 'F'};
constexpr std::uint32_t kMaxTreeDepth = 4096;

class Writer {
public:
    void bytes(const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); }
    template <typename T>
    void uint(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }

    std::string out;
};

class Reader {
public:
    explicit Reader(std::string_view b) : b_(b) {}

    void need(std::size_t n) const {
        if (b_.size() - pos_ < n) throw Error(ErrorCode::Format, "truncated model file");
    }
    template <typename T>
    T uint() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<T>(static_cast<T>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i));
        pos_ += sizeof(T);
        return v;
    }
    double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
    std::string_view take(std::size_t n) {
        need(n);
        auto s = b_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == b_.size(); }

private:
    std::string_view b_;
    std::size_t pos_ = 0;
};

void write_subtree(Writer& w, const forest::Tree& t, std::size_t i) {
    const auto& n = t.nodes[i];
    if (n.is_leaf()) {
        w.uint<std::uint8_t>(0);
        for (double p : t.leaves[static_cast<std::size_t>(n.next)]) w.f64(p);
        return;
    }
    w.uint<std::uint8_t>(1);
    w.uint(static_cast<std::uint32_t>(n.feature));
    w.f64(n.threshold);
    write_subtree(w, t, i + 1);
    write_subtree(w, t, static_cast<std::size_t>(n.next));
}

struct TreeDecoder {
    Reader& r;
    forest::Tree& tree;
    std::uint32_t budget;
    std::size_t dim;

    void node(std::uint32_t depth) {
        if (depth > kMaxTreeDepth) throw Error(ErrorCode::Format, "tree too deep");
        if (budget == 0) throw Error(ErrorCode::Format, "node count mismatch");
        --budget;
        const auto tag = r.uint<std::uint8_t>();
        if (tag == 0) {
            ClassProbabilities p{};
            double sum = 0.0;
            for (auto& v : p) {
                v = r.f64();
                if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::Format, "leaf fraction out of range");
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::Format, "leaf fractions do not sum to one");
            tree.nodes.push_back({-1, static_cast<std::int32_t>(tree.leaves.size()), 0.0});
            tree.leaves.push_back(p);
            return;
        }
        if (tag != 1) throw Error(ErrorCode::Format, "bad node tag");
        const auto feature = r.uint<std::uint32_t>();
        const double threshold = r.f64();
        if (feature >= dim) throw Error(ErrorCode::Format, "split feature out of range");
        if (!std::isfinite(threshold)) throw Error(ErrorCode::Format, "non-finite threshold");
        const std::size_t self = tree.nodes.size();
        tree.nodes.push_back({static_cast<std::int32_t>(feature), 0, threshold});
        node(depth + 1);
        tree.nodes[self].next = static_cast<std::int32_t>(tree.nodes.size());
        node(depth + 1);
    }
};

}  // namespace

std::string encode_model(const forest::ForestModel& model) {
    Writer w;
    w.bytes(kMagic, 4);
    w.uint(kModelVersion);
    const auto& c = model.config();
    w.uint(c.n_trees);
    w.uint(c.max_depth);
    w.uint(c.features_per_split);
    w.uint(c.min_samples_leaf);
    w.uint<std::uint8_t>(c.bootstrap ? 1 : 0);
    w.uint(c.rng_seed);
    w.uint(static_cast<std::uint8_t>(kRegionCount));
    for (auto r : forest::ForestModel::class_order()) w.uint(static_cast<std::uint8_t>(region_index(r)));
    w.uint(static_cast<std::uint32_t>(model.feature_dim()));
    for (auto n : model.digest().class_counts) w.uint(n);
    w.uint(model.digest().rng_seed);
    w.uint(static_cast<std::uint32_t>(model.trees().size()));
    for (const auto& t : model.trees()) {
        w.uint(static_cast<std::uint32_t>(t.nodes.size()));
        if (!t.nodes.empty()) write_subtree(w, t, 0);
    }
    return std::move(w.out);
}

forest::ForestModel decode_model(std::string_view bytes) {
    Reader r(bytes);
    if (std::memcmp(r.take(4).data(), kMagic, 4) != 0) throw Error(ErrorCode::Format, "not a model file");
    const auto version = r.uint<std::uint16_t>();
    if (version != kModelVersion)
        throw Error(ErrorCode::Format, "unsupported model version " + std::to_string(version));

    forest::ForestConfig c;
    c.n_trees = r.uint<std::uint32_t>();
    c.max_depth = r.uint<std::uint32_t>();
    c.features_per_split = r.uint<std::uint32_t>();
    c.min_samples_leaf = r.uint<std::uint32_t>();
    const auto bootstrap = r.uint<std::uint8_t>();
    if (bootstrap > 1) throw Error(ErrorCode::Format, "bad bootstrap flag");
    c.bootstrap = bootstrap == 1;
    c.rng_seed = r.uint<std::uint64_t>();

    if (r.uint<std::uint8_t>() != kRegionCount) throw Error(ErrorCode::Format, "unexpected class count");
    for (auto reg : forest::ForestModel::class_order())
        if (r.uint<std::uint8_t>() != region_index(reg)) throw Error(ErrorCode::Format, "unexpected class order");

    const auto dim = r.uint<std::uint32_t>();
    if (dim == 0) throw Error(ErrorCode::Format, "zero feature dimension");
    forest::TrainingDigest digest;
    for (auto& n : digest.class_counts) n = r.uint<std::uint64_t>();
    digest.rng_seed = r.uint<std::uint64_t>();

    const auto n_trees = r.uint<std::uint32_t>();
    if (n_trees != c.n_trees) throw Error(ErrorCode::Format, "tree count does not match header");
    std::vector<forest::Tree> trees(n_trees);
    for (auto& t : trees) {
        const auto n_nodes = r.uint<std::uint32_t>();
        if (n_nodes == 0) throw Error(ErrorCode::Format, "empty tree");
        r.need(n_nodes);  // at least one tag byte per node
        t.nodes.reserve(n_nodes);
        TreeDecoder d{r, t, n_nodes, dim};
        d.node(0);
        if (d.budget != 0) throw Error(ErrorCode::Format, "node count mismatch");
    }
    if (!r.done()) throw Error(ErrorCode::Format, "trailing bytes after model");
    try {
        c.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::Format, std::string("bad forest header: ") + e.what());
    }
    return forest::ForestModel(c, std::move(trees), dim, digest);
}

void write_model(const fs::path& path, const forest::ForestModel& model) { write_file(path, encode_model(model)); }

forest::ForestModel read_model(const fs::path& path) { return decode_model(read_file(path)); }

}  // namespace gzk::io
