#include "gzk/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gzk/random.hpp"

namespace gzk::forest {

void ForestConfig::validate() const {
    if (n_trees < 1) throw Error(ErrorCode::InvalidArgument, "n_trees must be >= 1");
    if (max_depth < 1) throw Error(ErrorCode::InvalidArgument, "max_depth must be >= 1");
    if (min_samples_leaf < 1) throw Error(ErrorCode::InvalidArgument, "min_samples_leaf must be >= 1");
}

std::uint32_t ForestConfig::resolved_features_per_split(std::size_t dim) const {
    if (dim == 0) return 0;
    std::uint32_t k = features_per_split;
    if (k == 0) k = static_cast<std::uint32_t>(std::floor(std::sqrt(static_cast<double>(dim))));
    return std::clamp<std::uint32_t>(k, 1, static_cast<std::uint32_t>(dim));
}

const ClassProbabilities& Tree::leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const TreeNode& n = nodes[i];
        i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? i + 1 : static_cast<std::size_t>(n.next);
    }
    return leaves[static_cast<std::size_t>(nodes[i].next)];
}

std::uint32_t Tree::depth() const {
    // Preorder walk with an explicit stack of (node, depth).
    std::uint32_t deepest = 0;
    std::vector<std::pair<std::size_t, std::uint32_t>> stack{{0, 0}};
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (!nodes[i].is_leaf()) {
            stack.push_back({i + 1, d + 1});
            stack.push_back({static_cast<std::size_t>(nodes[i].next), d + 1});
        }
    }
    return deepest;
}

void TrainingSet::add(std::span<const double> r, GazeRegion label) {
    if (dim == 0 && y.empty()) dim = r.size();
    if (r.size() != dim)
        throw Error(ErrorCode::DimensionMismatch,
                    "row has " + std::to_string(r.size()) + " features, expected " + std::to_string(dim));
    x.insert(x.end(), r.begin(), r.end());
    y.push_back(static_cast<std::uint8_t>(region_index(label)));
}

TrainingSet to_training_set(std::span<const Sample> samples) {
    TrainingSet ts;
    if (!samples.empty()) {
        ts.dim = samples.front().x.dim();
        ts.x.reserve(samples.size() * ts.dim);
        ts.y.reserve(samples.size());
    }
    for (const auto& s : samples) ts.add(s.x.values, s.label);
    return ts;
}

ForestModel::ForestModel(ForestConfig config, std::vector<Tree> trees, std::size_t feature_dim,
                         TrainingDigest digest)
    : config_(config), trees_(std::move(trees)), feature_dim_(feature_dim), digest_(digest) {
    if (trees_.empty()) throw Error(ErrorCode::InvalidArgument, "forest has no trees");
}

ClassProbabilities ForestModel::predict_proba(std::span<const double> x) const {
    if (x.size() != feature_dim_)
        throw Error(ErrorCode::DimensionMismatch, "feature vector has " + std::to_string(x.size()) +
                                                      " values, model expects " + std::to_string(feature_dim_));
    ClassProbabilities sum{};
    for (const auto& t : trees_) {
        const auto& leaf = t.leaf_for(x);
        for (std::size_t c = 0; c < kRegionCount; ++c) sum[c] += leaf[c];
    }
    const double inv = 1.0 / static_cast<double>(trees_.size());
    for (auto& v : sum) v *= inv;
    return sum;
}

std::uint64_t tree_seed(std::uint64_t forest_seed, std::uint32_t tree_index) {
    return derive_seed(forest_seed, {tree_index});
}

namespace {

using Counts = std::array<std::uint64_t, kRegionCount>;
using i128 = __int128;

// Per-feature dense ranks of every row, computed once per training set so
// nodes sort packed integer keys instead of (value, row) pairs.
class ColumnIndex {
public:
    explicit ColumnIndex(const TrainingSet& data) : n_(data.size()), rank_(data.size() * data.dim), values_(data.dim) {
        std::vector<std::pair<double, std::uint32_t>> col(n_);
        for (std::size_t f = 0; f < data.dim; ++f) {
            for (std::size_t i = 0; i < n_; ++i) col[i] = {data.x[i * data.dim + f], static_cast<std::uint32_t>(i)};
            std::sort(col.begin(), col.end());
            auto& vals = values_[f];
            for (std::size_t i = 0; i < n_; ++i) {
                if (vals.empty() || vals.back() < col[i].first) vals.push_back(col[i].first);
                rank_[f * n_ + col[i].second] = static_cast<std::uint32_t>(vals.size() - 1);
            }
        }
        for (const auto& v : values_) {
            std::uint32_t bytes = 1;
            while (bytes < 4 && (v.size() - 1) >> (8 * bytes)) ++bytes;
            rank_bytes_ = std::max(rank_bytes_, bytes);
        }
    }

    // Radix passes needed to order ranks of any feature.
    std::uint32_t rank_bytes() const { return rank_bytes_; }

    std::uint32_t rank(std::uint32_t f, std::uint32_t row) const { return rank_[static_cast<std::size_t>(f) * n_ + row]; }
    double value(std::uint32_t f, std::uint32_t rank) const { return values_[f][rank]; }

private:
    std::size_t n_;
    std::vector<std::uint32_t> rank_;
    std::vector<std::vector<double>> values_;
    std::uint32_t rank_bytes_ = 1;
};

class TreeBuilder {
public:
    TreeBuilder(const TrainingSet& data, const ColumnIndex& index, std::span<const std::uint32_t> weights,
                const ForestConfig& cfg, std::uint64_t seed)
        : data_(data),
          index_(index),
          weights_(weights),
          max_depth_(cfg.max_depth),
          min_leaf_(cfg.min_samples_leaf),
          mtry_(cfg.resolved_features_per_split(data.dim)),
          rng_(seed) {
        for (std::size_t i = 0; i < data.size(); ++i)
            if (weights[i] > 0) rows_.push_back(static_cast<std::uint32_t>(i));
        features_.resize(data.dim);
        std::iota(features_.begin(), features_.end(), 0u);
        keys_.reserve(rows_.size());
    }

    Tree build() {
        grow(0, rows_.size(), 0);
        return std::move(tree_);
    }

private:
    struct Split {
        bool found = false;
        std::uint32_t feature = 0;
        double threshold = 0.0;
        i128 num = 0;  // score = num / den, larger is better
        i128 den = 1;
    };

    void grow(std::size_t lo, std::size_t hi, std::uint32_t depth) {
        Counts counts{};
        std::uint64_t total = 0;
        for (std::size_t i = lo; i < hi; ++i) {
            counts[data_.y[rows_[i]]] += weights_[rows_[i]];
            total += weights_[rows_[i]];
        }
        const auto classes_present = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; });

        Split best;
        if (classes_present > 1 && depth < max_depth_ && total >= 2ull * min_leaf_) best = find_split(lo, hi, counts, total);

        if (!best.found) {
            ClassProbabilities fractions{};
            for (std::size_t c = 0; c < kRegionCount; ++c)
                fractions[c] = static_cast<double>(counts[c]) / static_cast<double>(total);
            tree_.nodes.push_back({-1, static_cast<std::int32_t>(tree_.leaves.size()), 0.0});
            tree_.leaves.push_back(fractions);
            return;
        }

        const std::size_t self = tree_.nodes.size();
        tree_.nodes.push_back({static_cast<std::int32_t>(best.feature), 0, best.threshold});
        // Stable, so every node keeps its rows in ascending order.
        const std::size_t stride = data_.dim;
        std::size_t split_at = lo;
        scratch_.clear();
        for (std::size_t i = lo; i < hi; ++i) {
            const std::uint32_t r = rows_[i];
            if (data_.x[static_cast<std::size_t>(r) * stride + best.feature] <= best.threshold)
                rows_[split_at++] = r;
            else
                scratch_.push_back(r);
        }
        std::copy(scratch_.begin(), scratch_.end(), rows_.begin() + static_cast<std::ptrdiff_t>(split_at));
        grow(lo, split_at, depth + 1);
        tree_.nodes[self].next = static_cast<std::int32_t>(tree_.nodes.size());
        grow(split_at, hi, depth + 1);
    }

    Split find_split(std::size_t lo, std::size_t hi, const Counts& counts, std::uint64_t total) {
        Split best;
        const std::size_t d = features_.size();
        // Draw features without replacement; keep drawing past mtry until a valid split exists.
        for (std::size_t k = 0; k < d; ++k) {
            const std::size_t j = k + static_cast<std::size_t>(rng_.uniform_index(d - k));
            std::swap(features_[k], features_[j]);
            scan_feature(features_[k], lo, hi, counts, total, best);
            if (k + 1 >= mtry_ && best.found) break;
        }
        return best;
    }

    void scan_feature(std::uint32_t f, std::size_t lo, std::size_t hi, const Counts& counts, std::uint64_t total,
                      Split& best) {
        // Key order equals (value, row) order.
        keys_.clear();
        for (std::size_t i = lo; i < hi; ++i)
            keys_.push_back(static_cast<std::uint64_t>(index_.rank(f, rows_[i])) << 32 | rows_[i]);
        sort_keys();

        Counts left{};
        Counts right = counts;
        std::uint64_t sq_left = 0;
        std::uint64_t sq_right = 0;
        for (auto c : counts) sq_right += c * c;
        std::uint64_t w_left = 0;

        for (std::size_t i = 0; i + 1 < keys_.size(); ++i) {
            const auto r = static_cast<std::uint32_t>(keys_[i]);
            const std::uint64_t w = weights_[r];
            const std::uint8_t c = data_.y[r];
            sq_left += (2 * left[c] + w) * w;
            sq_right -= (2 * right[c] - w) * w;
            left[c] += w;
            right[c] -= w;
            w_left += w;

            const auto ra = static_cast<std::uint32_t>(keys_[i] >> 32);
            const auto rb = static_cast<std::uint32_t>(keys_[i + 1] >> 32);
            if (ra == rb) continue;
            const std::uint64_t w_right = total - w_left;
            if (w_left < min_leaf_ || w_right < min_leaf_) continue;

            // Maximizing sum_c L_c^2 / W_L + sum_c R_c^2 / W_R minimizes weighted Gini.
            const i128 num = static_cast<i128>(sq_left) * w_right + static_cast<i128>(sq_right) * w_left;
            const i128 den = static_cast<i128>(w_left) * w_right;
            if (best.found) {
                const i128 lhs = num * best.den;
                const i128 rhs = best.num * den;
                if (lhs < rhs) continue;
                if (lhs == rhs && f > best.feature) continue;
            }
            const double a = index_.value(f, ra);
            const double b = index_.value(f, rb);
            double threshold = a + (b - a) / 2.0;
            if (!(threshold < b)) threshold = a;
            if (best.found && num * best.den == best.num * den && f == best.feature && !(threshold < best.threshold))
                continue;
            best = {true, f, threshold, num, den};
        }
    }

    // Rows arrive ascending, so a stable sort on the rank alone yields (rank, row) order.
    void sort_keys() {
        const std::size_t n = keys_.size();
        if (n < 256) {
            std::sort(keys_.begin(), keys_.end());
            return;
        }
        buffer_.resize(n);
        for (std::uint32_t pass = 0; pass < index_.rank_bytes(); ++pass) {
            const unsigned shift = 32 + 8 * pass;
            std::array<std::size_t, 257> offset{};
            for (auto k : keys_) ++offset[((k >> shift) & 0xff) + 1];
            if (offset[1] == n) continue;  // every key shares this byte
            for (std::size_t b = 1; b < offset.size(); ++b) offset[b] += offset[b - 1];
            for (auto k : keys_) buffer_[offset[(k >> shift) & 0xff]++] = k;
            keys_.swap(buffer_);
        }
    }

    const TrainingSet& data_;
    const ColumnIndex& index_;
    std::span<const std::uint32_t> weights_;
    std::uint32_t max_depth_;
    std::uint32_t min_leaf_;
    std::uint32_t mtry_;
    Rng rng_;
    std::vector<std::uint32_t> rows_;
    std::vector<std::uint32_t> features_;
    std::vector<std::uint64_t> keys_;
    std::vector<std::uint64_t> buffer_;
    std::vector<std::uint32_t> scratch_;
    Tree tree_;
};

void check_training_set(const TrainingSet& data) {
    if (data.size() == 0) throw Error(ErrorCode::EmptyTrainingSet, "no training samples");
    if (data.dim == 0 || data.x.size() != data.size() * data.dim)
        throw Error(ErrorCode::DimensionMismatch, "design matrix does not match its row count and dimension");
    std::array<bool, kRegionCount> seen{};
    for (auto c : data.y) {
        if (c >= kRegionCount) throw Error(ErrorCode::InvalidArgument, "label out of range");
        seen[c] = true;
    }
    if (std::count(seen.begin(), seen.end(), true) < 2)
        throw Error(ErrorCode::EmptyTrainingSet, "training needs at least two classes");
}

Tree train_one(const TrainingSet& data, const ColumnIndex& columns, const ForestConfig& cfg, std::uint32_t index) {
    const std::uint64_t seed = tree_seed(cfg.rng_seed, index);
    const auto weights =
        cfg.bootstrap ? bootstrap_weights(data.size(), seed) : std::vector<std::uint32_t>(data.size(), 1);
    return TreeBuilder(data, columns, weights, cfg, derive_seed(seed, {1})).build();
}

}  // namespace

std::vector<std::uint32_t> bootstrap_weights(std::size_t n, std::uint64_t seed) {
    std::vector<std::uint32_t> weights(n, 0);
    Rng draw(derive_seed(seed, {0}));
    for (std::size_t i = 0; i < n; ++i) ++weights[draw.uniform_index(n)];
    return weights;
}

Tree grow_tree(const TrainingSet& data, std::span<const std::uint32_t> weights, const ForestConfig& cfg,
               std::uint64_t seed) {
    const ColumnIndex columns(data);
    return TreeBuilder(data, columns, weights, cfg, seed).build();
}

ForestModel train(const TrainingSet& data, const ForestConfig& cfg, ExecPolicy policy) {
    cfg.validate();
    check_training_set(data);

    const ColumnIndex columns(data);
    std::vector<Tree> trees(cfg.n_trees);
    const auto n = static_cast<std::int64_t>(cfg.n_trees);
    if (policy == ExecPolicy::Serial) {
        for (std::int64_t i = 0; i < n; ++i) trees[static_cast<std::size_t>(i)] = train_one(data, columns, cfg, static_cast<std::uint32_t>(i));
    } else {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t i = 0; i < n; ++i) trees[static_cast<std::size_t>(i)] = train_one(data, columns, cfg, static_cast<std::uint32_t>(i));
    }

    TrainingDigest digest;
    digest.rng_seed = cfg.rng_seed;
    for (auto c : data.y) ++digest.class_counts[c];
    return ForestModel(cfg, std::move(trees), data.dim, digest);
}

ForestModel train(std::span<const Sample> samples, const ForestConfig& cfg, ExecPolicy policy) {
    return train(to_training_set(samples), cfg, policy);
}

std::vector<ClassProbabilities> predict_batch(const ForestModel& model, const TrainingSet& rows, ExecPolicy policy) {
    std::vector<ClassProbabilities> out(rows.size());
    const auto n = static_cast<std::int64_t>(rows.size());
    if (policy == ExecPolicy::Serial) {
        for (std::int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = model.predict_proba(rows.row(static_cast<std::size_t>(i)));
    } else {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = model.predict_proba(rows.row(static_cast<std::size_t>(i)));
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::array<std::vector<std::size_t>, kRegionCount> group_by_class(std::span<const std::uint8_t> labels) {
    std::array<std::vector<std::size_t>, kRegionCount> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= kRegionCount) throw Error(ErrorCode::InvalidArgument, "label out of range");
        groups[labels[i]].push_back(i);
    }
    for (std::size_t c = 0; c < kRegionCount; ++c)
        if (groups[c].empty())
            throw Error(ErrorCode::EmptyClass, "no samples for region " + std::string(region_name(kAllRegions[c])));
    return groups;
}

std::vector<std::uint8_t> labels_of(std::span<const Sample> samples) {
    std::vector<std::uint8_t> labels;
    labels.reserve(samples.size());
    for (const auto& s : samples) labels.push_back(static_cast<std::uint8_t>(region_index(s.label)));
    return labels;
}

std::vector<Sample> gather(std::span<const Sample> samples, const std::vector<std::size_t>& idx) {
    std::vector<Sample> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(samples[i]);
    return out;
}

}  // namespace

std::vector<std::size_t> subsample_balance(std::span<const std::uint8_t> labels, std::uint64_t seed) {
    auto groups = group_by_class(labels);
    std::size_t target = groups[0].size();
    for (const auto& g : groups) target = std::min(target, g.size());

    std::vector<std::size_t> out;
    out.reserve(target * kRegionCount);
    for (std::size_t c = 0; c < kRegionCount; ++c) {
        auto& g = groups[c];
        Rng rng(derive_seed(seed, {c}));
        for (std::size_t k = 0; k < target; ++k) {
            const std::size_t j = k + static_cast<std::size_t>(rng.uniform_index(g.size() - k));
            std::swap(g[k], g[j]);
            out.push_back(g[k]);
        }
    }
    return out;
}

std::vector<std::size_t> supersample_balance(std::span<const std::uint8_t> labels, std::uint64_t seed) {
    const auto groups = group_by_class(labels);
    std::size_t target = 0;
    for (const auto& g : groups) target = std::max(target, g.size());

    std::vector<std::size_t> out;
    out.reserve(target * kRegionCount);
    for (std::size_t c = 0; c < kRegionCount; ++c) {
        const auto& g = groups[c];
        out.insert(out.end(), g.begin(), g.end());
        Rng rng(derive_seed(seed, {c}));
        for (std::size_t k = g.size(); k < target; ++k) out.push_back(g[rng.uniform_index(g.size())]);
    }
    return out;
}

std::vector<Sample> subsample_balance(std::span<const Sample> samples, std::uint64_t seed) {
    return gather(samples, subsample_balance(labels_of(samples), seed));
}

std::vector<Sample> supersample_balance(std::span<const Sample> samples, std::uint64_t seed) {
    return gather(samples, supersample_balance(labels_of(samples), seed));
}

}  // namespace gzk::forest
