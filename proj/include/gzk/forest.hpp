#pragma once

// Random-forest classifier over the six gaze regions.
//
// Each tree is a CART grown on a bootstrap resample with Gini impurity,
// midpoint thresholds and per-node feature subsampling. Split quality is
// compared with exact integer arithmetic so ties resolve identically on every
// platform: lowest feature index, then lowest threshold.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "gzk/core.hpp"
#include "gzk/features.hpp"

namespace gzk::forest {

using gzk::ExecPolicy;

struct ForestConfig {
    std::uint32_t n_trees = 2000;
    std::uint32_t max_depth = 25;
    std::uint32_t features_per_split = 0;  // 0 = floor(sqrt(d))
    std::uint32_t min_samples_leaf = 1;
    bool bootstrap = true;
    std::uint64_t rng_seed = 0;

    void validate() const;
    std::uint32_t resolved_features_per_split(std::size_t dim) const;
    friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

// Flat preorder node: a split's left child is the next node; `next` is the
// right child for splits and the leaf-table slot for leaves.
struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    std::int32_t next = 0;
    double threshold = 0.0;

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
    std::vector<TreeNode> nodes;
    std::vector<ClassProbabilities> leaves;

    const ClassProbabilities& leaf_for(std::span<const double> x) const;
    std::uint32_t depth() const;
    friend bool operator==(const Tree&, const Tree&) = default;
};

struct TrainingDigest {
    std::array<std::uint64_t, kRegionCount> class_counts{};
    std::uint64_t rng_seed = 0;

    friend bool operator==(const TrainingDigest&, const TrainingDigest&) = default;
};

// Row-major design matrix with region labels.
struct TrainingSet {
    std::size_t dim = 0;
    std::vector<double> x;
    std::vector<std::uint8_t> y;

    std::size_t size() const noexcept { return y.size(); }
    std::span<const double> row(std::size_t i) const { return std::span(x).subspan(i * dim, dim); }
    void add(std::span<const double> row, GazeRegion label);
};

struct Sample {
    features::FeatureVector x;
    GazeRegion label = GazeRegion::Road;
};

TrainingSet to_training_set(std::span<const Sample> samples);

class ForestModel {
public:
    ForestModel() = default;
    ForestModel(ForestConfig config, std::vector<Tree> trees, std::size_t feature_dim, TrainingDigest digest);

    const ForestConfig& config() const noexcept { return config_; }
    const std::vector<Tree>& trees() const noexcept { return trees_; }
    std::size_t feature_dim() const noexcept { return feature_dim_; }
    const TrainingDigest& digest() const noexcept { return digest_; }
    // Class order is the fixed region ordering.
    static constexpr const std::array<GazeRegion, kRegionCount>& class_order() { return kAllRegions; }

    // Mean of the reached leaves' class fractions. Throws DimensionMismatch.
    ClassProbabilities predict_proba(std::span<const double> x) const;
    ClassProbabilities predict_proba(const features::FeatureVector& x) const { return predict_proba(x.values); }

    friend bool operator==(const ForestModel&, const ForestModel&) = default;

private:
    ForestConfig config_;
    std::vector<Tree> trees_;
    std::size_t feature_dim_ = 0;
    TrainingDigest digest_;
};

// Seed of tree i; independent of execution order.
std::uint64_t tree_seed(std::uint64_t forest_seed, std::uint32_t tree_index);

// Multiplicity of each of n rows in the bootstrap resample of the tree with `seed`.
std::vector<std::uint32_t> bootstrap_weights(std::size_t n, std::uint64_t seed);

// Grows one tree on rows weighted by `weights` (bootstrap multiplicities).
Tree grow_tree(const TrainingSet& data, std::span<const std::uint32_t> weights, const ForestConfig& cfg,
               std::uint64_t seed);

// Throws EmptyTrainingSet (no rows or fewer than two classes) and DimensionMismatch.
ForestModel train(const TrainingSet& data, const ForestConfig& cfg, ExecPolicy policy = ExecPolicy::Parallel);
ForestModel train(std::span<const Sample> samples, const ForestConfig& cfg,
                  ExecPolicy policy = ExecPolicy::Parallel);

// Row-wise prediction over a matrix; parallel and serial paths give identical output.
std::vector<ClassProbabilities> predict_batch(const ForestModel& model, const TrainingSet& rows,
                                              ExecPolicy policy = ExecPolicy::Parallel);

// ---------------------------------------------------------------------------
// Class balancing. Both operate on labels and return row indices so one
// selection can be reused across feature modes. Every region must occur
// (EmptyClass otherwise).

// Each class reduced to the minority count, sampled without replacement.
std::vector<std::size_t> subsample_balance(std::span<const std::uint8_t> labels, std::uint64_t seed);
// Each class raised to the majority count: all originals plus draws with replacement.
std::vector<std::size_t> supersample_balance(std::span<const std::uint8_t> labels, std::uint64_t seed);

std::vector<Sample> subsample_balance(std::span<const Sample> samples, std::uint64_t seed);
std::vector<Sample> supersample_balance(std::span<const Sample> samples, std::uint64_t seed);

}  // namespace gzk::forest
