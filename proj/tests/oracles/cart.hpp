#pragma once

// Exhaustive CART: every feature and every midpoint between distinct values
// is scored from scratch at each node. Weighted Gini, ties to the lowest
// feature and then the lowest threshold.

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <set>
#include <span>
#include <vector>

#include "gzk/forest.hpp"

namespace oracle {

struct CartNode {
    bool leaf = true;
    std::size_t feature = 0;
    double threshold = 0.0;
    gzk::ClassProbabilities fractions{};
    std::unique_ptr<CartNode> left, right;
};

class Cart {
public:
    Cart(const gzk::forest::TrainingSet& data, std::span<const std::uint32_t> weights, std::uint32_t max_depth,
         std::uint32_t min_leaf)
        : data_(data), weights_(weights), max_depth_(max_depth), min_leaf_(min_leaf) {}

    std::unique_ptr<CartNode> build() {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < data_.size(); ++i)
            if (weights_[i] > 0) rows.push_back(i);
        return grow(rows, 0);
    }

    static const gzk::ClassProbabilities& predict(const CartNode& root, std::span<const double> x) {
        const CartNode* n = &root;
        while (!n->leaf) n = x[n->feature] <= n->threshold ? n->left.get() : n->right.get();
        return n->fractions;
    }

private:
    using Counts = std::array<std::int64_t, gzk::kRegionCount>;
    using i128 = __int128;

    Counts count(const std::vector<std::size_t>& rows) const {
        Counts c{};
        for (auto r : rows) c[data_.y[r]] += weights_[r];
        return c;
    }

    static std::int64_t sum(const Counts& c) {
        std::int64_t s = 0;
        for (auto v : c) s += v;
        return s;
    }

    std::unique_ptr<CartNode> grow(const std::vector<std::size_t>& rows, std::uint32_t depth) {
        auto node = std::make_unique<CartNode>();
        const Counts all = count(rows);
        const std::int64_t total = sum(all);
        for (std::size_t c = 0; c < gzk::kRegionCount; ++c)
            node->fractions[c] = static_cast<double>(all[c]) / static_cast<double>(total);
        const auto present = std::count_if(all.begin(), all.end(), [](auto v) { return v > 0; });
        if (present < 2 || depth >= max_depth_ || total < 2 * static_cast<std::int64_t>(min_leaf_)) return node;

        bool found = false;
        i128 best_num = 0, best_den = 1;
        std::size_t best_f = 0;
        double best_t = 0.0;
        for (std::size_t f = 0; f < data_.dim; ++f) {
            std::set<double> values;
            for (auto r : rows) values.insert(data_.x[r * data_.dim + f]);
            for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
                const double t = (*it + *std::next(it)) / 2.0;
                std::vector<std::size_t> l, r;
                for (auto row : rows) (data_.x[row * data_.dim + f] <= t ? l : r).push_back(row);
                const Counts cl = count(l), cr = count(r);
                const std::int64_t wl = sum(cl), wr = sum(cr);
                if (wl < static_cast<std::int64_t>(min_leaf_) || wr < static_cast<std::int64_t>(min_leaf_)) continue;
                // Gini impurity sum W_k (1 - sum_c p_c^2) = W - (sum L^2 / W_L + sum R^2 / W_R).
                i128 sl = 0, sr = 0;
                for (auto v : cl) sl += static_cast<i128>(v) * v;
                for (auto v : cr) sr += static_cast<i128>(v) * v;
                const i128 num = sl * wr + sr * wl;
                const i128 den = static_cast<i128>(wl) * wr;
                if (!found || num * best_den > best_num * den) {
                    found = true;
                    best_num = num;
                    best_den = den;
                    best_f = f;
                    best_t = t;
                }
            }
        }
        if (!found) return node;

        node->leaf = false;
        node->feature = best_f;
        node->threshold = best_t;
        std::vector<std::size_t> l, r;
        for (auto row : rows) (data_.x[row * data_.dim + best_f] <= best_t ? l : r).push_back(row);
        node->left = grow(l, depth + 1);
        node->right = grow(r, depth + 1);
        return node;
    }

    const gzk::forest::TrainingSet& data_;
    std::span<const std::uint32_t> weights_;
    std::uint32_t max_depth_;
    std::uint32_t min_leaf_;
};

// Structural equality between an oracle tree and a flat preorder tree.
inline bool same_tree(const CartNode& a, const gzk::forest::Tree& t, std::size_t& i) {
    const auto& n = t.nodes[i];
    if (a.leaf != n.is_leaf()) return false;
    if (a.leaf) {
        ++i;
        return a.fractions == t.leaves[static_cast<std::size_t>(n.next)];
    }
    if (a.feature != static_cast<std::size_t>(n.feature) || a.threshold != n.threshold) return false;
    const auto right = static_cast<std::size_t>(n.next);
    ++i;
    if (!same_tree(*a.left, t, i)) return false;
    if (i != right) return false;
    return same_tree(*a.right, t, i);
}

}  // namespace oracle
