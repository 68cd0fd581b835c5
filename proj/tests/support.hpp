#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

#include <doctest.h>

#include "gzk/core.hpp"
#include "gzk/forest.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("gzk-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Forest of one leaf-only tree that always answers `p`.
inline gzk::forest::ForestModel constant_model(const gzk::ClassProbabilities& p, std::size_t dim) {
    gzk::forest::Tree t;
    t.nodes.push_back({-1, 0, 0.0});
    t.leaves.push_back(p);
    gzk::forest::ForestConfig cfg;
    cfg.n_trees = 1;
    return gzk::forest::ForestModel(cfg, {t}, dim, {});
}

template <typename F>
gzk::ErrorCode error_of(F&& f) {
    try {
        f();
    } catch (const gzk::Error& e) {
        return e.code();
    }
    FAIL("expected gzk::Error");
    return gzk::ErrorCode::Io;
}

}  // namespace testing
