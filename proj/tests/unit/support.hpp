#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "doseguard/rng.hpp"
#include "doseguard/sparse_matrix.hpp"

namespace doseguard::testing {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("doseguard_" + tag + "_" + std::to_string(std::random_device{}()));
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

inline SparseMatrix random_sparse(Rng& rng, std::uint64_t rows, std::uint64_t cols, double density,
                                  bool small_integers = false) {
    std::vector<float> dense(rows * cols, 0.0f);
    for (auto& v : dense) {
        if (rng.uniform() < density) {
            v = small_integers ? static_cast<float>(rng.integer(-3, 3)) : static_cast<float>(rng.uniform(-2.0, 2.0));
        }
    }
    return SparseMatrix::from_dense(dense, rows, cols);
}

inline std::vector<int> random_labels(Rng& rng, std::size_t n, double rate) {
    std::vector<int> y(n);
    for (auto& v : y) v = rng.bernoulli(rate) ? 1 : 0;
    return y;
}

}  // namespace doseguard::testing
