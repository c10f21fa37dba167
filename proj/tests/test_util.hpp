#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <Eigen/Core>

#include "mtfs/dataset.hpp"

namespace testutil {

inline std::filesystem::path make_temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("mtfs_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    return path.string();
}

// Small dense dataset with gaussian features and arbitrary targets; handy for
// exercising the objective and solver on instances a loop oracle can check.
inline mtfs::Dataset random_dataset(Eigen::Index n, Eigen::Index m, std::uint64_t seed,
                                    bool standardized_flag = true) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    mtfs::Dataset d;
    d.features.resize(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j) d.features(i, j) = gauss(rng);
    d.rul.resize(n);
    d.failure_type.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d.rul[i] = gauss(rng);
        d.failure_type[i] = unit(rng) < 0.5 ? 0.0 : 1.0;
    }
    for (Eigen::Index j = 0; j < m; ++j) d.feature_names.push_back("f" + std::to_string(j + 1));
    d.standardized = standardized_flag;
    return d;
}

inline mtfs::ModelParams random_params(Eigen::Index m, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, scale);
    mtfs::ModelParams p(m);
    p.a0 = gauss(rng);
    p.b0 = gauss(rng);
    for (Eigen::Index j = 0; j < m; ++j) {
        p.A[j] = gauss(rng);
        p.B[j] = gauss(rng);
    }
    return p;
}

}  // namespace testutil
