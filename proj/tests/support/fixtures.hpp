#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "pacmetric/embedkit.hpp"
#include "pacmetric/random.hpp"

namespace fixtures {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("pacmetric-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
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

inline pacmetric::Matrix gaussian(std::size_t rows, std::size_t cols, pacmetric::Rng& rng, double sigma = 1.0) {
    pacmetric::Matrix m(rows, cols);
    for (auto& x : m.flat()) x = sigma * pacmetric::standard_normal(rng);
    return m;
}

inline pacmetric::Matrix unit_rows(std::size_t rows, std::size_t cols, pacmetric::Rng& rng) {
    return pacmetric::l2_normalize(gaussian(rows, cols, rng));
}

/// Values exactly representable in float32, so file round-trips are exact.
inline pacmetric::Matrix float_exact(std::size_t rows, std::size_t cols, pacmetric::Rng& rng) {
    pacmetric::Matrix m = gaussian(rows, cols, rng);
    for (auto& x : m.flat()) x = static_cast<double>(static_cast<float>(x));
    return m;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

}  // namespace fixtures
