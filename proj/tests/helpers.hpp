#pragma once

// Shared test utilities: central-difference gradient checks, temp
// directories, and whole-file reads for byte-identity assertions.

#include "rld/numkit.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>

namespace rldtest {

inline bool grad_close(double analytic, double fd, double rtol = 1e-3, double atol = 1e-5) {
    return std::abs(analytic - fd) <=
           rtol * std::max(std::abs(analytic), std::abs(fd)) + atol;
}

struct GradIssue {
    std::size_t index = 0;
    double analytic = 0.0;
    double fd = 0.0;
};

/// Central difference on every entry of params; loss() must recompute the
/// objective from the current parameter values. Returns the first entry
/// whose recorded analytic gradient disagrees.
inline std::optional<GradIssue> fd_mismatch(float* params, const float* grads, std::size_t n,
                                            const std::function<double()>& loss,
                                            double step = 1e-3, double rtol = 1e-3,
                                            double atol = 1e-5) {
    for (std::size_t i = 0; i < n; ++i) {
        const float saved = params[i];
        params[i] = static_cast<float>(saved + step);
        const double lp = loss();
        params[i] = static_cast<float>(saved - step);
        const double lm = loss();
        params[i] = saved;
        const double fd = (lp - lm) / (2.0 * step);
        if (!grad_close(grads[i], fd, rtol, atol)) return GradIssue{i, grads[i], fd};
    }
    return std::nullopt;
}

/// Fresh directory under the system temp root.
inline std::string temp_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const auto dir = std::filesystem::temp_directory_path() /
                     ("rld_test_" + tag + "_" + std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace rldtest
