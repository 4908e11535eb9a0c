#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "leamatch/config.hpp"
#include "leamatch/forest.hpp"
#include "leamatch/scan.hpp"
#include "leamatch/surface.hpp"
#include "leamatch/synth.hpp"

namespace leamatch::testing {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// rows x cols scan with heights h(r, c) = base + 0.01 r + sin(c / 7).
SurfaceScan plain_scan(int rows, int cols, const std::string& bullet = "B1", const std::string& land = "L1");

/// Moving-average smoothed gaussian noise with unit-ish amplitude.
VectorXd smooth_noise(Eigen::Index n, std::uint64_t seed, int window = 5, double sd = 1.0);

/// Small forest trained on a 6-barrel synthetic set (cached per process).
const Forest& small_forest();

/// The 6-barrel dataset small_forest() was trained on.
const Dataset& small_dataset();

}  // namespace leamatch::testing
