#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "leamatch/error.hpp"

namespace leamatch {

/// Height samples in micrometres, row-major, row 0 = bullet base.
using HeightGrid = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// true = missing / invalid cell.
using MaskGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr Eigen::Index kMinScanDim = 32;
inline constexpr double kMaxMaskedFraction = 0.9;

/// Scan of one land engraved area. Masked cells carry no height semantics;
/// after canonicalize() their height is a quiet NaN, which is also how
/// they are written to disk.
struct SurfaceScan {
    std::string bullet_id;
    std::string land_id;
    std::optional<std::string> barrel_id;
    HeightGrid heights;
    MaskGrid mask;
    double x_res_um = 1.0;
    double y_res_um = 1.0;

    Eigen::Index rows() const { return heights.rows(); }
    Eigen::Index cols() const { return heights.cols(); }
    double masked_fraction() const;

    /// Sets every masked height to the canonical NaN.
    void canonicalize();
};

/// Bit-exact comparison of metadata, mask and unmasked heights.
bool bit_equal(const SurfaceScan& a, const SurfaceScan& b);

struct Violation {
    ErrorCode code;
    Eigen::Index row = -1;
    Eigen::Index col = -1;
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_scan(const SurfaceScan& scan);

/// LEASCAN1 codec. decode throws Error with BadMagic, CorruptHeader,
/// DimensionMismatch, TooSmall, BadResolution, TooSparse or
/// NonFiniteUnmasked.
std::string encode_scan(const SurfaceScan& scan);
SurfaceScan decode_scan(std::string_view bytes);

/// Digest of the JSON header bytes followed by the float payload bytes.
std::uint64_t scan_digest(const SurfaceScan& scan);

SurfaceScan load_scan(std::istream& in);
std::uint64_t save_scan(const SurfaceScan& scan, std::ostream& out);

SurfaceScan load_scan_file(const std::string& path);
std::uint64_t save_scan_file(const SurfaceScan& scan, const std::string& path);

using ScanPtr = std::shared_ptr<const SurfaceScan>;

/// Lands are cyclic: lands[i] is physically adjacent to lands[(i+1) % n].
struct Bullet {
    std::string bullet_id;
    std::vector<ScanPtr> lands;

    int n_lands() const { return static_cast<int>(lands.size()); }
};

/// Throws Error(InvalidBullet) on duplicate land ids or mismatched bullet ids.
Bullet make_bullet(std::string bullet_id, std::vector<ScanPtr> lands);

}  // namespace leamatch
