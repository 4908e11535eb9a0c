#include "leamatch/scan.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>

#include "leamatch/digest.hpp"

namespace leamatch {

static_assert(std::endian::native == std::endian::little,
              "LEASCAN1 payload is written with native little-endian floats");

namespace {

constexpr std::string_view kMagic = "LEASCAN1";

float canonical_nan() { return std::numeric_limits<float>::quiet_NaN(); }

std::string header_json(const SurfaceScan& scan) {
    nlohmann::json h;
    h["bullet_id"] = scan.bullet_id;
    h["land_id"] = scan.land_id;
    if (scan.barrel_id) h["barrel_id"] = *scan.barrel_id;
    h["rows"] = scan.rows();
    h["cols"] = scan.cols();
    h["x_res_um"] = scan.x_res_um;
    h["y_res_um"] = scan.y_res_um;
    return h.dump();
}

std::string payload_bytes(const SurfaceScan& scan) {
    const auto n = static_cast<std::size_t>(scan.heights.size());
    std::string out(n * sizeof(float), '\0');
    const float nan = canonical_nan();
    for (Eigen::Index r = 0; r < scan.rows(); ++r) {
        for (Eigen::Index c = 0; c < scan.cols(); ++c) {
            const float v = scan.mask(r, c) ? nan : scan.heights(r, c);
            std::memcpy(out.data() + (r * scan.cols() + c) * sizeof(float), &v, sizeof(float));
        }
    }
    return out;
}

std::uint32_t read_u32le(std::string_view bytes, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[at + i]);
    return v;
}

}  // namespace

double SurfaceScan::masked_fraction() const {
    if (mask.size() == 0) return 0.0;
    return static_cast<double>(mask.count()) / static_cast<double>(mask.size());
}

void SurfaceScan::canonicalize() {
    const float nan = canonical_nan();
    for (Eigen::Index i = 0; i < heights.size(); ++i)
        if (mask.data()[i]) heights.data()[i] = nan;
}

bool bit_equal(const SurfaceScan& a, const SurfaceScan& b) {
    if (a.bullet_id != b.bullet_id || a.land_id != b.land_id || a.barrel_id != b.barrel_id)
        return false;
    if (std::bit_cast<std::uint64_t>(a.x_res_um) != std::bit_cast<std::uint64_t>(b.x_res_um) ||
        std::bit_cast<std::uint64_t>(a.y_res_um) != std::bit_cast<std::uint64_t>(b.y_res_um))
        return false;
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    if (a.mask.rows() != b.mask.rows() || a.mask.cols() != b.mask.cols()) return false;
    if ((a.mask != b.mask).any()) return false;
    for (Eigen::Index i = 0; i < a.heights.size(); ++i) {
        if (a.mask.data()[i]) continue;
        if (std::bit_cast<std::uint32_t>(a.heights.data()[i]) !=
            std::bit_cast<std::uint32_t>(b.heights.data()[i]))
            return false;
    }
    return true;
}

ValidationReport validate_scan(const SurfaceScan& scan) {
    ValidationReport report;
    auto add = [&](ErrorCode code, Eigen::Index r, Eigen::Index c, std::string detail) {
        report.violations.push_back({code, r, c, std::move(detail)});
    };
    if (scan.rows() < kMinScanDim || scan.cols() < kMinScanDim)
        add(ErrorCode::TooSmall, -1, -1,
            "grid " + std::to_string(scan.rows()) + "x" + std::to_string(scan.cols()) +
                " is below 32x32");
    if (!(scan.x_res_um > 0.0) || !(scan.y_res_um > 0.0))
        add(ErrorCode::BadResolution, -1, -1, "grid spacing must be positive");
    if (scan.mask.rows() != scan.rows() || scan.mask.cols() != scan.cols()) {
        add(ErrorCode::DimensionMismatch, -1, -1, "mask shape differs from height grid");
        return report;
    }
    for (Eigen::Index r = 0; r < scan.rows(); ++r)
        for (Eigen::Index c = 0; c < scan.cols(); ++c)
            if (!scan.mask(r, c) && !std::isfinite(scan.heights(r, c)))
                add(ErrorCode::NonFiniteUnmasked, r, c, "non-finite height in unmasked cell");
    if (scan.mask.size() > 0 && scan.masked_fraction() >= kMaxMaskedFraction)
        add(ErrorCode::TooSparse, -1, -1,
            "masked fraction " + std::to_string(scan.masked_fraction()));
    return report;
}

std::string encode_scan(const SurfaceScan& scan) {
    const std::string header = header_json(scan);
    const std::string payload = payload_bytes(scan);
    std::string out;
    out.reserve(kMagic.size() + 4 + header.size() + payload.size());
    out.append(kMagic);
    const auto len = static_cast<std::uint32_t>(header.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xFF));
    out.append(header);
    out.append(payload);
    return out;
}

std::uint64_t scan_digest(const SurfaceScan& scan) {
    Fnv1a h;
    h.update(header_json(scan));
    h.update(payload_bytes(scan));
    return h.value();
}

SurfaceScan decode_scan(std::string_view bytes) {
    if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic)
        throw Error(ErrorCode::BadMagic, "stream does not start with LEASCAN1");
    if (bytes.size() < 12) throw Error(ErrorCode::CorruptHeader, "truncated header length");
    const std::uint32_t hlen = read_u32le(bytes, 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(hlen))
        throw Error(ErrorCode::CorruptHeader, "header length exceeds stream");

    nlohmann::json h;
    try {
        h = nlohmann::json::parse(bytes.substr(12, hlen));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptHeader, e.what());
    }

    SurfaceScan scan;
    std::int64_t rows = 0, cols = 0;
    try {
        scan.bullet_id = h.at("bullet_id").get<std::string>();
        scan.land_id = h.at("land_id").get<std::string>();
        if (h.contains("barrel_id")) scan.barrel_id = h.at("barrel_id").get<std::string>();
        rows = h.at("rows").get<std::int64_t>();
        cols = h.at("cols").get<std::int64_t>();
        scan.x_res_um = h.at("x_res_um").get<double>();
        scan.y_res_um = h.at("y_res_um").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptHeader, e.what());
    }
    if (rows < 0 || cols < 0 || rows > (1 << 20) || cols > (1 << 20))
        throw Error(ErrorCode::CorruptHeader, "implausible grid dimensions");

    const std::size_t payload_len = bytes.size() - 12 - hlen;
    const auto expected = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 4;
    if (payload_len != expected)
        throw Error(ErrorCode::DimensionMismatch,
                    "header declares " + std::to_string(rows) + "x" + std::to_string(cols) +
                        " but payload holds " + std::to_string(payload_len / 4) + " values");
    if (rows < kMinScanDim || cols < kMinScanDim) throw Error(ErrorCode::TooSmall, "grid smaller than 32x32");
    if (!(scan.x_res_um > 0.0) || !(scan.y_res_um > 0.0))
        throw Error(ErrorCode::BadResolution, "grid spacing must be positive");

    scan.heights.resize(rows, cols);
    scan.mask.resize(rows, cols);
    const char* p = bytes.data() + 12 + hlen;
    for (Eigen::Index i = 0; i < scan.heights.size(); ++i) {
        float v;
        std::memcpy(&v, p + i * 4, 4);
        const bool missing = std::isnan(v);
        scan.mask.data()[i] = missing;
        scan.heights.data()[i] = missing ? canonical_nan() : v;
        if (!missing && !std::isfinite(v))
            throw Error(ErrorCode::NonFiniteUnmasked,
                        "row " + std::to_string(i / cols) + " col " + std::to_string(i % cols));
    }
    if (scan.masked_fraction() >= kMaxMaskedFraction)
        throw Error(ErrorCode::TooSparse, "masked fraction " + std::to_string(scan.masked_fraction()));
    return scan;
}

SurfaceScan load_scan(std::istream& in) {
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_scan(bytes);
}

std::uint64_t save_scan(const SurfaceScan& scan, std::ostream& out) {
    const std::string bytes = encode_scan(scan);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed");
    return scan_digest(scan);
}

SurfaceScan load_scan_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    return load_scan(in);
}

std::uint64_t save_scan_file(const SurfaceScan& scan, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot create " + path);
    return save_scan(scan, out);
}

Bullet make_bullet(std::string bullet_id, std::vector<ScanPtr> lands) {
    std::set<std::string> seen;
    for (const auto& land : lands) {
        if (!land) throw Error(ErrorCode::InvalidBullet, "null land scan");
        if (land->bullet_id != bullet_id)
            throw Error(ErrorCode::InvalidBullet,
                        "land " + land->land_id + " belongs to " + land->bullet_id);
        if (!seen.insert(land->land_id).second)
            throw Error(ErrorCode::InvalidBullet, "duplicate land id " + land->land_id);
    }
    if (lands.empty()) throw Error(ErrorCode::InvalidBullet, "bullet has no lands");
    return Bullet{std::move(bullet_id), std::move(lands)};
}

}  // namespace leamatch
