#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "leamatch/scan.hpp"

namespace leamatch {

/// Directory of LEASCAN1 files plus an index.json mapping
/// (bullet_id, land_id) to file name and content digest.
///
/// Opening verifies every indexed file against its digest and throws
/// Error(StoreCorrupt) on mismatch. Writers are serialized; readers see
/// either the state before or after a put, never a partial write.
class ScanStore {
public:
    struct Record {
        std::string file;
        std::uint64_t digest = 0;
    };
    using Key = std::pair<std::string, std::string>;

    /// Creates the directory if it does not exist.
    explicit ScanStore(std::filesystem::path root);

    ScanStore(const ScanStore&) = delete;
    ScanStore& operator=(const ScanStore&) = delete;

    std::uint64_t put(const SurfaceScan& scan);
    SurfaceScan get(const std::string& bullet_id, const std::string& land_id) const;
    bool contains(const std::string& bullet_id, const std::string& land_id) const;

    /// Lands ordered by land_id.
    Bullet bullet(const std::string& bullet_id) const;
    std::vector<std::string> bullet_ids() const;
    std::vector<std::string> land_ids(const std::string& bullet_id) const;
    std::size_t size() const;
    std::map<Key, Record> index() const;

    const std::filesystem::path& root() const { return root_; }

private:
    void write_index_locked() const;

    std::filesystem::path root_;
    mutable std::shared_mutex mutex_;
    std::map<Key, Record> index_;
};

}  // namespace leamatch
