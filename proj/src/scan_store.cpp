#include "leamatch/scan_store.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "leamatch/digest.hpp"

namespace leamatch {

namespace fs = std::filesystem;

namespace {

std::string sanitize(const std::string& id) {
    std::string out;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '-' || c == '_' || c == '.';
        out.push_back(ok ? c : '_');
    }
    return out;
}

std::string read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

ScanStore::ScanStore(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_);
    const fs::path index_path = root_ / "index.json";
    if (!fs::exists(index_path)) return;

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_all(index_path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::StoreCorrupt, std::string("index.json: ") + e.what());
    }
    for (const auto& e : doc.at("entries")) {
        Key key{e.at("bullet_id").get<std::string>(), e.at("land_id").get<std::string>()};
        Record rec{e.at("file").get<std::string>(),
                   std::stoull(e.at("digest").get<std::string>(), nullptr, 16)};
        SurfaceScan scan;
        try {
            scan = decode_scan(read_all(root_ / rec.file));
        } catch (const Error& err) {
            throw Error(ErrorCode::StoreCorrupt, rec.file + ": " + err.what());
        }
        if (scan_digest(scan) != rec.digest)
            throw Error(ErrorCode::StoreCorrupt, rec.file + ": digest mismatch");
        if (!index_.emplace(std::move(key), std::move(rec)).second)
            throw Error(ErrorCode::StoreCorrupt, "duplicate index entry");
    }
}

std::uint64_t ScanStore::put(const SurfaceScan& scan) {
    const auto report = validate_scan(scan);
    if (!report.ok()) throw Error(report.violations.front().code, report.violations.front().detail);

    std::unique_lock lock(mutex_);
    const std::string file = sanitize(scan.bullet_id) + "__" + sanitize(scan.land_id) + ".leascan";
    const fs::path tmp = root_ / (file + ".tmp");
    const std::uint64_t digest = save_scan_file(scan, tmp.string());
    fs::rename(tmp, root_ / file);
    index_[{scan.bullet_id, scan.land_id}] = Record{file, digest};
    write_index_locked();
    return digest;
}

void ScanStore::write_index_locked() const {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [key, rec] : index_) {
        entries.push_back({{"bullet_id", key.first},
                           {"land_id", key.second},
                           {"file", rec.file},
                           {"digest", digest_hex(rec.digest)}});
    }
    const nlohmann::json doc{{"entries", entries}};
    const fs::path tmp = root_ / "index.json.tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write index");
        out << doc.dump(1) << '\n';
    }
    fs::rename(tmp, root_ / "index.json");
}

SurfaceScan ScanStore::get(const std::string& bullet_id, const std::string& land_id) const {
    Record rec;
    {
        std::shared_lock lock(mutex_);
        auto it = index_.find({bullet_id, land_id});
        if (it == index_.end()) throw Error(ErrorCode::UnknownId, bullet_id + "/" + land_id);
        rec = it->second;
    }
    SurfaceScan scan = decode_scan(read_all(root_ / rec.file));
    if (scan_digest(scan) != rec.digest)
        throw Error(ErrorCode::StoreCorrupt, rec.file + ": digest mismatch");
    return scan;
}

bool ScanStore::contains(const std::string& bullet_id, const std::string& land_id) const {
    std::shared_lock lock(mutex_);
    return index_.count({bullet_id, land_id}) > 0;
}

std::vector<std::string> ScanStore::land_ids(const std::string& bullet_id) const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [key, rec] : index_)
        if (key.first == bullet_id) out.push_back(key.second);
    return out;
}

Bullet ScanStore::bullet(const std::string& bullet_id) const {
    const auto ids = land_ids(bullet_id);
    if (ids.empty()) throw Error(ErrorCode::UnknownId, "bullet " + bullet_id);
    std::vector<ScanPtr> lands;
    for (const auto& land : ids) lands.push_back(std::make_shared<const SurfaceScan>(get(bullet_id, land)));
    return make_bullet(bullet_id, std::move(lands));
}

std::vector<std::string> ScanStore::bullet_ids() const {
    std::shared_lock lock(mutex_);
    std::set<std::string> ids;
    for (const auto& [key, rec] : index_) ids.insert(key.first);
    return {ids.begin(), ids.end()};
}

std::size_t ScanStore::size() const {
    std::shared_lock lock(mutex_);
    return index_.size();
}

std::map<ScanStore::Key, ScanStore::Record> ScanStore::index() const {
    std::shared_lock lock(mutex_);
    return index_;
}

}  // namespace leamatch
