#include "leamatch/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <cstdio>
#include <regex>
#include <set>

#include "leamatch/config.hpp"
#include "leamatch/digest.hpp"

namespace leamatch {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json series(const VectorXd& values, const MaskVector& mask) {
    json out = json::array();
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (mask[i] || !std::isfinite(values[i]))
            out.push_back(nullptr);
        else
            out.push_back(values[i]);
    }
    return out;
}

json series(const VectorXd& values) { return series(values, no_mask(values.size())); }

json code_or_null(const std::optional<ErrorCode>& code) {
    return code ? json(std::string(to_string(*code))) : json(nullptr);
}

json grooves_json(const GrooveBounds& g) {
    return {{"left_index", g.left_index},
            {"right_index", g.right_index},
            {"left_found", g.left_found},
            {"right_found", g.right_found}};
}

json features_json(const FeatureVector& fv) {
    const auto x = std::array<double, kFeatureCount>{fv.ccf,
                                                     fv.lag_um,
                                                     fv.D,
                                                     static_cast<double>(fv.n_matches),
                                                     static_cast<double>(fv.n_mismatches),
                                                     static_cast<double>(fv.cms),
                                                     static_cast<double>(fv.non_cms),
                                                     fv.sum_peaks,
                                                     fv.overlap_frac};
    json out = json::object();
    for (std::size_t k = 0; k < kFeatureCount; ++k) out[kFeatureNames[k]] = x[k];
    return out;
}

json land_cell_json(const ScoreMatrix& m, const ProcessedBullet& a, const ProcessedBullet& b, int i, int j) {
    json cell{{"row", i}, {"col", j}, {"land_a", m.lands_a[i]}, {"land_b", m.lands_b[j]}};
    const auto& cmp = m.comparisons[i][j];
    if (m.unavailable(i, j) || !cmp) {
        cell["available"] = false;
        cell["score"] = nullptr;
        const auto& err = a.lands[i].error ? a.lands[i].error : b.lands[j].error;
        cell["unavailable_reason"] = err ? std::string(to_string(*err)) : std::string(to_string(ErrorCode::FeatureUnavailable));
        return cell;
    }
    cell["available"] = true;
    cell["score"] = m.scores(i, j);
    cell["lag"] = cmp->alignment.lag;
    cell["ccf"] = cmp->alignment.ccf;
    cell["overlap_len"] = cmp->alignment.overlap_len;
    cell["features"] = features_json(cmp->features);
    return cell;
}

const ProcessedLand& land_at(const ProcessedBullet& b, int i) { return b.lands.at(static_cast<std::size_t>(i)); }

void check_case_id(const std::string& id) {
    static const std::regex ok("[A-Za-z0-9_][A-Za-z0-9_.-]{0,63}");
    if (!std::regex_match(id, ok)) throw Error(ErrorCode::BadRequest, "case id '" + id + "' is not allowed");
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::StoreCorrupt, path.string() + ": " + e.what());
    }
}

void write_file_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace

int CaseArtifacts::index_of(const std::string& bullet_id) const {
    const auto it = std::find(bullet_ids.begin(), bullet_ids.end(), bullet_id);
    if (it == bullet_ids.end()) throw Error(ErrorCode::UnknownId, "bullet " + bullet_id + " is not in case " + case_id);
    return static_cast<int>(it - bullet_ids.begin());
}

json artifacts_json(const CaseArtifacts& art) {
    json j;
    j["case_id"] = art.case_id;
    j["cfg_digest"] = digest_hex(art.cfg_digest);
    j["forest_digest"] = digest_hex(art.forest_digest);
    json bullets = json::array();
    for (std::size_t b = 0; b < art.bullets.size(); ++b) {
        json lands = json::array();
        for (std::size_t l = 0; l < art.bullets[b].lands.size(); ++l) {
            const auto& land = art.bullets[b].lands[l];
            json lj{{"land_id", land.land_id},
                    {"scan_digest", digest_hex(scan_digest(*art.scans[b].lands[l]))},
                    {"error", code_or_null(land.error)}};
            if (land.artifacts) {
                const auto& a = *land.artifacts;
                lj["crosscut_row"] = a.crosscut.row_index;
                lj["band"] = a.crosscut.band;
                lj["stability"] = a.crosscut.stability;
                lj["grooves"] = grooves_json(a.grooves);
                lj["signature"] = series(a.signature.residuals, a.signature.mask);
            }
            lands.push_back(std::move(lj));
        }
        bullets.push_back({{"bullet_id", art.bullet_ids[b]}, {"lands", std::move(lands)}});
    }
    j["bullets"] = std::move(bullets);
    json grid = json::array();
    for (std::size_t r = 0; r < art.grid.size(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < art.grid[r].size(); ++c) {
            const auto& cell = art.grid[r][c];
            json cj{{"error", code_or_null(cell.error)}};
            if (cell.comparison) {
                const auto& bc = *cell.comparison;
                cj["score"] = bc.score;
                cj["by_convention"] = bc.by_convention;
                cj["phase"] = bc.phase ? json(*bc.phase) : json(nullptr);
                if (bc.matrix) {
                    json cells = json::array();
                    for (int i = 0; i < bc.matrix->n(); ++i)
                        for (int jj = 0; jj < static_cast<int>(bc.matrix->scores.cols()); ++jj)
                            cells.push_back(land_cell_json(*bc.matrix, art.bullets[r], art.bullets[c], i, jj));
                    cj["cells"] = std::move(cells);
                }
            }
            row.push_back(std::move(cj));
        }
        grid.push_back(std::move(row));
    }
    j["grid"] = std::move(grid);
    return j;
}

CaseArtifacts compute_artifacts(const std::string& case_id, const std::vector<Bullet>& scans, const Forest& forest,
                                const PipelineConfig& cfg) {
    CaseArtifacts art;
    art.case_id = case_id;
    art.scans = scans;
    for (const auto& b : scans) {
        art.bullet_ids.push_back(b.bullet_id);
        art.bullets.push_back(process_bullet(b, cfg.surface));
    }
    const std::size_t n = scans.size();
    art.grid.assign(n, std::vector<BulletCell>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            try {
                art.grid[i][j].comparison = bullet_score(art.bullets[i], art.bullets[j], forest, cfg.striae);
            } catch (const Error& e) {
                art.grid[i][j].error = e.code();
            }
        }
    }
    art.cfg_digest = pipeline_digest(cfg);
    art.forest_digest = forest_digest(forest);
    art.artifact_digest = fnv1a(artifacts_json(art).dump());
    return art;
}

DownsampledGrid downsample(const SurfaceScan& scan, int max_dim) {
    DownsampledGrid out;
    const Eigen::Index big = std::max(scan.rows(), scan.cols());
    out.factor = std::max<int>(1, static_cast<int>((big + max_dim - 1) / max_dim));
    const Eigen::Index f = out.factor;
    const Eigen::Index rows = (scan.rows() + f - 1) / f;
    const Eigen::Index cols = (scan.cols() + f - 1) / f;
    out.heights = Eigen::MatrixXd::Zero(rows, cols);
    out.mask.setConstant(rows, cols, true);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            double sum = 0.0;
            int count = 0;
            for (Eigen::Index rr = r * f; rr < std::min(scan.rows(), (r + 1) * f); ++rr)
                for (Eigen::Index cc = c * f; cc < std::min(scan.cols(), (c + 1) * f); ++cc)
                    if (!scan.mask(rr, cc)) {
                        sum += scan.heights(rr, cc);
                        ++count;
                    }
            if (count > 0) {
                out.heights(r, c) = sum / count;
                out.mask(r, c) = false;
            }
        }
    }
    return out;
}

namespace {

json l1_payload(const CaseArtifacts& art) {
    json cells = json::array();
    const int n = static_cast<int>(art.bullet_ids.size());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const auto& cell = art.grid[i][j];
            json cj{{"row", i},
                    {"col", j},
                    {"bullet_a", art.bullet_ids[i]},
                    {"bullet_b", art.bullet_ids[j]},
                    {"name", art.bullet_ids[i] + " vs " + art.bullet_ids[j]},
                    {"n_lands_a", art.bullets[i].n_lands()},
                    {"n_lands_b", art.bullets[j].n_lands()}};
            if (cell.comparison) {
                cj["score"] = cell.comparison->score;
                cj["by_convention"] = cell.comparison->by_convention;
                int available = 0;
                if (cell.comparison->matrix) available = static_cast<int>((!cell.comparison->matrix->unavailable).count());
                cj["available_land_pairs"] = available;
            } else {
                cj["score"] = nullptr;
                cj["by_convention"] = false;
                cj["available_land_pairs"] = 0;
                cj["unavailable_reason"] = code_or_null(cell.error);
            }
            cells.push_back(std::move(cj));
        }
    }
    return {{"bullets", art.bullet_ids}, {"cells", std::move(cells)}};
}

json l2_payload(const ExaminerSession& s, const CaseArtifacts& art) {
    const auto& [a, b] = *s.selection().bullet_pair;
    const int ia = art.index_of(a), ib = art.index_of(b);
    const auto& pa = art.bullets[ia];
    const auto& pb = art.bullets[ib];
    const auto& cell = art.grid[ia][ib];
    json j{{"bullet_a", a}, {"bullet_b", b}};
    json lands_a = json::array(), lands_b = json::array();
    for (const auto& l : pa.lands) lands_a.push_back(l.land_id);
    for (const auto& l : pb.lands) lands_b.push_back(l.land_id);
    j["lands_a"] = lands_a;
    j["lands_b"] = lands_b;
    json cells = json::array();
    if (cell.comparison && cell.comparison->matrix) {
        const auto& m = *cell.comparison->matrix;
        for (int i = 0; i < m.n(); ++i)
            for (int jj = 0; jj < static_cast<int>(m.scores.cols()); ++jj) cells.push_back(land_cell_json(m, pa, pb, i, jj));
        j["bullet_score"] = cell.comparison->score;
    } else {
        for (int i = 0; i < pa.n_lands(); ++i)
            for (int jj = 0; jj < pb.n_lands(); ++jj)
                cells.push_back({{"row", i},
                                 {"col", jj},
                                 {"land_a", pa.lands[i].land_id},
                                 {"land_b", pb.lands[jj].land_id},
                                 {"available", false},
                                 {"score", nullptr},
                                 {"unavailable_reason", code_or_null(cell.error)}});
        j["bullet_score"] = nullptr;
    }
    j["cells"] = std::move(cells);
    if (s.match_frame().enabled) {
        json frame = json::array();
        for (const auto& [i, jj] : expected_match_frame(pa.n_lands(), s.match_frame().hypothesis_phase))
            frame.push_back({i, jj});
        j["frame"] = {{"hypothesis_phase", s.match_frame().hypothesis_phase}, {"cells", std::move(frame)}};
    }
    return j;
}

struct SelectedLands {
    const ProcessedBullet* pa;
    const ProcessedBullet* pb;
    int ia, ib, la, lb;
};

SelectedLands selected(const ExaminerSession& s, const CaseArtifacts& art) {
    const auto& [a, b] = *s.selection().bullet_pair;
    const auto& [la, lb] = *s.selection().land_pair;
    const int ia = art.index_of(a), ib = art.index_of(b);
    return {&art.bullets[ia], &art.bullets[ib], ia, ib, la, lb};
}

json profile_json(const std::string& bullet_id, const ProcessedLand& land) {
    json j{{"bullet_id", bullet_id}, {"land_id", land.land_id}, {"pipeline_error", code_or_null(land.error)}};
    if (!land.artifacts) {
        j["profile"] = nullptr;
        return j;
    }
    const auto& p = land.artifacts->profile;
    j["profile"] = {{"values", series(p.values, p.mask)},
                    {"x_res_um", p.x_res_um},
                    {"row_index", p.row_index},
                    {"band", p.band}};
    return j;
}

json l3_payload(const ExaminerSession& s, const CaseArtifacts& art) {
    const auto sel = selected(s, art);
    const auto& lA = land_at(*sel.pa, sel.la);
    const auto& lB = land_at(*sel.pb, sel.lb);
    json j{{"bullet_a", sel.pa->bullet_id},
           {"bullet_b", sel.pb->bullet_id},
           {"land_a", lA.land_id},
           {"land_b", lB.land_id},
           {"lag_convention", "a[i] aligns with b[i - lag]"}};
    auto sig = [](const ProcessedLand& l) -> json {
        if (!l.artifacts) return {{"values", nullptr}, {"pipeline_error", code_or_null(l.error)}};
        const auto& g = l.artifacts->signature;
        return {{"values", series(g.residuals, g.mask)}, {"x_res_um", g.x_res_um}, {"pipeline_error", nullptr}};
    };
    j["signature_a"] = sig(lA);
    j["signature_b"] = sig(lB);
    const auto& cell = art.grid[sel.ia][sel.ib];
    std::optional<PairComparison> cmp;
    if (cell.comparison && cell.comparison->matrix) cmp = cell.comparison->matrix->comparisons[sel.la][sel.lb];
    if (cmp) {
        j["lag"] = cmp->alignment.lag;
        j["lag_um"] = cmp->features.lag_um;
        j["ccf"] = cmp->alignment.ccf;
        j["overlap_len"] = cmp->alignment.overlap_len;
    } else {
        j["lag"] = nullptr;
        j["lag_um"] = nullptr;
        j["ccf"] = nullptr;
        j["overlap_len"] = nullptr;
    }
    return j;
}

json l4_payload(const ExaminerSession& s, const CaseArtifacts& art) {
    const auto sel = selected(s, art);
    json lands = json::array();
    for (const auto& [pb, li] : {std::pair{sel.pa, sel.la}, std::pair{sel.pb, sel.lb}}) {
        const auto& land = land_at(*pb, li);
        json j = profile_json(pb->bullet_id, land);
        if (land.artifacts) {
            j["grooves"] = grooves_json(land.artifacts->grooves);
            j["interior_trend"] = {{"start_index", land.artifacts->grooves.left_index},
                                   {"values", series(land.artifacts->signature.trend)}};
        } else {
            j["grooves"] = nullptr;
            j["interior_trend"] = nullptr;
        }
        lands.push_back(std::move(j));
    }
    return {{"lands", std::move(lands)}};
}

json l5_payload(const ExaminerSession& s, const CaseArtifacts& art) {
    const auto sel = selected(s, art);
    return {{"lands",
             {profile_json(sel.pa->bullet_id, land_at(*sel.pa, sel.la)),
              profile_json(sel.pb->bullet_id, land_at(*sel.pb, sel.lb))}}};
}

json l6_payload(const ExaminerSession& s, const CaseArtifacts& art) {
    constexpr int kMaxDim = 128;
    const auto sel = selected(s, art);
    json lands = json::array();
    for (const auto& [bi, li] : {std::pair{sel.ia, sel.la}, std::pair{sel.ib, sel.lb}}) {
        const auto& scan = *art.scans[bi].lands.at(static_cast<std::size_t>(li));
        const auto& land = land_at(art.bullets[bi], li);
        const auto g = downsample(scan, kMaxDim);
        json heights = json::array(), mask = json::array();
        for (Eigen::Index r = 0; r < g.heights.rows(); ++r) {
            json hr = json::array(), mr = json::array();
            for (Eigen::Index c = 0; c < g.heights.cols(); ++c) {
                hr.push_back(g.mask(r, c) ? json(nullptr) : json(g.heights(r, c)));
                mr.push_back(g.mask(r, c) ? 1 : 0);
            }
            heights.push_back(std::move(hr));
            mask.push_back(std::move(mr));
        }
        json j{{"bullet_id", scan.bullet_id},
               {"land_id", scan.land_id},
               {"rows", scan.rows()},
               {"cols", scan.cols()},
               {"x_res_um", scan.x_res_um},
               {"y_res_um", scan.y_res_um},
               {"factor", g.factor},
               {"masked_fraction", scan.masked_fraction()},
               {"heights", std::move(heights)},
               {"mask", std::move(mask)},
               {"pipeline_error", code_or_null(land.error)}};
        if (land.artifacts) {
            const auto& cc = land.artifacts->crosscut;
            j["crosscut"] = {{"row_index", cc.row_index}, {"band", cc.band}, {"downsampled_row", cc.row_index / g.factor}};
        } else {
            j["crosscut"] = nullptr;
        }
        lands.push_back(std::move(j));
    }
    json status = json::object();
    for (const int bi : {sel.ia, sel.ib}) {
        json ls = json::array();
        for (const auto& l : art.bullets[bi].lands)
            ls.push_back({{"land_id", l.land_id}, {"pipeline_error", code_or_null(l.error)}});
        status[art.bullet_ids[bi]] = std::move(ls);
    }
    return {{"row_order", "base_first"}, {"lands", std::move(lands)}, {"land_status", std::move(status)}};
}

}  // namespace

json level_payload(const ExaminerSession& s, const CaseArtifacts& art, int level) {
    if (level < 1 || level > kLevelCount) throw Error(ErrorCode::BadLevel, "level must be in 1.." + std::to_string(kLevelCount));
    s.require_level(level);
    json body;
    switch (level) {
        case 1: body = l1_payload(art); break;
        case 2: body = l2_payload(s, art); break;
        case 3: body = l3_payload(s, art); break;
        case 4: body = l4_payload(s, art); break;
        case 5: body = l5_payload(s, art); break;
        default: body = l6_payload(s, art); break;
    }
    body["level"] = level;
    body["session_id"] = s.session_id();
    body["case_id"] = s.case_id();
    body["artifact_digest"] = digest_hex(art.artifact_digest);
    body["cfg_digest"] = digest_hex(art.cfg_digest);
    return body;
}

// ---------------------------------------------------------------------------

ExaminerService::ExaminerService(std::shared_ptr<ScanStore> store, Forest forest, PipelineConfig cfg,
                                 ServiceOptions options)
    : store_(std::move(store)), forest_(std::move(forest)), cfg_(std::move(cfg)), options_(std::move(options)) {
    check_forest(forest_);
    if (!options_.clock) {
        options_.clock = [] {
            return std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                .count();
        };
    }
    if (options_.state_dir) {
        for (const char* sub : {"cases", "artifacts", "sessions"}) fs::create_directories(*options_.state_dir / sub);
        restore();
    }
}

std::int64_t ExaminerService::now() const { return options_.clock(); }

void ExaminerService::define_case(const std::string& case_id, const std::vector<std::string>& bullet_ids) {
    check_case_id(case_id);
    if (bullet_ids.empty()) throw Error(ErrorCode::BadRequest, "a case needs at least one bullet");
    std::set<std::string> seen;
    for (const auto& id : bullet_ids) {
        if (!seen.insert(id).second) throw Error(ErrorCode::BadRequest, "bullet " + id + " listed twice");
        if (store_->land_ids(id).empty()) throw Error(ErrorCode::UnknownId, "bullet " + id + " is not in the store");
    }
    std::unique_lock lock(cases_mutex_);
    auto& entry = cases_[case_id];
    if (entry.bullet_ids != bullet_ids) {
        entry.bullet_ids = bullet_ids;
        entry.artifacts.reset();
    }
    save_case_definition(case_id, entry);
}

bool ExaminerService::has_case(const std::string& case_id) const {
    std::shared_lock lock(cases_mutex_);
    return cases_.count(case_id) > 0;
}

std::vector<std::string> ExaminerService::case_ids() const {
    std::shared_lock lock(cases_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : cases_) out.push_back(id);
    return out;
}

std::shared_ptr<const CaseArtifacts> ExaminerService::compute_case(const std::string& case_id) {
    std::lock_guard compute(compute_mutex_);
    std::vector<std::string> ids;
    {
        std::shared_lock lock(cases_mutex_);
        const auto it = cases_.find(case_id);
        if (it == cases_.end()) throw Error(ErrorCode::UnknownCase, "case " + case_id + " is not defined");
        ids = it->second.bullet_ids;
    }
    std::vector<Bullet> scans;
    for (const auto& id : ids) scans.push_back(store_->bullet(id));
    auto art = std::make_shared<CaseArtifacts>(compute_artifacts(case_id, scans, forest_, cfg_));

    bool any_pair = false, any_scored = false;
    for (std::size_t i = 0; i < art->grid.size(); ++i)
        for (std::size_t j = 0; j < art->grid.size(); ++j)
            if (i != j) {
                any_pair = true;
                any_scored |= art->grid[i][j].comparison.has_value();
            }
    if (any_pair && !any_scored) throw Error(ErrorCode::AllMasked, "no bullet pair of case " + case_id + " has a score");

    if (options_.state_dir) {
        const fs::path file = *options_.state_dir / "artifacts" / (digest_hex(art->artifact_digest) + ".json");
        if (!fs::exists(file)) write_file_atomic(file, artifacts_json(*art).dump() + "\n");
    }
    std::unique_lock lock(cases_mutex_);
    auto& entry = cases_[case_id];
    entry.artifacts = art;
    save_case_definition(case_id, entry);
    return art;
}

std::shared_ptr<const CaseArtifacts> ExaminerService::artifacts(const std::string& case_id) const {
    std::shared_lock lock(cases_mutex_);
    const auto it = cases_.find(case_id);
    if (it == cases_.end()) throw Error(ErrorCode::UnknownCase, "case " + case_id + " is not defined");
    return it->second.artifacts;
}

json ExaminerService::case_summary(const std::string& case_id) const {
    std::vector<std::string> ids;
    std::shared_ptr<const CaseArtifacts> art;
    {
        std::shared_lock lock(cases_mutex_);
        const auto it = cases_.find(case_id);
        if (it == cases_.end()) throw Error(ErrorCode::UnknownCase, "case " + case_id + " is not defined");
        ids = it->second.bullet_ids;
        art = it->second.artifacts;
    }
    json bullets = json::array();
    for (const auto& id : ids) {
        const auto lands = store_->land_ids(id);
        bullets.push_back({{"bullet_id", id}, {"lands", lands}, {"n_lands", lands.size()}});
    }
    return {{"case_id", case_id},
            {"bullets", std::move(bullets)},
            {"computed", art != nullptr},
            {"artifact_digest", art ? json(digest_hex(art->artifact_digest)) : json(nullptr)},
            {"cfg_digest", digest_hex(pipeline_digest(cfg_))},
            {"forest_digest", digest_hex(forest_digest(forest_))}};
}

void ExaminerService::save_case_definition(const std::string& case_id, const CaseEntry& entry) const {
    if (!options_.state_dir) return;
    const json j{{"case_id", case_id},
                 {"bullets", entry.bullet_ids},
                 {"artifact_digest", entry.artifacts ? json(digest_hex(entry.artifacts->artifact_digest)) : json(nullptr)}};
    write_file_atomic(*options_.state_dir / "cases" / (case_id + ".json"), j.dump(2) + "\n");
}

std::string ExaminerService::create_session(const std::string& case_id, SessionMode mode) {
    const auto art = artifacts(case_id);
    if (!art) throw Error(ErrorCode::ScoresNotComputed, "case " + case_id + " has not been computed");
    if (art->bullet_ids.size() < 2)
        throw Error(ErrorCode::ScoresNotComputed, "case " + case_id + " has fewer than two bullets to compare");
    CaseView view;
    view.bullet_ids = art->bullet_ids;
    for (const auto& b : art->bullets) view.n_lands[b.bullet_id] = b.n_lands();
    view.artifact_digest = digest_hex(art->artifact_digest);

    std::unique_lock lock(sessions_mutex_);
    char id[16];
    std::snprintf(id, sizeof id, "S%04d", next_session_++);
    auto s = ExaminerSession::create(id, case_id, mode, view, now());
    append_log(s, 0);
    sessions_.emplace(id, std::make_shared<Slot>(std::move(s), art));
    return id;
}

std::shared_ptr<ExaminerService::Slot> ExaminerService::slot(const std::string& session_id) const {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "session " + session_id + " does not exist");
    return it->second;
}

void ExaminerService::append_log(const ExaminerSession& s, std::size_t from) const {
    if (!options_.state_dir) return;
    const fs::path file = *options_.state_dir / "sessions" / (s.session_id() + ".jsonl");
    std::ofstream out(file, std::ios::app | std::ios::binary);
    for (std::size_t k = from; k < s.audit().size(); ++k) out << to_json(s.audit()[k]).dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "cannot append to " + file.string());
}

json ExaminerService::mutate(const std::string& session_id,
                             const std::function<void(ExaminerSession&, std::int64_t)>& fn) {
    auto sl = slot(session_id);
    std::lock_guard lock(sl->mutex);
    ExaminerSession next = sl->session;
    fn(next, now());
    append_log(next, sl->session.audit().size());
    sl->session = std::move(next);
    return sl->session.state_json();
}

json ExaminerService::add_level(const std::string& sid, int level) {
    return mutate(sid, [&](ExaminerSession& s, std::int64_t t) { s.add_level(level, t); });
}

json ExaminerService::select_bullet_pair(const std::string& sid, const std::string& a, const std::string& b) {
    return mutate(sid, [&](ExaminerSession& s, std::int64_t t) { s.select_bullet_pair(a, b, t); });
}

json ExaminerService::select_land_pair(const std::string& sid, int land_a, int land_b) {
    return mutate(sid, [&](ExaminerSession& s, std::int64_t t) { s.select_land_pair(land_a, land_b, t); });
}

json ExaminerService::set_match_frame(const std::string& sid, bool enabled, int phase) {
    return mutate(sid, [&](ExaminerSession& s, std::int64_t t) { s.set_match_frame(enabled, phase, t); });
}

json ExaminerService::record_conclusion(const std::string& sid, AfteCategory category, const std::string& rationale) {
    return mutate(sid, [&](ExaminerSession& s, std::int64_t t) { s.record_conclusion(category, rationale, t); });
}

json ExaminerService::session_state(const std::string& sid) const {
    auto sl = slot(sid);
    std::lock_guard lock(sl->mutex);
    return sl->session.state_json();
}

json ExaminerService::level(const std::string& sid, int level) const {
    auto sl = slot(sid);
    std::optional<ExaminerSession> snapshot;
    std::shared_ptr<const CaseArtifacts> art;
    {
        std::lock_guard lock(sl->mutex);
        snapshot = sl->session;
        art = sl->artifacts;
    }
    return level_payload(*snapshot, *art, level);
}

std::vector<AuditEntry> ExaminerService::audit(const std::string& sid) const {
    auto sl = slot(sid);
    std::lock_guard lock(sl->mutex);
    return sl->session.audit();
}

ExaminerSession ExaminerService::session(const std::string& sid) const {
    auto sl = slot(sid);
    std::lock_guard lock(sl->mutex);
    return sl->session;
}

std::vector<std::string> ExaminerService::session_ids() const {
    std::shared_lock lock(sessions_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : sessions_) out.push_back(id);
    return out;
}

void ExaminerService::restore() {
    const fs::path root = *options_.state_dir;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(root / "cases"))
        if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const json j = read_json_file(f);
        const auto case_id = j.at("case_id").get<std::string>();
        CaseEntry entry;
        entry.bullet_ids = j.at("bullets").get<std::vector<std::string>>();
        if (!j.at("artifact_digest").is_null()) {
            std::vector<Bullet> scans;
            for (const auto& id : entry.bullet_ids) scans.push_back(store_->bullet(id));
            auto art = std::make_shared<CaseArtifacts>(compute_artifacts(case_id, scans, forest_, cfg_));
            if (digest_hex(art->artifact_digest) != j.at("artifact_digest").get<std::string>())
                throw Error(ErrorCode::StoreCorrupt, "case " + case_id +
                                                         " no longer reproduces its stored artifacts; the scans, "
                                                         "forest or pipeline configuration changed");
            entry.artifacts = std::move(art);
        }
        cases_[case_id] = std::move(entry);
    }

    files.clear();
    for (const auto& e : fs::directory_iterator(root / "sessions"))
        if (e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream in(f);
        std::vector<AuditEntry> entries;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                entries.push_back(audit_entry_from_json(json::parse(line)));
            } catch (const json::exception& e) {
                throw Error(ErrorCode::StoreCorrupt, f.string() + ": " + e.what());
            }
        }
        auto s = ExaminerSession::replay(entries);
        const auto it = cases_.find(s.case_id());
        if (it == cases_.end() || !it->second.artifacts ||
            digest_hex(it->second.artifacts->artifact_digest) != s.case_view().artifact_digest)
            throw Error(ErrorCode::StoreCorrupt, "session " + s.session_id() + " refers to artifacts that are gone");
        const int number = std::atoi(s.session_id().c_str() + 1);
        next_session_ = std::max(next_session_, number + 1);
        const auto id = s.session_id();
        sessions_.emplace(id, std::make_shared<Slot>(std::move(s), it->second.artifacts));
    }
}

}  // namespace leamatch
