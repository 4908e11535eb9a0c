#include "leamatch/report.hpp"

#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>

#include "leamatch/digest.hpp"

namespace leamatch {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << std::setprecision(17);
    return out;
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string iso_time(std::int64_t ms) {
    const std::time_t secs = static_cast<std::time_t>(ms / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms % 1000));
    return out;
}

std::string join(const std::set<int>& levels) {
    std::string out;
    for (int k : levels) out += (out.empty() ? "" : ", ") + std::to_string(k);
    return out.empty() ? "none" : out;
}

}  // namespace

void write_score_bundle(const CaseArtifacts& art, const fs::path& dir) {
    fs::create_directories(dir);
    const std::size_t n = art.bullet_ids.size();
    {
        auto out = open_out(dir / "bullet_scores.csv");
        out << "bullet_a,bullet_b,score,phase,by_convention\n";
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const auto& cell = art.grid[i][j];
                out << art.bullet_ids[i] << ',' << art.bullet_ids[j] << ',';
                if (cell.comparison) {
                    out << cell.comparison->score << ',';
                    if (cell.comparison->phase) out << *cell.comparison->phase;
                    out << ',' << (cell.comparison->by_convention ? 1 : 0) << '\n';
                } else {
                    out << ",,0\n";
                }
            }
    }
    std::vector<FeatureRow> rows;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& cell = art.grid[i][j];
            if (!cell.comparison || !cell.comparison->matrix) continue;
            const auto& m = *cell.comparison->matrix;
            auto out = open_out(dir / ("land_scores_" + art.bullet_ids[i] + "_" + art.bullet_ids[j] + ".csv"));
            write_score_matrix_csv(out, m);
            for (int a = 0; a < m.n(); ++a)
                for (int b = 0; b < static_cast<int>(m.scores.cols()); ++b)
                    if (m.comparisons[a][b])
                        rows.push_back({m.bullet_a, m.lands_a[a], m.bullet_b, m.lands_b[b], m.comparisons[a][b]->features});
        }
    {
        auto out = open_out(dir / "features.csv");
        write_feature_csv(out, rows);
    }
    auto out = open_out(dir / "artifacts.json");
    out << artifacts_json(art).dump(1) << '\n';
}

ExaminerSession load_session_log(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::UnknownSession, "no event log at " + path.string());
    std::vector<AuditEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            entries.push_back(audit_entry_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::StoreCorrupt, path.string() + ": " + e.what());
        }
    }
    return ExaminerSession::replay(entries);
}

void write_audit_csv(std::ostream& out, const std::vector<AuditEntry>& audit) {
    out << "seq,timestamp_ms,time_utc,action,params\n";
    for (const auto& e : audit)
        out << e.seq << ',' << e.timestamp_ms << ',' << iso_time(e.timestamp_ms) << ',' << e.action << ','
            << csv_quote(e.params.dump()) << '\n';
}

void write_session_report(const ExaminerSession& s, const fs::path& dir, const std::vector<ManifestRow>* truth) {
    if (truth && !s.conclusion())
        throw Error(ErrorCode::BadRequest, "ground truth is only revealed for concluded sessions");
    fs::create_directories(dir);
    {
        auto out = open_out(dir / "audit.csv");
        write_audit_csv(out, s.audit());
    }

    auto md = open_out(dir / "session.md");
    md << "# Session " << s.session_id() << "\n\n";
    md << "- case: " << s.case_id() << "\n";
    md << "- mode: " << to_string(s.mode()) << "\n";
    md << "- artifacts: " << s.case_view().artifact_digest << "\n";
    md << "- bullets: ";
    for (std::size_t i = 0; i < s.case_view().bullet_ids.size(); ++i)
        md << (i ? ", " : "") << s.case_view().bullet_ids[i];
    md << "\n- active levels at end: " << join(s.active_levels()) << "\n\n";

    md << "## Conclusion\n\n";
    if (const auto& c = s.conclusion()) {
        md << "- category: " << to_string(c->category) << "\n";
        md << "- levels visited: " << join(c->levels_visited_at_decision) << "\n";
        md << "- rationale: " << (c->rationale.empty() ? "(none)" : c->rationale) << "\n\n";
    } else {
        md << "Not concluded.\n\n";
    }

    md << "## Audit timeline\n\n| seq | time (UTC) | action | params |\n|---|---|---|---|\n";
    for (const auto& e : s.audit()) {
        std::string params = e.params.dump();
        for (std::size_t p = 0; (p = params.find('|', p)) != std::string::npos; p += 2) params.replace(p, 1, "\\|");
        md << "| " << e.seq << " | " << iso_time(e.timestamp_ms) << " | " << e.action << " | `" << params << "` |\n";
    }

    if (!truth) return;
    std::map<std::string, std::pair<std::string, int>> barrel;  // bullet -> (barrel, rotation)
    for (const auto& r : *truth) {
        barrel[r.bullet_a] = {r.barrel_a, r.rotation_a};
        barrel[r.bullet_b] = {r.barrel_b, r.rotation_b};
    }
    auto csv = open_out(dir / "truth.csv");
    csv << "bullet_a,bullet_b,barrel_a,barrel_b,same_source,true_phase\n";
    md << "\n## Ground truth\n\n| bullet a | bullet b | barrel a | barrel b | same source | true phase |\n"
          "|---|---|---|---|---|---|\n";
    const auto& ids = s.case_view().bullet_ids;
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
            const auto a = barrel.find(ids[i]);
            const auto b = barrel.find(ids[j]);
            if (a == barrel.end() || b == barrel.end()) continue;
            const bool same = a->second.first == b->second.first;
            const int n = s.case_view().n_lands.at(ids[i]);
            std::string phase;
            if (same) phase = std::to_string(((b->second.second - a->second.second) % n + n) % n);
            csv << ids[i] << ',' << ids[j] << ',' << a->second.first << ',' << b->second.first << ',' << (same ? 1 : 0)
                << ',' << phase << '\n';
            md << "| " << ids[i] << " | " << ids[j] << " | " << a->second.first << " | " << b->second.first << " | "
               << (same ? "yes" : "no") << " | " << (phase.empty() ? "-" : phase) << " |\n";
        }
}

}  // namespace leamatch
