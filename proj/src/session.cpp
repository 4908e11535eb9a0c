#include "leamatch/session.hpp"

#include <algorithm>

namespace leamatch {

std::string to_string(SessionMode mode) { return mode == SessionMode::Guided ? "Guided" : "Diagnostics"; }

std::string to_string(AfteCategory category) {
    switch (category) {
        case AfteCategory::Identification: return "Identification";
        case AfteCategory::Elimination: return "Elimination";
        case AfteCategory::Inconclusive: return "Inconclusive";
        case AfteCategory::Unsuitable: return "Unsuitable";
    }
    return "Inconclusive";
}

SessionMode parse_mode(const std::string& text) {
    if (text == "Guided") return SessionMode::Guided;
    if (text == "Diagnostics") return SessionMode::Diagnostics;
    throw Error(ErrorCode::BadRequest, "mode must be Guided or Diagnostics");
}

AfteCategory parse_category(const std::string& text) {
    for (auto c : {AfteCategory::Identification, AfteCategory::Elimination, AfteCategory::Inconclusive,
                   AfteCategory::Unsuitable})
        if (to_string(c) == text) return c;
    throw Error(ErrorCode::BadRequest, "unknown conclusion category '" + text + "'");
}

nlohmann::json to_json(const AuditEntry& e) {
    return {{"seq", e.seq}, {"timestamp_ms", e.timestamp_ms}, {"action", e.action}, {"params", e.params}};
}

AuditEntry audit_entry_from_json(const nlohmann::json& j) {
    try {
        return {j.at("seq").get<std::uint64_t>(), j.at("timestamp_ms").get<std::int64_t>(),
                j.at("action").get<std::string>(), j.at("params")};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadRequest, std::string("audit entry: ") + e.what());
    }
}

ExaminerSession ExaminerSession::create(const std::string& session_id, const std::string& case_id, SessionMode mode,
                                        const CaseView& view, std::int64_t now_ms) {
    ExaminerSession s;
    s.commit("created",
             {{"session_id", session_id},
              {"case_id", case_id},
              {"mode", to_string(mode)},
              {"bullet_ids", view.bullet_ids},
              {"n_lands", view.n_lands},
              {"artifact_digest", view.artifact_digest}},
             now_ms);
    return s;
}

ExaminerSession ExaminerSession::replay(const std::vector<AuditEntry>& audit) {
    if (audit.empty() || audit.front().action != "created")
        throw Error(ErrorCode::BadRequest, "audit log must start with a created entry");
    ExaminerSession s;
    for (const auto& e : audit) {
        if (e.seq != s.audit_.size()) throw Error(ErrorCode::BadRequest, "audit sequence numbers are not contiguous");
        try {
            s.apply(e);
        } catch (const nlohmann::json::exception& ex) {
            throw Error(ErrorCode::BadRequest, "audit entry " + std::to_string(e.seq) + ": " + ex.what());
        }
        s.audit_.push_back(e);
    }
    return s;
}

void ExaminerSession::ensure_open() const {
    if (conclusion_) throw Error(ErrorCode::AlreadyConcluded, "session " + session_id_ + " is concluded");
}

void ExaminerSession::require_level(int level) const {
    if (!level_active(level))
        throw Error(ErrorCode::LevelNotActive, "level " + std::to_string(level) + " is not active");
}

int ExaminerSession::selected_lands() const {
    if (!selection_.bullet_pair) return 0;
    const auto it = view_.n_lands.find(selection_.bullet_pair->first);
    return it == view_.n_lands.end() ? 0 : it->second;
}

void ExaminerSession::add_level(int level, std::int64_t now_ms) {
    ensure_open();
    if (level < 1 || level > kLevelCount)
        throw Error(ErrorCode::BadLevel, "level must be in 1.." + std::to_string(kLevelCount));
    if (level_active(level)) throw Error(ErrorCode::AlreadyActive, "level " + std::to_string(level) + " already added");
    if (mode_ == SessionMode::Guided) {
        const int next = active_.empty() ? 1 : *active_.rbegin() + 1;
        if (level != next)
            throw Error(ErrorCode::OutOfOrder, "next level is " + std::to_string(next) + ", got " + std::to_string(level));
    }
    if (level >= 2 && !selection_.bullet_pair)
        throw Error(ErrorCode::MissingSelection, "level " + std::to_string(level) + " needs a bullet pair");
    if (level >= 3 && !selection_.land_pair)
        throw Error(ErrorCode::MissingSelection, "level " + std::to_string(level) + " needs a land pair");
    commit("add_level", {{"level", level}}, now_ms);
}

void ExaminerSession::select_bullet_pair(const std::string& a, const std::string& b, std::int64_t now_ms) {
    ensure_open();
    for (const auto& id : {a, b})
        if (!view_.n_lands.count(id)) throw Error(ErrorCode::UnknownId, "bullet " + id + " is not in case " + case_id_);
    if (a == b) throw Error(ErrorCode::BadRequest, "a bullet pair needs two different bullets");
    commit("select_bullet_pair", {{"bullet_a", a}, {"bullet_b", b}}, now_ms);
}

void ExaminerSession::select_land_pair(int land_a, int land_b, std::int64_t now_ms) {
    ensure_open();
    require_level(2);
    if (!selection_.bullet_pair) throw Error(ErrorCode::MissingSelection, "select a bullet pair first");
    const int na = view_.n_lands.at(selection_.bullet_pair->first);
    const int nb = view_.n_lands.at(selection_.bullet_pair->second);
    if (land_a < 0 || land_a >= na || land_b < 0 || land_b >= nb)
        throw Error(ErrorCode::UnknownId, "land pair (" + std::to_string(land_a) + "," + std::to_string(land_b) +
                                              ") outside the selected bullets");
    commit("select_land_pair", {{"land_a", land_a}, {"land_b", land_b}}, now_ms);
}

void ExaminerSession::set_match_frame(bool enabled, int hypothesis_phase, std::int64_t now_ms) {
    ensure_open();
    require_level(2);
    const int n = selected_lands();
    if (enabled && (hypothesis_phase < 0 || hypothesis_phase >= n))
        throw Error(ErrorCode::BadPhase,
                    "phase " + std::to_string(hypothesis_phase) + " outside [0," + std::to_string(n) + ")");
    commit("set_match_frame", {{"enabled", enabled}, {"hypothesis_phase", enabled ? hypothesis_phase : 0}}, now_ms);
}

void ExaminerSession::record_conclusion(AfteCategory category, const std::string& rationale, std::int64_t now_ms) {
    ensure_open();
    const bool definitive = category == AfteCategory::Identification || category == AfteCategory::Elimination;
    if (mode_ == SessionMode::Guided && definitive && static_cast<int>(visited_.size()) < kLevelCount)
        throw Error(ErrorCode::PrematureConclusion,
                    to_string(category) + " requires all " + std::to_string(kLevelCount) + " levels in Guided mode");
    if (active_.empty()) throw Error(ErrorCode::PrematureConclusion, "no level has been examined");
    commit("record_conclusion", {{"category", to_string(category)}, {"rationale", rationale}}, now_ms);
}

void ExaminerSession::commit(std::string action, nlohmann::json params, std::int64_t now_ms) {
    AuditEntry e;
    e.seq = audit_.size();
    e.timestamp_ms = std::max(now_ms, audit_.empty() ? now_ms : audit_.back().timestamp_ms);
    e.action = std::move(action);
    e.params = std::move(params);
    apply(e);
    audit_.push_back(std::move(e));
}

void ExaminerSession::apply(const AuditEntry& e) {
    const auto& p = e.params;
    if (e.action == "created") {
        session_id_ = p.at("session_id").get<std::string>();
        case_id_ = p.at("case_id").get<std::string>();
        mode_ = parse_mode(p.at("mode").get<std::string>());
        view_.bullet_ids = p.at("bullet_ids").get<std::vector<std::string>>();
        view_.n_lands = p.at("n_lands").get<std::map<std::string, int>>();
        view_.artifact_digest = p.at("artifact_digest").get<std::string>();
        active_ = {1};
        visited_ = {1};
    } else if (e.action == "add_level") {
        const int level = p.at("level").get<int>();
        active_.insert(level);
        visited_.insert(level);
    } else if (e.action == "select_bullet_pair") {
        std::pair<std::string, std::string> pair{p.at("bullet_a").get<std::string>(), p.at("bullet_b").get<std::string>()};
        if (selection_.bullet_pair != pair) {
            selection_.bullet_pair = std::move(pair);
            selection_.land_pair.reset();
            frame_ = {};
            // Levels 3..6 describe a land pair that no longer exists.
            std::erase_if(active_, [](int level) { return level >= 3; });
        }
    } else if (e.action == "select_land_pair") {
        std::pair<int, int> pair{p.at("land_a").get<int>(), p.at("land_b").get<int>()};
        if (selection_.land_pair && *selection_.land_pair != pair && mode_ == SessionMode::Guided)
            std::erase_if(active_, [](int level) { return level >= 3; });
        selection_.land_pair = pair;
    } else if (e.action == "set_match_frame") {
        frame_.enabled = p.at("enabled").get<bool>();
        frame_.hypothesis_phase = p.at("hypothesis_phase").get<int>();
    } else if (e.action == "record_conclusion") {
        AfteConclusion c;
        c.category = parse_category(p.at("category").get<std::string>());
        c.rationale = p.at("rationale").get<std::string>();
        c.levels_visited_at_decision = visited_;
        conclusion_ = std::move(c);
    } else {
        throw Error(ErrorCode::BadRequest, "unknown audit action '" + e.action + "'");
    }
}

nlohmann::json ExaminerSession::state_json() const {
    nlohmann::json j;
    j["session_id"] = session_id_;
    j["case_id"] = case_id_;
    j["mode"] = to_string(mode_);
    j["artifact_digest"] = view_.artifact_digest;
    j["active_levels"] = std::vector<int>(active_.begin(), active_.end());
    j["visited_levels"] = std::vector<int>(visited_.begin(), visited_.end());
    nlohmann::json sel = nlohmann::json::object();
    if (selection_.bullet_pair) sel["bullet_pair"] = {selection_.bullet_pair->first, selection_.bullet_pair->second};
    if (selection_.land_pair) sel["land_pair"] = {selection_.land_pair->first, selection_.land_pair->second};
    j["selection"] = sel;
    j["match_frame"] = {{"enabled", frame_.enabled}, {"hypothesis_phase", frame_.hypothesis_phase}};
    j["audit_length"] = audit_.size();
    if (conclusion_) {
        j["conclusion"] = {{"category", to_string(conclusion_->category)},
                           {"rationale", conclusion_->rationale},
                           {"levels_visited_at_decision",
                            std::vector<int>(conclusion_->levels_visited_at_decision.begin(),
                                             conclusion_->levels_visited_at_decision.end())}};
    } else {
        j["conclusion"] = nullptr;
    }
    return j;
}

}  // namespace leamatch
