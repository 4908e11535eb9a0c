#include "leamatch/api.hpp"

#include <sstream>
#include <vector>

namespace leamatch {

using nlohmann::json;

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownCase:
        case ErrorCode::UnknownSession:
        case ErrorCode::UnknownId:
            return 404;
        case ErrorCode::OutOfOrder:
        case ErrorCode::AlreadyConcluded:
        case ErrorCode::AlreadyActive:
        case ErrorCode::LevelNotActive:
        case ErrorCode::MissingSelection:
        case ErrorCode::PrematureConclusion:
        case ErrorCode::ScoresNotComputed:
        case ErrorCode::AllMasked:
            return 409;
        case ErrorCode::BadRequest:
        case ErrorCode::BadLevel:
        case ErrorCode::BadPhase:
        case ErrorCode::BadConfig:
            return 422;
        default:
            return 500;
    }
}

namespace {

ApiResponse error_response(int status, std::string_view code, const std::string& message) {
    return {status, {{"error", {{"code", code}, {"message", message}}}}};
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '/'))
        if (!part.empty()) parts.push_back(part);
    return parts;
}

json parse_body(const std::string& body) {
    if (body.empty()) return json::object();
    json j = json::parse(body);
    if (!j.is_object()) throw Error(ErrorCode::BadRequest, "request body must be a JSON object");
    return j;
}

int parse_level(const std::string& text) {
    std::size_t used = 0;
    int k = 0;
    try {
        k = std::stoi(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || text.empty()) throw Error(ErrorCode::BadLevel, "level '" + text + "' is not an integer");
    return k;
}

}  // namespace

ApiResponse ApiRouter::handle(const std::string& method, const std::string& path, const std::string& body) const {
    const auto p = split_path(path);
    try {
        if (p.size() < 3 || p[0] != "api" || p[1] != "v1") return error_response(404, "UnknownRoute", path);
        const json in = parse_body(body);
        const std::size_t n = p.size();

        if (p[2] == "cases") {
            if (n == 3 && method == "GET") return {200, {{"cases", service_.case_ids()}}};
            if (n == 4 && method == "POST") {
                service_.define_case(p[3], in.at("bullets").get<std::vector<std::string>>());
                return {201, service_.case_summary(p[3])};
            }
            if (n == 5 && p[4] == "compute" && method == "POST") {
                if (in.contains("bullets")) service_.define_case(p[3], in.at("bullets").get<std::vector<std::string>>());
                service_.compute_case(p[3]);
                return {200, service_.case_summary(p[3])};
            }
            if (n == 5 && p[4] == "bullets" && method == "GET") return {200, service_.case_summary(p[3])};
        } else if (p[2] == "sessions") {
            if (n == 3 && method == "POST") {
                const auto mode = parse_mode(in.value("mode", std::string("Guided")));
                const auto id = service_.create_session(in.at("case_id").get<std::string>(), mode);
                return {201, service_.session_state(id)};
            }
            if (n == 3 && method == "GET") return {200, {{"sessions", service_.session_ids()}}};
            const std::string& sid = p[3];
            if (n == 4 && method == "GET") return {200, service_.session_state(sid)};
            if (n == 5 && p[4] == "levels" && method == "POST")
                return {200, service_.add_level(sid, in.at("level").get<int>())};
            if (n == 6 && p[4] == "levels" && method == "GET") return {200, service_.level(sid, parse_level(p[5]))};
            if (n == 5 && p[4] == "selection" && method == "POST") {
                const bool bullets = in.contains("bullet_pair"), lands = in.contains("land_pair");
                if (bullets == lands)
                    throw Error(ErrorCode::BadRequest, "send exactly one of bullet_pair or land_pair");
                if (bullets) {
                    const auto pair = in.at("bullet_pair").get<std::vector<std::string>>();
                    if (pair.size() != 2) throw Error(ErrorCode::BadRequest, "bullet_pair needs two ids");
                    return {200, service_.select_bullet_pair(sid, pair[0], pair[1])};
                }
                const auto pair = in.at("land_pair").get<std::vector<int>>();
                if (pair.size() != 2) throw Error(ErrorCode::BadRequest, "land_pair needs two indices");
                return {200, service_.select_land_pair(sid, pair[0], pair[1])};
            }
            if (n == 5 && p[4] == "match-frame" && method == "POST") {
                const bool enabled = in.at("enabled").get<bool>();
                const int phase = enabled ? in.at("hypothesis_phase").get<int>() : in.value("hypothesis_phase", 0);
                return {200, service_.set_match_frame(sid, enabled, phase)};
            }
            if (n == 5 && p[4] == "conclusion" && method == "POST") {
                if (in.contains("levels_visited_at_decision"))
                    throw Error(ErrorCode::BadRequest, "levels_visited_at_decision is recorded by the server");
                const auto category = parse_category(in.at("category").get<std::string>());
                return {200, service_.record_conclusion(sid, category, in.value("rationale", std::string()))};
            }
            if (n == 5 && p[4] == "audit" && method == "GET") {
                json entries = json::array();
                for (const auto& e : service_.audit(sid)) entries.push_back(to_json(e));
                return {200, {{"session_id", sid}, {"entries", std::move(entries)}}};
            }
        }
        return error_response(404, "UnknownRoute", method + " " + path);
    } catch (const Error& e) {
        return error_response(http_status(e.code()), to_string(e.code()), e.what());
    } catch (const json::exception& e) {
        return error_response(422, to_string(ErrorCode::BadRequest), e.what());
    }
}

}  // namespace leamatch
