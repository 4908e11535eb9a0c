#pragma once

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <string>

#include "leamatch/service.hpp"

namespace leamatch {

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

/// HTTP status for a library error: 404 unknown ids, 409 state violations,
/// 422 malformed or out-of-range payloads, 500 otherwise.
int http_status(ErrorCode code);

/// Transport-independent /api/v1 routing. Errors come back as
/// {"error": {"code": ..., "message": ...}}.
class ApiRouter {
public:
    explicit ApiRouter(ExaminerService& service) : service_(service) {}

    ApiResponse handle(const std::string& method, const std::string& path, const std::string& body) const;

private:
    ExaminerService& service_;
};

struct ServerOptions {
    std::string host = "127.0.0.1";
    /// 0 binds an ephemeral port.
    int port = 8080;
    /// When set, requests must carry "Authorization: Bearer <token>".
    std::optional<std::string> bearer_token;
};

/// HTTP/1.1 front end for an ApiRouter.
class HttpServer {
public:
    HttpServer(ExaminerService& service, ServerOptions options);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds the socket; returns the bound port. Throws Error(Io).
    int bind();
    /// Serves until stop() is called.
    void listen();
    /// bind() plus listen() on a background thread.
    int start();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace leamatch
