// before httplib: the _res macro from <resolv.h> breaks Eigen
#include "leamatch/api.hpp"

#include <httplib.h>

#include <thread>

namespace leamatch {

struct HttpServer::Impl {
    ApiRouter router;
    ServerOptions options;
    httplib::Server server;
    std::thread thread;

    Impl(ExaminerService& service, ServerOptions opts) : router(service), options(std::move(opts)) {}
};

HttpServer::HttpServer(ExaminerService& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        if (impl_->options.bearer_token) {
            if (req.get_header_value("Authorization") != "Bearer " + *impl_->options.bearer_token) {
                res.status = 401;
                res.set_content(R"({"error":{"code":"Unauthorized","message":"missing or wrong bearer token"}})",
                                "application/json");
                return;
            }
        }
        const auto out = impl_->router.handle(req.method, req.path, req.body);
        res.status = out.status;
        res.set_content(out.body.dump(), "application/json");
    };
    impl_->server.Get(R"(/.*)", handler);
    impl_->server.Post(R"(/.*)", handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
    int port = impl_->options.port;
    if (port == 0) {
        port = impl_->server.bind_to_any_port(impl_->options.host);
    } else if (!impl_->server.bind_to_port(impl_->options.host, port)) {
        port = -1;
    }
    if (port < 0)
        throw Error(ErrorCode::Io, "cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
    return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

int HttpServer::start() {
    const int port = bind();
    impl_->thread = std::thread([this] { listen(); });
    impl_->server.wait_until_ready();
    return port;
}

void HttpServer::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace leamatch
