#pragma once

#include <memory>
#include <string>

#include "n2f/service.hpp"

namespace n2f {

/// HTTP front end of a SliceService. Routes live under /v1:
///   GET  /v1/info
///   POST /v1/slice            JSON request; PNG (default) or float32 with
///                             Accept: application/octet-stream
///   POST /v1/train            starts a background job, returns {"job_id"}
///   GET  /v1/train/{id}
///   GET  /v1/metrics/{slice}  axial | frontal | longitudinal | ortho
class HttpServer {
public:
    explicit HttpServer(SliceService& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds to host:port (port 0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop() is called.
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace n2f
