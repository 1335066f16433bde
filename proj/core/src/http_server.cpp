#include "n2f/http_server.hpp"

#include <httplib.h>

#include <cstdio>
#include <stdexcept>

#include "json.hpp"

namespace n2f {

namespace {
    using json = nlohmann::json;

    void send_error_(httplib::Response& res, int status, const std::string& message) {
        res.status = status;
        if (status == 503)
            res.set_header("Retry-After", "1");
        res.set_content(json{{"error", message}, {"status", status}}.dump(), "application/json");
    }

    template <typename Fn>
    void guarded_(httplib::Response& res, Fn&& fn) {
        try {
            fn();
        } catch (const ServiceError& e) {
            send_error_(res, e.status(), e.what());
        } catch (const std::invalid_argument& e) {
            send_error_(res, 400, e.what());
        } catch (const std::exception& e) {
            send_error_(res, 500, e.what());
        }
    }

    std::string number_(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return buf;
    }

    json job_json_(const JobStatus& s) {
        json j{{"id", s.id}, {"state", s.state}, {"stage", s.stage}, {"progress", s.progress}};
        if (!s.error.empty())
            j["error"] = s.error;
        if (!s.model_version.empty())
            j["model_version"] = s.model_version;
        return j;
    }

    // Query parameters of GET /v1/metrics become a slice request body.
    SliceRequest metrics_request_(const httplib::Request& req, VolumeShape volume) {
        json body{{"plane", "axial"}};
        body["method"] = req.has_param("method") ? req.get_param_value("method") : std::string("fbp");
        json params = json::object();
        try {
            if (req.has_param("sigma"))
                params["sigma"] = std::stod(req.get_param_value("sigma"));
            if (req.has_param("f_sc"))
                params["f_sc"] = std::stod(req.get_param_value("f_sc"));
            if (req.has_param("cor_shift"))
                body["cor_shift"] = std::stod(req.get_param_value("cor_shift"));
        } catch (const std::exception&) {
            throw ServiceError(400, "query parameters must be numbers");
        }
        body["params"] = params;
        return parse_slice_request(body.dump(), volume);
    }
}

struct HttpServer::Impl {
    SliceService& service;
    httplib::Server server;

    explicit Impl(SliceService& s) : service(s) {
        server.Get("/v1/info", [this](const httplib::Request&, httplib::Response& res) {
            guarded_(res, [&] { res.set_content(service.info_json(), "application/json"); });
        });

        server.Post("/v1/slice", [this](const httplib::Request& req, httplib::Response& res) {
            guarded_(res, [&] {
                const SliceRequest request = parse_slice_request(req.body, service.volume_shape());
                const SliceResult result = service.slice(request);
                res.set_header("X-Slice-Width", std::to_string(result.image.width()));
                res.set_header("X-Slice-Height", std::to_string(result.image.height()));
                res.set_header("X-Slice-Min", number_(result.min));
                res.set_header("X-Slice-Max", number_(result.max));
                res.set_header("X-Window", number_(result.window.first) + "," + number_(result.window.second));
                res.set_header("X-Method", request.method);
                if (!result.model_version.empty())
                    res.set_header("X-Model-Version", result.model_version);
                const std::string accept = req.get_header_value("Accept");
                if (accept.find("application/octet-stream") != std::string::npos) {
                    const auto bytes = encode_raw_f32(result.image);
                    res.set_content(std::string(bytes.begin(), bytes.end()), "application/octet-stream");
                } else {
                    const auto bytes = encode_png16(result.image, result.window.first, result.window.second);
                    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
                }
            });
        });

        server.Post("/v1/train", [this](const httplib::Request& req, httplib::Response& res) {
            guarded_(res, [&] {
                const std::string id = service.start_training(parse_train_request(req.body));
                res.status = 202;
                res.set_content(json{{"job_id", id}}.dump(), "application/json");
            });
        });

        server.Get(R"(/v1/train/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded_(res, [&] { res.set_content(job_json_(service.job(req.matches[1])).dump(), "application/json"); });
        });

        server.Get(R"(/v1/metrics/([A-Za-z]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded_(res, [&] {
                const std::string spec = req.matches[1];
                const SliceRequest request = metrics_request_(req, service.volume_shape());
                const Scores s = service.metrics(spec, request);
                res.set_content(json{{"slice", spec}, {"method", request.method}, {"psnr", s.psnr}, {"ssim", s.ssim}}.dump(),
                                "application/json");
            });
        });
    }
};

HttpServer::HttpServer(SliceService& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() {
    stop();
}

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound < 0)
            throw std::runtime_error("cannot bind to " + host);
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port))
        throw std::runtime_error("cannot bind to " + host + ":" + std::to_string(port));
    return port;
}

void HttpServer::run() {
    impl_->server.listen_after_bind();
}

void HttpServer::stop() {
    if (impl_)
        impl_->server.stop();
}

} // namespace n2f
