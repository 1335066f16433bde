#include "n2f/service.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace n2f {

namespace {
    using json = nlohmann::json;

    constexpr std::size_t max_baseline_caches_ = 6;

    Vec3 vec3_(const json& j, const char* name) {
        if (!j.contains(name) || !j.at(name).is_array() || j.at(name).size() != 3)
            throw ServiceError(400, std::string("orientation.") + name + " must be an array of three numbers");
        Vec3 v;
        try {
            v = {j.at(name)[0].get<double>(), j.at(name)[1].get<double>(), j.at(name)[2].get<double>()};
        } catch (const json::exception&) {
            throw ServiceError(400, std::string("orientation.") + name + " must hold numbers");
        }
        if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z))
            throw ServiceError(400, std::string("orientation.") + name + " must be finite");
        return v;
    }

    json orientation_json_(const SliceOrientation& o) {
        return {{"origin", {o.origin.x, o.origin.y, o.origin.z}},
                {"u", {o.u_axis.x, o.u_axis.y, o.u_axis.z}},
                {"v", {o.v_axis.x, o.v_axis.y, o.v_axis.z}},
                {"width", o.width},
                {"height", o.height},
                {"pixel_size", o.pixel_size}};
    }

    json model_json_(const N2FModel& m) {
        return {{"version", m.version()},     {"method", m.method},   {"strategy", std::string(to_string(m.strategy))},
                {"n_splits", m.n_splits},     {"n_train", m.n_train}, {"n_hidden", m.params.n_hidden},
                {"n_basis", m.basis.size()},  {"seed", m.seed},       {"train_seconds", m.train_seconds}};
    }

    std::string param_key_(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }
}

SliceRequest parse_slice_request(const std::string& body, VolumeShape volume) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw ServiceError(400, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object())
        throw ServiceError(400, "request body must be a JSON object");
    SliceRequest r;
    try {
        if (j.contains("plane")) {
            r.orientation = ortho_slice(volume, parse_ortho_plane(j.at("plane").get<std::string>()));
        } else if (j.contains("orientation")) {
            const json& o = j.at("orientation");
            if (!o.is_object())
                throw ServiceError(400, "orientation must be an object");
            r.orientation.origin = vec3_(o, "origin");
            r.orientation.u_axis = vec3_(o, "u");
            r.orientation.v_axis = vec3_(o, "v");
            r.orientation.width = o.value("width", volume.nx);
            r.orientation.height = o.value("height", volume.ny);
            r.orientation.pixel_size = o.value("pixel_size", 1.0);
        } else {
            throw ServiceError(400, "request needs 'orientation' or 'plane'");
        }
        r.method = j.value("method", std::string("fbp"));
        if (j.contains("params")) {
            const json& p = j.at("params");
            if (p.contains("sigma"))
                r.sigma = p.at("sigma").get<double>();
            if (p.contains("f_sc"))
                r.f_sc = p.at("f_sc").get<double>();
        }
        if (j.contains("cor_shift") && !j.at("cor_shift").is_null())
            r.cor_shift = j.at("cor_shift").get<double>();
        if (j.contains("window") && !j.at("window").is_null()) {
            const json& w = j.at("window");
            if (!w.is_array() || w.size() != 2)
                throw ServiceError(400, "window must be [lo, hi]");
            r.window = std::pair{w[0].get<double>(), w[1].get<double>()};
        }
    } catch (const json::exception& e) {
        throw ServiceError(400, std::string("malformed request: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ServiceError(400, e.what());
    }
    if (r.orientation.width == 0 || r.orientation.height == 0 || r.orientation.width > 4096 ||
        r.orientation.height > 4096)
        throw ServiceError(400, "slice width and height must lie in [1, 4096]");
    try {
        r.orientation.validate();
    } catch (const std::invalid_argument& e) {
        throw ServiceError(400, e.what());
    }
    if (r.cor_shift && !std::isfinite(*r.cor_shift))
        throw ServiceError(400, "cor_shift must be finite");
    return r;
}

TrainRequest parse_train_request(const std::string& body) {
    TrainRequest r;
    json j;
    try {
        j = body.empty() ? json::object() : json::parse(body);
        if (!j.is_object())
            throw ServiceError(400, "request body must be a JSON object");
        r.n_splits = j.value("splits", r.n_splits);
        if (j.contains("strategy"))
            r.strategy = parse_strategy(j.at("strategy").get<std::string>());
        r.n_train = j.value("n_train", r.n_train);
        r.n_hidden = j.value("n_hidden", r.n_hidden);
        r.seed = j.value("seed", r.seed);
    } catch (const json::exception& e) {
        throw ServiceError(400, std::string("malformed training request: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ServiceError(400, e.what());
    }
    if (r.n_splits < 2 || r.n_hidden == 0 || r.n_train == 0)
        throw ServiceError(400, "splits must be at least 2; n_train and n_hidden must be positive");
    return r;
}

SliceService::SliceService(Dataset dataset, std::optional<N2FModel> model)
    : dataset_(std::move(dataset)), volume_(reconstruction_shape(dataset_.sinogram.geometry)),
      serving_(std::make_shared<Serving>()) {
    if (dataset_.manifest.phantom)
        volume_ = dataset_.manifest.phantom->volume;
    if (model)
        set_model(std::move(*model));
}

SliceService::~SliceService() {
    wait_for_training();
}

std::shared_ptr<const SliceService::Serving> SliceService::serving() const {
    std::lock_guard lock(serving_mutex_);
    return serving_;
}

std::shared_ptr<const N2FModel> SliceService::model() const {
    return serving()->model;
}

void SliceService::set_model(N2FModel model) {
    if (!model.fingerprint.matches(dataset_.sinogram.geometry))
        throw ServiceError(409, "model was trained for " + std::to_string(model.fingerprint.n_angles) + " angles and a " +
                                    std::to_string(model.fingerprint.det_rows) + "x" +
                                    std::to_string(model.fingerprint.det_cols) + " detector; dataset differs");
    {
        std::lock_guard lock(serving_mutex_);
        rebuilding_ = true;
    }
    auto next = std::make_shared<Serving>();
    try {
        next->model = std::make_shared<const N2FModel>(std::move(model));
        next->cache = std::make_shared<const FilteredStack>(build_cache(*next->model, dataset_.sinogram));
    } catch (...) {
        std::lock_guard lock(serving_mutex_);
        rebuilding_ = false;
        throw;
    }
    std::lock_guard lock(serving_mutex_);
    serving_ = std::move(next);
    rebuilding_ = false;
}

std::shared_ptr<const FilteredStack> SliceService::baseline_cache(const std::string& key, const Filter& f) const {
    {
        std::lock_guard lock(cache_mutex_);
        auto it = baseline_caches_.find(key);
        if (it != baseline_caches_.end())
            return it->second;
    }
    auto built = std::make_shared<const FilteredStack>(filter_and_cache(dataset_.sinogram, std::span<const Filter>(&f, 1)));
    std::lock_guard lock(cache_mutex_);
    auto [it, inserted] = baseline_caches_.emplace(key, built);
    if (inserted) {
        cache_order_.push_back(key);
        // Oldest first; "fbp" stays.
        while (cache_order_.size() > max_baseline_caches_) {
            auto victim = std::find_if(cache_order_.begin(), cache_order_.end(),
                                       [](const std::string& k) { return k != "fbp"; });
            baseline_caches_.erase(*victim);
            cache_order_.erase(victim);
        }
    }
    return it->second;
}

SliceResult SliceService::slice(const SliceRequest& request) const {
    BackprojectOptions options;
    options.cor_shift = request.cor_shift.value_or(dataset_.sinogram.geometry.cor_shift);
    const std::size_t hw = default_half_width(dataset_.sinogram.geometry);

    SliceResult result;
    if (request.method == "n2f") {
        const auto state = serving();
        if (!state->model) {
            bool busy = false;
            {
                std::lock_guard lock(serving_mutex_);
                busy = rebuilding_;
            }
            {
                std::lock_guard lock(job_mutex_);
                busy = busy || job_running_;
            }
            if (busy)
                throw ServiceError(503, "model cache is being rebuilt; retry shortly");
            throw ServiceError(409, "no model loaded; train one or start the service with --model");
        }
        result.image = reconstruct_slice_n2f(*state->model, *state->cache, request.orientation, options);
        result.model_version = state->model->version();
    } else if (request.method == "fbp") {
        result.image = baseline_cache("fbp", ram_lak(hw))->backproject(0, request.orientation, options);
    } else if (request.method == "fbp_g") {
        const double sigma = request.sigma.value_or(2.0);
        if (!(sigma > 0.0) || sigma > 100.0)
            throw ServiceError(400, "params.sigma must lie in (0, 100]");
        result.image = baseline_cache("fbp_g:" + param_key_(sigma), baseline_filter(BaselineKind::gaussian, sigma, hw))
                           ->backproject(0, request.orientation, options);
    } else if (request.method == "fbp_sc") {
        const double f_sc = request.f_sc.value_or(0.5);
        if (!(f_sc > 0.0 && f_sc <= 1.0))
            throw ServiceError(400, "params.f_sc must lie in (0, 1]");
        result.image = baseline_cache("fbp_sc:" + param_key_(f_sc), baseline_filter(BaselineKind::freqscale, f_sc, hw))
                           ->backproject(0, request.orientation, options);
    } else {
        throw ServiceError(400, "unknown method '" + request.method + "' (fbp, fbp_g, fbp_sc, n2f)");
    }
    const auto [lo, hi] = std::minmax_element(result.image.data.begin(), result.image.data.end());
    result.min = *lo;
    result.max = *hi;
    if (request.window)
        result.window = *request.window;
    else if (dataset_.manifest.window)
        result.window = *dataset_.manifest.window;
    else
        result.window = {result.min, result.max};
    return result;
}

const Volume& SliceService::truth() const {
    std::call_once(truth_once_, [this] {
        if (dataset_.manifest.phantom)
            truth_ = std::make_unique<Volume>(
                voxelize_foam(phantom_from_record(*dataset_.manifest.phantom), dataset_.manifest.phantom->volume));
    });
    if (!truth_)
        throw ServiceError(404, "dataset manifest has no phantom; no ground truth available");
    return *truth_;
}

Scores SliceService::metrics(const std::string& slice_spec, const SliceRequest& request) const {
    const Volume& gt = truth();
    std::vector<OrthoPlane> planes;
    if (slice_spec == "ortho") {
        planes = {OrthoPlane::axial, OrthoPlane::frontal, OrthoPlane::longitudinal};
    } else {
        try {
            planes = {parse_ortho_plane(slice_spec)};
        } catch (const std::invalid_argument& e) {
            throw ServiceError(400, e.what());
        }
    }
    std::vector<SliceImage> recon;
    std::vector<SliceImage> reference;
    for (OrthoPlane p : planes) {
        SliceRequest r = request;
        r.orientation = ortho_slice(gt.shape, p, gt.voxel_size);
        recon.push_back(slice(r).image);
        reference.push_back(sample_volume(gt, r.orientation));
    }
    return ortho_scores(recon, reference);
}

std::string SliceService::info_json() const {
    const Geometry& g = dataset_.sinogram.geometry;
    json j;
    j["api_version"] = "v1";
    j["geometry"] = {{"n_angles", g.n_angles()},
                     {"det_rows", g.det_rows},
                     {"det_cols", g.det_cols},
                     {"pixel_size", g.pixel_size},
                     {"cor_shift", g.cor_shift}};
    j["volume_shape"] = {volume_.nx, volume_.ny, volume_.nz};
    j["methods"] = {"fbp", "fbp_g", "fbp_sc", "n2f"};
    j["has_ground_truth"] = dataset_.manifest.phantom.has_value();
    json planes = json::object();
    for (OrthoPlane p : {OrthoPlane::axial, OrthoPlane::frontal, OrthoPlane::longitudinal})
        planes[std::string(to_string(p))] = orientation_json_(ortho_slice(volume_, p));
    j["ortho_slices"] = planes;
    if (dataset_.manifest.window)
        j["window"] = {dataset_.manifest.window->first, dataset_.manifest.window->second};
    const auto state = serving();
    j["model"] = state->model ? model_json_(*state->model) : json(nullptr);
    {
        std::lock_guard lock(job_mutex_);
        j["training"] = job_running_;
    }
    return j.dump();
}

void SliceService::update_job(const std::string& id, const std::string& stage, double progress) {
    std::lock_guard lock(job_mutex_);
    JobStatus& s = jobs_.at(id);
    s.stage = stage;
    s.progress = progress;
}

std::string SliceService::start_training(const TrainRequest& request) {
    if (request.n_splits > dataset_.sinogram.geometry.n_angles())
        throw ServiceError(400, "more splits than projection angles");
    std::string id;
    {
        std::lock_guard lock(job_mutex_);
        if (job_running_)
            throw ServiceError(409, "a training job is already running");
        job_running_ = true;
        id = "job-" + std::to_string(++job_counter_);
        jobs_[id] = JobStatus{id, "running", "preparing", 0.0, {}, {}};
    }
    if (worker_.joinable())
        worker_.join();
    worker_ = std::jthread([this, id, request] {
        try {
            N2FConfig cfg;
            cfg.n_splits = request.n_splits;
            cfg.strategy = request.strategy;
            cfg.n_train = request.n_train;
            cfg.n_hidden = request.n_hidden;
            cfg.seed = request.seed;
            update_job(id, "training", 0.1);
            N2FModel model = train_noise2filter(dataset_.sinogram, cfg);
            update_job(id, "caching", 0.9);
            const std::string version = model.version();
            set_model(std::move(model));
            std::lock_guard lock(job_mutex_);
            JobStatus& s = jobs_.at(id);
            s.state = "done";
            s.stage = "done";
            s.progress = 1.0;
            s.model_version = version;
            job_running_ = false;
        } catch (const std::exception& e) {
            std::lock_guard lock(job_mutex_);
            JobStatus& s = jobs_.at(id);
            s.state = "failed";
            s.error = e.what();
            job_running_ = false;
        }
    });
    return id;
}

JobStatus SliceService::job(const std::string& id) const {
    std::lock_guard lock(job_mutex_);
    auto it = jobs_.find(id);
    if (it == jobs_.end())
        throw ServiceError(404, "unknown job '" + id + "'");
    return it->second;
}

void SliceService::wait_for_training() {
    if (worker_.joinable())
        worker_.join();
}

} // namespace n2f
