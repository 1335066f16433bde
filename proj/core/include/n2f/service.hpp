#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "n2f/fbp.hpp"
#include "n2f/io.hpp"
#include "n2f/metrics.hpp"
#include "n2f/noise2filter.hpp"

namespace n2f {

/// Failure with the HTTP status it maps to.
class ServiceError : public std::runtime_error {
public:
    ServiceError(int status, const std::string& message) : std::runtime_error(message), status_(status) {}
    [[nodiscard]] int status() const noexcept { return status_; }

private:
    int status_;
};

struct SliceRequest {
    SliceOrientation orientation;
    std::string method = "fbp";  // fbp | fbp_g | fbp_sc | n2f
    std::optional<double> sigma;
    std::optional<double> f_sc;
    std::optional<double> cor_shift;
    std::optional<std::pair<double, double>> window;
};

/// Parses the JSON body of POST /v1/slice. "orientation" holds origin, u, v,
/// width, height and pixel_size, or "plane" names an ortho-slice. Throws
/// ServiceError(400) on malformed input, including non-orthonormal axes.
SliceRequest parse_slice_request(const std::string& body, VolumeShape volume);

struct SliceResult {
    SliceImage image;
    double min = 0.0;
    double max = 0.0;
    std::pair<double, double> window;
    std::string model_version;  // empty unless method is n2f
};

struct TrainRequest {
    std::size_t n_splits = 3;
    Strategy strategy = Strategy::one_x;
    std::size_t n_train = 50'000;
    std::size_t n_hidden = 4;
    std::uint64_t seed = 0;
};

TrainRequest parse_train_request(const std::string& body);

struct JobStatus {
    std::string id;
    std::string state;   // running | done | failed
    std::string stage;
    double progress = 0.0;
    std::string error;
    std::string model_version;
};

/// Holds one dataset and serves slice reconstructions from immutable filtered
/// caches. The active model and its cache are replaced together by a single
/// pointer exchange, so every response comes from exactly one model.
class SliceService {
public:
    explicit SliceService(Dataset dataset, std::optional<N2FModel> model = std::nullopt);
    ~SliceService();
    SliceService(const SliceService&) = delete;
    SliceService& operator=(const SliceService&) = delete;

    [[nodiscard]] std::string info_json() const;
    [[nodiscard]] SliceResult slice(const SliceRequest& request) const;
    /// PSNR and SSIM against the phantom, for "axial", "frontal",
    /// "longitudinal" or "ortho" (mean of the three).
    [[nodiscard]] Scores metrics(const std::string& slice_spec, const SliceRequest& request) const;

    /// Installs a model; throws ServiceError(409) when it does not fit the dataset.
    void set_model(N2FModel model);
    [[nodiscard]] std::shared_ptr<const N2FModel> model() const;

    /// Starts background training; throws ServiceError(409) while a job runs.
    std::string start_training(const TrainRequest& request);
    [[nodiscard]] JobStatus job(const std::string& id) const;
    /// Blocks until the current training job, if any, has finished.
    void wait_for_training();

    [[nodiscard]] VolumeShape volume_shape() const noexcept { return volume_; }
    [[nodiscard]] const Dataset& dataset() const noexcept { return dataset_; }

private:
    struct Serving {
        std::shared_ptr<const N2FModel> model;
        std::shared_ptr<const FilteredStack> cache;
    };

    std::shared_ptr<const Serving> serving() const;
    std::shared_ptr<const FilteredStack> baseline_cache(const std::string& key, const Filter& f) const;
    const Volume& truth() const;
    void update_job(const std::string& id, const std::string& stage, double progress);

    Dataset dataset_;
    VolumeShape volume_;

    mutable std::mutex serving_mutex_;
    std::shared_ptr<const Serving> serving_;
    bool rebuilding_ = false;

    mutable std::mutex cache_mutex_;
    mutable std::map<std::string, std::shared_ptr<const FilteredStack>> baseline_caches_;
    mutable std::vector<std::string> cache_order_;

    mutable std::once_flag truth_once_;
    mutable std::unique_ptr<Volume> truth_;

    mutable std::mutex job_mutex_;
    std::map<std::string, JobStatus> jobs_;
    bool job_running_ = false;
    std::size_t job_counter_ = 0;
    std::jthread worker_;
};

} // namespace n2f
