#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "n2f/errors.hpp"
#include "n2f/experiments.hpp"
#include "n2f/http_server.hpp"
#include "n2f/io.hpp"
#include "n2f/parallel.hpp"
#include "n2f/service.hpp"

using namespace n2f;

namespace {

enum ExitCode { exit_ok = 0, exit_usage = 2, exit_invalid = 3, exit_format = 4, exit_other = 5 };

struct DeskArgs {
    std::size_t size = 128;
    std::size_t angles = 256;
    std::size_t cols = 192;
    std::size_t balls = 1000;
    double absorption = 0.10;

    void add_to(CLI::App* app) {
        app->add_option("--size", size, "Volume side length in voxels")->capture_default_str();
        app->add_option("--angles", angles, "Number of projection angles")->capture_default_str();
        app->add_option("--cols", cols, "Detector columns")->capture_default_str();
        app->add_option("--balls", balls, "Number of foam voids")->capture_default_str();
        app->add_option("--absorption", absorption, "Mean absorption of rays through the sample")->capture_default_str();
    }
    DeskConfig config() const {
        DeskConfig d;
        d.n = size;
        d.n_angles = angles;
        d.det_cols = cols;
        d.n_balls = balls;
        d.absorption = absorption;
        return d;
    }
};

// "2..6" or "2,3,5".
std::vector<std::size_t> parse_count_list(const std::string& text) {
    std::vector<std::size_t> out;
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const std::size_t lo = std::stoul(text.substr(0, dots));
        const std::size_t hi = std::stoul(text.substr(dots + 2));
        if (hi < lo)
            throw std::invalid_argument("empty range " + text);
        for (std::size_t v = lo; v <= hi; ++v)
            out.push_back(v);
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(std::stoul(item));
    if (out.empty())
        throw std::invalid_argument("empty list");
    return out;
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(std::stod(item));
    if (out.empty())
        throw std::invalid_argument("empty list");
    return out;
}

Vec3 parse_vec3(const std::string& text) {
    const auto v = parse_number_list(text);
    if (v.size() != 3)
        throw std::invalid_argument("expected three comma-separated numbers, got '" + text + "'");
    return {v[0], v[1], v[2]};
}

// Writes CSV rows to a file, or stdout when the path is empty.
class CsvSink {
public:
    explicit CsvSink(const std::string& path) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_)
                throw std::runtime_error("cannot open " + path);
        }
        write_csv_header(out());
    }
    void operator()(const BenchRow& row) {
        write_csv_row(out(), row);
        out().flush();
        std::fprintf(stderr, "%s %s i0=%g trial=%zu psnr=%.3f ssim=%.4f (%.1fs)\n", row.method.c_str(),
                     row.setting.c_str(), row.photon_count, row.trial, row.scores.psnr, row.scores.ssim, row.seconds);
    }

private:
    std::ostream& out() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
    std::ofstream file_;
};

HttpServer* active_server = nullptr;

void on_signal(int) {
    if (active_server)
        active_server->stop();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"n2f: learned FBP filters from a single noisy tomogram"};
    app.require_subcommand(1);
    std::size_t threads = 0;
    app.add_option("--threads", threads, "Worker threads (0 = all cores)");

    // phantom gen
    auto* phantom = app.add_subcommand("phantom", "Foam phantom datasets")->require_subcommand(1);
    auto* gen = phantom->add_subcommand("gen", "Simulate noiseless projections of a foam phantom");
    DeskArgs gen_desk;
    gen_desk.add_to(gen);
    std::string gen_out;
    std::uint64_t gen_seed = 0;
    double gen_cor = 0.0;
    std::size_t gen_ss = 2;
    gen->add_option("--out", gen_out, "Manifest path to write")->required();
    gen->add_option("--seed", gen_seed, "Phantom seed")->capture_default_str();
    gen->add_option("--cor-shift", gen_cor, "True rotation-axis offset in columns (not recorded in the geometry)");
    gen->add_option("--supersampling", gen_ss, "Rays per detector pixel side")->capture_default_str();

    // noise apply
    auto* noise = app.add_subcommand("noise", "Noise models")->require_subcommand(1);
    auto* noise_apply = noise->add_subcommand("apply", "Apply Poisson noise to a dataset");
    std::string noise_in, noise_out;
    double noise_i0 = 1000.0;
    std::uint64_t noise_seed = 0;
    noise_apply->add_option("--in", noise_in, "Input manifest")->required();
    noise_apply->add_option("--out", noise_out, "Output manifest")->required();
    noise_apply->add_option("--i0", noise_i0, "Incident photons per pixel")->capture_default_str();
    noise_apply->add_option("--seed", noise_seed, "Noise seed")->capture_default_str();

    // train n2f | nnfbp
    auto* train = app.add_subcommand("train", "Train a model")->require_subcommand(1);
    std::string train_dataset, train_out, train_strategy = "1x";
    N2FConfig train_cfg;
    auto add_train_options = [&](CLI::App* cmd) {
        cmd->add_option("--dataset", train_dataset, "Dataset manifest")->required();
        cmd->add_option("--out", train_out, "Model file to write")->required();
        cmd->add_option("--ntrain", train_cfg.n_train, "Training voxels")->capture_default_str();
        cmd->add_option("--hidden", train_cfg.n_hidden, "Hidden units (learned filters)")->capture_default_str();
        cmd->add_option("--seed", train_cfg.seed, "Sampling and initialization seed")->capture_default_str();
    };
    auto* train_n2f = train->add_subcommand("n2f", "Self-supervised training on the dataset itself");
    add_train_options(train_n2f);
    train_n2f->add_option("--splits", train_cfg.n_splits, "Angular splits")->capture_default_str();
    train_n2f->add_option("--strategy", train_strategy, "x1 or 1x")->capture_default_str();
    auto* train_nnfbp = train->add_subcommand("nnfbp", "Supervised training against the dataset's phantom");
    add_train_options(train_nnfbp);

    // recon
    auto* recon = app.add_subcommand("recon", "Reconstruct one slice");
    std::string recon_dataset, recon_model, recon_method = "fbp", recon_slice = "axial", recon_out = "slice",
                                                recon_format = "png";
    std::optional<double> recon_cor;
    double recon_sigma = 2.0, recon_fsc = 0.5;
    std::string recon_origin = "0,0,0", recon_u = "1,0,0", recon_v = "0,1,0";
    std::size_t recon_width = 0, recon_height = 0;
    std::optional<double> win_lo, win_hi;
    recon->add_option("--dataset", recon_dataset, "Dataset manifest")->required();
    recon->add_option("--model", recon_model, "Model file (required for n2f)");
    recon->add_option("--method", recon_method, "fbp, fbp-g, fbp-sc or n2f")->capture_default_str();
    recon->add_option("--slice", recon_slice, "axial, frontal, longitudinal or custom")->capture_default_str();
    recon->add_option("--cor-shift", recon_cor, "Rotation-axis offset in columns used for backprojection");
    recon->add_option("--sigma", recon_sigma, "Gaussian width for fbp-g")->capture_default_str();
    recon->add_option("--fsc", recon_fsc, "Cutoff fraction of Nyquist for fbp-sc")->capture_default_str();
    recon->add_option("--origin", recon_origin, "Custom slice center x,y,z")->capture_default_str();
    recon->add_option("--u", recon_u, "Custom slice u axis")->capture_default_str();
    recon->add_option("--v", recon_v, "Custom slice v axis")->capture_default_str();
    recon->add_option("--width", recon_width, "Custom slice width (default: volume side)");
    recon->add_option("--height", recon_height, "Custom slice height (default: volume side)");
    recon->add_option("--out", recon_out, "Output path prefix")->capture_default_str();
    recon->add_option("--format", recon_format, "png or pgm")->capture_default_str();
    recon->add_option("--window-lo", win_lo, "Window lower bound");
    recon->add_option("--window-hi", win_hi, "Window upper bound");

    // bench
    auto* bench = app.add_subcommand("bench", "Experiments")->require_subcommand(1);
    DeskArgs bench_desk;
    std::string bench_out;
    std::uint64_t bench_seed = 0;
    std::size_t bench_trials = 0;
    auto add_bench_options = [&](CLI::App* cmd) {
        bench_desk.add_to(cmd);
        cmd->add_option("--out", bench_out, "CSV output (default stdout)");
        cmd->add_option("--seed", bench_seed, "Base seed")->capture_default_str();
        cmd->add_option("--trials", bench_trials, "Trials per setting");
    };
    auto* bench_acc = bench->add_subcommand("accuracy", "PSNR/SSIM of all methods over noise levels");
    add_bench_options(bench_acc);
    std::string acc_i0 = "1000,2000,4000,8000,16000,32000";
    bench_acc->add_option("--i0-list", acc_i0, "Photon counts")->capture_default_str();
    auto* bench_hyper_cmd = bench->add_subcommand("hyper", "Splits and strategy study");
    add_bench_options(bench_hyper_cmd);
    std::string hyper_splits = "2..6", hyper_strategies = "x1,1x";
    double hyper_i0 = 1000.0;
    bench_hyper_cmd->add_option("--splits", hyper_splits, "Split counts, e.g. 2..6")->capture_default_str();
    bench_hyper_cmd->add_option("--strategies", hyper_strategies, "x1,1x")->capture_default_str();
    bench_hyper_cmd->add_option("--i0", hyper_i0, "Photon count")->capture_default_str();
    auto* bench_vox = bench->add_subcommand("voxels", "Training-set size study");
    add_bench_options(bench_vox);
    std::string vox_list = "1000,5000,10000,50000,100000";
    double vox_i0 = 1000.0;
    bench_vox->add_option("--ntrain-list", vox_list, "Training voxel counts")->capture_default_str();
    bench_vox->add_option("--i0", vox_i0, "Photon count")->capture_default_str();
    auto* bench_time = bench->add_subcommand("timing", "Data preparation and per-slice timings");
    bench_desk.add_to(bench_time);
    std::size_t time_slices_n = 100;
    bench_time->add_option("--slices", time_slices_n, "Slices to time")->capture_default_str();
    bench_time->add_option("--seed", bench_seed, "Seed")->capture_default_str();

    // serve
    auto* serve = app.add_subcommand("serve", "Start the slice service");
    std::string serve_dataset, serve_model, serve_host = "127.0.0.1";
    int serve_port = 8080;
    serve->add_option("--dataset", serve_dataset, "Dataset manifest")->required();
    serve->add_option("--model", serve_model, "Model file");
    serve->add_option("--port", serve_port, "TCP port (0 picks a free one)")->capture_default_str();
    serve->add_option("--host", serve_host, "Listen address")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        set_thread_count(threads);

        if (gen->parsed()) {
            const DeskConfig desk = gen_desk.config();
            DeskConfig d = desk;
            d.supersampling = gen_ss;
            const Scenario s = make_scenario(d, gen_seed, gen_cor);
            DatasetManifest m;
            m.seed = gen_seed;
            FoamConfig cfg = default_foam_config(desk.n, gen_seed);
            cfg.n_balls = desk.n_balls;
            cfg.density = s.phantom.density;
            m.phantom = PhantomRecord{cfg, {desk.n, desk.n, desk.n}};
            m.window = std::pair{0.0, s.phantom.density};
            save_dataset(gen_out, s.clean, m);
            std::printf("wrote %s (%zu angles, %zux%zu detector, density %.6g)\n", gen_out.c_str(), desk.n_angles,
                        desk.n, desk.det_cols, s.phantom.density);
        } else if (noise_apply->parsed()) {
            Dataset d = load_dataset(noise_in);
            const NoiseSpec spec{noise_i0, noise_seed};
            DatasetManifest m = d.manifest;
            m.noise = spec;
            m.data_file.clear();
            save_dataset(noise_out, apply_poisson_noise(d.sinogram, spec), m);
            std::printf("wrote %s (I0 %g, seed %llu)\n", noise_out.c_str(), noise_i0,
                        static_cast<unsigned long long>(noise_seed));
        } else if (train_n2f->parsed() || train_nnfbp->parsed()) {
            const Dataset d = load_dataset(train_dataset);
            N2FModel model;
            if (train_n2f->parsed()) {
                train_cfg.strategy = parse_strategy(train_strategy);
                model = train_noise2filter(d.sinogram, train_cfg);
            } else {
                if (!d.manifest.phantom)
                    throw std::invalid_argument("nnfbp training needs a dataset whose manifest records its phantom");
                const Volume truth = voxelize_foam(phantom_from_record(*d.manifest.phantom), d.manifest.phantom->volume);
                model = train_nnfbp_supervised(d.sinogram, truth, train_cfg);
            }
            save_model(train_out, model);
            std::printf("wrote %s (%s, version %s, %.1fs)\n", train_out.c_str(), model.method.c_str(),
                        model.version().c_str(), model.train_seconds);
        } else if (recon->parsed()) {
            Dataset d = load_dataset(recon_dataset);
            std::optional<N2FModel> model;
            if (!recon_model.empty())
                model = load_model(recon_model);
            SliceService service(std::move(d), std::move(model));
            SliceRequest req;
            const VolumeShape vol = service.volume_shape();
            if (recon_slice == "custom") {
                req.orientation.origin = parse_vec3(recon_origin);
                req.orientation.u_axis = parse_vec3(recon_u);
                req.orientation.v_axis = parse_vec3(recon_v);
                req.orientation.width = recon_width ? recon_width : vol.nx;
                req.orientation.height = recon_height ? recon_height : vol.ny;
                req.orientation.validate();
            } else {
                req.orientation = ortho_slice(vol, parse_ortho_plane(recon_slice));
            }
            req.method = recon_method;
            for (char& c : req.method)
                if (c == '-')
                    c = '_';
            req.sigma = recon_sigma;
            req.f_sc = recon_fsc;
            req.cor_shift = recon_cor;
            if (win_lo && win_hi)
                req.window = std::pair{*win_lo, *win_hi};
            const SliceResult result = service.slice(req);
            const std::string image_path = recon_out + (recon_format == "pgm" ? ".pgm" : ".png");
            if (recon_format == "pgm")
                write_pgm16(image_path, result.image, result.window.first, result.window.second);
            else if (recon_format == "png")
                write_png16(image_path, result.image, result.window.first, result.window.second);
            else
                throw std::invalid_argument("--format must be png or pgm");
            write_raw_f32(recon_out + ".f32", result.image);
            std::printf("wrote %s and %s.f32 (%zux%zu, min %.6g, max %.6g)\n", image_path.c_str(), recon_out.c_str(),
                        result.image.width(), result.image.height(), result.min, result.max);
        } else if (bench_acc->parsed()) {
            CsvSink sink(bench_out);
            AccuracyOptions opt;
            opt.desk = bench_desk.config();
            opt.photon_counts = parse_number_list(acc_i0);
            opt.trials = bench_trials ? bench_trials : 20;
            opt.seed = bench_seed;
            opt.on_row = [&](const BenchRow& r) { sink(r); };
            bench_accuracy(opt);
        } else if (bench_hyper_cmd->parsed()) {
            CsvSink sink(bench_out);
            HyperOptions opt;
            opt.desk = bench_desk.config();
            opt.splits = parse_count_list(hyper_splits);
            opt.strategies.clear();
            std::stringstream ss(hyper_strategies);
            std::string item;
            while (std::getline(ss, item, ','))
                opt.strategies.push_back(parse_strategy(item));
            opt.photon_count = hyper_i0;
            opt.trials = bench_trials ? bench_trials : 5;
            opt.seed = bench_seed;
            opt.on_row = [&](const BenchRow& r) { sink(r); };
            bench_hyper(opt);
        } else if (bench_vox->parsed()) {
            CsvSink sink(bench_out);
            VoxelOptions opt;
            opt.desk = bench_desk.config();
            opt.n_train_list = parse_count_list(vox_list);
            opt.photon_count = vox_i0;
            opt.trials = bench_trials ? bench_trials : 5;
            opt.seed = bench_seed;
            opt.on_row = [&](const BenchRow& r) { sink(r); };
            bench_voxels(opt);
        } else if (bench_time->parsed()) {
            const TimingReport r = bench_timing(bench_desk.config(), time_slices_n, bench_seed);
            std::printf("n_e,n_hidden,prepare_s,train_s,fbp_slice_ms,n2f_slice_ms,ratio\n");
            std::printf("%zu,%zu,%.3f,%.3f,%.3f,%.3f,%.3f\n", r.n_e, r.n_hidden, r.prepare_seconds, r.train_seconds,
                        r.fbp_slice_ms, r.n2f_slice_ms, r.ratio());
        } else if (serve->parsed()) {
            Dataset d = load_dataset(serve_dataset);
            std::optional<N2FModel> model;
            if (!serve_model.empty())
                model = load_model(serve_model);
            SliceService service(std::move(d), std::move(model));
            HttpServer server(service);
            const int port = server.bind(serve_host, serve_port);
            active_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::printf("serving on http://%s:%d/v1\n", serve_host.c_str(), port);
            std::fflush(stdout);
            server.run();
            active_server = nullptr;
        }
    } catch (const FormatError& e) {
        std::fprintf(stderr, "n2f: format error: %s\n", e.what());
        return exit_format;
    } catch (const ServiceError& e) {
        std::fprintf(stderr, "n2f: %s\n", e.what());
        return e.status() == 400 ? exit_invalid : exit_other;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "n2f: invalid argument: %s\n", e.what());
        return exit_invalid;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "n2f: %s\n", e.what());
        return exit_other;
    }
    return exit_ok;
}
