#include <catch2/catch.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "json.hpp"
#include "n2f/errors.hpp"
#include "n2f/io.hpp"

using namespace n2f;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("n2f_io_" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

N2FModel synthetic_model(const Geometry& g) {
    N2FModel m;
    m.basis = make_basis(default_half_width(g));
    m.params = MLPParams(3, m.basis.size());
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    std::vector<double> theta(m.params.parameter_count());
    for (double& v : theta)
        v = nd(rng);
    m.params = MLPParams::unflatten(3, m.basis.size(), theta);
    m.scaling = ScalingRecord::identity(m.basis.size());
    m.scaling.in_scale[2] = 0.37;
    m.scaling.out_scale = 12.5;
    m.scaling.out_offset = 0.05;
    m.learned = extract_filters(m.params, m.basis, m.scaling);
    m.strategy = Strategy::x1;
    m.n_splits = 4;
    m.n_train = 1234;
    m.seed = 99;
    m.fingerprint = GeometryFingerprint::of(g, m.basis);
    return m;
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) | b[at + 3];
}

} // namespace

TEST_CASE("datasets round-trip bit-exactly", "[io]") {
    TempDir dir;
    Geometry g = make_parallel_geometry(7, 3, 5, -1.25);
    g.pixel_size = 0.75;
    const Sinogram s = fixtures::random_sinogram(g, 1);
    DatasetManifest m;
    m.seed = 42;
    m.phantom = PhantomRecord{default_foam_config(32, 8), {32, 32, 32}};
    m.phantom->config.density = 0.0123456789;
    m.noise = NoiseSpec{2000, 7};
    m.window = std::pair{-0.5, 1.5};
    save_dataset(dir.path / "scan.txt", s, m);
    CHECK(fs::file_size(dir.path / "scan.f32") == s.data.size() * 4);
    const Dataset d = load_dataset(dir.path / "scan.txt");
    CHECK(d.sinogram.geometry == g);
    CHECK(d.sinogram.data == s.data);
    CHECK(d.manifest.seed == 42);
    REQUIRE(d.manifest.phantom);
    CHECK(d.manifest.phantom->config.density == 0.0123456789);
    CHECK(d.manifest.phantom->config.seed == 8);
    CHECK(d.manifest.phantom->volume == VolumeShape{32, 32, 32});
    REQUIRE(d.manifest.noise);
    CHECK(d.manifest.noise->photon_count == 2000);
    CHECK(d.manifest.window == std::pair{-0.5, 1.5});
    CHECK(parse_manifest(format_manifest(d.manifest)).geometry == g);
}

TEST_CASE("data files are little-endian float32", "[io]") {
    TempDir dir;
    Sinogram s = Sinogram::zeros(make_parallel_geometry(1, 1, 2));
    s.data = {1.0f, -2.5f};
    save_dataset(dir.path / "a.txt", s, {});
    std::ifstream in(dir.path / "a.f32", std::ios::binary);
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    const unsigned char want[8] = {0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x20, 0xc0};
    CHECK(std::memcmp(bytes, want, 8) == 0);
}

TEST_CASE("damaged datasets are rejected", "[io]") {
    TempDir dir;
    const Sinogram s = fixtures::random_sinogram(make_parallel_geometry(4, 2, 3), 2);
    save_dataset(dir.path / "d.txt", s, {});
    fs::resize_file(dir.path / "d.f32", s.data.size() * 4 - 1);
    CHECK_THROWS_AS(load_dataset(dir.path / "d.txt"), FormatError);
    fs::resize_file(dir.path / "d.f32", s.data.size() * 4 + 4);
    CHECK_THROWS_AS(load_dataset(dir.path / "d.txt"), FormatError);
    fs::remove(dir.path / "d.f32");
    CHECK_THROWS_AS(load_dataset(dir.path / "d.txt"), FormatError);

    const std::string good = format_manifest(DatasetManifest{1, s.geometry, "d.f32", 0, {}, {}, {}});
    CHECK_NOTHROW(parse_manifest(good));
    auto replace = [&](const std::string& from, const std::string& to) {
        std::string t = good;
        t.replace(t.find(from), from.size(), to);
        return t;
    };
    CHECK_THROWS_AS(parse_manifest(replace("det_rows = 2", "det_rows = two")), FormatError);
    CHECK_THROWS_AS(parse_manifest(replace("n_angles = 4", "n_angles = 5")), FormatError);
    CHECK_THROWS_AS(parse_manifest(replace("format_version = 1", "format_version = 9")), FormatError);
    CHECK_THROWS_AS(parse_manifest(replace("det_cols = 3\n", "")), FormatError);
    CHECK_THROWS_AS(parse_manifest(good + "garbage line\n"), FormatError);
    CHECK_THROWS_AS(parse_manifest(replace("pixel_size = 1", "pixel_size = -1")), FormatError);
}

TEST_CASE("non-finite projections are a format error", "[io]") {
    TempDir dir;
    Sinogram s = Sinogram::zeros(make_parallel_geometry(2, 2, 2));
    save_dataset(dir.path / "n.txt", s, {});
    std::fstream f(dir.path / "n.f32", std::ios::binary | std::ios::in | std::ios::out);
    const float nan = std::nanf("");
    f.seekp(8);
    f.write(reinterpret_cast<const char*>(&nan), 4);
    f.close();
    CHECK_THROWS_AS(load_dataset(dir.path / "n.txt"), FormatError);
}

TEST_CASE("models round-trip through JSON", "[io]") {
    TempDir dir;
    const Geometry g = make_parallel_geometry(16, 8, 24);
    const N2FModel m = synthetic_model(g);
    save_model(dir.path / "m.json", m);
    const N2FModel back = load_model(dir.path / "m.json");
    CHECK(back.params == m.params);
    CHECK(back.scaling == m.scaling);
    CHECK(back.basis == m.basis);
    CHECK(back.fingerprint == m.fingerprint);
    CHECK(back.strategy == Strategy::x1);
    CHECK(back.n_splits == 4);
    CHECK(back.n_train == 1234);
    CHECK(back.seed == 99);
    CHECK(back.filter_fingerprints() == m.filter_fingerprints());
    CHECK(back.version() == m.version());
}

TEST_CASE("tampered or malformed models are rejected", "[io]") {
    const N2FModel m = synthetic_model(make_parallel_geometry(16, 8, 24));
    const std::string text = model_to_json(m);
    CHECK_THROWS_AS(model_from_json("{not json"), FormatError);
    CHECK_THROWS_AS(model_from_json("{}"), FormatError);
    // Parameters of a modified model combined with the original filter fingerprints.
    auto with_original_filters = [&](const N2FModel& other) {
        nlohmann::json j = nlohmann::json::parse(model_to_json(other));
        j["filters"] = nlohmann::json::parse(text)["filters"];
        return j.dump();
    };
    N2FModel changed = m;
    changed.params.output_bias += 1.0;
    CHECK_NOTHROW(model_from_json(with_original_filters(changed)));
    changed = m;
    changed.params.hidden_weights[0] += 1e-3;
    CHECK_THROWS_AS(model_from_json(with_original_filters(changed)), FormatError);
    std::string wrong_knots = text;
    const std::string knots = "\"knots\": [";
    wrong_knots.insert(wrong_knots.find(knots) + knots.size(), "\n  3,");
    CHECK_THROWS_AS(model_from_json(wrong_knots), FormatError);
}

TEST_CASE("slice images encode as 16-bit PNG, PGM and raw float", "[io]") {
    TempDir dir;
    SliceOrientation o;
    o.width = 5;
    o.height = 3;
    SliceImage img = SliceImage::zeros(o);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = static_cast<double>(i) / 14.0;
    const auto png = encode_png16(img, 0.0, 1.0);
    const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    REQUIRE(png.size() > 33);
    CHECK(std::memcmp(png.data(), sig, 8) == 0);
    CHECK(be32(png, 16) == 5);
    CHECK(be32(png, 20) == 3);
    CHECK(png[24] == 16);
    CHECK(png[25] == 0);

    write_pgm16(dir.path / "s.pgm", img, 0.0, 1.0);
    std::ifstream pgm(dir.path / "s.pgm", std::ios::binary);
    std::string magic;
    std::size_t w = 0;
    std::size_t h = 0;
    int maxval = 0;
    pgm >> magic >> w >> h >> maxval;
    pgm.get();
    CHECK(magic == "P5");
    CHECK(w == 5);
    CHECK(h == 3);
    CHECK(maxval == 65535);
    unsigned char last[2];
    pgm.seekg(-2, std::ios::end);
    pgm.read(reinterpret_cast<char*>(last), 2);
    CHECK(last[0] == 0xff);
    CHECK(last[1] == 0xff);

    const auto raw = encode_raw_f32(img);
    REQUIRE(raw.size() == 15 * 4);
    float v = 0.0f;
    std::memcpy(&v, raw.data() + 7 * 4, 4);
    CHECK(v == static_cast<float>(7.0 / 14.0));
}

TEST_CASE("phantom records regenerate the same foam", "[io]") {
    PhantomRecord r{default_foam_config(32, 3), {32, 32, 32}};
    r.config.n_balls = 40;
    r.config.density = 0.02;
    const FoamPhantom a = phantom_from_record(r);
    FoamConfig cfg = r.config;
    CHECK(a == generate_foam(cfg));
    CHECK(a.density == 0.02);
}
