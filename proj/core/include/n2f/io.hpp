#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "n2f/noise2filter.hpp"
#include "n2f/phantom.hpp"
#include "n2f/projector.hpp"

namespace n2f {

inline constexpr int dataset_format_version = 1;
inline constexpr int model_format_version = 1;

/// Phantom recipe: generate_foam(config) with the calibrated density.
struct PhantomRecord {
    FoamConfig config;
    VolumeShape volume;
};

/// Text side of a dataset. The projections live in a raw little-endian float32
/// file in [angle][row][col] order next to the manifest.
struct DatasetManifest {
    int format_version = dataset_format_version;
    Geometry geometry;
    std::string data_file;          // relative to the manifest's directory
    std::uint64_t seed = 0;
    std::optional<PhantomRecord> phantom;
    std::optional<NoiseSpec> noise;
    std::optional<std::pair<double, double>> window;
};

struct Dataset {
    DatasetManifest manifest;
    Sinogram sinogram;
};

/// Writes <manifest_path> and its data file (manifest.data_file, or the
/// manifest name with extension .f32 when empty).
void save_dataset(const std::filesystem::path& manifest_path, const Sinogram& s, DatasetManifest manifest);
/// Throws FormatError on malformed manifests, size mismatches or truncated data.
Dataset load_dataset(const std::filesystem::path& manifest_path);

std::string format_manifest(const DatasetManifest& m);
DatasetManifest parse_manifest(const std::string& text);

/// Regenerates the phantom recorded in a manifest.
FoamPhantom phantom_from_record(const PhantomRecord& record);

std::string model_to_json(const N2FModel& model);
N2FModel model_from_json(const std::string& text);
void save_model(const std::filesystem::path& path, const N2FModel& model);
N2FModel load_model(const std::filesystem::path& path);

/// 16-bit grayscale encodings of an image, mapping [lo, hi] linearly onto
/// [0, 65535] with clamping.
std::vector<std::uint8_t> encode_png16(const SliceImage& img, double lo, double hi);
void write_png16(const std::filesystem::path& path, const SliceImage& img, double lo, double hi);
void write_pgm16(const std::filesystem::path& path, const SliceImage& img, double lo, double hi);
/// Row-major float32, little endian.
std::vector<std::uint8_t> encode_raw_f32(const SliceImage& img);
void write_raw_f32(const std::filesystem::path& path, const SliceImage& img);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace n2f
