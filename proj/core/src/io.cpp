#include "n2f/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "n2f/errors.hpp"

namespace n2f {

namespace {
    using json = nlohmann::json;

    std::string trim_(std::string s) {
        const auto first = s.find_first_not_of(" \t\r");
        if (first == std::string::npos)
            return {};
        const auto last = s.find_last_not_of(" \t\r");
        return s.substr(first, last - first + 1);
    }

    std::string format_double_(double v) {
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    }

    double parse_double_(const std::string& key, const std::string& text) {
        double v = 0.0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v))
            throw FormatError("manifest: '" + key + "' is not a number: " + text);
        return v;
    }

    std::uint64_t parse_uint_(const std::string& key, const std::string& text) {
        std::uint64_t v = 0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size())
            throw FormatError("manifest: '" + key + "' is not a non-negative integer: " + text);
        return v;
    }

    std::vector<std::string> split_(const std::string& text, char sep) {
        std::vector<std::string> parts;
        std::string part;
        std::istringstream in(text);
        while (std::getline(in, part, sep))
            if (!trim_(part).empty())
                parts.push_back(trim_(part));
        return parts;
    }

    class ManifestReader {
    public:
        explicit ManifestReader(std::map<std::string, std::string> values) : values_(std::move(values)) {}

        bool has(const std::string& key) const { return values_.count(key) != 0; }
        const std::string& text(const std::string& key) const {
            auto it = values_.find(key);
            if (it == values_.end())
                throw FormatError("manifest: missing key '" + key + "'");
            return it->second;
        }
        double number(const std::string& key) const { return parse_double_(key, text(key)); }
        std::uint64_t count(const std::string& key) const { return parse_uint_(key, text(key)); }

    private:
        std::map<std::string, std::string> values_;
    };

    std::uint16_t quantize_(double v, double lo, double hi) {
        const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
        const double clamped = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
        return static_cast<std::uint16_t>(std::lround(clamped * 65535.0));
    }

    void write_bytes_(const std::filesystem::path& path, const void* data, std::size_t n) {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot open " + path.string() + " for writing");
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out)
            throw std::runtime_error("write failed: " + path.string());
    }

    template <typename T>
    std::vector<T> json_array_(const json& j, const char* key) {
        if (!j.contains(key) || !j.at(key).is_array())
            throw FormatError(std::string("model: missing array '") + key + "'");
        return j.at(key).get<std::vector<T>>();
    }
}

std::string format_manifest(const DatasetManifest& m) {
    std::ostringstream out;
    out << "# n2f dataset manifest\n";
    out << "format_version = " << m.format_version << "\n";
    out << "data_file = " << m.data_file << "\n";
    out << "n_angles = " << m.geometry.n_angles() << "\n";
    out << "det_rows = " << m.geometry.det_rows << "\n";
    out << "det_cols = " << m.geometry.det_cols << "\n";
    out << "pixel_size = " << format_double_(m.geometry.pixel_size) << "\n";
    out << "cor_shift = " << format_double_(m.geometry.cor_shift) << "\n";
    out << "angles = ";
    for (std::size_t i = 0; i < m.geometry.angles.size(); ++i)
        out << (i ? "," : "") << format_double_(m.geometry.angles[i]);
    out << "\n";
    out << "seed = " << m.seed << "\n";
    if (m.phantom) {
        const FoamConfig& c = m.phantom->config;
        out << "phantom.seed = " << c.seed << "\n";
        out << "phantom.n_balls = " << c.n_balls << "\n";
        out << "phantom.cylinder_radius = " << format_double_(c.cylinder_radius) << "\n";
        out << "phantom.cylinder_half_height = " << format_double_(c.cylinder_half_height) << "\n";
        out << "phantom.min_radius_fraction = " << format_double_(c.min_radius_fraction) << "\n";
        out << "phantom.max_radius_fraction = " << format_double_(c.max_radius_fraction) << "\n";
        out << "phantom.density = " << format_double_(c.density) << "\n";
        out << "phantom.volume = " << m.phantom->volume.nx << " " << m.phantom->volume.ny << " "
            << m.phantom->volume.nz << "\n";
    }
    if (m.noise) {
        out << "noise.photon_count = " << format_double_(m.noise->photon_count) << "\n";
        out << "noise.seed = " << m.noise->seed << "\n";
    }
    if (m.window)
        out << "window = " << format_double_(m.window->first) << " " << format_double_(m.window->second) << "\n";
    return out.str();
}

DatasetManifest parse_manifest(const std::string& text) {
    std::map<std::string, std::string> values;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim_(line);
        if (line.empty() || line.front() == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("manifest line " + std::to_string(line_no) + ": expected key = value");
        values[trim_(line.substr(0, eq))] = trim_(line.substr(eq + 1));
    }
    const ManifestReader r(std::move(values));

    DatasetManifest m;
    m.format_version = static_cast<int>(r.count("format_version"));
    if (m.format_version != dataset_format_version)
        throw FormatError("manifest: unsupported format_version " + std::to_string(m.format_version));
    m.data_file = r.text("data_file");
    if (m.data_file.empty())
        throw FormatError("manifest: empty data_file");
    m.geometry.det_rows = r.count("det_rows");
    m.geometry.det_cols = r.count("det_cols");
    m.geometry.pixel_size = r.number("pixel_size");
    m.geometry.cor_shift = r.number("cor_shift");
    for (const std::string& a : split_(r.text("angles"), ','))
        m.geometry.angles.push_back(parse_double_("angles", a));
    if (m.geometry.angles.size() != r.count("n_angles"))
        throw FormatError("manifest: n_angles does not match the angle list");
    try {
        m.geometry.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    if (r.has("seed"))
        m.seed = r.count("seed");
    if (r.has("phantom.seed")) {
        PhantomRecord rec;
        rec.config.seed = r.count("phantom.seed");
        rec.config.n_balls = r.count("phantom.n_balls");
        rec.config.cylinder_radius = r.number("phantom.cylinder_radius");
        rec.config.cylinder_half_height = r.number("phantom.cylinder_half_height");
        rec.config.min_radius_fraction = r.number("phantom.min_radius_fraction");
        rec.config.max_radius_fraction = r.number("phantom.max_radius_fraction");
        rec.config.density = r.number("phantom.density");
        const auto dims = split_(r.text("phantom.volume"), ' ');
        if (dims.size() != 3)
            throw FormatError("manifest: phantom.volume needs three sizes");
        rec.volume = {parse_uint_("phantom.volume", dims[0]), parse_uint_("phantom.volume", dims[1]),
                      parse_uint_("phantom.volume", dims[2])};
        if (rec.volume.voxel_count() == 0)
            throw FormatError("manifest: phantom.volume must be non-empty");
        m.phantom = rec;
    }
    if (r.has("noise.photon_count")) {
        NoiseSpec n;
        n.photon_count = r.number("noise.photon_count");
        n.seed = r.count("noise.seed");
        m.noise = n;
    }
    if (r.has("window")) {
        const auto parts = split_(r.text("window"), ' ');
        if (parts.size() != 2)
            throw FormatError("manifest: window needs two values");
        m.window = std::pair{parse_double_("window", parts[0]), parse_double_("window", parts[1])};
    }
    return m;
}

void save_dataset(const std::filesystem::path& manifest_path, const Sinogram& s, DatasetManifest manifest) {
    s.validate();
    manifest.geometry = s.geometry;
    if (manifest.data_file.empty())
        manifest.data_file = manifest_path.filename().replace_extension(".f32").string();
    const auto data_path = manifest_path.parent_path() / manifest.data_file;

    std::vector<std::uint8_t> bytes(s.data.size() * 4);
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        const auto u = std::bit_cast<std::uint32_t>(s.data[i]);
        for (int b = 0; b < 4; ++b)
            bytes[4 * i + static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(u >> (8 * b));
    }
    write_bytes_(data_path, bytes.data(), bytes.size());
    write_text_file(manifest_path, format_manifest(manifest));
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
    Dataset d;
    d.manifest = parse_manifest(read_text_file(manifest_path));
    const auto data_path = manifest_path.parent_path() / d.manifest.data_file;
    std::ifstream in(data_path, std::ios::binary);
    if (!in)
        throw FormatError("dataset: cannot open data file " + data_path.string());
    const std::size_t expected = d.manifest.geometry.n_pixels() * 4;
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() != expected)
        throw FormatError("dataset: " + data_path.string() + " holds " + std::to_string(bytes.size()) +
                          " bytes, geometry requires " + std::to_string(expected));
    Sinogram s;
    s.geometry = d.manifest.geometry;
    s.data.resize(s.geometry.n_pixels());
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        std::uint32_t u = 0;
        for (int b = 0; b < 4; ++b)
            u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + static_cast<std::size_t>(b)]))
                 << (8 * b);
        s.data[i] = std::bit_cast<float>(u);
    }
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("dataset: ") + e.what());
    }
    d.sinogram = std::move(s);
    return d;
}

FoamPhantom phantom_from_record(const PhantomRecord& record) {
    FoamPhantom p = generate_foam(record.config);
    p.density = record.config.density;
    return p;
}

std::string model_to_json(const N2FModel& model) {
    json j;
    j["format_version"] = model_format_version;
    j["method"] = model.method;
    j["version"] = model.version();
    j["strategy"] = std::string(to_string(model.strategy));
    j["n_splits"] = model.n_splits;
    j["n_train"] = model.n_train;
    j["seed"] = model.seed;
    j["train_seconds"] = model.train_seconds;
    j["best_validation_loss"] = model.best_validation_loss;
    j["n_hidden"] = model.params.n_hidden;
    j["n_inputs"] = model.params.n_inputs;
    j["hidden_weights"] = model.params.hidden_weights;
    j["hidden_bias"] = model.params.hidden_bias;
    j["output_weights"] = model.params.output_weights;
    j["output_bias"] = model.params.output_bias;
    j["scaling"] = {{"in_scale", model.scaling.in_scale},
                    {"in_offset", model.scaling.in_offset},
                    {"out_scale", model.scaling.out_scale},
                    {"out_offset", model.scaling.out_offset}};
    j["basis"] = {{"half_width", model.basis.half_width}, {"knots", model.basis.knots}};
    j["geometry"] = {{"n_angles", model.fingerprint.n_angles},
                     {"det_rows", model.fingerprint.det_rows},
                     {"det_cols", model.fingerprint.det_cols},
                     {"knots", model.fingerprint.knots}};
    json filters = json::array();
    for (const Filter& f : model.learned.filters) {
        std::ostringstream hex;
        hex << std::hex << std::setw(16) << std::setfill('0') << f.fingerprint();
        filters.push_back({{"fingerprint", hex.str()}, {"half_width", f.half_width()}});
    }
    j["filters"] = filters;
    return j.dump(1);
}

N2FModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("model: invalid JSON: ") + e.what());
    }
    try {
        if (j.at("format_version").get<int>() != model_format_version)
            throw FormatError("model: unsupported format_version");
        N2FModel m;
        m.method = j.at("method").get<std::string>();
        m.strategy = parse_strategy(j.at("strategy").get<std::string>());
        m.n_splits = j.at("n_splits").get<std::size_t>();
        m.n_train = j.at("n_train").get<std::size_t>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.train_seconds = j.value("train_seconds", 0.0);
        m.best_validation_loss = j.value("best_validation_loss", 0.0);
        const auto nh = j.at("n_hidden").get<std::size_t>();
        const auto ne = j.at("n_inputs").get<std::size_t>();
        m.params = MLPParams(nh, ne);
        m.params.hidden_weights = json_array_<double>(j, "hidden_weights");
        m.params.hidden_bias = json_array_<double>(j, "hidden_bias");
        m.params.output_weights = json_array_<double>(j, "output_weights");
        m.params.output_bias = j.at("output_bias").get<double>();
        const json& s = j.at("scaling");
        m.scaling.in_scale = json_array_<double>(s, "in_scale");
        m.scaling.in_offset = json_array_<double>(s, "in_offset");
        m.scaling.out_scale = s.at("out_scale").get<double>();
        m.scaling.out_offset = s.at("out_offset").get<double>();
        m.basis = make_basis(j.at("basis").at("half_width").get<std::size_t>());
        if (json_array_<std::size_t>(j.at("basis"), "knots") != m.basis.knots)
            throw FormatError("model: basis knots are inconsistent with the half width");
        const json& g = j.at("geometry");
        m.fingerprint.n_angles = g.at("n_angles").get<std::size_t>();
        m.fingerprint.det_rows = g.at("det_rows").get<std::size_t>();
        m.fingerprint.det_cols = g.at("det_cols").get<std::size_t>();
        m.fingerprint.knots = json_array_<std::size_t>(g, "knots");
        m.params.validate();
        m.learned = extract_filters(m.params, m.basis, m.scaling);
        const json& filters = j.at("filters");
        if (!filters.is_array() || filters.size() != m.learned.size())
            throw FormatError("model: filter list does not match the network");
        for (std::size_t k = 0; k < filters.size(); ++k) {
            std::ostringstream hex;
            hex << std::hex << std::setw(16) << std::setfill('0') << m.learned.filters[k].fingerprint();
            if (filters[k].at("fingerprint").get<std::string>() != hex.str())
                throw FormatError("model: stored filter fingerprint does not match the parameters");
        }
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("model: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("model: ") + e.what());
    }
}

void save_model(const std::filesystem::path& path, const N2FModel& model) {
    write_text_file(path, model_to_json(model));
}

N2FModel load_model(const std::filesystem::path& path) {
    return model_from_json(read_text_file(path));
}

namespace {

void png_append_(png_structp p, png_bytep data, png_size_t n) {
    auto* buf = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
    buf->insert(buf->end(), data, data + n);
}

// Kept free of objects with destructors so that longjmp out of libpng is well defined.
bool png_encode_rows_(std::vector<std::uint8_t>* out, const std::uint8_t* pixels, png_uint_32 w, png_uint_32 h) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png)
        return false;
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, info ? &info : nullptr);
        return false;
    }
    png_set_write_fn(png, out, png_append_, nullptr);
    png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (png_uint_32 r = 0; r < h; ++r)
        png_write_row(png, const_cast<png_bytep>(pixels + 2 * static_cast<std::size_t>(w) * r));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

} // namespace

std::vector<std::uint8_t> encode_png16(const SliceImage& img, double lo, double hi) {
    const std::size_t w = img.width();
    const std::size_t h = img.height();
    if (w == 0 || h == 0)
        throw std::invalid_argument("encode_png16: empty image");
    std::vector<std::uint8_t> pixels(2 * w * h);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            const std::uint16_t v = quantize_(img.at(r, c), lo, hi);
            pixels[2 * (r * w + c)] = static_cast<std::uint8_t>(v >> 8);
            pixels[2 * (r * w + c) + 1] = static_cast<std::uint8_t>(v & 0xff);
        }
    }
    std::vector<std::uint8_t> out;
    if (!png_encode_rows_(&out, pixels.data(), static_cast<png_uint_32>(w), static_cast<png_uint_32>(h)))
        throw std::runtime_error("libpng: encoding failed");
    return out;
}

void write_png16(const std::filesystem::path& path, const SliceImage& img, double lo, double hi) {
    const auto bytes = encode_png16(img, lo, hi);
    write_bytes_(path, bytes.data(), bytes.size());
}

void write_pgm16(const std::filesystem::path& path, const SliceImage& img, double lo, double hi) {
    std::string header = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n65535\n";
    std::vector<std::uint8_t> bytes(header.begin(), header.end());
    for (double v : img.data) {
        const std::uint16_t q = quantize_(v, lo, hi);
        bytes.push_back(static_cast<std::uint8_t>(q >> 8));
        bytes.push_back(static_cast<std::uint8_t>(q & 0xff));
    }
    write_bytes_(path, bytes.data(), bytes.size());
}

std::vector<std::uint8_t> encode_raw_f32(const SliceImage& img) {
    std::vector<std::uint8_t> bytes(img.data.size() * 4);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(img.data[i]));
        for (int b = 0; b < 4; ++b)
            bytes[4 * i + static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(u >> (8 * b));
    }
    return bytes;
}

void write_raw_f32(const std::filesystem::path& path, const SliceImage& img) {
    const auto bytes = encode_raw_f32(img);
    write_bytes_(path, bytes.data(), bytes.size());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    write_bytes_(path, text.data(), text.size());
}

} // namespace n2f
