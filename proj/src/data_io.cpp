#include "scanpath/data_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace scanpath::data {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

FormatError line_error(const fs::path& path, std::size_t line, const std::string& what) {
    return FormatError(path.string() + ":" + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& s, const fs::path& path, std::size_t line) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) throw line_error(path, line, "bad number '" + s + "'");
    return v;
}

long long parse_int(const std::string& s, const fs::path& path, std::size_t line) {
    long long v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) throw line_error(path, line, "bad integer '" + s + "'");
    return v;
}

void check_id(const std::string& id) {
    if (id.empty() || id.find_first_of(",\n\r") != std::string::npos)
        throw DataError("identifier '" + id + "' is empty or contains a separator");
}

std::ofstream open_out(const fs::path& path, bool binary = false) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const fs::path& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw DataError("cannot read " + path.string());
    return in;
}

// Little-endian byte writer/reader.
struct ByteWriter {
    std::vector<std::uint8_t> bytes;
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(std::uint8_t(v >> (8 * i)));
    }
    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) bytes.push_back(std::uint8_t(bits >> (8 * i)));
    }
    void raw(const std::string& s) { bytes.insert(bytes.end(), s.begin(), s.end()); }
};

struct ByteReader {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;
    const char* what;

    void need(std::size_t n) const {
        if (bytes.size() - pos < n) throw FormatError(std::string(what) + ": truncated file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes[pos + i]) << (8 * i);
        pos += 8;
        return std::bit_cast<double>(v);
    }
    std::string raw(std::size_t n) {
        need(n);
        std::string s(bytes.begin() + pos, bytes.begin() + pos + n);
        pos += n;
        return s;
    }
    bool done() const { return pos == bytes.size(); }
};

ad::Shape read_shape(ByteReader& r, const char* what) {
    const auto rank = r.u32();
    if (rank == 0) throw FormatError(std::string(what) + ": zero-rank tensor");
    ad::Shape shape(rank);
    for (auto& d : shape) {
        d = r.u32();
        if (d == 0) throw FormatError(std::string(what) + ": zero-sized dimension");
    }
    return shape;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

// --- Dataset -----------------------------------------------------------------

const ImageInfo* Dataset::find_image(const std::string& id) const {
    for (const auto& im : images)
        if (im.image_id == id) return &im;
    return nullptr;
}

const ImageInfo& Dataset::image(const std::string& id) const {
    if (const auto* im = find_image(id)) return *im;
    throw DataError("unknown image_id '" + id + "'");
}

std::vector<std::pair<std::string, std::vector<std::size_t>>> Dataset::by_image() const {
    std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < scanpaths.size(); ++i) {
        const auto& id = scanpaths[i].image_id;
        auto [it, inserted] = index.emplace(id, groups.size());
        if (inserted) groups.push_back({id, {}});
        groups[it->second].second.push_back(i);
    }
    return groups;
}

std::map<std::string, GridSpec> Dataset::image_sizes() const {
    std::map<std::string, GridSpec> out;
    for (const auto& im : images) out[im.image_id] = im.size;
    return out;
}

// --- scanpath CSV ------------------------------------------------------------

void write_scanpath_csv(const fs::path& path, const std::vector<Scanpath>& scanpaths) {
    auto out = open_out(path);
    out << "image_id,observer_id,fix_index,x,y\n";
    for (const auto& s : scanpaths) {
        check_id(s.image_id);
        check_id(s.observer_id);
        for (std::size_t i = 0; i < s.points.size(); ++i)
            out << s.image_id << ',' << s.observer_id << ',' << i << ',' << format_double(s.points[i].x) << ','
                << format_double(s.points[i].y) << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

std::vector<Scanpath> read_scanpath_csv(const fs::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw line_error(path, 1, "missing header");
    if (strip_cr(line) != "image_id,observer_id,fix_index,x,y")
        throw line_error(path, 1, "expected header image_id,observer_id,fix_index,x,y");

    std::vector<Scanpath> out;
    std::set<std::pair<std::string, std::string>> finished;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 5) throw line_error(path, lineno, "expected 5 fields, got " + std::to_string(f.size()));
        if (f[0].empty() || f[1].empty()) throw line_error(path, lineno, "empty identifier");
        const auto idx = parse_int(f[2], path, lineno);
        const GazePoint p{parse_double(f[3], path, lineno), parse_double(f[4], path, lineno)};
        if (p.x < 0 || p.y < 0) throw line_error(path, lineno, "negative coordinate");

        const bool continues = !out.empty() && out.back().image_id == f[0] && out.back().observer_id == f[1];
        if (continues) {
            if (idx != static_cast<long long>(out.back().points.size()))
                throw line_error(path, lineno, "fix_index out of sequence");
            out.back().points.push_back(p);
        } else {
            if (!out.empty()) finished.insert({out.back().image_id, out.back().observer_id});
            if (finished.count({f[0], f[1]})) throw line_error(path, lineno, "scanpath rows are not contiguous");
            if (idx != 0) throw line_error(path, lineno, "scanpath must start at fix_index 0");
            out.push_back({f[0], f[1], {p}});
        }
    }
    return out;
}

// --- image manifest ----------------------------------------------------------

void write_image_manifest(const fs::path& path, const std::vector<ImageInfo>& images, bool write_pgms) {
    auto out = open_out(path);
    out << "image_id,width,height,pixels\n";
    for (const auto& im : images) {
        check_id(im.image_id);
        std::string pgm;
        if (write_pgms && !im.pixels.empty()) {
            pgm = im.image_id + ".pgm";
            write_pgm(path.parent_path() / pgm, {im.size, im.pixels});
        }
        out << im.image_id << ',' << im.size.width << ',' << im.size.height << ',' << pgm << '\n';
    }
}

std::vector<ImageInfo> read_image_manifest(const fs::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line) || strip_cr(line) != "image_id,width,height,pixels")
        throw line_error(path, 1, "expected header image_id,width,height,pixels");
    std::vector<ImageInfo> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4) throw line_error(path, lineno, "expected 4 fields");
        ImageInfo im;
        im.image_id = f[0];
        try {
            im.size = GridSpec(int(parse_int(f[1], path, lineno)), int(parse_int(f[2], path, lineno)));
        } catch (const ParameterError& e) {
            throw line_error(path, lineno, e.what());
        }
        if (!f[3].empty()) {
            const auto img = read_pgm(path.parent_path() / f[3]);
            if (img.size != im.size) throw line_error(path, lineno, "PGM size differs from manifest");
            im.pixels = img.pixels;
        }
        out.push_back(std::move(im));
    }
    return out;
}

Dataset load_scanpath_dataset(const fs::path& csv, const std::optional<fs::path>& manifest, Split split) {
    Dataset d;
    d.split = split;
    d.scanpaths = read_scanpath_csv(csv);
    if (manifest) {
        d.images = read_image_manifest(*manifest);
        for (const auto& s : d.scanpaths) {
            const auto* im = d.find_image(s.image_id);
            if (!im) throw DataError(csv.string() + ": unknown image_id '" + s.image_id + "'");
            check_in_bounds(s, im->size);
        }
        return d;
    }
    for (const auto& [id, idx] : d.by_image()) {
        double mx = 1.0, my = 1.0;
        for (auto i : idx)
            for (const auto& p : d.scanpaths[i].points) {
                mx = std::max(mx, p.x);
                my = std::max(my, p.y);
            }
        d.images.push_back({id, GridSpec(int(std::floor(mx)) + 1, int(std::floor(my)) + 1), {}});
    }
    return d;
}

// --- PGM ---------------------------------------------------------------------

void write_pgm(const fs::path& path, const GrayImage& image) {
    if (image.pixels.size() != image.size.pixels()) throw DataError("write_pgm: pixel count mismatch");
    auto out = open_out(path, true);
    out << "P5\n" << image.size.width << ' ' << image.size.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), std::streamsize(image.pixels.size()));
    if (!out) throw DataError("write failed: " + path.string());
}

GrayImage read_pgm(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(char(bytes[pos++]));
        return t;
    };
    if (token() != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw FormatError(path.string() + ": malformed PGM header");
    }
    if (maxval != 255) throw FormatError(path.string() + ": only 8-bit PGM is supported");
    ++pos;  // single whitespace before raster
    GrayImage img{GridSpec(w, h), {}};
    if (bytes.size() < pos + img.size.pixels()) throw FormatError(path.string() + ": truncated PGM raster");
    img.pixels.assign(bytes.begin() + pos, bytes.begin() + pos + img.size.pixels());
    return img;
}

ad::Tensor image_to_tensor(const ImageInfo& image, const GridSpec& grid) {
    if (image.pixels.size() != image.size.pixels())
        throw DataError("image '" + image.image_id + "' has no pixel data");
    std::vector<double> out(grid.pixels(), 0.0);
    std::vector<double> weight(grid.pixels(), 0.0);
    const double sx = double(grid.width) / image.size.width;
    const double sy = double(grid.height) / image.size.height;
    for (int y = 0; y < image.size.height; ++y)
        for (int x = 0; x < image.size.width; ++x) {
            const int gx = std::min(grid.width - 1, int((x + 0.5) * sx));
            const int gy = std::min(grid.height - 1, int((y + 0.5) * sy));
            const auto g = std::size_t(gy) * grid.width + gx;
            out[g] += image.pixels[std::size_t(y) * image.size.width + x] / 255.0;
            weight[g] += 1.0;
        }
    // Upsampling leaves cells without source pixels; fill them by nearest lookup.
    for (int gy = 0; gy < grid.height; ++gy)
        for (int gx = 0; gx < grid.width; ++gx) {
            const auto g = std::size_t(gy) * grid.width + gx;
            if (weight[g] > 0) {
                out[g] /= weight[g];
            } else {
                const int x = std::min(image.size.width - 1, int((gx + 0.5) / sx));
                const int y = std::min(image.size.height - 1, int((gy + 0.5) / sy));
                out[g] = image.pixels[std::size_t(y) * image.size.width + x] / 255.0;
            }
        }
    return ad::Tensor::from({1, std::size_t(grid.height), std::size_t(grid.width)}, std::move(out));
}

// --- preprocessing -----------------------------------------------------------

std::optional<Scanpath> normalize_length(const Scanpath& s, std::size_t N) {
    if (s.size() < kMinScanpathLength) return std::nullopt;
    Scanpath out = s;
    if (out.points.size() > N) out.points.resize(N);
    while (out.points.size() < N) out.points.push_back(out.points.back());
    return out;
}

std::vector<PreparedExample> preprocess(const Dataset& d, const GridSpec& grid, std::size_t N, double sigma,
                                        std::vector<std::string>* skipped) {
    std::vector<PreparedExample> out;
    for (const auto& [id, idx] : d.by_image()) {
        const auto& native = d.image(id).size;
        PreparedExample ex{id, {}, {}};
        for (auto i : idx) {
            auto s = normalize_length(d.scanpaths[i], N);
            if (!s) continue;
            for (auto& p : s->points) p = rescale_point(p, native, grid);
            ex.maps.push_back(spatialize(*s, grid, sigma));
            ex.paths.push_back(std::move(*s));
        }
        if (ex.paths.empty()) {
            if (skipped) skipped->push_back(id);
            continue;
        }
        out.push_back(std::move(ex));
    }
    return out;
}

// --- synthetic benchmark -----------------------------------------------------

namespace {

double clamp_coord(double v, int extent) { return std::clamp(v, 0.0, std::nextafter(double(extent), 0.0)); }

}  // namespace

Dataset synth_dataset(const SynthParams& params, const GridSpec& grid, Rng& rng) {
    if (params.roi_per_image == 0 && params.fixed_rois.empty()) throw ParameterError("synth_dataset: need at least one ROI");
    if (params.length == 0) throw ParameterError("synth_dataset: scanpath length must be positive");
    const double W = grid.width, H = grid.height;
    const GazePoint center{(W - 1) / 2.0, (H - 1) / 2.0};
    const double noise = params.noise_fraction * W;
    const double roi_radius = 0.08 * W;

    Dataset d;
    for (std::size_t img = 0; img < params.n_images; ++img) {
        const std::string image_id = "img" + std::to_string(img);

        // ROI centres away from the image centre and from each other.
        std::vector<GazePoint> rois = params.fixed_rois;
        while (rois.size() < params.roi_per_image) {
            GazePoint best{};
            double best_score = -1.0;
            for (int attempt = 0; attempt < 16; ++attempt) {
                const GazePoint c{(0.12 + 0.76 * rng.uniform()) * (W - 1), (0.12 + 0.76 * rng.uniform()) * (H - 1)};
                double score = std::hypot(c.x - center.x, c.y - center.y);
                for (const auto& r : rois) score = std::min(score, std::hypot(c.x - r.x, c.y - r.y));
                if (score > best_score) {
                    best_score = score;
                    best = c;
                }
            }
            rois.push_back(best);
        }
        // Salience 1, 1/2, 1/3, ...; first choice proportional to salience^2.
        std::vector<double> salience(rois.size()), first_choice(rois.size());
        for (std::size_t k = 0; k < rois.size(); ++k) {
            salience[k] = 1.0 / double(k + 1);
            first_choice[k] = salience[k] * salience[k];
        }
        const double first_total = std::accumulate(first_choice.begin(), first_choice.end(), 0.0);

        ImageInfo info{image_id, grid, std::vector<std::uint8_t>(grid.pixels())};
        for (int y = 0; y < grid.height; ++y)
            for (int x = 0; x < grid.width; ++x) {
                double v = 0.0;
                for (std::size_t k = 0; k < rois.size(); ++k) {
                    const double dx = x - rois[k].x, dy = y - rois[k].y;
                    v += salience[k] * std::exp(-(dx * dx + dy * dy) / (2.0 * roi_radius * roi_radius));
                }
                info.pixels[std::size_t(y) * grid.width + x] = std::uint8_t(std::lround(255.0 * std::min(1.0, v)));
            }
        d.images.push_back(std::move(info));

        auto jitter = [&](GazePoint c) {
            const double nx = noise > 0 ? rng.normal() * noise : 0.0;
            const double ny = noise > 0 ? rng.normal() * noise : 0.0;
            return GazePoint{clamp_coord(c.x + nx, grid.width), clamp_coord(c.y + ny, grid.height)};
        };

        for (std::size_t obs = 0; obs < params.observers_per_image; ++obs) {
            Scanpath s{image_id, "obs" + std::to_string(obs), {}};
            s.points.push_back(jitter(center));
            double u = rng.uniform() * first_total;
            std::size_t roi = 0;
            while (roi + 1 < rois.size() && u >= first_choice[roi]) u -= first_choice[roi++];
            for (std::size_t i = 1; i < params.length; ++i) {
                if (i > 1 && rois.size() > 1 && rng.uniform() < params.switch_probability) {
                    const auto other = rng.uniform_index(rois.size() - 1);
                    roi = other >= roi ? other + 1 : other;
                }
                s.points.push_back(jitter(rois[roi]));
            }
            d.scanpaths.push_back(std::move(s));
        }
    }
    return d;
}

std::pair<Dataset, Dataset> split_by_observer(const Dataset& d, std::size_t n_test) {
    Dataset train{d.images, {}, Split::Train};
    Dataset test{d.images, {}, Split::Test};
    for (const auto& [id, idx] : d.by_image()) {
        const std::size_t cut = idx.size() > n_test ? idx.size() - n_test : 0;
        for (std::size_t k = 0; k < idx.size(); ++k)
            (k < cut ? train : test).scanpaths.push_back(d.scanpaths[idx[k]]);
    }
    return {std::move(train), std::move(test)};
}

// --- feature tensors ---------------------------------------------------------

void write_feature_tensor(const fs::path& path, const ad::Tensor& t) {
    ByteWriter w;
    w.raw("FTNS");
    w.u32(std::uint32_t(t.rank()));
    for (auto dim : t.shape()) w.u32(std::uint32_t(dim));
    for (double v : t.data()) w.f64(v);
    write_file_bytes(path, w.bytes);
}

ad::Tensor read_feature_tensor(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    ByteReader r{bytes, 0, "feature tensor"};
    if (r.raw(4) != "FTNS") throw FormatError(path.string() + ": bad magic, expected FTNS");
    auto shape = read_shape(r, "feature tensor");
    std::vector<double> values(ad::numel(shape));
    r.need(values.size() * 8);
    for (auto& v : values) v = r.f64();
    if (!r.done()) throw FormatError(path.string() + ": trailing bytes after tensor data");
    return ad::Tensor::from(std::move(shape), std::move(values));
}

// --- checkpoints -------------------------------------------------------------

const TensorRecord* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

std::optional<std::string> Checkpoint::meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return v;
    return std::nullopt;
}

std::map<std::string, std::string> Checkpoint::meta_map() const { return {meta.begin(), meta.end()}; }

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
    ByteWriter w;
    w.raw("SPCK");
    w.u32(kCheckpointVersion);
    w.u32(std::uint32_t(c.tensors.size()));
    for (const auto& t : c.tensors) {
        if (ad::numel(t.shape) != t.values.size()) throw DataError("checkpoint record '" + t.name + "' shape mismatch");
        w.u32(std::uint32_t(t.name.size()));
        w.raw(t.name);
        w.u32(std::uint32_t(t.shape.size()));
        for (auto dim : t.shape) w.u32(std::uint32_t(dim));
        for (double v : t.values) w.f64(v);
    }
    std::string trailer;
    for (const auto& [k, v] : c.meta) {
        if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
            throw DataError("checkpoint metadata key/value contains a separator");
        trailer += k + "=" + v + "\n";
    }
    w.u32(std::uint32_t(trailer.size()));
    w.raw(trailer);
    return w.bytes;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    ByteReader r{bytes, 0, "checkpoint"};
    if (r.raw(4) != "SPCK") throw FormatError("checkpoint: bad magic, expected SPCK");
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    Checkpoint c;
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        TensorRecord t;
        t.name = r.raw(r.u32());
        t.shape = read_shape(r, "checkpoint");
        t.values.resize(ad::numel(t.shape));
        r.need(t.values.size() * 8);
        for (auto& v : t.values) v = r.f64();
        c.tensors.push_back(std::move(t));
    }
    std::istringstream trailer(r.raw(r.u32()));
    if (!r.done()) throw FormatError("checkpoint: trailing bytes");
    std::string line;
    while (std::getline(trailer, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("checkpoint: malformed trailer line '" + line + "'");
        c.meta.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    return c;
}

void write_checkpoint(const fs::path& path, const Checkpoint& c) { write_file_bytes(path, encode_checkpoint(c)); }

Checkpoint read_checkpoint(const fs::path& path) { return decode_checkpoint(read_file_bytes(path)); }

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
    auto in = open_in(path, true);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
    auto out = open_out(path, true);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace scanpath::data
