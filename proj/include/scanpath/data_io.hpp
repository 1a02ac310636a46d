#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scanpath/core_types.hpp"
#include "scanpath/rng.hpp"
#include "scanpath/tensor.hpp"

namespace scanpath::data {

namespace fs = std::filesystem;

enum class Split { Train, Test };

struct ImageInfo {
    std::string image_id;
    GridSpec size;              // native resolution
    std::vector<std::uint8_t> pixels;  // optional 8-bit grayscale, row-major
    friend bool operator==(const ImageInfo&, const ImageInfo&) = default;
};

/// Scanpaths in native image coordinates plus the images they refer to.
struct Dataset {
    std::vector<ImageInfo> images;
    std::vector<Scanpath> scanpaths;
    Split split = Split::Train;

    const ImageInfo* find_image(const std::string& id) const;
    const ImageInfo& image(const std::string& id) const;
    /// Scanpath indices per image, images in first-appearance order.
    std::vector<std::pair<std::string, std::vector<std::size_t>>> by_image() const;
    std::map<std::string, GridSpec> image_sizes() const;
    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// --- scanpath CSV: image_id,observer_id,fix_index,x,y -----------------------

void write_scanpath_csv(const fs::path& path, const std::vector<Scanpath>& scanpaths);
std::vector<Scanpath> read_scanpath_csv(const fs::path& path);

// --- image manifest CSV: image_id,width,height,pixels ------------------------
// pixels is a PGM path relative to the manifest, or empty.

void write_image_manifest(const fs::path& path, const std::vector<ImageInfo>& images, bool write_pgms);
std::vector<ImageInfo> read_image_manifest(const fs::path& path);

/// Loads scanpaths and, when given, the image manifest. Without a manifest
/// image sizes are inferred from the coordinate extent.
Dataset load_scanpath_dataset(const fs::path& csv, const std::optional<fs::path>& manifest = std::nullopt,
                              Split split = Split::Train);

// --- binary PGM (P5) ---------------------------------------------------------

struct GrayImage {
    GridSpec size;
    std::vector<std::uint8_t> pixels;
};
void write_pgm(const fs::path& path, const GrayImage& image);
GrayImage read_pgm(const fs::path& path);

/// Box-filtered resize of 8-bit pixels to grid resolution, as [1, H, W] in [0, 1].
ad::Tensor image_to_tensor(const ImageInfo& image, const GridSpec& grid);

// --- preprocessing -----------------------------------------------------------

inline constexpr std::size_t kMinScanpathLength = 4;

struct PreparedExample {
    std::string image_id;
    std::vector<Scanpath> paths;            // grid coordinates, length N
    std::vector<SpatializedScanpath> maps;  // spatialized paths
};

/// Drops scanpaths shorter than 4, truncates to N, pads by repeating the last
/// fixation, rescales to the grid and spatializes. Images left without
/// scanpaths are skipped; their ids are appended to *skipped when given.
std::vector<PreparedExample> preprocess(const Dataset& d, const GridSpec& grid, std::size_t N, double sigma,
                                        std::vector<std::string>* skipped = nullptr);

/// Length-normalization part of preprocess() for one scanpath; nullopt when dropped.
std::optional<Scanpath> normalize_length(const Scanpath& s, std::size_t N);

// --- synthetic benchmark -----------------------------------------------------

struct SynthParams {
    std::size_t n_images = 10;
    std::size_t observers_per_image = 15;
    std::size_t roi_per_image = 2;
    std::size_t length = 8;
    double noise_fraction = 0.03;  // fixation noise std as a fraction of width
    double switch_probability = 0.3;
    std::vector<GazePoint> fixed_rois;  // used as the first ROIs of every image
};

/// Images with Gaussian regions of interest; observers start near the centre
/// and then wander between ROIs, preferring the most salient one first.
Dataset synth_dataset(const SynthParams& params, const GridSpec& grid, Rng& rng);

/// Splits by observer: the last n_test scanpaths of every image go to test.
std::pair<Dataset, Dataset> split_by_observer(const Dataset& d, std::size_t n_test);

// --- feature tensors: "FTNS", u32 rank, u32 dims, f64 values (little-endian) --

void write_feature_tensor(const fs::path& path, const ad::Tensor& t);
ad::Tensor read_feature_tensor(const fs::path& path);

// --- checkpoints -------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorRecord {
    std::string name;
    ad::Shape shape;
    std::vector<double> values;
    friend bool operator==(const TensorRecord&, const TensorRecord&) = default;
};

struct Checkpoint {
    std::vector<TensorRecord> tensors;
    std::vector<std::pair<std::string, std::string>> meta;  // key=value trailer, ordered

    const TensorRecord* find(const std::string& name) const;
    std::optional<std::string> meta_value(const std::string& key) const;
    std::map<std::string, std::string> meta_map() const;
    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// "SPCK", u32 version, u32 record count, records (u32 name length, name,
/// u32 rank, u32 dims, f64 values), u32 trailer length, key=value lines.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void write_checkpoint(const fs::path& path, const Checkpoint& c);
Checkpoint read_checkpoint(const fs::path& path);

std::vector<std::uint8_t> read_file_bytes(const fs::path& path);
void write_file_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace scanpath::data
