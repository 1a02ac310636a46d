#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "scanpath/errors.hpp"

namespace scanpath {

/// Floor added to every pixel of a spatialized map before normalization so
/// that KL divergences against it stay finite.
inline constexpr double kMapEpsilon = 1e-12;

struct GridSpec {
    int width = 32;
    int height = 32;

    GridSpec() = default;
    GridSpec(int w, int h);

    std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
    double diagonal() const;
    bool contains(double x, double y) const {
        return x >= 0.0 && y >= 0.0 && x < width && y < height;
    }
    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct GazePoint {
    double x = 0.0;  // column
    double y = 0.0;  // row
    friend bool operator==(const GazePoint&, const GazePoint&) = default;
};

struct Scanpath {
    std::string image_id;
    std::string observer_id;
    std::vector<GazePoint> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    friend bool operator==(const Scanpath&, const Scanpath&) = default;
};

/// Throws BoundsError if any point lies outside grid.
void check_in_bounds(const Scanpath& s, const GridSpec& grid);

/// Per-pixel probability map over a grid, row-major (index = y * width + x).
///
/// Construction validates nonnegativity and unit mass (tolerance 1e-6).
class ProbMap {
public:
    ProbMap(GridSpec grid, std::vector<double> values);

    static ProbMap uniform(GridSpec grid);

    const GridSpec& grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    double at(int x, int y) const { return values_[static_cast<std::size_t>(y) * grid_.width + x]; }
    std::size_t size() const { return values_.size(); }
    double max() const;

    friend bool operator==(const ProbMap&, const ProbMap&) = default;

private:
    GridSpec grid_;
    std::vector<double> values_;
};

using SpatializedScanpath = std::vector<ProbMap>;

/// Isotropic Gaussian centred at p, discretized per pixel, epsilon-smoothed
/// and normalized. Argmax is the nearest pixel to p.
ProbMap gaussian_map(GazePoint p, const GridSpec& grid, double sigma);

/// Normalizes non-negative mass to sum 1 with every entry at least kMapEpsilon.
ProbMap smooth_normalize(const GridSpec& grid, std::vector<double> mass);

SpatializedScanpath spatialize(const Scanpath& s, const GridSpec& grid, double sigma);

/// Pixel of maximum probability; ties go to the smallest row, then column.
GazePoint map_argmax(const ProbMap& m);

/// Nearest pixel to p, clamped into the grid.
GazePoint round_to_pixel(GazePoint p, const GridSpec& grid);

/// Default spatialization std: 1/16 of the grid width.
inline double default_sigma(const GridSpec& grid) { return grid.width / 16.0; }

/// Pixel-centre aligned coordinate mapping between two grids, clamped into
/// the destination grid.
GazePoint rescale_point(GazePoint p, const GridSpec& from, const GridSpec& to);

}  // namespace scanpath
