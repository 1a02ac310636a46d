#include "scanpath/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace scanpath {

GridSpec::GridSpec(int w, int h) : width(w), height(h) {
    if (w <= 0 || h <= 0 || static_cast<long long>(w) * h < 4)
        throw ParameterError("GridSpec: need width, height > 0 and width*height >= 4");
}

double GridSpec::diagonal() const { return std::hypot(double(width), double(height)); }

void check_in_bounds(const Scanpath& s, const GridSpec& grid) {
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        const auto& p = s.points[i];
        if (!grid.contains(p.x, p.y))
            throw BoundsError("scanpath " + s.image_id + "/" + s.observer_id + ": point " +
                              std::to_string(i) + " out of bounds");
    }
}

ProbMap::ProbMap(GridSpec grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.pixels()) throw ShapeError("ProbMap: value count does not match grid");
    double total = 0.0;
    for (double v : values_) {
        if (!(v >= 0.0)) throw ParameterError("ProbMap: negative or NaN entry");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-6) throw ParameterError("ProbMap: entries do not sum to 1");
}

ProbMap ProbMap::uniform(GridSpec grid) {
    return ProbMap(grid, std::vector<double>(grid.pixels(), 1.0 / double(grid.pixels())));
}

double ProbMap::max() const { return *std::max_element(values_.begin(), values_.end()); }

ProbMap gaussian_map(GazePoint p, const GridSpec& grid, double sigma) {
    if (!(sigma > 0.0)) throw ParameterError("gaussian_map: sigma must be positive");
    if (!grid.contains(p.x, p.y)) throw BoundsError("gaussian_map: point out of bounds");

    std::vector<double> v(grid.pixels());
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int y = 0; y < grid.height; ++y) {
        const double dy = y - p.y;
        for (int x = 0; x < grid.width; ++x) {
            const double dx = x - p.x;
            v[static_cast<std::size_t>(y) * grid.width + x] = std::exp(-(dx * dx + dy * dy) * inv);
        }
    }
    return smooth_normalize(grid, std::move(v));
}

ProbMap smooth_normalize(const GridSpec& grid, std::vector<double> v) {
    if (v.size() != grid.pixels()) throw ShapeError("smooth_normalize: size does not match grid");
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    if (!(total > 0.0) || !std::isfinite(total)) throw ParameterError("smooth_normalize: mass must be positive and finite");
    const double keep = 1.0 - kMapEpsilon * double(v.size());
    for (double& e : v) e = e / total * keep + kMapEpsilon;
    return ProbMap(grid, std::move(v));
}

SpatializedScanpath spatialize(const Scanpath& s, const GridSpec& grid, double sigma) {
    if (s.empty()) throw ParameterError("spatialize: empty scanpath");
    SpatializedScanpath out;
    out.reserve(s.size());
    for (const auto& p : s.points) out.push_back(gaussian_map(p, grid, sigma));
    return out;
}

GazePoint map_argmax(const ProbMap& m) {
    const auto vals = m.values();
    // max_element returns the first maximum, i.e. row-major tie-break
    const auto it = std::max_element(vals.begin(), vals.end());
    const auto idx = static_cast<int>(it - vals.begin());
    return {double(idx % m.grid().width), double(idx / m.grid().width)};
}

GazePoint round_to_pixel(GazePoint p, const GridSpec& grid) {
    const double x = std::clamp(std::round(p.x), 0.0, double(grid.width - 1));
    const double y = std::clamp(std::round(p.y), 0.0, double(grid.height - 1));
    return {x, y};
}

GazePoint rescale_point(GazePoint p, const GridSpec& from, const GridSpec& to) {
    const double sx = double(to.width) / from.width;
    const double sy = double(to.height) / from.height;
    const double x = (p.x + 0.5) * sx - 0.5;
    const double y = (p.y + 0.5) * sy - 0.5;
    const double xmax = std::nextafter(double(to.width), 0.0);
    const double ymax = std::nextafter(double(to.height), 0.0);
    return {std::clamp(x, 0.0, xmax), std::clamp(y, 0.0, ymax)};
}

}  // namespace scanpath
