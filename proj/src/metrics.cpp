#include "scanpath/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "scanpath/data_io.hpp"
#include "scanpath/loss.hpp"

namespace scanpath::metrics {

namespace {

double dist(GazePoint a, GazePoint b) { return std::hypot(a.x - b.x, a.y - b.y); }

void require_nonempty(const Scanpath& a, const Scanpath& b, const char* what) {
    if (a.empty() || b.empty()) throw ParameterError(std::string(what) + ": empty scanpath");
}

int bin_index(double v, double extent, int bins) {
    const int i = static_cast<int>(std::floor(v * bins / extent));
    return std::clamp(i, 0, bins - 1);
}

}  // namespace

void MetricConfig::validate() const {
    if (bin_cols < 1 || bin_rows < 1) throw ParameterError("metrics: bin grid must be positive");
    if (recurrence_radius && !(*recurrence_radius > 0.0)) throw ParameterError("metrics: radius must be positive");
    if (min_line < 2) throw ParameterError("metrics: min_line must be >= 2");
    if (tde_k < 1) throw ParameterError("metrics: tde_k must be >= 1");
}

double MetricConfig::radius_for(const GridSpec& image) const {
    return recurrence_radius.value_or(image.diagonal() / 10.0);
}

std::string_view metric_name(Metric m) {
    static constexpr std::string_view names[] = {"LEV", "SCAM", "HAU", "FRE", "fDTW",
                                                 "TDE", "REC",  "DET", "LAM", "CORM"};
    return names[static_cast<std::size_t>(m)];
}

bool lower_is_better(Metric m) {
    switch (m) {
        case Metric::LEV:
        case Metric::HAU:
        case Metric::FRE:
        case Metric::fDTW:
        case Metric::TDE: return true;
        default: return false;
    }
}

// --- string alignment --------------------------------------------------------

std::vector<int> bin_string(const Scanpath& s, const GridSpec& image, const MetricConfig& cfg) {
    std::vector<int> out;
    out.reserve(s.size());
    for (const auto& p : s.points)
        out.push_back(bin_index(p.y, image.height, cfg.bin_rows) * cfg.bin_cols +
                      bin_index(p.x, image.width, cfg.bin_cols));
    return out;
}

std::size_t levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

StringScores string_metrics(const Scanpath& a, const Scanpath& b, const GridSpec& image, const MetricConfig& cfg) {
    require_nonempty(a, b, "string_metrics");
    const auto sa = bin_string(a, image, cfg);
    const auto sb = bin_string(b, image, cfg);

    const double cw = double(image.width) / cfg.bin_cols;
    const double ch = double(image.height) / cfg.bin_rows;
    // Opposite corner bins are the farthest apart and score 0.
    const double dmax = std::hypot((cfg.bin_cols - 1) * cw, (cfg.bin_rows - 1) * ch);
    auto similarity = [&](int p, int q) {
        if (dmax == 0.0) return 1.0;
        const double d = std::hypot((p % cfg.bin_cols - q % cfg.bin_cols) * cw, (p / cfg.bin_cols - q / cfg.bin_cols) * ch);
        return (dmax - d) / dmax;
    };

    std::vector<std::vector<double>> f(sa.size() + 1, std::vector<double>(sb.size() + 1, 0.0));
    for (std::size_t i = 1; i <= sa.size(); ++i)
        for (std::size_t j = 1; j <= sb.size(); ++j)
            f[i][j] = std::max({f[i - 1][j - 1] + similarity(sa[i - 1], sb[j - 1]), f[i - 1][j], f[i][j - 1]});
    const double scam = f[sa.size()][sb.size()] / double(std::max(sa.size(), sb.size()));
    return {double(levenshtein(sa, sb)), scam};
}

// --- curves ------------------------------------------------------------------

CurveScores curve_metrics(const Scanpath& a, const Scanpath& b) {
    require_nonempty(a, b, "curve_metrics");
    auto directed = [](const Scanpath& p, const Scanpath& q) {
        double worst = 0.0;
        for (const auto& u : p.points) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& v : q.points) best = std::min(best, dist(u, v));
            worst = std::max(worst, best);
        }
        return worst;
    };
    const std::size_t n = a.size(), m = b.size();
    std::vector<double> ca(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double d = dist(a.points[i], b.points[j]);
            double reach;
            if (i == 0 && j == 0) reach = d;
            else if (i == 0) reach = ca[j - 1];
            else if (j == 0) reach = ca[(i - 1) * m];
            else reach = std::min({ca[(i - 1) * m + j], ca[(i - 1) * m + j - 1], ca[i * m + j - 1]});
            ca[i * m + j] = std::max(reach, d);
        }
    return {std::max(directed(a, b), directed(b, a)), ca.back()};
}

// --- time series -------------------------------------------------------------

SeriesScores series_metrics(const Scanpath& a, const Scanpath& b, const MetricConfig& cfg) {
    require_nonempty(a, b, "series_metrics");
    const std::size_t n = a.size(), m = b.size();
    std::vector<double> cost(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) cost[i * m + j] = dist(a.points[i], b.points[j]);
    SeriesScores out{loss::dtw(cost, n, m), std::nullopt};

    const std::size_t k = cfg.tde_k;
    if (n >= k && m >= k) {
        double total = 0.0;
        for (std::size_t i = 0; i + k <= n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j + k <= m; ++j) {
                double s = 0.0;
                for (std::size_t t = 0; t < k; ++t) s += cost[(i + t) * m + j + t];
                best = std::min(best, s / double(k));
            }
            total += best;
        }
        out.tde = total / double(n - k + 1);
    }
    return out;
}

// --- recurrence --------------------------------------------------------------

RecurrenceScores recurrence_from_matrix(const std::vector<std::vector<bool>>& r, int min_line) {
    const std::size_t n = r.size();
    const std::size_t m = n ? r[0].size() : 0;
    std::size_t c = 0;
    double moment = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (r[i][j]) {
                ++c;
                moment += double(j) - double(i);
            }
    if (c == 0) return {0.0, 0.0, 0.0, 0.0};
    const std::size_t L = min_line;

    std::size_t diag = 0;
    for (std::ptrdiff_t off = -std::ptrdiff_t(n) + 1; off < std::ptrdiff_t(m); ++off) {
        std::size_t run = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::ptrdiff_t j = std::ptrdiff_t(i) + off;
            const bool on = j >= 0 && j < std::ptrdiff_t(m) && r[i][j];
            if (on) ++run;
            if (!on || i + 1 == n) {
                if (run >= L) diag += run;
                run = 0;
            }
        }
    }

    std::vector<std::vector<bool>> laminar(n, std::vector<bool>(m, false));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0, start = 0; j <= m; ++j) {
            if (j < m && r[i][j]) continue;
            if (j - start >= L)
                for (std::size_t t = start; t < j; ++t) laminar[i][t] = true;
            start = j + 1;
        }
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0, start = 0; i <= n; ++i) {
            if (i < n && r[i][j]) continue;
            if (i - start >= L)
                for (std::size_t t = start; t < i; ++t) laminar[t][j] = true;
            start = i + 1;
        }
    std::size_t lam = 0;
    for (const auto& row : laminar) lam += std::count(row.begin(), row.end(), true);

    const double C = double(c);
    const double corm = m < 2 ? 0.0 : 100.0 * moment / (double(m - 1) * C);
    return {100.0 * C / double(n * m), 100.0 * double(diag) / C, 100.0 * double(lam) / C, corm};
}

RecurrenceScores recurrence_metrics(const Scanpath& a, const Scanpath& b, const GridSpec& image,
                                    const MetricConfig& cfg) {
    require_nonempty(a, b, "recurrence_metrics");
    const double rho = cfg.radius_for(image);
    std::vector<std::vector<bool>> r(a.size(), std::vector<bool>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) r[i][j] = dist(a.points[i], b.points[j]) <= rho;
    return recurrence_from_matrix(r, cfg.min_line);
}

PairScores score_pair(const Scanpath& a, const Scanpath& b, const GridSpec& image, const MetricConfig& cfg) {
    const auto s = string_metrics(a, b, image, cfg);
    const auto c = curve_metrics(a, b);
    const auto t = series_metrics(a, b, cfg);
    const auto r = recurrence_metrics(a, b, image, cfg);
    return {s.lev, s.scam, c.hau, c.fre, t.fdtw, t.tde, r.rec, r.det, r.lam, r.corm};
}

// --- aggregation -------------------------------------------------------------

void MetricReport::add(const PairScores& s) {
    for (std::size_t i = 0; i < kMetricCount; ++i)
        if (s[i]) values_[i].push_back(*s[i]);
}

void MetricReport::finish() {
    for (std::size_t i = 0; i < kMetricCount; ++i) {
        const auto& v = values_[i];
        MetricSummary& row = rows[i];
        row.count = v.size();
        if (v.empty()) {
            row.mean = std::numeric_limits<double>::quiet_NaN();
            row.std = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        row.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - row.mean) * (x - row.mean);
        row.std = std::sqrt(ss / double(v.size()));
    }
}

namespace {

const GridSpec& size_of(const std::map<std::string, GridSpec>& sizes, const std::string& id) {
    const auto it = sizes.find(id);
    if (it == sizes.end()) throw DataError("no image size for '" + id + "'");
    return it->second;
}

std::map<std::string, std::vector<const Scanpath*>> group(const std::vector<Scanpath>& paths) {
    std::map<std::string, std::vector<const Scanpath*>> out;
    for (const auto& s : paths) out[s.image_id].push_back(&s);
    return out;
}

}  // namespace

MetricReport evaluate_set(const std::vector<Scanpath>& predicted, const std::vector<Scanpath>& ground_truth,
                          const std::map<std::string, GridSpec>& sizes, const MetricConfig& cfg) {
    cfg.validate();
    if (predicted.empty() || ground_truth.empty()) throw ParameterError("evaluate_set: empty input");
    const auto truth = group(ground_truth);
    MetricReport report;
    for (const auto& p : predicted) {
        const auto it = truth.find(p.image_id);
        if (it == truth.end()) throw DataError("evaluate_set: no ground truth for image '" + p.image_id + "'");
        const auto& image = size_of(sizes, p.image_id);
        for (const auto* g : it->second) report.add(score_pair(p, *g, image, cfg));
    }
    report.finish();
    return report;
}

MetricReport human_baseline(const std::vector<Scanpath>& ground_truth, const std::map<std::string, GridSpec>& sizes,
                            const MetricConfig& cfg) {
    cfg.validate();
    MetricReport report;
    std::vector<std::string> seen;
    for (const auto& s : ground_truth)
        if (std::find(seen.begin(), seen.end(), s.image_id) == seen.end()) seen.push_back(s.image_id);
    const auto truth = group(ground_truth);
    for (const auto& id : seen) {
        const auto& paths = truth.at(id);
        if (paths.size() < 2) {
            report.warnings.push_back("human baseline: image '" + id + "' has a single scanpath, skipped");
            continue;
        }
        const auto& image = size_of(sizes, id);
        for (std::size_t i = 0; i < paths.size(); ++i)
            for (std::size_t j = 0; j < paths.size(); ++j)
                if (i != j) report.add(score_pair(*paths[i], *paths[j], image, cfg));
    }
    report.finish();
    return report;
}

std::vector<Scanpath> random_baseline(const std::string& image_id, const GridSpec& image, std::size_t N,
                                      std::size_t count, Rng& rng) {
    if (count < 1) throw ParameterError("random_baseline: count must be >= 1");
    std::vector<Scanpath> out;
    for (std::size_t c = 0; c < count; ++c) {
        Scanpath s{image_id, "random" + std::to_string(c), {}};
        for (std::size_t t = 0; t < N; ++t) {
            const double x = rng.uniform() * image.width;
            const double y = rng.uniform() * image.height;
            s.points.push_back({x, y});
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string report_csv(const MetricReport& r) {
    std::string out = "metric,mean,std,direction\n";
    for (auto m : kAllMetrics) {
        const auto& row = r[m];
        out += std::string(metric_name(m)) + "," + data::format_double(row.mean) + "," +
               data::format_double(row.std) + "," + (lower_is_better(m) ? "lower" : "higher") + "\n";
    }
    return out;
}

int count_better(const MetricReport& a, const MetricReport& b) {
    int n = 0;
    for (auto m : kAllMetrics) {
        const double x = a[m].mean, y = b[m].mean;
        if (lower_is_better(m) ? x < y : x > y) ++n;
    }
    return n;
}

// --- saliency ----------------------------------------------------------------

std::vector<double> aggregate_heatmap(const std::vector<Scanpath>& paths, const GridSpec& grid, double sigma) {
    std::vector<double> heat(grid.pixels(), 0.0);
    for (const auto& s : paths)
        for (const auto& p : s.points) {
            const auto g = gaussian_map(p, grid, sigma);
            for (std::size_t i = 0; i < heat.size(); ++i) heat[i] += g.values()[i];
        }
    return heat;
}

ProbMap normalize_heatmap(const std::vector<double>& heat, const GridSpec& grid) {
    if (heat.size() != grid.pixels()) throw ShapeError("normalize_heatmap: size does not match grid");
    return smooth_normalize(grid, heat);
}

std::vector<std::uint8_t> heatmap_to_gray(const std::vector<double>& heat) {
    const double peak = heat.empty() ? 0.0 : *std::max_element(heat.begin(), heat.end());
    std::vector<std::uint8_t> out(heat.size(), 0);
    if (peak <= 0.0) return out;
    for (std::size_t i = 0; i < heat.size(); ++i)
        out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(heat[i] / peak, 0.0, 1.0) * 255.0));
    return out;
}

double kl_divergence(const ProbMap& p, const ProbMap& q) {
    if (!(p.grid() == q.grid())) throw ShapeError("kl_divergence: grids differ");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double a = p.values()[i];
        if (a > 0.0) s += a * std::log(a / q.values()[i]);
    }
    return s;
}

}  // namespace scanpath::metrics
