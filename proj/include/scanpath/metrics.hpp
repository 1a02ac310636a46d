#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scanpath/core_types.hpp"
#include "scanpath/rng.hpp"

namespace scanpath::metrics {

struct MetricConfig {
    int bin_cols = 8;
    int bin_rows = 5;
    std::optional<double> recurrence_radius;  // pixels; unset: diagonal / 10
    int min_line = 2;
    int tde_k = 3;

    void validate() const;
    double radius_for(const GridSpec& image) const;
};

enum class Metric { LEV, SCAM, HAU, FRE, fDTW, TDE, REC, DET, LAM, CORM };
inline constexpr std::size_t kMetricCount = 10;
inline constexpr std::array<Metric, kMetricCount> kAllMetrics{
    Metric::LEV, Metric::SCAM, Metric::HAU, Metric::FRE, Metric::fDTW,
    Metric::TDE, Metric::REC,  Metric::DET, Metric::LAM, Metric::CORM};

std::string_view metric_name(Metric m);
bool lower_is_better(Metric m);

struct StringScores {
    double lev;
    double scam;
};
struct CurveScores {
    double hau;
    double fre;
};
struct SeriesScores {
    double fdtw;
    std::optional<double> tde;  // nullopt when either path is shorter than k
};
struct RecurrenceScores {
    double rec;
    double det;
    double lam;
    double corm;
};

/// Bin letter index (row-major) of every fixation on cfg's bin grid over image.
std::vector<int> bin_string(const Scanpath& s, const GridSpec& image, const MetricConfig& cfg);

/// Plain Levenshtein distance between two symbol strings.
std::size_t levenshtein(const std::vector<int>& a, const std::vector<int>& b);

StringScores string_metrics(const Scanpath& a, const Scanpath& b, const GridSpec& image, const MetricConfig& cfg);
CurveScores curve_metrics(const Scanpath& a, const Scanpath& b);
SeriesScores series_metrics(const Scanpath& a, const Scanpath& b, const MetricConfig& cfg);
RecurrenceScores recurrence_metrics(const Scanpath& a, const Scanpath& b, const GridSpec& image,
                                    const MetricConfig& cfg);

/// Recurrence statistics of a given 0/1 cross-recurrence matrix [n x m].
RecurrenceScores recurrence_from_matrix(const std::vector<std::vector<bool>>& r, int min_line);

using PairScores = std::array<std::optional<double>, kMetricCount>;

/// All ten metrics for one pair, indexed by Metric.
PairScores score_pair(const Scanpath& a, const Scanpath& b, const GridSpec& image, const MetricConfig& cfg);

struct MetricSummary {
    double mean = 0.0;
    double std = 0.0;  // population std
    std::size_t count = 0;
};

struct MetricReport {
    std::array<MetricSummary, kMetricCount> rows;
    std::vector<std::string> warnings;

    const MetricSummary& operator[](Metric m) const { return rows[static_cast<std::size_t>(m)]; }
    void add(const PairScores& s);  // accumulates; call finish() once
    void finish();

private:
    std::array<std::vector<double>, kMetricCount> values_;
};

/// Scores every predicted path against every ground-truth path of the same
/// image. Coordinates are in image space; sizes maps image id to image size.
MetricReport evaluate_set(const std::vector<Scanpath>& predicted, const std::vector<Scanpath>& ground_truth,
                          const std::map<std::string, GridSpec>& sizes, const MetricConfig& cfg);

/// Leave-one-out scores of each ground-truth path against the rest of its
/// image. Images with a single path are skipped with a warning.
MetricReport human_baseline(const std::vector<Scanpath>& ground_truth, const std::map<std::string, GridSpec>& sizes,
                            const MetricConfig& cfg);

/// count paths of N uniform i.i.d. points inside image.
std::vector<Scanpath> random_baseline(const std::string& image_id, const GridSpec& image, std::size_t N,
                                      std::size_t count, Rng& rng);

/// metric,mean,std,direction rows in Metric order.
std::string report_csv(const MetricReport& r);

/// Number of metrics where a is strictly better than b.
int count_better(const MetricReport& a, const MetricReport& b);

// --- saliency aggregation ----------------------------------------------------

/// Sum of gaussian_map over every fixation of every path (unnormalized).
std::vector<double> aggregate_heatmap(const std::vector<Scanpath>& paths, const GridSpec& grid, double sigma);

/// Heatmap scaled to unit mass with the usual epsilon floor.
ProbMap normalize_heatmap(const std::vector<double>& heat, const GridSpec& grid);

/// Heatmap scaled so its peak is 255, rounded to 8 bits.
std::vector<std::uint8_t> heatmap_to_gray(const std::vector<double>& heat);

/// D_KL(P || Q) of two maps on the same grid.
double kl_divergence(const ProbMap& p, const ProbMap& q);

}  // namespace scanpath::metrics
