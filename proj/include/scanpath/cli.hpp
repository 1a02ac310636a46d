#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scanpath/data_io.hpp"
#include "scanpath/metrics.hpp"
#include "scanpath/trainer.hpp"

namespace scanpath::cli {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kNumerical = 3 };

/// Flat key=value run configuration. Blank lines and '#' comments are
/// ignored; unknown keys raise ParameterError.
struct RunConfig {
    train::TrainConfig train;
    metrics::MetricConfig metrics;
    data::SynthParams synth;
    std::size_t test_observers = 3;
    std::optional<fs::path> train_csv, test_csv, manifest, features_dir;

    static RunConfig parse(const std::string& text, const fs::path& base = {});
    static RunConfig load(const fs::path& path);
    /// Every key with its effective value, in a fixed order.
    std::vector<std::pair<std::string, std::string>> to_kv() const;
    std::string echo() const;
};

struct TrainOptions {
    RunConfig config;
    fs::path out;
    std::optional<fs::path> resume;  // checkpoint to continue from
};

struct PredictOptions {
    fs::path checkpoint;
    fs::path data;  // scanpath CSV; its image ids are the images predicted
    std::optional<fs::path> manifest;
    std::optional<fs::path> features_dir;
    std::size_t count = 10;
    std::optional<double> th;
    std::uint64_t seed = 0;
    bool dump_tspm = false;
    fs::path out;
};

struct CompleteOptions {
    fs::path checkpoint;
    fs::path data;
    std::optional<fs::path> manifest;
    std::optional<fs::path> features_dir;
    std::size_t prefix_len = 4;
    std::size_t repeats = 10;
    std::optional<double> th;
    std::uint64_t seed = 0;
    fs::path out;
};

struct EvaluateOptions {
    fs::path predicted;
    fs::path truth;
    std::optional<fs::path> manifest;
    metrics::MetricConfig metrics;
    bool baselines = false;
    std::size_t count = 10;  // random-baseline paths per image
    std::size_t length = 8;  // random-baseline path length
    std::uint64_t seed = 0;
    fs::path out;
};

struct SaliencyOptions {
    fs::path data;
    std::optional<fs::path> manifest;
    std::optional<double> sigma;  // image pixels; unset: width / 16
    fs::path out;
};

struct SynthOptions {
    RunConfig config;
    std::uint64_t seed = 0;
    fs::path out;
};

/// Each command writes its outputs plus manifest.txt into out and throws
/// scanpath::Error subclasses on failure.
void cmd_train(const TrainOptions& o);
void cmd_predict(const PredictOptions& o);
void cmd_complete(const CompleteOptions& o);
void cmd_evaluate(const EvaluateOptions& o);
void cmd_saliency(const SaliencyOptions& o);
void cmd_synth(const SynthOptions& o);

/// Maps an exception thrown by a command to its exit code.
int exit_code_for(const std::exception& e);

}  // namespace scanpath::cli
