#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scanpath/bayes.hpp"
#include "scanpath/core_types.hpp"
#include "scanpath/loss.hpp"
#include "scanpath/rng.hpp"
#include "scanpath/tensor.hpp"

namespace scanpath::model {

using ad::Tensor;

/// How the sampling threshold is applied: th * max(map), or th itself.
enum class ThresholdMode { Relative, Absolute };
enum class FeatureSource { Trainable, Precomputed };

struct ModelConfig {
    GridSpec grid{32, 32};
    int layers = 2;
    int hidden_channels = 16;
    int kernel_size = 3;
    double th = 0.7;
    ThresholdMode th_mode = ThresholdMode::Relative;
    int length = 8;      // N, scanpath length generated
    double sigma = 2.0;  // spatialization std, grid pixels
    int feature_channels = 4;
    FeatureSource feature_source = FeatureSource::Trainable;
    double init_rho = -4.0;  // initial pre-softplus weight scale

    void validate() const;
    std::vector<std::pair<std::string, std::string>> to_kv() const;
    /// Reads the keys written by to_kv(); missing keys keep defaults.
    static ModelConfig from_kv(const std::map<std::string, std::string>& kv);
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LayerState {
    Tensor h;  // [hidden, H, W]
    Tensor c;  // [hidden, H, W]
};
using LstmState = std::vector<LayerState>;

struct FeatureStack {
    Tensor features;  // [F, H, W]
    Tensor coord;     // [2, H, W]: column then row, each in [-1, 1]
};

/// CoordConv planes for a grid.
Tensor coord_planes(const GridSpec& grid);

/// One ConvLSTM cell update. kernel is [4*hidden, C_x + hidden, k, k] applied
/// to concat(x, h_prev); gate blocks are ordered i, f, o, g.
LayerState convlstm_step(const Tensor& x, const LayerState& prev, const Tensor& kernel, const Tensor& bias);

/// 1x1 convolution to a single logit map followed by map_softmax -> [H, W].
Tensor tspm_head(const Tensor& h, const Tensor& weight, const Tensor& bias);

/// Draws the next fixation from a tSPM: pixels below the cutoff are masked,
/// the rest sampled proportionally to their probability.
GazePoint sample_next_point(const ProbMap& tspm, double th, ThresholdMode mode, Rng& rng);

/// Source of per-image features: precomputed tensor files or raw images for
/// the trainable convolution stack.
class FeatureProvider {
public:
    /// Reads <dir>/<image_id>.ftns, a [F, H, W] tensor at grid resolution.
    static FeatureProvider precomputed(std::filesystem::path dir);
    /// Grayscale images as [1, H, W] tensors in [0, 1] at grid resolution.
    static FeatureProvider images(std::map<std::string, Tensor> by_id);

    bool is_precomputed() const { return !dir_.empty(); }
    Tensor load(const std::string& image_id) const;

private:
    std::filesystem::path dir_;
    std::map<std::string, Tensor> images_;
};

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

struct LayerWeights {
    Tensor kernel;
    Tensor bias;
};
using SampledWeights = std::vector<LayerWeights>;

/// Feature assembly, multi-layer Bayesian ConvLSTM and tSPM head.
class ScanpathModel {
public:
    explicit ScanpathModel(ModelConfig cfg, std::uint64_t init_seed = 0);
    // Tensors are shared handles; copies go through clone().
    ScanpathModel(const ScanpathModel&) = delete;
    ScanpathModel& operator=(const ScanpathModel&) = delete;
    ScanpathModel(ScanpathModel&&) = default;
    ScanpathModel& operator=(ScanpathModel&&) = default;

    ScanpathModel clone() const;

    const ModelConfig& config() const { return cfg_; }
    const loss::CenterPrior& center_prior() const { return prior_; }

    /// All trainable tensors in a fixed order with stable names.
    std::vector<NamedTensor> named_parameters() const;
    std::vector<Tensor> parameters() const;

    std::vector<ad::BayesConvParams>& lstm_params() { return lstm_; }
    Tensor& head_weight() { return head_w_; }
    Tensor& head_bias() { return head_b_; }

    FeatureStack build_features(const std::string& image_id, const FeatureProvider& provider) const;

    /// One Bayesian kernel draw per layer (one virtual observer).
    SampledWeights sample_weights(Rng& rng) const;

    LstmState initial_state() const;

    /// Fixation map as network input: [1, H, W], scaled to unit peak.
    Tensor fixation_input(const ProbMap& fixation) const;

    /// Advances the stack by one fixation; returns the next tSPM [H, W].
    Tensor step(const FeatureStack& feat, const Tensor& fixation, LstmState& state, const SampledWeights& w) const;

    /// Runs one step per input map and returns the tSPM after each.
    std::vector<Tensor> predict_sequence(const FeatureStack& feat, std::span<const ProbMap> inputs,
                                         const SampledWeights& w) const;

    /// Copies values from another model with an identical configuration.
    void copy_parameters_from(const ScanpathModel& other);

private:
    ModelConfig cfg_;
    loss::CenterPrior prior_;
    std::vector<Tensor> feature_w_, feature_b_;  // trainable stack, empty when precomputed
    std::vector<ad::BayesConvParams> lstm_;
    Tensor head_w_, head_b_;
};

struct Rollout {
    Scanpath path;              // grid coordinates
    std::vector<ProbMap> tspm;  // one frame per fixation
};

/// Generates a length-N scanpath. The prefix (grid coordinates) is
/// teacher-forced; later points are sampled from the tSPM. Weights are drawn
/// once per call. th overrides the configured threshold.
Rollout rollout(const ScanpathModel& model, const FeatureStack& feat, const Scanpath& prefix, Rng& rng,
                std::optional<double> th = std::nullopt);

/// rollout() with a non-empty prefix.
Scanpath complete_scanpath(const ScanpathModel& model, const FeatureStack& feat, const Scanpath& prefix, Rng& rng,
                           std::optional<double> th = std::nullopt);

}  // namespace scanpath::model
