#include "scanpath/model.hpp"

#include <algorithm>
#include <cmath>

#include "scanpath/data_io.hpp"
#include "scanpath/ops.hpp"

namespace scanpath::model {

namespace {

constexpr std::size_t kFeatureStackWidth = 8;

std::string mode_name(ThresholdMode m) { return m == ThresholdMode::Relative ? "relative" : "absolute"; }
std::string source_name(FeatureSource s) { return s == FeatureSource::Trainable ? "trainable" : "precomputed"; }

Tensor uniform_tensor(ad::Shape shape, double bound, Rng& rng) {
    std::vector<double> v(ad::numel(shape));
    for (auto& e : v) e = (2.0 * rng.uniform() - 1.0) * bound;
    return Tensor::from(std::move(shape), std::move(v), true);
}

}  // namespace

// --- ModelConfig -------------------------------------------------------------

void ModelConfig::validate() const {
    GridSpec check(grid.width, grid.height);
    if (layers < 1) throw ParameterError("model: layers must be >= 1");
    if (hidden_channels < 1) throw ParameterError("model: hidden_channels must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0) throw ParameterError("model: kernel_size must be odd");
    if (!(th > 0.0 && th <= 1.0)) throw ParameterError("model: th must be in (0, 1]");
    if (length < 1) throw ParameterError("model: length must be >= 1");
    if (!(sigma > 0.0)) throw ParameterError("model: sigma must be positive");
    if (feature_channels < 1) throw ParameterError("model: feature_channels must be >= 1");
}

std::vector<std::pair<std::string, std::string>> ModelConfig::to_kv() const {
    return {{"grid_width", std::to_string(grid.width)},
            {"grid_height", std::to_string(grid.height)},
            {"layers", std::to_string(layers)},
            {"hidden_channels", std::to_string(hidden_channels)},
            {"kernel_size", std::to_string(kernel_size)},
            {"th", data::format_double(th)},
            {"th_mode", mode_name(th_mode)},
            {"length", std::to_string(length)},
            {"sigma", data::format_double(sigma)},
            {"feature_channels", std::to_string(feature_channels)},
            {"feature_source", source_name(feature_source)},
            {"init_rho", data::format_double(init_rho)}};
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
    ModelConfig c;
    auto get = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    try {
        if (auto v = get("grid_width")) c.grid.width = std::stoi(*v);
        if (auto v = get("grid_height")) c.grid.height = std::stoi(*v);
        if (auto v = get("layers")) c.layers = std::stoi(*v);
        if (auto v = get("hidden_channels")) c.hidden_channels = std::stoi(*v);
        if (auto v = get("kernel_size")) c.kernel_size = std::stoi(*v);
        if (auto v = get("th")) c.th = std::stod(*v);
        if (auto v = get("length")) c.length = std::stoi(*v);
        if (auto v = get("sigma")) c.sigma = std::stod(*v);
        if (auto v = get("feature_channels")) c.feature_channels = std::stoi(*v);
        if (auto v = get("init_rho")) c.init_rho = std::stod(*v);
    } catch (const std::logic_error&) {
        throw ParameterError("model config: malformed numeric value");
    }
    if (auto v = get("th_mode")) {
        if (*v == "relative") c.th_mode = ThresholdMode::Relative;
        else if (*v == "absolute") c.th_mode = ThresholdMode::Absolute;
        else throw ParameterError("model config: th_mode must be relative or absolute");
    }
    if (auto v = get("feature_source")) {
        if (*v == "trainable") c.feature_source = FeatureSource::Trainable;
        else if (*v == "precomputed") c.feature_source = FeatureSource::Precomputed;
        else throw ParameterError("model config: feature_source must be trainable or precomputed");
    }
    c.validate();
    return c;
}

// --- free functions ----------------------------------------------------------

Tensor coord_planes(const GridSpec& grid) {
    const std::size_t H = grid.height, W = grid.width;
    std::vector<double> v(2 * H * W);
    auto norm = [](std::size_t i, std::size_t n) { return n == 1 ? 0.0 : -1.0 + 2.0 * double(i) / double(n - 1); };
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            v[y * W + x] = norm(x, W);
            v[H * W + y * W + x] = norm(y, H);
        }
    return Tensor::from({2, H, W}, std::move(v));
}

LayerState convlstm_step(const Tensor& x, const LayerState& prev, const Tensor& kernel, const Tensor& bias) {
    const std::size_t hidden = prev.h.dim(0);
    if (prev.c.shape() != prev.h.shape()) throw ShapeError("convlstm_step: h and c shapes differ");
    if (kernel.rank() != 4 || kernel.dim(0) != 4 * hidden)
        throw ShapeError("convlstm_step: kernel must have 4*hidden output channels");
    const Tensor parts[] = {x, prev.h};
    const auto gates = ad::conv2d(ad::concat(parts), kernel, bias);
    const auto i = ad::sigmoid(ad::slice(gates, 0, hidden));
    const auto f = ad::sigmoid(ad::slice(gates, hidden, 2 * hidden));
    const auto o = ad::sigmoid(ad::slice(gates, 2 * hidden, 3 * hidden));
    const auto g = ad::tanh(ad::slice(gates, 3 * hidden, 4 * hidden));
    auto c = ad::add(ad::hadamard(f, prev.c), ad::hadamard(i, g));
    auto h = ad::hadamard(o, ad::tanh(c));
    return {std::move(h), std::move(c)};
}

Tensor tspm_head(const Tensor& h, const Tensor& weight, const Tensor& bias) {
    const auto logits = ad::conv2d(h, weight, bias);
    return ad::map_softmax(ad::reshape(logits, {h.dim(1), h.dim(2)}));
}

GazePoint sample_next_point(const ProbMap& tspm, double th, ThresholdMode mode, Rng& rng) {
    if (!(th > 0.0 && th <= 1.0)) throw ParameterError("sample_next_point: th must be in (0, 1]");
    const auto v = tspm.values();
    const double mx = tspm.max();
    double cutoff = mode == ThresholdMode::Relative ? th * mx : th;
    if (cutoff > mx) cutoff = mx;  // the maximum always survives

    double total = 0.0;
    for (double p : v)
        if (p >= cutoff) total += p;
    double u = rng.uniform() * total;
    std::size_t pick = 0;
    bool found = false;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (v[k] < cutoff) continue;
        pick = k;
        found = true;
        if (u < v[k]) break;
        u -= v[k];
    }
    if (!found) throw NumericalError("sample_next_point: no candidate pixel");
    const int w = tspm.grid().width;
    return {double(pick % w), double(pick / w)};
}

// --- FeatureProvider ---------------------------------------------------------

FeatureProvider FeatureProvider::precomputed(std::filesystem::path dir) {
    FeatureProvider p;
    p.dir_ = dir.empty() ? std::filesystem::path(".") : std::move(dir);
    return p;
}

FeatureProvider FeatureProvider::images(std::map<std::string, Tensor> by_id) {
    FeatureProvider p;
    p.images_ = std::move(by_id);
    return p;
}

Tensor FeatureProvider::load(const std::string& image_id) const {
    if (is_precomputed()) {
        const auto path = dir_ / (image_id + ".ftns");
        if (!std::filesystem::exists(path)) throw DataError("missing feature file " + path.string());
        return data::read_feature_tensor(path);
    }
    const auto it = images_.find(image_id);
    if (it == images_.end()) throw DataError("no image for '" + image_id + "'");
    return it->second;
}

// --- ScanpathModel -----------------------------------------------------------

ScanpathModel::ScanpathModel(ModelConfig cfg, std::uint64_t init_seed)
    : cfg_(cfg), prior_(loss::CenterPrior::for_grid(cfg.grid, cfg.sigma)) {
    cfg_.validate();
    Rng rng = Rng::derived(init_seed, 0x5ca9);
    const std::size_t k = cfg_.kernel_size;
    const std::size_t hidden = cfg_.hidden_channels;
    const std::size_t F = cfg_.feature_channels;

    if (cfg_.feature_source == FeatureSource::Trainable) {
        const std::size_t widths[] = {1, kFeatureStackWidth, kFeatureStackWidth, F};
        for (int l = 0; l < 3; ++l) {
            const double bound = 1.0 / std::sqrt(double(widths[l] * 9));
            feature_w_.push_back(uniform_tensor({widths[l + 1], widths[l], 3, 3}, bound, rng));
            feature_b_.push_back(uniform_tensor({widths[l + 1]}, bound, rng));
        }
    }
    for (int l = 0; l < cfg_.layers; ++l) {
        const std::size_t in = (l == 0 ? F + 3 : hidden) + hidden;
        lstm_.push_back(ad::BayesConvParams::init(4 * hidden, in, k, cfg_.init_rho, rng));
    }
    head_w_ = uniform_tensor({1, hidden, 1, 1}, 1.0 / std::sqrt(double(hidden)), rng);
    head_b_ = Tensor::zeros({1}, true);
}

ScanpathModel ScanpathModel::clone() const {
    ScanpathModel m(cfg_);
    m.copy_parameters_from(*this);
    return m;
}

std::vector<NamedTensor> ScanpathModel::named_parameters() const {
    std::vector<NamedTensor> out;
    for (std::size_t l = 0; l < feature_w_.size(); ++l) {
        out.push_back({"features.conv" + std::to_string(l) + ".weight", feature_w_[l]});
        out.push_back({"features.conv" + std::to_string(l) + ".bias", feature_b_[l]});
    }
    for (std::size_t l = 0; l < lstm_.size(); ++l) {
        const auto prefix = "lstm." + std::to_string(l) + ".";
        out.push_back({prefix + "mu", lstm_[l].mu});
        out.push_back({prefix + "rho", lstm_[l].rho});
        out.push_back({prefix + "bias_mu", lstm_[l].bias_mu});
        out.push_back({prefix + "bias_rho", lstm_[l].bias_rho});
    }
    out.push_back({"head.weight", head_w_});
    out.push_back({"head.bias", head_b_});
    return out;
}

std::vector<Tensor> ScanpathModel::parameters() const {
    std::vector<Tensor> out;
    for (auto& p : named_parameters()) out.push_back(p.tensor);
    return out;
}

void ScanpathModel::copy_parameters_from(const ScanpathModel& other) {
    if (!(other.cfg_ == cfg_)) throw ConfigMismatch("copy_parameters_from: configurations differ");
    auto dst = named_parameters();
    const auto src = other.named_parameters();
    for (std::size_t i = 0; i < dst.size(); ++i)
        std::copy(src[i].tensor.data().begin(), src[i].tensor.data().end(), dst[i].tensor.mutable_data().begin());
}

FeatureStack ScanpathModel::build_features(const std::string& image_id, const FeatureProvider& provider) const {
    const std::size_t H = cfg_.grid.height, W = cfg_.grid.width;
    FeatureStack out{{}, coord_planes(cfg_.grid)};
    if (cfg_.feature_source == FeatureSource::Precomputed) {
        if (!provider.is_precomputed()) throw ConfigMismatch("model expects precomputed features");
        out.features = provider.load(image_id);
        if (out.features.rank() != 3 || out.features.dim(1) != H || out.features.dim(2) != W)
            throw ShapeError("feature tensor for '" + image_id + "' is not [F, H, W] at grid resolution");
        if (out.features.dim(0) != std::size_t(cfg_.feature_channels))
            throw ConfigMismatch("feature tensor for '" + image_id + "' has " + std::to_string(out.features.dim(0)) +
                                 " channels, model expects " + std::to_string(cfg_.feature_channels));
        return out;
    }
    if (provider.is_precomputed()) throw ConfigMismatch("model expects raw images for its trainable feature stack");
    auto x = provider.load(image_id);
    if (x.rank() != 3 || x.dim(0) != 1 || x.dim(1) != H || x.dim(2) != W)
        throw ShapeError("image for '" + image_id + "' is not [1, H, W] at grid resolution");
    for (std::size_t l = 0; l < feature_w_.size(); ++l) x = ad::tanh(ad::conv2d(x, feature_w_[l], feature_b_[l]));
    out.features = x;
    return out;
}

SampledWeights ScanpathModel::sample_weights(Rng& rng) const {
    SampledWeights out;
    for (const auto& p : lstm_) {
        auto s = ad::sample_bayes_kernel(p, rng);
        out.push_back({std::move(s.kernel), std::move(s.bias)});
    }
    return out;
}

LstmState ScanpathModel::initial_state() const {
    const ad::Shape shape{std::size_t(cfg_.hidden_channels), std::size_t(cfg_.grid.height),
                          std::size_t(cfg_.grid.width)};
    return LstmState(cfg_.layers, LayerState{Tensor::zeros(shape), Tensor::zeros(shape)});
}

Tensor ScanpathModel::fixation_input(const ProbMap& fixation) const {
    if (!(fixation.grid() == cfg_.grid)) throw ShapeError("fixation map grid differs from model grid");
    const double peak = fixation.max();
    std::vector<double> v(fixation.values().begin(), fixation.values().end());
    for (auto& e : v) e /= peak;
    return Tensor::from({1, std::size_t(cfg_.grid.height), std::size_t(cfg_.grid.width)}, std::move(v));
}

Tensor ScanpathModel::step(const FeatureStack& feat, const Tensor& fixation, LstmState& state,
                           const SampledWeights& w) const {
    if (state.size() != lstm_.size() || w.size() != lstm_.size()) throw ShapeError("step: layer count mismatch");
    const Tensor parts[] = {feat.features, fixation, feat.coord};
    Tensor x = ad::concat(parts);
    for (std::size_t l = 0; l < lstm_.size(); ++l) {
        state[l] = convlstm_step(x, state[l], w[l].kernel, w[l].bias);
        x = state[l].h;
    }
    return tspm_head(x, head_w_, head_b_);
}

std::vector<Tensor> ScanpathModel::predict_sequence(const FeatureStack& feat, std::span<const ProbMap> inputs,
                                                    const SampledWeights& w) const {
    auto state = initial_state();
    std::vector<Tensor> out;
    out.reserve(inputs.size());
    for (const auto& m : inputs) out.push_back(step(feat, fixation_input(m), state, w));
    return out;
}

// --- rollout -----------------------------------------------------------------

namespace {

ProbMap to_probmap(const Tensor& t, const GridSpec& grid) {
    return ProbMap(grid, {t.data().begin(), t.data().end()});
}

}  // namespace

Rollout rollout(const ScanpathModel& model, const FeatureStack& feat, const Scanpath& prefix, Rng& rng,
                std::optional<double> th) {
    const auto& cfg = model.config();
    const std::size_t N = cfg.length;
    if (prefix.size() >= N) throw ParameterError("rollout: prefix must be shorter than N");
    check_in_bounds(prefix, cfg.grid);
    const double threshold = th.value_or(cfg.th);

    ad::NoGradGuard no_grad;
    const auto weights = model.sample_weights(rng);
    auto state = model.initial_state();

    Rollout out;
    out.path.image_id = prefix.image_id;
    out.path.observer_id = prefix.observer_id;
    ProbMap current = model.center_prior().map;
    for (std::size_t t = 0; t < N; ++t) {
        const auto frame = model.step(feat, model.fixation_input(current), state, weights);
        out.tspm.push_back(to_probmap(frame, cfg.grid));
        const GazePoint next =
            t < prefix.size() ? prefix.points[t] : sample_next_point(out.tspm.back(), threshold, cfg.th_mode, rng);
        out.path.points.push_back(next);
        current = gaussian_map(next, cfg.grid, cfg.sigma);
    }
    return out;
}

Scanpath complete_scanpath(const ScanpathModel& model, const FeatureStack& feat, const Scanpath& prefix, Rng& rng,
                           std::optional<double> th) {
    if (prefix.empty()) throw ParameterError("complete_scanpath: empty prefix, use rollout");
    return rollout(model, feat, prefix, rng, th).path;
}

}  // namespace scanpath::model
