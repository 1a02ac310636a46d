#include "scanpath/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "scanpath/ops.hpp"

namespace scanpath::train {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ParameterError("train: lr must be positive");
    if (!(loss.gamma > 0.0)) throw ParameterError("train: gamma must be positive");
    if (loss.lambda_base < 0.0 || loss.lambda_slope < 0.0) throw ParameterError("train: lambda coefficients must be >= 0");
    model.validate();
}

TrainerState initial_state(const model::ScanpathModel& model) {
    const auto params = model.parameters();
    return {ad::AdamState::for_params(params), 0};
}

ad::Tensor rollout_loss(const model::ScanpathModel& model, const model::FeatureStack& feat,
                        const data::PreparedExample& example, const TrainConfig& cfg, std::uint64_t step_index) {
    if (example.maps.empty()) throw ParameterError("train_step: empty ground-truth set");
    const auto& mc = model.config();
    Rng rng = Rng::derived(cfg.seed, step_index, 1);
    const auto anchor = rng.uniform_index(example.maps.size());
    const auto weights = model.sample_weights(rng);
    const std::size_t N = mc.length;

    std::vector<ad::Tensor> frames;
    if (cfg.teacher_forcing) {
        const auto& truth = example.maps[anchor];
        std::vector<ProbMap> inputs{model.center_prior().map};
        for (std::size_t t = 0; t + 1 < N; ++t) inputs.push_back(truth[std::min(t, truth.size() - 1)]);
        frames = model.predict_sequence(feat, inputs, weights);
    } else {
        auto state = model.initial_state();
        ProbMap current = model.center_prior().map;
        for (std::size_t t = 0; t < N; ++t) {
            frames.push_back(model.step(feat, model.fixation_input(current), state, weights));
            const ProbMap frame(mc.grid, {frames.back().data().begin(), frames.back().data().end()});
            current = gaussian_map(model::sample_next_point(frame, mc.th, mc.th_mode, rng), mc.grid, mc.sigma);
        }
    }
    return loss::kl_dtw_loss(frames, example.maps, cfg.loss, model.center_prior());
}

double train_step(model::ScanpathModel& model, const data::PreparedExample& example,
                  const model::FeatureProvider& provider, TrainerState& state, const TrainConfig& cfg) {
    auto params = model.parameters();
    const auto feat = model.build_features(example.image_id, provider);
    auto loss = rollout_loss(model, feat, example, cfg, state.step);
    const double value = loss.item();
    if (!std::isfinite(value))
        throw NumericalError("non-finite loss at step " + std::to_string(state.step) + " on " + example.image_id);
    for (auto& p : params) p.zero_grad();
    loss.backward();
    ad::adam_step(params, state.adam, cfg.lr);
    ++state.step;
    return value;
}

std::size_t example_for_step(std::uint64_t seed, std::uint64_t step, std::size_t n_examples) {
    if (n_examples == 0) throw ParameterError("train: no examples");
    const std::uint64_t epoch = step / n_examples;
    std::vector<std::size_t> order(n_examples);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::derived(seed, epoch, 2);
    for (std::size_t i = n_examples; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
    return order[step % n_examples];
}

TrainResult train(model::ScanpathModel& model, const std::vector<data::PreparedExample>& examples,
                  const model::FeatureProvider& provider, TrainerState& state, const TrainConfig& cfg,
                  const CheckpointSink& sink) {
    cfg.validate();
    if (examples.empty()) throw ParameterError("train: empty training split");
    TrainResult result;
    while (state.step < cfg.max_steps) {
        const auto step = state.step;
        const auto& ex = examples[example_for_step(cfg.seed, step, examples.size())];
        const double loss = train_step(model, ex, provider, state, cfg);
        result.losses.emplace_back(step, loss);
        if (sink && cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0)
            sink(make_checkpoint(model, state, cfg), state.step);
    }
    result.final_checkpoint = make_checkpoint(model, state, cfg);
    return result;
}

std::string format_loss_log(const std::vector<std::pair<std::uint64_t, double>>& losses) {
    std::string out = "step,loss\n";
    for (const auto& [step, loss] : losses) out += std::to_string(step) + "," + data::format_double(loss) + "\n";
    return out;
}

data::Checkpoint make_checkpoint(const model::ScanpathModel& model, const TrainerState& state,
                                 const TrainConfig& cfg) {
    data::Checkpoint c;
    const auto named = model.named_parameters();
    if (state.adam.first_moment.size() != named.size()) throw ShapeError("make_checkpoint: optimizer state mismatch");
    for (const auto& p : named)
        c.tensors.push_back({p.name, p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()}});
    for (std::size_t i = 0; i < named.size(); ++i) {
        c.tensors.push_back({"adam.m." + named[i].name, named[i].tensor.shape(), state.adam.first_moment[i]});
        c.tensors.push_back({"adam.v." + named[i].name, named[i].tensor.shape(), state.adam.second_moment[i]});
    }
    c.meta = model.config().to_kv();
    c.meta.emplace_back("global_step", std::to_string(state.step));
    c.meta.emplace_back("adam_step", std::to_string(state.adam.step));
    c.meta.emplace_back("seed", std::to_string(cfg.seed));
    c.meta.emplace_back("rng_scheme", "mt19937_64 derived per (seed, step)");
    c.meta.emplace_back("lr", data::format_double(cfg.lr));
    c.meta.emplace_back("gamma", data::format_double(cfg.loss.gamma));
    c.meta.emplace_back("lambda_base", data::format_double(cfg.loss.lambda_base));
    c.meta.emplace_back("lambda_slope", data::format_double(cfg.loss.lambda_slope));
    c.meta.emplace_back("teacher_forcing", cfg.teacher_forcing ? "1" : "0");
    return c;
}

std::pair<model::ScanpathModel, TrainerState> restore_checkpoint(const data::Checkpoint& c,
                                                                  const model::ModelConfig* expected) {
    const auto kv = c.meta_map();
    const auto cfg = model::ModelConfig::from_kv(kv);
    if (expected && !(*expected == cfg)) {
        std::string diff;
        const auto want = expected->to_kv();
        const auto have = cfg.to_kv();
        for (std::size_t i = 0; i < want.size(); ++i)
            if (want[i].second != have[i].second)
                diff += " " + want[i].first + " (expected " + want[i].second + ", checkpoint " + have[i].second + ")";
        throw ConfigMismatch("checkpoint configuration mismatch:" + diff);
    }
    model::ScanpathModel model(cfg);
    auto named = model.named_parameters();
    TrainerState state = initial_state(model);

    auto fill = [&](const std::string& name, const ad::Shape& shape, std::span<double> dst) {
        const auto* rec = c.find(name);
        if (!rec) throw ConfigMismatch("checkpoint lacks tensor '" + name + "'");
        if (rec->shape != shape)
            throw ConfigMismatch("checkpoint tensor '" + name + "' has shape " + ad::to_string(rec->shape) +
                                 ", model expects " + ad::to_string(shape));
        std::copy(rec->values.begin(), rec->values.end(), dst.begin());
    };
    for (std::size_t i = 0; i < named.size(); ++i) {
        const auto& shape = named[i].tensor.shape();
        fill(named[i].name, shape, named[i].tensor.mutable_data());
        fill("adam.m." + named[i].name, shape, state.adam.first_moment[i]);
        fill("adam.v." + named[i].name, shape, state.adam.second_moment[i]);
    }
    try {
        state.step = std::stoull(kv.at("global_step"));
        state.adam.step = std::stoull(kv.at("adam_step"));
    } catch (const std::exception&) {
        throw FormatError("checkpoint: missing or malformed step counters");
    }
    return {std::move(model), std::move(state)};
}

}  // namespace scanpath::train
