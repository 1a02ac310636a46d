#include "scanpath/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace scanpath::cli {

namespace {

constexpr const char* kVersion = "scanpath 1.0.0";

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used != v.size() || v.empty()) throw ParameterError("config: '" + key + "' expects a number, got '" + v + "'");
    return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
        throw ParameterError("config: '" + key + "' expects a nonnegative integer, got '" + v + "'");
    try {
        return std::stoull(v);
    } catch (const std::out_of_range&) {
        throw ParameterError("config: '" + key + "' is out of range");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ParameterError("config: '" + key + "' expects true or false, got '" + v + "'");
}

const std::set<std::string>& model_keys() {
    static const std::set<std::string> keys = [] {
        std::set<std::string> k;
        for (const auto& [key, value] : model::ModelConfig{}.to_kv()) k.insert(key);
        return k;
    }();
    return keys;
}

std::string path_or_empty(const std::optional<fs::path>& p) { return p ? p->string() : std::string(); }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

void prepare_out(const fs::path& out) {
    if (out.empty()) throw ParameterError("--out is required");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw DataError("cannot create " + out.string() + ": " + ec.message());
}

void write_manifest(const fs::path& out, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
    std::string text = "command=" + command + "\nversion=" + kVersion + "\n";
    for (const auto& [k, v] : entries) text += k + "=" + v + "\n";
    write_text(out / "manifest.txt", text);
}

/// Images for the model: per-image tensors from manifest pixels, or a feature directory.
model::FeatureProvider make_provider(const model::ModelConfig& cfg, const data::Dataset& d,
                                     const std::optional<fs::path>& features_dir) {
    if (cfg.feature_source == model::FeatureSource::Precomputed) {
        if (!features_dir) throw ParameterError("precomputed features need features_dir");
        return model::FeatureProvider::precomputed(*features_dir);
    }
    std::map<std::string, ad::Tensor> images;
    for (const auto& im : d.images) {
        if (im.pixels.empty()) throw DataError("image '" + im.image_id + "' has no pixels; a manifest with PGMs is needed");
        images[im.image_id] = data::image_to_tensor(im, cfg.grid);
    }
    return model::FeatureProvider::images(std::move(images));
}

model::ScanpathModel load_model(const fs::path& checkpoint) {
    return train::restore_checkpoint(data::read_checkpoint(checkpoint)).first;
}

Scanpath to_grid(const Scanpath& s, const GridSpec& image, const GridSpec& grid) {
    Scanpath out{s.image_id, s.observer_id, {}};
    for (const auto& p : s.points) out.points.push_back(rescale_point(p, image, grid));
    return out;
}

}  // namespace

// --- RunConfig ---------------------------------------------------------------

RunConfig RunConfig::parse(const std::string& text, const fs::path& base) {
    RunConfig c;
    std::map<std::string, std::string> model_kv;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto as_path = [&](const std::string& v) { return fs::path(v).is_absolute() || base.empty() ? fs::path(v) : base / v; };
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParameterError("config line " + std::to_string(lineno) + ": expected key=value");
        const auto key = trim(line.substr(0, eq));
        const auto v = trim(line.substr(eq + 1));
        if (!seen.insert(key).second) throw ParameterError("config: duplicate key '" + key + "'");

        if (model_keys().count(key)) model_kv[key] = v;
        else if (key == "lr") c.train.lr = to_double(key, v);
        else if (key == "max_steps") c.train.max_steps = to_uint(key, v);
        else if (key == "checkpoint_every") c.train.checkpoint_every = to_uint(key, v);
        else if (key == "seed") c.train.seed = to_uint(key, v);
        else if (key == "teacher_forcing") c.train.teacher_forcing = to_bool(key, v);
        else if (key == "gamma") c.train.loss.gamma = to_double(key, v);
        else if (key == "lambda_base") c.train.loss.lambda_base = to_double(key, v);
        else if (key == "lambda_slope") c.train.loss.lambda_slope = to_double(key, v);
        else if (key == "bin_cols") c.metrics.bin_cols = int(to_uint(key, v));
        else if (key == "bin_rows") c.metrics.bin_rows = int(to_uint(key, v));
        else if (key == "recurrence_radius") {
            if (v != "auto") c.metrics.recurrence_radius = to_double(key, v);
        } else if (key == "min_line") c.metrics.min_line = int(to_uint(key, v));
        else if (key == "tde_k") c.metrics.tde_k = int(to_uint(key, v));
        else if (key == "synth_images") c.synth.n_images = to_uint(key, v);
        else if (key == "synth_observers") c.synth.observers_per_image = to_uint(key, v);
        else if (key == "synth_rois") c.synth.roi_per_image = to_uint(key, v);
        else if (key == "synth_length") c.synth.length = to_uint(key, v);
        else if (key == "synth_noise") c.synth.noise_fraction = to_double(key, v);
        else if (key == "synth_switch") c.synth.switch_probability = to_double(key, v);
        else if (key == "test_observers") c.test_observers = to_uint(key, v);
        else if (key == "train_csv") c.train_csv = as_path(v);
        else if (key == "test_csv") c.test_csv = as_path(v);
        else if (key == "manifest") c.manifest = as_path(v);
        else if (key == "features_dir") c.features_dir = as_path(v);
        else throw ParameterError("config: unknown key '" + key + "'");
    }
    c.train.model = model::ModelConfig::from_kv(model_kv);
    c.train.loss.sigma = c.train.model.sigma;
    c.train.validate();
    c.metrics.validate();
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.parent_path());
}

std::vector<std::pair<std::string, std::string>> RunConfig::to_kv() const {
    using data::format_double;
    auto kv = train.model.to_kv();
    const std::vector<std::pair<std::string, std::string>> rest{
        {"lr", format_double(train.lr)},
        {"max_steps", std::to_string(train.max_steps)},
        {"checkpoint_every", std::to_string(train.checkpoint_every)},
        {"seed", std::to_string(train.seed)},
        {"teacher_forcing", train.teacher_forcing ? "true" : "false"},
        {"gamma", format_double(train.loss.gamma)},
        {"lambda_base", format_double(train.loss.lambda_base)},
        {"lambda_slope", format_double(train.loss.lambda_slope)},
        {"bin_cols", std::to_string(metrics.bin_cols)},
        {"bin_rows", std::to_string(metrics.bin_rows)},
        {"recurrence_radius", metrics.recurrence_radius ? format_double(*metrics.recurrence_radius) : "auto"},
        {"min_line", std::to_string(metrics.min_line)},
        {"tde_k", std::to_string(metrics.tde_k)},
        {"synth_images", std::to_string(synth.n_images)},
        {"synth_observers", std::to_string(synth.observers_per_image)},
        {"synth_rois", std::to_string(synth.roi_per_image)},
        {"synth_length", std::to_string(synth.length)},
        {"synth_noise", format_double(synth.noise_fraction)},
        {"synth_switch", format_double(synth.switch_probability)},
        {"test_observers", std::to_string(test_observers)},
        {"train_csv", path_or_empty(train_csv)},
        {"test_csv", path_or_empty(test_csv)},
        {"manifest", path_or_empty(manifest)},
        {"features_dir", path_or_empty(features_dir)},
    };
    kv.insert(kv.end(), rest.begin(), rest.end());
    return kv;
}

std::string RunConfig::echo() const {
    std::string out;
    for (const auto& [k, v] : to_kv())
        if (!v.empty()) out += k + "=" + v + "\n";
    return out;
}

// --- commands ----------------------------------------------------------------

void cmd_train(const TrainOptions& o) {
    const auto& rc = o.config;
    if (!rc.train_csv) throw ParameterError("train: config needs train_csv");
    prepare_out(o.out);
    const auto d = data::load_scanpath_dataset(*rc.train_csv, rc.manifest);
    const auto& mc = rc.train.model;
    std::vector<std::string> skipped;
    const auto examples = data::preprocess(d, mc.grid, mc.length, mc.sigma, &skipped);
    for (const auto& id : skipped) std::cerr << "warning: image '" << id << "' has no usable scanpath\n";
    if (examples.empty()) throw DataError("train: no usable training examples");
    const auto provider = make_provider(mc, d, rc.features_dir);

    auto [model, state] = [&] {
        if (o.resume) return train::restore_checkpoint(data::read_checkpoint(*o.resume), &mc);
        model::ScanpathModel m(mc, rc.train.seed);
        auto s = train::initial_state(m);
        return std::pair{std::move(m), std::move(s)};
    }();

    write_text(o.out / "config.txt", rc.echo());
    write_manifest(o.out, "train",
                   {{"train_csv", rc.train_csv->string()},
                    {"manifest", path_or_empty(rc.manifest)},
                    {"resume", path_or_empty(o.resume)},
                    {"seed", std::to_string(rc.train.seed)},
                    {"examples", std::to_string(examples.size())}});

    std::vector<std::pair<std::uint64_t, double>> losses;
    auto sink = [&](const data::Checkpoint& c, std::uint64_t step) {
        data::write_checkpoint(o.out / ("checkpoint_" + std::to_string(step) + ".spck"), c);
    };
    try {
        const auto result = train::train(model, examples, provider, state, rc.train, sink);
        losses = result.losses;
        data::write_checkpoint(o.out / "final.spck", result.final_checkpoint);
    } catch (const NumericalError&) {
        write_text(o.out / "loss.csv", train::format_loss_log(losses));
        throw;
    }
    write_text(o.out / "loss.csv", train::format_loss_log(losses));
}

namespace {

struct Inference {
    model::ScanpathModel model;
    data::Dataset data;
    model::FeatureProvider provider;
};

Inference load_inference(const fs::path& checkpoint, const fs::path& csv, const std::optional<fs::path>& manifest,
                         const std::optional<fs::path>& features_dir) {
    auto m = load_model(checkpoint);
    auto d = data::load_scanpath_dataset(csv, manifest, data::Split::Test);
    auto p = make_provider(m.config(), d, features_dir);
    return {std::move(m), std::move(d), std::move(p)};
}

}  // namespace

void cmd_predict(const PredictOptions& o) {
    if (o.count < 1) throw ParameterError("predict: --count must be >= 1");
    if (o.th && !(*o.th > 0.0 && *o.th <= 1.0)) throw ParameterError("predict: --th must be in (0, 1]");
    prepare_out(o.out);
    auto inf = load_inference(o.checkpoint, o.data, o.manifest, o.features_dir);
    const auto& mc = inf.model.config();
    std::vector<Scanpath> out;
    std::size_t image_index = 0;
    for (const auto& [id, idx] : inf.data.by_image()) {
        const auto& image = inf.data.image(id).size;
        const auto feat = inf.model.build_features(id, inf.provider);
        for (std::size_t c = 0; c < o.count; ++c) {
            Rng rng = Rng::derived(o.seed, image_index, c);
            auto r = model::rollout(inf.model, feat, Scanpath{id, "model" + std::to_string(c), {}}, rng, o.th);
            for (auto& p : r.path.points) p = rescale_point(p, mc.grid, image);
            if (o.dump_tspm) {
                std::vector<double> v;
                for (const auto& m : r.tspm) v.insert(v.end(), m.values().begin(), m.values().end());
                const ad::Shape shape{r.tspm.size(), std::size_t(mc.grid.height), std::size_t(mc.grid.width)};
                data::write_feature_tensor(o.out / (id + "_" + std::to_string(c) + ".tspm.ftns"),
                                           ad::Tensor::from(shape, std::move(v)));
            }
            out.push_back(std::move(r.path));
        }
        ++image_index;
    }
    data::write_scanpath_csv(o.out / "predictions.csv", out);
    write_manifest(o.out, "predict",
                   {{"checkpoint", o.checkpoint.string()},
                    {"data", o.data.string()},
                    {"manifest", path_or_empty(o.manifest)},
                    {"count", std::to_string(o.count)},
                    {"th", data::format_double(o.th.value_or(mc.th))},
                    {"seed", std::to_string(o.seed)},
                    {"dump_tspm", o.dump_tspm ? "true" : "false"}});
}

void cmd_complete(const CompleteOptions& o) {
    if (o.repeats < 1) throw ParameterError("complete: --repeats must be >= 1");
    if (o.prefix_len < 1) throw ParameterError("complete: --prefix-len must be >= 1");
    if (o.th && !(*o.th > 0.0 && *o.th <= 1.0)) throw ParameterError("complete: --th must be in (0, 1]");
    auto inf = load_inference(o.checkpoint, o.data, o.manifest, o.features_dir);
    const auto& mc = inf.model.config();
    if (o.prefix_len >= std::size_t(mc.length))
        throw ParameterError("complete: --prefix-len must be shorter than the scanpath length " +
                             std::to_string(mc.length));
    prepare_out(o.out);
    std::vector<Scanpath> out;
    std::map<std::string, model::FeatureStack> features;
    for (std::size_t k = 0; k < inf.data.scanpaths.size(); ++k) {
        const auto& truth = inf.data.scanpaths[k];
        if (truth.size() < o.prefix_len) {
            std::cerr << "warning: " << truth.image_id << "/" << truth.observer_id << " is shorter than the prefix\n";
            continue;
        }
        const auto& image = inf.data.image(truth.image_id).size;
        auto it = features.find(truth.image_id);
        if (it == features.end())
            it = features.emplace(truth.image_id, inf.model.build_features(truth.image_id, inf.provider)).first;
        Scanpath prefix{truth.image_id, truth.observer_id,
                        {truth.points.begin(), truth.points.begin() + std::ptrdiff_t(o.prefix_len)}};
        const auto grid_prefix = to_grid(prefix, image, mc.grid);
        for (std::size_t r = 0; r < o.repeats; ++r) {
            Rng rng = Rng::derived(o.seed, k, r);
            auto done = model::complete_scanpath(inf.model, it->second, grid_prefix, rng, o.th);
            Scanpath result{truth.image_id, truth.observer_id + "_r" + std::to_string(r), prefix.points};
            for (std::size_t t = o.prefix_len; t < done.size(); ++t)
                result.points.push_back(rescale_point(done.points[t], mc.grid, image));
            out.push_back(std::move(result));
        }
    }
    data::write_scanpath_csv(o.out / "completions.csv", out);
    write_manifest(o.out, "complete",
                   {{"checkpoint", o.checkpoint.string()},
                    {"data", o.data.string()},
                    {"manifest", path_or_empty(o.manifest)},
                    {"prefix_len", std::to_string(o.prefix_len)},
                    {"repeats", std::to_string(o.repeats)},
                    {"th", data::format_double(o.th.value_or(mc.th))},
                    {"seed", std::to_string(o.seed)}});
}

void cmd_evaluate(const EvaluateOptions& o) {
    o.metrics.validate();
    prepare_out(o.out);
    const auto truth = data::load_scanpath_dataset(o.truth, o.manifest, data::Split::Test);
    const auto predicted = data::read_scanpath_csv(o.predicted);
    auto sizes = truth.image_sizes();
    const auto report = metrics::evaluate_set(predicted, truth.scanpaths, sizes, o.metrics);
    write_text(o.out / "report.csv", metrics::report_csv(report));
    if (o.baselines) {
        const auto human = metrics::human_baseline(truth.scanpaths, sizes, o.metrics);
        for (const auto& w : human.warnings) std::cerr << "warning: " << w << "\n";
        write_text(o.out / "human_baseline.csv", metrics::report_csv(human));
        std::vector<Scanpath> random;
        std::size_t image_index = 0;
        for (const auto& [id, idx] : truth.by_image()) {
            Rng rng = Rng::derived(o.seed, image_index++, 0);
            auto r = metrics::random_baseline(id, sizes.at(id), o.length, o.count, rng);
            random.insert(random.end(), r.begin(), r.end());
        }
        write_text(o.out / "random_baseline.csv",
                   metrics::report_csv(metrics::evaluate_set(random, truth.scanpaths, sizes, o.metrics)));
    }
    write_manifest(o.out, "evaluate",
                   {{"predicted", o.predicted.string()},
                    {"truth", o.truth.string()},
                    {"manifest", path_or_empty(o.manifest)},
                    {"baselines", o.baselines ? "true" : "false"},
                    {"seed", std::to_string(o.seed)},
                    {"bin_cols", std::to_string(o.metrics.bin_cols)},
                    {"bin_rows", std::to_string(o.metrics.bin_rows)},
                    {"recurrence_radius",
                     o.metrics.recurrence_radius ? data::format_double(*o.metrics.recurrence_radius) : "auto"},
                    {"min_line", std::to_string(o.metrics.min_line)},
                    {"tde_k", std::to_string(o.metrics.tde_k)}});
}

void cmd_saliency(const SaliencyOptions& o) {
    if (o.sigma && !(*o.sigma > 0.0)) throw ParameterError("saliency: --sigma must be positive");
    prepare_out(o.out);
    const auto d = data::load_scanpath_dataset(o.data, o.manifest);
    for (const auto& [id, idx] : d.by_image()) {
        const auto& image = d.image(id).size;
        std::vector<Scanpath> paths;
        for (auto i : idx) paths.push_back(d.scanpaths[i]);
        const auto heat = metrics::aggregate_heatmap(paths, image, o.sigma.value_or(default_sigma(image)));
        data::write_pgm(o.out / (id + ".pgm"), {image, metrics::heatmap_to_gray(heat)});
    }
    write_manifest(o.out, "saliency",
                   {{"data", o.data.string()},
                    {"manifest", path_or_empty(o.manifest)},
                    {"sigma", o.sigma ? data::format_double(*o.sigma) : "width/16"}});
}

void cmd_synth(const SynthOptions& o) {
    prepare_out(o.out);
    const auto& rc = o.config;
    Rng rng(o.seed);
    const auto d = data::synth_dataset(rc.synth, rc.train.model.grid, rng);
    const auto [train_split, test_split] = data::split_by_observer(d, rc.test_observers);
    data::write_scanpath_csv(o.out / "scanpaths.csv", d.scanpaths);
    data::write_scanpath_csv(o.out / "train.csv", train_split.scanpaths);
    data::write_scanpath_csv(o.out / "test.csv", test_split.scanpaths);
    data::write_image_manifest(o.out / "images.csv", d.images, true);
    write_text(o.out / "config.txt", rc.echo());
    write_manifest(o.out, "synth", {{"seed", std::to_string(o.seed)}});
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const NumericalError*>(&e)) return kNumerical;
    if (dynamic_cast<const ParameterError*>(&e)) return kUsage;
    return kDataError;
}

}  // namespace scanpath::cli
