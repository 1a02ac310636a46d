#include <iostream>

#include <CLI11.hpp>

#include "scanpath/cli.hpp"

using namespace scanpath;

int main(int argc, char** argv) {
    CLI::App app{"Probabilistic scanpath prediction toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    cli::TrainOptions train_o;
    cli::PredictOptions predict_o;
    cli::CompleteOptions complete_o;
    cli::EvaluateOptions eval_o;
    cli::SaliencyOptions sal_o;
    cli::SynthOptions synth_o;
    std::string resume;

    auto* train = app.add_subcommand("train", "Train a model from a run configuration");
    train->add_option("--config", config_path, "key=value run configuration")->required();
    train->add_option("--seed", seed, "Overrides the configured seed");
    train->add_option("--out", train_o.out, "Output directory")->required();
    train->add_option("--checkpoint", resume, "Resume from this checkpoint");

    auto* predict = app.add_subcommand("predict", "Generate scanpaths for every image in a dataset");
    predict->add_option("--checkpoint", predict_o.checkpoint)->required();
    predict->add_option("--data", predict_o.data, "Scanpath CSV naming the images")->required();
    predict->add_option("--manifest", predict_o.manifest, "Image manifest CSV");
    predict->add_option("--features-dir", predict_o.features_dir);
    predict->add_option("--count", predict_o.count, "Scanpaths per image");
    predict->add_option("--th", predict_o.th, "Sampling threshold");
    predict->add_option("--seed", predict_o.seed);
    predict->add_flag("--dump-tspm", predict_o.dump_tspm, "Write per-rollout tSPM tensors");
    predict->add_option("--out", predict_o.out)->required();

    auto* complete = app.add_subcommand("complete", "Complete every scanpath from its first fixations");
    complete->add_option("--checkpoint", complete_o.checkpoint)->required();
    complete->add_option("--data", complete_o.data)->required();
    complete->add_option("--manifest", complete_o.manifest);
    complete->add_option("--features-dir", complete_o.features_dir);
    complete->add_option("--prefix-len", complete_o.prefix_len);
    complete->add_option("--repeats", complete_o.repeats);
    complete->add_option("--th", complete_o.th);
    complete->add_option("--seed", complete_o.seed);
    complete->add_option("--out", complete_o.out)->required();

    auto* evaluate = app.add_subcommand("evaluate", "Score predicted scanpaths against ground truth");
    evaluate->add_option("--pred", eval_o.predicted)->required();
    evaluate->add_option("--truth", eval_o.truth)->required();
    evaluate->add_option("--manifest", eval_o.manifest);
    evaluate->add_option("--config", config_path, "Metric parameters");
    evaluate->add_flag("--baselines", eval_o.baselines, "Also write human and random baseline reports");
    evaluate->add_option("--count", eval_o.count, "Random-baseline scanpaths per image");
    evaluate->add_option("--seed", eval_o.seed);
    evaluate->add_option("--out", eval_o.out)->required();

    auto* saliency = app.add_subcommand("saliency", "Aggregate scanpaths into per-image heatmaps");
    saliency->add_option("--data", sal_o.data)->required();
    saliency->add_option("--manifest", sal_o.manifest);
    saliency->add_option("--sigma", sal_o.sigma, "Gaussian std in image pixels");
    saliency->add_option("--out", sal_o.out)->required();

    auto* synth = app.add_subcommand("synth", "Write the synthetic benchmark");
    synth->add_option("--config", config_path);
    synth->add_option("--seed", synth_o.seed);
    synth->add_option("--out", synth_o.out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cli::kOk : cli::kUsage;
    }

    try {
        if (train->parsed()) {
            train_o.config = cli::RunConfig::load(config_path);
            if (seed) train_o.config.train.seed = *seed;
            if (!resume.empty()) train_o.resume = resume;
            cli::cmd_train(train_o);
        } else if (predict->parsed()) {
            cli::cmd_predict(predict_o);
        } else if (complete->parsed()) {
            cli::cmd_complete(complete_o);
        } else if (evaluate->parsed()) {
            if (!config_path.empty()) {
                const auto rc = cli::RunConfig::load(config_path);
                eval_o.metrics = rc.metrics;
                eval_o.length = std::size_t(rc.train.model.length);
            }
            cli::cmd_evaluate(eval_o);
        } else if (saliency->parsed()) {
            cli::cmd_saliency(sal_o);
        } else if (synth->parsed()) {
            if (!config_path.empty()) synth_o.config = cli::RunConfig::load(config_path);
            cli::cmd_synth(synth_o);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::exit_code_for(e);
    }
    return cli::kOk;
}
