#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "scanpath/cli.hpp"

using namespace scanpath;
using namespace scanpath::cli;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

int run(const std::string& args) {
    const std::string cmd = std::string(SCANPATH_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kToyConfig = R"(# small end-to-end run
grid_width = 16
grid_height = 16
hidden_channels = 4
feature_channels = 2
sigma = 1.0
lr = 0.01
max_steps = 3
checkpoint_every = 2
seed = 5
synth_images = 3
synth_observers = 5
test_observers = 2
train_csv = data/train.csv
test_csv = data/test.csv
manifest = data/images.csv
)";

// One synthesized and trained workspace shared by the end-to-end tests.
class CliWorkspace : public ::testing::Test {
protected:
    static fs::path dir;

    static void SetUpTestSuite() {
        dir = fs::temp_directory_path() / "scanpath_cli_test";
        fs::remove_all(dir);
        fs::create_directories(dir);
        write_text(dir / "run.cfg", kToyConfig);
        ASSERT_EQ(run("synth --config " + (dir / "run.cfg").string() + " --seed 7 --out " + (dir / "data").string()), 0);
        ASSERT_EQ(run("train --config " + (dir / "run.cfg").string() + " --out " + (dir / "train").string()), 0);
    }
    static void TearDownTestSuite() { fs::remove_all(dir); }

    static std::string data_args() {
        return " --checkpoint " + (dir / "train" / "final.spck").string() + " --data " + (dir / "data" / "test.csv").string() +
               " --manifest " + (dir / "data" / "images.csv").string();
    }
};
fs::path CliWorkspace::dir;

}  // namespace

TEST(RunConfig, ParsesCommentsPathsAndAutoRadius) {
    const auto c = RunConfig::parse("# c\n\nlr = 0.5\nhidden_channels=7\ntrain_csv = a/b.csv\nrecurrence_radius = auto\n",
                                    "/base");
    EXPECT_EQ(c.train.lr, 0.5);
    EXPECT_EQ(c.train.model.hidden_channels, 7);
    EXPECT_EQ(c.train_csv.value(), fs::path("/base/a/b.csv"));
    EXPECT_FALSE(c.metrics.recurrence_radius.has_value());
    EXPECT_EQ(c.train.loss.sigma, c.train.model.sigma);
    EXPECT_EQ(RunConfig::parse("train_csv = /abs.csv\n", "/base").train_csv.value(), fs::path("/abs.csv"));
}

TEST(RunConfig, RejectsUnknownDuplicateAndMalformed) {
    EXPECT_THROW(RunConfig::parse("learning_rate = 1\n"), ParameterError);
    EXPECT_THROW(RunConfig::parse("lr = 1\nlr = 2\n"), ParameterError);
    EXPECT_THROW(RunConfig::parse("lr 1\n"), ParameterError);
    EXPECT_THROW(RunConfig::parse("lr = fast\n"), ParameterError);
    EXPECT_THROW(RunConfig::parse("hidden_channels = -3\n"), ParameterError);
}

TEST(RunConfig, EchoParsesBackToSameValues) {
    const auto c = RunConfig::parse("lr = 0.003\nth = 0.35\nrecurrence_radius = 4.5\nsynth_noise = 0.01\n", "/x");
    const auto again = RunConfig::parse(c.echo(), "/x");
    EXPECT_EQ(again.to_kv(), c.to_kv());
}

TEST(ExitCodes, MapErrorKinds) {
    EXPECT_EQ(exit_code_for(ParameterError("x")), kUsage);
    EXPECT_EQ(exit_code_for(DataError("x")), kDataError);
    EXPECT_EQ(exit_code_for(FormatError("x")), kDataError);
    EXPECT_EQ(exit_code_for(ConfigMismatch("x")), kDataError);
    EXPECT_EQ(exit_code_for(NumericalError("x")), kNumerical);
}

TEST(CliBinary, UsageErrors) {
    EXPECT_EQ(run(""), 1);
    EXPECT_EQ(run("frobnicate"), 1);
    EXPECT_EQ(run("train --no-such-flag"), 1);
    EXPECT_EQ(run("--help"), 0);
}

TEST_F(CliWorkspace, SynthAndTrainOutputs) {
    for (auto f : {"scanpaths.csv", "train.csv", "test.csv", "images.csv", "img0.pgm", "manifest.txt", "config.txt"})
        EXPECT_TRUE(fs::exists(dir / "data" / f)) << f;
    EXPECT_EQ(data::read_scanpath_csv(dir / "data" / "test.csv").size(), 6u);
    for (auto f : {"config.txt", "loss.csv", "checkpoint_2.spck", "final.spck", "manifest.txt"})
        EXPECT_TRUE(fs::exists(dir / "train" / f)) << f;
    const auto log = slurp(dir / "train" / "loss.csv");
    EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 4);
    EXPECT_NE(slurp(dir / "train" / "config.txt").find("hidden_channels=4\n"), std::string::npos);
    EXPECT_NE(slurp(dir / "train" / "manifest.txt").find("command=train\n"), std::string::npos);
}

TEST_F(CliWorkspace, TrainIsByteReproducibleAndResumes) {
    const auto again = dir / "train_again";
    ASSERT_EQ(run("train --config " + (dir / "run.cfg").string() + " --out " + again.string()), 0);
    EXPECT_EQ(slurp(again / "loss.csv"), slurp(dir / "train" / "loss.csv"));
    EXPECT_EQ(slurp(again / "final.spck"), slurp(dir / "train" / "final.spck"));

    const auto resumed = dir / "train_resumed";
    ASSERT_EQ(run("train --config " + (dir / "run.cfg").string() + " --checkpoint " +
                  (dir / "train" / "checkpoint_2.spck").string() + " --out " + resumed.string()),
              0);
    EXPECT_EQ(slurp(resumed / "final.spck"), slurp(dir / "train" / "final.spck"));
}

TEST_F(CliWorkspace, PredictCountsShapesAndDeterminism) {
    ASSERT_EQ(run("predict" + data_args() + " --count 10 --seed 3 --out " + (dir / "p1").string()), 0);
    ASSERT_EQ(run("predict" + data_args() + " --count 10 --seed 3 --out " + (dir / "p2").string()), 0);
    ASSERT_EQ(run("predict" + data_args() + " --count 10 --seed 4 --out " + (dir / "p3").string()), 0);
    const auto paths = data::read_scanpath_csv(dir / "p1" / "predictions.csv");
    ASSERT_EQ(paths.size(), 30u);
    const auto images = data::load_scanpath_dataset(dir / "data" / "test.csv", dir / "data" / "images.csv");
    for (const auto& s : paths) {
        EXPECT_EQ(s.size(), 8u);
        EXPECT_NO_THROW(check_in_bounds(s, images.image(s.image_id).size));
    }
    EXPECT_EQ(slurp(dir / "p1" / "predictions.csv"), slurp(dir / "p2" / "predictions.csv"));
    EXPECT_NE(slurp(dir / "p1" / "predictions.csv"), slurp(dir / "p3" / "predictions.csv"));
}

TEST_F(CliWorkspace, PredictDumpsTspmTensors) {
    ASSERT_EQ(run("predict" + data_args() + " --count 2 --dump-tspm --out " + (dir / "dump").string()), 0);
    const auto t = data::read_feature_tensor(dir / "dump" / "img0_0.tspm.ftns");
    EXPECT_EQ(t.shape(), (ad::Shape{8, 16, 16}));
    EXPECT_EQ(run("predict" + data_args() + " --count 2 --th 1.5 --out " + (dir / "badth").string()), 1);
}

TEST_F(CliWorkspace, CompleteKeepsPrefixAndRejectsFullPrefix) {
    ASSERT_EQ(run("complete" + data_args() + " --prefix-len 3 --repeats 2 --out " + (dir / "c").string()), 0);
    const auto truth = data::read_scanpath_csv(dir / "data" / "test.csv");
    const auto done = data::read_scanpath_csv(dir / "c" / "completions.csv");
    ASSERT_EQ(done.size(), 2 * truth.size());
    for (std::size_t i = 0; i < done.size(); ++i) {
        const auto& src = truth[i / 2];
        EXPECT_EQ(done[i].image_id, src.image_id);
        EXPECT_EQ(done[i].size(), 8u);
        for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(done[i].points[k], src.points[k]);
    }
    EXPECT_EQ(run("complete" + data_args() + " --prefix-len 8 --out " + (dir / "c8").string()), 1);
}

TEST_F(CliWorkspace, EvaluateWritesTenMetricRows) {
    ASSERT_EQ(run("predict" + data_args() + " --count 3 --out " + (dir / "pe").string()), 0);
    ASSERT_EQ(run("evaluate --pred " + (dir / "pe" / "predictions.csv").string() + " --truth " +
                  (dir / "data" / "test.csv").string() + " --manifest " + (dir / "data" / "images.csv").string() +
                  " --baselines --out " + (dir / "e").string()),
              0);
    for (auto f : {"report.csv", "human_baseline.csv", "random_baseline.csv"}) {
        const auto text = slurp(dir / "e" / f);
        EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 11) << f;
        EXPECT_EQ(text.rfind("metric,mean,std,direction\nLEV,", 0), 0u) << f;
    }
}

TEST_F(CliWorkspace, SaliencyWritesPgmsAtNativeSize) {
    ASSERT_EQ(run("saliency --data " + (dir / "data" / "test.csv").string() + " --manifest " +
                  (dir / "data" / "images.csv").string() + " --out " + (dir / "s").string()),
              0);
    const auto img = data::read_pgm(dir / "s" / "img1.pgm");
    EXPECT_EQ(img.size, GridSpec(16, 16));
    EXPECT_EQ(*std::max_element(img.pixels.begin(), img.pixels.end()), 255);
}

TEST_F(CliWorkspace, DataAndConfigErrorsExitWithTwo) {
    EXPECT_EQ(run("predict --checkpoint " + (dir / "missing.spck").string() + " --data " +
                  (dir / "data" / "test.csv").string() + " --out " + (dir / "x").string()),
              2);
    write_text(dir / "wide.cfg", std::string(kToyConfig) + "layers = 3\n");
    EXPECT_EQ(run("train --config " + (dir / "wide.cfg").string() + " --checkpoint " +
                  (dir / "train" / "final.spck").string() + " --out " + (dir / "y").string()),
              2);
    write_text(dir / "typo.cfg", "lr = 1\nbogus = 2\n");
    EXPECT_EQ(run("train --config " + (dir / "typo.cfg").string() + " --out " + (dir / "z").string()), 1);
}

TEST(CliBinary, MissingInputFilesAreDataErrors) {
    const auto dir = fs::temp_directory_path() / "scanpath_cli_missing";
    EXPECT_EQ(run("train --config " + (dir / "none.cfg").string() + " --out " + (dir / "o").string()), 2);
    EXPECT_EQ(run("saliency --data " + (dir / "none.csv").string() + " --out " + (dir / "o").string()), 2);
    fs::remove_all(dir);
}

namespace {

std::map<std::string, double> report_means(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::string line;
    std::getline(in, line);
    std::map<std::string, double> out;
    while (std::getline(in, line)) {
        const auto a = line.find(','), b = line.find(',', a + 1);
        out[line.substr(0, a)] = std::stod(line.substr(a + 1, b - a - 1));
    }
    return out;
}

}  // namespace

TEST_F(CliWorkspace, EvaluateIdentityAndBaselineOrdering) {
    const auto truth = (dir / "data" / "test.csv").string();
    ASSERT_EQ(run("evaluate --pred " + truth + " --truth " + truth + " --manifest " +
                  (dir / "data" / "images.csv").string() + " --baselines --count 20 --seed 2 --out " +
                  (dir / "ident").string()),
              0);
    const auto self = report_means(dir / "ident" / "report.csv");
    ASSERT_EQ(self.size(), 10u);

    write_text(dir / "one.csv", "image_id,observer_id,fix_index,x,y\nimg0,o,0,3,4\nimg0,o,1,9,2\nimg0,o,2,12,12\n");
    ASSERT_EQ(run("evaluate --pred " + (dir / "one.csv").string() + " --truth " + (dir / "one.csv").string() +
                  " --manifest " + (dir / "data" / "images.csv").string() + " --out " + (dir / "one").string()),
              0);
    const auto one = report_means(dir / "one" / "report.csv");
    EXPECT_EQ(one.at("LEV"), 0.0);
    EXPECT_NEAR(one.at("SCAM"), 1.0, 1e-12);
    EXPECT_EQ(one.at("HAU"), 0.0);
    EXPECT_EQ(one.at("fDTW"), 0.0);

    const auto human = report_means(dir / "ident" / "human_baseline.csv");
    const auto random = report_means(dir / "ident" / "random_baseline.csv");
    int better = 0;
    for (const auto& [name, lower] : std::vector<std::pair<std::string, bool>>{
             {"LEV", true}, {"SCAM", false}, {"HAU", true}, {"FRE", true}, {"fDTW", true},
             {"TDE", true}, {"REC", false}, {"DET", false}, {"LAM", false}, {"CORM", false}})
        better += lower ? human.at(name) < random.at(name) : human.at(name) > random.at(name);
    EXPECT_GE(better, 8);
}
