#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "mgcn/data.hpp"
#include "scratch.hpp"

namespace fs = std::filesystem;
using mgcn::cli::run;

namespace {

const fs::path kGolden = MGCN_GOLDEN_DIR;

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> key_values(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// One small trained run shared by the tests that only read it.
const fs::path& trained_run() {
    static const fs::path dir = [] {
        const fs::path d =
            ref::scratch_dir(std::string("cli_trained_") + ::testing::UnitTest::GetInstance()->current_test_info()->name()) / "run";
        const Outcome o = invoke({"train", "--model", "cnn", "--synth", "12", "--img-size", "16", "--epochs", "3",
                                  "--seed", "7", "--out", d.string()});
        EXPECT_EQ(o.code, 0) << o.err;
        return d;
    }();
    return dir;
}

}  // namespace

TEST(CliTrain, WritesSelfDescribingRunDirectory) {
    const fs::path& dir = trained_run();
    for (const char* f : {"checkpoint.mgcn", "history.txt", "manifest.txt"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
    const auto manifest = key_values(slurp(dir / "manifest.txt"));
    EXPECT_EQ(manifest.at("model"), "cnn");
    EXPECT_EQ(manifest.at("epochs"), "3");
    EXPECT_EQ(manifest.at("seed"), "7");
    EXPECT_EQ(manifest.at("tool_version"), mgcn::cli::kToolVersion);
    const auto history = key_values(slurp(dir / "history.txt"));
    EXPECT_EQ(history.at("epochs"), "3");
    EXPECT_TRUE(history.count("epoch.3.testing.bce_loss"));
    EXPECT_TRUE(history.count("epoch.3.testing.misclassification_rate"));
}

TEST(CliTrain, DefaultEpochsAndBatch) {
    const fs::path dir = ref::scratch_dir("cli_defaults");
    std::ofstream(dir / "cfg.txt") << "# just enough to stay quick\nimg_size=16\nsynth=4\nepochs=1\n";
    const Outcome o = invoke({"train", "--model", "cnn", "--config", (dir / "cfg.txt").string(), "--out", (dir / "r").string()});
    ASSERT_EQ(o.code, 0) << o.err;
    const auto manifest = key_values(slurp(dir / "r" / "manifest.txt"));
    EXPECT_EQ(manifest.at("batch_size"), "32");
    EXPECT_EQ(manifest.at("epochs"), "1");

    // Without any file the epoch count falls back to 20; parse it from the help text.
    const Outcome help = invoke({"train", "--help"});
    EXPECT_NE(help.out.find("--epochs"), std::string::npos);
    EXPECT_NE(help.out.find("[20]"), std::string::npos);
    EXPECT_NE(help.out.find("[32]"), std::string::npos);
}

TEST(CliTrain, FlagsBeatConfigFile) {
    const fs::path dir = ref::scratch_dir("cli_precedence");
    std::ofstream(dir / "cfg.txt") << "img_size=16\nsynth=4\nepochs=1\nseed=5  # comment\nbatch_size=4\n";
    const Outcome o = invoke({"train", "--model", "cnn", "--config", (dir / "cfg.txt").string(), "--seed", "9",
                              "--out", (dir / "r").string()});
    ASSERT_EQ(o.code, 0) << o.err;
    const auto manifest = key_values(slurp(dir / "r" / "manifest.txt"));
    EXPECT_EQ(manifest.at("seed"), "9");
    EXPECT_EQ(manifest.at("batch_size"), "4");
}

TEST(CliTrain, UnknownModelListsNames) {
    const Outcome o = invoke({"train", "--model", "resnet", "--synth", "2"});
    EXPECT_EQ(o.code, 1);
    for (const char* name : {"cnn", "alexnet", "inception-v4", "densenet-mini", "vgg-mini"})
        EXPECT_NE((o.out + o.err).find(name), std::string::npos) << name;
}

TEST(CliTrain, ExitCodes) {
    const fs::path dir = ref::scratch_dir("cli_train_codes");
    EXPECT_EQ(invoke({"train", "--model", "cnn"}).code, 1);
    EXPECT_EQ(invoke({"train", "--model", "cnn", "--synth", "4", "--data", dir.string()}).code, 1);
    EXPECT_EQ(invoke({"train", "--model", "cnn", "--synth", "4", "--epochs", "0"}).code, 1);
    EXPECT_EQ(invoke({"train", "--model", "cnn", "--img-size", "16", "--data", (dir / "absent").string(),
                      "--out", (dir / "r").string()}).code, 2);
    const Outcome diverged = invoke({"train", "--model", "cnn", "--synth", "8", "--img-size", "16", "--epochs", "2",
                                     "--optimizer", "sgd", "--lr", "1e30", "--out", (dir / "d").string()});
    EXPECT_EQ(diverged.code, 3);
    EXPECT_NE(diverged.err.find("epoch"), std::string::npos);
    EXPECT_EQ(invoke({"no-such-command"}).code, 1);
    EXPECT_EQ(invoke({}).code, 1);
}

TEST(CliEvaluate, MatchesFinalHistoryEpoch) {
    const fs::path& dir = trained_run();
    const Outcome o = invoke({"evaluate", "--run", dir.string()});
    ASSERT_EQ(o.code, 0) << o.err;
    const auto history = key_values(slurp(dir / "history.txt"));
    const auto report = key_values(slurp(dir / "report_validation.txt"));
    for (const char* key : {"accuracy", "precision", "recall", "f1", "misclassification_rate", "bce_loss"}) {
        const std::string got = report.at(std::string("cnn.") + key + ".testing");
        EXPECT_EQ(got, fixed4(std::stod(history.at(std::string("epoch.3.testing.") + key)))) << key;
        EXPECT_NE(o.out.find(got), std::string::npos) << key;
    }
    EXPECT_NE(o.out.find("Accuracy"), std::string::npos);
    EXPECT_NE(o.out.find("Loss (BCE)"), std::string::npos);
    EXPECT_NE(o.out.find("Misclassification"), std::string::npos);

    const Outcome train = invoke({"evaluate", "--run", dir.string(), "--subset", "train"});
    ASSERT_EQ(train.code, 0) << train.err;
    const auto train_report = key_values(slurp(dir / "report_train.txt"));
    EXPECT_EQ(train_report.at("cnn.accuracy.training"), fixed4(std::stod(history.at("epoch.3.training.accuracy"))));
}

TEST(CliEvaluate, ExitCodes) {
    const fs::path dir = ref::scratch_dir("cli_eval_codes");
    EXPECT_EQ(invoke({"evaluate"}).code, 1);
    EXPECT_EQ(invoke({"evaluate", "--run", (dir / "nothing").string()}).code, 2);
    fs::copy(trained_run(), dir / "copy");
    fs::remove(dir / "copy" / "checkpoint.mgcn");
    EXPECT_EQ(invoke({"evaluate", "--run", (dir / "copy").string()}).code, 2);
    EXPECT_EQ(invoke({"evaluate", "--run", trained_run().string(), "--subset", "bogus"}).code, 1);
}

TEST(CliCompare, GoldenTable) {
    const Outcome o = invoke({"compare", (kGolden / "runs" / "cnn").string(), (kGolden / "runs" / "densenet-mini").string(),
                              (kGolden / "runs" / "vgg-mini").string()});
    ASSERT_EQ(o.code, 0) << o.err;
    EXPECT_EQ(o.out, slurp(kGolden / "compare.txt"));
}

TEST(CliCompare, StructureAndAgreement) {
    const fs::path dir = ref::scratch_dir("cli_compare");
    const std::vector<std::string> models{"cnn", "densenet-mini", "vgg-mini"};
    std::vector<std::string> args{"compare"};
    for (const auto& m : models) args.push_back((kGolden / "runs" / m).string());
    args.insert(args.end(), {"--report", (dir / "cmp.txt").string()});
    const Outcome o = invoke(args);
    ASSERT_EQ(o.code, 0) << o.err;

    std::istringstream in(o.out);
    std::string header;
    std::getline(in, header);
    const auto pos = [&](const char* s) { return header.find(s); };
    EXPECT_LT(pos("Models"), pos("Metrics"));
    EXPECT_LT(pos("Metrics"), pos("Training Results"));
    EXPECT_LT(pos("Training Results"), pos("Testing Results"));
    EXPECT_NE(pos("Testing Results"), std::string::npos);

    std::size_t sections = 0, rows = 0;
    for (std::string line; std::getline(in, line) && !line.empty();) {
        ++rows;
        if (line[0] != ' ') ++sections;
    }
    EXPECT_EQ(sections, 3u);
    EXPECT_EQ(rows, 12u);

    const auto kv = key_values(slurp(dir / "cmp.txt"));
    EXPECT_EQ(kv.size(), 24u);
    for (const auto& m : models) {
        const auto history = key_values(slurp(kGolden / "runs" / m / "history.txt"));
        for (const char* key : {"accuracy", "precision", "recall", "bce_loss"})
            for (const char* phase : {"training", "testing"}) {
                const std::string value = kv.at(m + "." + key + "." + phase);
                EXPECT_EQ(value, fixed4(std::stod(history.at(std::string("epoch.1.") + phase + "." + key))));
                EXPECT_NE(o.out.find(value), std::string::npos);
            }
    }
}

TEST(CliCompare, ExitCodes) {
    const fs::path dir = ref::scratch_dir("cli_compare_codes");
    EXPECT_EQ(invoke({"compare"}).code, 1);
    EXPECT_EQ(invoke({"compare", dir.string()}).code, 2);
}

TEST(CliGradCheck, AllOpsPassAndRepeat) {
    const Outcome a = invoke({"grad-check", "--seed", "4", "--trials", "5"});
    ASSERT_EQ(a.code, 0) << a.err;
    for (const char* op : {"conv2d", "max_pool", "avg_pool", "dense", "batch_norm", "concat", "sigmoid", "bce_sigmoid"})
        EXPECT_NE(a.out.find(op), std::string::npos) << op;
    EXPECT_EQ(a.out.find("FAIL"), std::string::npos);
    EXPECT_EQ(invoke({"grad-check", "--seed", "4", "--trials", "5"}).out, a.out);
}

TEST(CliGradCheck, InjectedFaultNamesOp) {
    const Outcome o = invoke({"grad-check", "--trials", "3", "--inject-sign-flip", "conv2d"});
    EXPECT_EQ(o.code, 3);
    EXPECT_NE(o.err.find("conv2d"), std::string::npos);
}

TEST(CliSynth, WritesLoadableDeterministicTree) {
    const fs::path dir = ref::scratch_dir("cli_synth");
    for (const char* out : {"a", "b"}) {
        const Outcome o = invoke({"synth", "--per-class", "50", "--img-size", "16", "--seed", "1", "--out", (dir / out).string()});
        ASSERT_EQ(o.code, 0) << o.err;
    }
    std::size_t files = 0;
    for (const char* cls : {"COVID", "NORMAL"})
        for (const auto& e : fs::directory_iterator(dir / "a" / cls)) {
            ++files;
            EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / cls / e.path().filename())) << e.path();
        }
    EXPECT_EQ(files, 100u);
    const mgcn::Dataset ds = mgcn::load_directory(dir / "a", {16, 1});
    EXPECT_EQ(ds.size(), 100u);
    EXPECT_EQ(ds.count(1), 50u);
}

TEST(CliSynth, ExitCodes) {
    const fs::path dir = ref::scratch_dir("cli_synth_codes");
    std::ofstream(dir / "file") << "x";
    EXPECT_EQ(invoke({"synth", "--out", (dir / "x").string()}).code, 1);
    EXPECT_EQ(invoke({"synth", "--per-class", "2", "--out", (dir / "file" / "sub").string()}).code, 2);
}

TEST(Cli, VersionAndHelp) {
    EXPECT_EQ(invoke({"--help"}).code, 0);
    const Outcome v = invoke({"--version"});
    EXPECT_EQ(v.code, 0);
    EXPECT_NE(v.out.find(mgcn::cli::kToolVersion), std::string::npos);
}
