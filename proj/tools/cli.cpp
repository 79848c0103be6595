#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "mgcn/checkpoint.hpp"
#include "mgcn/data.hpp"
#include "mgcn/errors.hpp"
#include "mgcn/gradcheck.hpp"
#include "mgcn/model_zoo.hpp"
#include "mgcn/trainer.hpp"

namespace mgcn::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kManifestFile = "manifest.txt";
constexpr const char* kHistoryFile = "history.txt";
constexpr const char* kCheckpointFile = "checkpoint.mgcn";

using KeyValues = std::map<std::string, std::string>;

std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// Shortest decimal that parses back to the same double.
std::string exact(double v) {
    char buf[64];
    for (int digits = 1; digits <= 17; ++digits) {
        std::snprintf(buf, sizeof buf, "%.*g", digits, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string join(const std::vector<std::size_t>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// key=value lines; blank lines and '#' comments are skipped.
KeyValues parse_key_values(std::istream& in, const std::string& origin) {
    KeyValues kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError(origin + ":" + std::to_string(lineno) + ": expected key=value");
        }
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

KeyValues read_key_values(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    return parse_key_values(in, path.string());
}

const std::string& lookup(const KeyValues& kv, const std::string& key, const std::string& origin) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(origin + " has no '" + key + "' entry");
    return it->second;
}

double lookup_double(const KeyValues& kv, const std::string& key, const std::string& origin) {
    const std::string& v = lookup(kv, key, origin);
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw FormatError(origin + ": '" + key + "' is not a number: " + v);
}

std::uint64_t lookup_uint(const KeyValues& kv, const std::string& key, const std::string& origin) {
    const std::string& v = lookup(kv, key, origin);
    try {
        std::size_t used = 0;
        const auto u = std::stoull(v, &used);
        if (used == v.size() && v.find('-') == std::string::npos) return u;
    } catch (const std::exception&) {
    }
    throw FormatError(origin + ": '" + key + "' is not a non-negative integer: " + v);
}

std::vector<std::size_t> lookup_list(const KeyValues& kv, const std::string& key, const std::string& origin) {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(lookup(kv, key, origin))) {
        KeyValues one{{key, item}};
        out.push_back(lookup_uint(one, key, origin));
    }
    return out;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("failed writing " + path.string());
}

void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir.string());
}

// Fills options that were not given on the command line from a key=value file.
void apply_config(CLI::App& cmd, const std::string& path) {
    const KeyValues kv = read_key_values(path);
    for (const auto& [raw_key, value] : kv) {
        // Accept manifest spelling (img_size) as well as flag spelling (img-size).
        std::string key = raw_key;
        std::replace(key.begin(), key.end(), '_', '-');
        if (key.rfind("--", 0) != 0) key = "--" + key;
        CLI::Option* opt = cmd.get_option_no_throw(key);
        if (opt == nullptr || key == "--config") throw ConfigError(path + ": unknown key '" + raw_key + "'");
        if (opt->count() > 0) continue;
        std::vector<std::string> values = split_list(value);
        if (opt->get_expected_max() <= 1) values.assign(1, value);
        opt->add_result(values);
        opt->run_callback();
    }
}

struct RunOptions {
    std::string model = "cnn";
    std::string data;
    std::size_t synth = 0;
    std::size_t img_size = 128;
    std::size_t channels = 0;  // 0 = the model's own input channels
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::string optimizer = "adam";
    std::uint64_t seed = 0;
    double split = 0.8;
    double threshold = kDefaultThreshold;
    std::string out = "run";
    std::size_t dense_blocks = 1;
    std::size_t dense_layers = 4;
    std::size_t growth = 8;
    std::vector<std::size_t> vgg_stages{16, 32};
    std::vector<std::size_t> vgg_head{64};
};

std::size_t model_channels(const std::string& model) { return model == "cnn" ? 1 : 3; }

Network build_model(const RunOptions& o) {
    if (o.model == "cnn") return build_custom_cnn(o.img_size);
    if (o.model == "alexnet") return build_alexnet(o.img_size);
    if (o.model == "inception-v4") return build_inception_v4(o.img_size);
    if (o.model == "densenet-mini") return build_densenet_mini(o.img_size, o.dense_blocks, o.dense_layers, o.growth);
    if (o.model == "vgg-mini") return build_vgg_mini(o.img_size, o.vgg_stages, o.vgg_head);
    std::string names;
    for (auto n : kModelNames) names += (names.empty() ? "" : ", ") + std::string(n);
    throw ConfigError("unknown model '" + o.model + "' (valid: " + names + ")");
}

Dataset make_dataset(const RunOptions& o, std::size_t channels) {
    if (!o.data.empty()) return load_directory(o.data, {o.img_size, channels});
    if (o.synth == 0) throw ConfigError("one of --data DIR or --synth N is required");
    return with_channels(synth_dataset(o.synth, o.img_size, o.seed), channels);
}

TrainConfig train_config(const RunOptions& o) {
    TrainConfig cfg;
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch_size;
    cfg.optimizer = parse_optimizer(o.optimizer);
    cfg.learning_rate = o.learning_rate;
    cfg.seed = o.seed;
    cfg.threshold = o.threshold;
    cfg.validate();
    return cfg;
}

std::string manifest_text(const RunOptions& o) {
    std::ostringstream s;
    s << "tool_version=" << kToolVersion << '\n'
      << "model=" << o.model << '\n'
      << "data=" << o.data << '\n'
      << "synth=" << o.synth << '\n'
      << "img_size=" << o.img_size << '\n'
      << "channels=" << o.channels << '\n'
      << "epochs=" << o.epochs << '\n'
      << "batch_size=" << o.batch_size << '\n'
      << "optimizer=" << o.optimizer << '\n'
      << "lr=" << exact(o.learning_rate) << '\n'
      << "seed=" << o.seed << '\n'
      << "split=" << exact(o.split) << '\n'
      << "threshold=" << exact(o.threshold) << '\n'
      << "dense_blocks=" << o.dense_blocks << '\n'
      << "dense_layers=" << o.dense_layers << '\n'
      << "growth=" << o.growth << '\n'
      << "vgg_stages=" << join(o.vgg_stages) << '\n'
      << "vgg_head=" << join(o.vgg_head) << '\n'
      << "checkpoint=" << kCheckpointFile << '\n'
      << "history=" << kHistoryFile << '\n';
    return s.str();
}

RunOptions read_manifest(const fs::path& run_dir) {
    const fs::path path = run_dir / kManifestFile;
    if (!fs::is_regular_file(path)) throw DataError("run directory " + run_dir.string() + " has no " + kManifestFile);
    const KeyValues kv = read_key_values(path);
    const std::string origin = path.string();
    RunOptions o;
    o.model = lookup(kv, "model", origin);
    o.data = lookup(kv, "data", origin);
    o.synth = lookup_uint(kv, "synth", origin);
    o.img_size = lookup_uint(kv, "img_size", origin);
    o.channels = lookup_uint(kv, "channels", origin);
    o.epochs = lookup_uint(kv, "epochs", origin);
    o.batch_size = lookup_uint(kv, "batch_size", origin);
    o.optimizer = lookup(kv, "optimizer", origin);
    o.learning_rate = lookup_double(kv, "lr", origin);
    o.seed = lookup_uint(kv, "seed", origin);
    o.split = lookup_double(kv, "split", origin);
    o.threshold = lookup_double(kv, "threshold", origin);
    o.dense_blocks = lookup_uint(kv, "dense_blocks", origin);
    o.dense_layers = lookup_uint(kv, "dense_layers", origin);
    o.growth = lookup_uint(kv, "growth", origin);
    o.vgg_stages = lookup_list(kv, "vgg_stages", origin);
    o.vgg_head = lookup_list(kv, "vgg_head", origin);
    o.out = run_dir.string();
    return o;
}

double metric_of(const PhaseResult& r, std::string_view key) {
    if (key == "accuracy") return r.metrics.accuracy;
    if (key == "precision") return r.metrics.precision;
    if (key == "recall") return r.metrics.recall;
    if (key == "f1") return r.metrics.f1;
    if (key == "misclassification_rate") return r.metrics.misclassification_rate;
    return r.bce;
}

constexpr std::array<std::pair<const char*, const char*>, 6> kReportRows = {{
    {"Accuracy", "accuracy"},
    {"Precision", "precision"},
    {"Recall", "recall"},
    {"F1", "f1"},
    {"Misclassification", "misclassification_rate"},
    {"Loss (BCE)", "bce_loss"},
}};

constexpr std::array<std::pair<const char*, const char*>, 4> kCompareRows = {{
    {"Accuracy", "accuracy"},
    {"Precision", "precision"},
    {"Recall", "recall"},
    {"Loss (BCE)", "bce_loss"},
}};

std::string row(const std::string& a, const std::string& b, const std::string& c, const std::string& d = "") {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-16s%-20s%-20s%s", a.c_str(), b.c_str(), c.c_str(), d.c_str());
    std::string s = buf;
    s.erase(s.find_last_not_of(' ') + 1);
    return s + "\n";
}

std::string pair_row(const std::string& a, const std::string& b) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-20s%s\n", a.c_str(), b.c_str());
    return buf;
}

std::string history_text(const History& h) {
    std::ostringstream s;
    s << "epochs=" << h.epochs.size() << '\n';
    for (std::size_t e = 0; e < h.epochs.size(); ++e) {
        for (const auto& [phase, result] : {std::pair{"training", &h.epochs[e].train},
                                             std::pair{"testing", &h.epochs[e].validation}}) {
            for (const auto& [label, key] : kReportRows) {
                s << "epoch." << e + 1 << '.' << phase << '.' << key << '=' << exact(metric_of(*result, key)) << '\n';
            }
        }
    }
    return s.str();
}

void add_model_options(CLI::App* cmd, RunOptions& o) {
    std::vector<std::string> names(kModelNames.begin(), kModelNames.end());
    cmd->add_option("--model", o.model, "Architecture")->check(CLI::IsMember(names))->capture_default_str();
    cmd->add_option("--img-size", o.img_size, "Square input size in pixels")->capture_default_str();
    cmd->add_option("--channels", o.channels, "Input channels (default: the model's)")->check(CLI::IsMember({1, 3}));
    cmd->add_option("--dense-blocks", o.dense_blocks, "densenet-mini dense blocks")->capture_default_str();
    cmd->add_option("--dense-layers", o.dense_layers, "densenet-mini layers per block")->capture_default_str();
    cmd->add_option("--growth", o.growth, "densenet-mini growth rate")->capture_default_str();
    cmd->add_option("--vgg-stages", o.vgg_stages, "vgg-mini filters per stage")->delimiter(',')->capture_default_str();
    cmd->add_option("--vgg-head", o.vgg_head, "vgg-mini dense head units")->delimiter(',')->capture_default_str();
}

void add_data_options(CLI::App* cmd, RunOptions& o) {
    auto* data = cmd->add_option("--data", o.data, "Directory with COVID/ and NORMAL/ PNG folders");
    auto* synth = cmd->add_option("--synth", o.synth, "Generate N synthetic images per class");
    data->excludes(synth);
}

void print_training_table(std::ostream& out, const std::string& model, const EpochRecord& last) {
    out << row("Model", "Metrics", "Training Result", "Testing Result");
    bool first = true;
    for (const auto& [label, key] : kReportRows) {
        out << row(first ? model : "", label, fixed4(metric_of(last.train, key)), fixed4(metric_of(last.validation, key)));
        first = false;
    }
}

int cmd_train(RunOptions o, std::ostream& out) {
    const std::size_t channels = model_channels(o.model);
    if (o.channels != 0 && o.channels != channels) {
        throw ConfigError("model " + o.model + " takes " + std::to_string(channels) + "-channel input, got --channels " +
                          std::to_string(o.channels));
    }
    o.channels = channels;
    const TrainConfig cfg = train_config(o);
    Network net = build_model(o);
    if (!o.data.empty()) o.data = fs::absolute(o.data).lexically_normal().string();
    const Dataset ds = make_dataset(o, channels);
    const auto [train_ds, val_ds] = split(ds, o.split, o.seed);
    const fs::path dir = o.out;
    ensure_directory(dir);

    out << "training " << o.model << " on " << train_ds.size() << " images, validating on " << val_ds.size()
        << '\n';
    const History history = train(net, train_ds, val_ds, cfg, [&](std::size_t epoch, const EpochRecord& r) {
        out << "epoch " << epoch << '/' << cfg.epochs << "  train_bce=" << fixed4(r.train.bce)
            << "  train_acc=" << fixed4(r.train.metrics.accuracy) << "  val_bce=" << fixed4(r.validation.bce)
            << "  val_acc=" << fixed4(r.validation.metrics.accuracy) << '\n';
    });
    save_checkpoint(net, dir / kCheckpointFile);
    write_file(dir / kHistoryFile, history_text(history));
    write_file(dir / kManifestFile, manifest_text(o));
    print_training_table(out, o.model, history.epochs.back());
    out << "wrote " << (dir / kCheckpointFile).string() << ", " << kHistoryFile << ", " << kManifestFile << '\n';
    return kOk;
}

int cmd_evaluate(const std::string& run_dir, const RunOptions& overrides, const std::string& subset,
                 std::optional<double> threshold, const std::string& report_path, std::ostream& out) {
    RunOptions o = read_manifest(run_dir);
    const fs::path ckpt = fs::path(run_dir) / kCheckpointFile;
    if (!fs::is_regular_file(ckpt)) throw DataError("missing checkpoint " + ckpt.string());
    Network net = load_checkpoint(ckpt);
    if (!overrides.data.empty() || overrides.synth != 0) {
        o.data = overrides.data;
        o.synth = overrides.synth;
    }
    if (threshold) o.threshold = *threshold;

    const Dataset ds = make_dataset(o, net.input_shape.at(2));
    Dataset chosen;
    std::string phase = "all";
    if (subset == "all") {
        chosen = ds;
    } else {
        auto parts = split(ds, o.split, o.seed);
        chosen = subset == "train" ? std::move(parts.first) : std::move(parts.second);
        phase = subset == "train" ? "training" : "testing";
    }
    const Evaluation ev = evaluate(net, chosen, o.threshold, o.batch_size);
    const PhaseResult result{ev.metrics, ev.bce};

    out << "model " << o.model << ", subset " << subset << ", " << chosen.size() << " images\n";
    out << pair_row("Metrics", "Result");
    std::ostringstream kv;
    for (const auto& [label, key] : kReportRows) {
        const std::string v = fixed4(metric_of(result, key));
        out << pair_row(label, v);
        kv << o.model << '.' << key << '.' << phase << '=' << v << '\n';
    }
    out << "confusion tp=" << ev.confusion.tp << " fp=" << ev.confusion.fp << " tn=" << ev.confusion.tn
        << " fn=" << ev.confusion.fn << '\n';
    const fs::path report = report_path.empty() ? fs::path(run_dir) / ("report_" + subset + ".txt") : fs::path(report_path);
    write_file(report, kv.str());
    out << "wrote " << report.string() << '\n';
    return kOk;
}

int cmd_compare(const std::vector<std::string>& runs, const std::string& report_path, std::ostream& out) {
    if (runs.empty()) throw ConfigError("compare needs at least one run directory");
    std::ostringstream table, kv;
    table << row("Models", "Metrics", "Training Results", "Testing Results");
    std::map<std::string, int> seen;
    for (const auto& dir : runs) {
        const RunOptions o = read_manifest(dir);
        const fs::path hist_path = fs::path(dir) / kHistoryFile;
        const KeyValues hist = read_key_values(hist_path);
        const std::uint64_t last = lookup_uint(hist, "epochs", hist_path.string());
        if (last == 0) throw FormatError(hist_path.string() + " records no epochs");
        std::string label = o.model;
        if (const int n = ++seen[o.model]; n > 1) label += "#" + std::to_string(n);
        bool first = true;
        for (const auto& [name, key] : kCompareRows) {
            std::array<std::string, 2> cells;
            for (int p = 0; p < 2; ++p) {
                const std::string phase = p == 0 ? "training" : "testing";
                cells[p] = fixed4(lookup_double(
                    hist, "epoch." + std::to_string(last) + "." + phase + "." + key, hist_path.string()));
                kv << label << '.' << key << '.' << phase << '=' << cells[p] << '\n';
            }
            table << row(first ? label : "", name, cells[0], cells[1]);
            first = false;
        }
    }
    out << table.str() << '\n' << kv.str();
    if (!report_path.empty()) write_file(report_path, kv.str());
    return kOk;
}

int cmd_grad_check(const GradCheckOptions& opts, std::ostream& out, std::ostream& err) {
    const GradCheckReport report = run_gradient_checks(opts);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-18s%-8s%-16s%s\n", "op", "trials", "max_rel_error", "status");
    out << buf;
    std::vector<std::string> failed;
    for (const auto& c : report.ops) {
        std::snprintf(buf, sizeof buf, "%-18s%-8zu%-16.4e%s\n", c.op.c_str(), c.trials, c.max_rel_error,
                      c.passed ? "ok" : "FAIL");
        out << buf;
        if (!c.passed) failed.push_back(c.op);
    }
    if (!failed.empty()) {
        std::string names;
        for (const auto& f : failed) names += (names.empty() ? "" : ", ") + f;
        err << "gradient check failed: " << names << '\n';
        return kNumericError;
    }
    out << "all " << report.ops.size() << " ops within tolerance " << opts.tolerance << '\n';
    return kOk;
}

int cmd_synth(std::size_t per_class, std::size_t img_size, std::uint64_t seed, const std::string& dir,
              std::ostream& out) {
    const Dataset ds = synth_dataset(per_class, img_size, seed);
    ensure_directory(dir);
    export_directory(ds, dir);
    out << "wrote " << ds.size() << " images to " << dir << '\n';
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Binary chest-scan classifiers: train, evaluate, compare, grad-check, synth", "mgcn"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    RunOptions train_opts;
    std::string train_config;
    auto* train_cmd = app.add_subcommand("train", "Train a model and write a run directory");
    add_model_options(train_cmd, train_opts);
    add_data_options(train_cmd, train_opts);
    train_cmd->add_option("--epochs", train_opts.epochs)->capture_default_str();
    train_cmd->add_option("--batch-size", train_opts.batch_size)->capture_default_str();
    train_cmd->add_option("--lr", train_opts.learning_rate, "Learning rate")->capture_default_str();
    train_cmd->add_option("--optimizer", train_opts.optimizer)->check(CLI::IsMember({"sgd", "adam"}))
        ->capture_default_str();
    train_cmd->add_option("--seed", train_opts.seed)->capture_default_str();
    train_cmd->add_option("--split", train_opts.split, "Training fraction of each class")->capture_default_str();
    train_cmd->add_option("--threshold", train_opts.threshold)->capture_default_str();
    train_cmd->add_option("--out", train_opts.out, "Run directory")->capture_default_str();
    train_cmd->add_option("--config", train_config, "key=value defaults file (flags take precedence)");

    RunOptions eval_overrides;
    std::string eval_run, eval_subset = "validation", eval_report, eval_config;
    std::optional<double> eval_threshold;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score a saved run");
    eval_cmd->add_option("--run", eval_run, "Run directory written by train")->required();
    add_data_options(eval_cmd, eval_overrides);
    eval_cmd->add_option("--subset", eval_subset)->check(CLI::IsMember({"train", "validation", "all"}))
        ->capture_default_str();
    eval_cmd->add_option("--threshold", eval_threshold);
    eval_cmd->add_option("--report", eval_report, "key=value output (default RUN/report_<subset>.txt)");
    eval_cmd->add_option("--config", eval_config);

    std::vector<std::string> compare_runs;
    std::string compare_report;
    auto* compare_cmd = app.add_subcommand("compare", "Tabulate the final epoch of several runs");
    compare_cmd->add_option("runs", compare_runs, "Run directories")->required();
    compare_cmd->add_option("--report", compare_report, "Also write the key=value lines here");

    GradCheckOptions gc;
    std::string gc_config;
    auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference check of every layer kind");
    gc_cmd->add_option("--seed", gc.seed)->capture_default_str();
    gc_cmd->add_option("--trials", gc.trials)->capture_default_str();
    gc_cmd->add_option("--op", gc.only, "Restrict to these ops");
    gc_cmd->add_option("--inject-sign-flip", gc.inject_sign_flip)->group("");
    gc_cmd->add_option("--config", gc_config);

    std::size_t synth_per_class = 0, synth_img = 128;
    std::uint64_t synth_seed = 0;
    std::string synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic COVID/NORMAL PNG tree");
    synth_cmd->add_option("--per-class", synth_per_class)->required();
    synth_cmd->add_option("--img-size", synth_img)->capture_default_str();
    synth_cmd->add_option("--seed", synth_seed)->capture_default_str();
    synth_cmd->add_option("--out", synth_out)->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
        if (!train_config.empty()) apply_config(*train_cmd, train_config);
        if (!eval_config.empty()) apply_config(*eval_cmd, eval_config);
        if (!gc_config.empty()) apply_config(*gc_cmd, gc_config);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (*train_cmd) return cmd_train(train_opts, out);
        if (*eval_cmd) return cmd_evaluate(eval_run, eval_overrides, eval_subset, eval_threshold, eval_report, out);
        if (*compare_cmd) return cmd_compare(compare_runs, compare_report, out);
        if (*gc_cmd) return cmd_grad_check(gc, out, err);
        if (*synth_cmd) return cmd_synth(synth_per_class, synth_img, synth_seed, synth_out, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const DivergenceError& e) {
        err << "error: training diverged: " << e.what() << '\n';
        return kNumericError;
    } catch (const AutogradError& e) {
        err << "error: " << e.what() << '\n';
        return kNumericError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
    return kUsage;
}

}  // namespace mgcn::cli
