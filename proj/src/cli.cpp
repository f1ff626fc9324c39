#include "gnnstrat/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>

#include "gnnstrat/dataset.hpp"
#include "gnnstrat/spectral.hpp"
#include "gnnstrat/stratify.hpp"
#include "gnnstrat/synthetic.hpp"
#include "gnnstrat/train.hpp"

namespace gnnstrat {

namespace {

struct DataArgs {
    std::string dir;
    std::size_t synthetic_nodes = 0;
    std::uint64_t synthetic_seed = 0;

    void attach(CLI::App* cmd) {
        auto* d = cmd->add_option("--data", dir, "dataset directory (meta.json, edges, features, labels, split)");
        auto* s = cmd->add_option("--synthetic-nodes", synthetic_nodes,
                                  "use a generated power-law graph with this many nodes instead of --data");
        cmd->add_option("--synthetic-seed", synthetic_seed, "seed of the generated graph");
        d->excludes(s);
    }

    Dataset load() const {
        if (synthetic_nodes > 0) {
            SyntheticOptions o;
            o.num_nodes = synthetic_nodes;
            o.seed = synthetic_seed;
            o.train_per_class = std::min<std::size_t>(o.train_per_class, synthetic_nodes / (5 * o.num_classes));
            o.num_val = synthetic_nodes / 5;
            o.num_test = 2 * synthetic_nodes / 5;
            return make_power_law_dataset(o);
        }
        if (dir.empty()) throw std::invalid_argument("one of --data or --synthetic-nodes is required");
        return load_dataset(dir);
    }
};

struct ModelArgs {
    std::string model = "gcn";
    std::string theta = "auto";
    std::size_t epochs = 200;
    double lr = 0.001;
    double weight_decay = 5e-4;
    std::size_t hidden = 32;
    std::size_t layers = 2;
    std::size_t heads = 1;

    void attach(CLI::App* cmd, bool with_theta = true) {
        cmd->add_option("--model", model, "gcn, gat or sage")->check(CLI::IsMember({"gcn", "gat", "sage"}));
        if (with_theta) cmd->add_option("--theta", theta, "degree threshold: 'auto' (Otsu) or an integer");
        cmd->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
        cmd->add_option("--lr", lr)->check(CLI::PositiveNumber);
        cmd->add_option("--weight-decay", weight_decay)->check(CLI::NonNegativeNumber);
        cmd->add_option("--hidden", hidden)->check(CLI::PositiveNumber);
        cmd->add_option("--layers", layers)->check(CLI::PositiveNumber);
        cmd->add_option("--heads", heads, "GAT attention heads")->check(CLI::PositiveNumber);
    }

    TrainConfig config() const {
        TrainConfig c;
        c.arch = parse_arch(model);
        c.epochs = epochs;
        c.lr = lr;
        c.weight_decay = weight_decay;
        c.hidden_dim = hidden;
        c.num_layers = layers;
        c.gat_heads = heads;
        c.theta = parse_theta(theta);
        return c;
    }

    static std::optional<std::uint32_t> parse_theta(const std::string& s) {
        if (s == "auto") return std::nullopt;
        std::size_t used = 0;
        const unsigned long v = std::stoul(s, &used);
        if (used != s.size() || v > UINT32_MAX) throw std::invalid_argument("invalid --theta '" + s + "'");
        return static_cast<std::uint32_t>(v);
    }
};

void emit(std::ostream& out, const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        out << content;
    } else {
        write_file_atomic(path, content);
    }
}

std::vector<std::uint32_t> parse_theta_list(const std::string& s) {
    std::vector<std::uint32_t> out;
    if (const auto dots = s.find(".."); dots != std::string::npos) {
        const auto lo = std::stoul(s.substr(0, dots));
        const auto hi = std::stoul(s.substr(dots + 2));
        if (hi < lo) throw std::invalid_argument("empty theta range '" + s + "'");
        for (auto t = lo; t <= hi; ++t) out.push_back(static_cast<std::uint32_t>(t));
        return out;
    }
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        out.push_back(static_cast<std::uint32_t>(std::stoul(item, &used)));
        if (used != item.size()) throw std::invalid_argument("invalid theta '" + item + "'");
    }
    if (out.empty()) throw std::invalid_argument("no theta values given");
    return out;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        f.flush();
        if (!f) {
            std::filesystem::remove(tmp);
            throw std::runtime_error("failed writing " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Degree-stratified GNN training and analysis"};
    app.name("gnnstrat");
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "train one model and write its metrics JSON");
    DataArgs train_data;
    ModelArgs train_model;
    std::string train_variant = "baseline";
    std::uint64_t train_seed = 0;
    std::string train_out, train_ckpt;
    bool record_wall_time = false;
    train_data.attach(train_cmd);
    train_model.attach(train_cmd);
    train_cmd->add_option("--variant", train_variant, "baseline, stratified or random")
        ->check(CLI::IsMember({"baseline", "stratified", "random", "random_split"}));
    train_cmd->add_option("--seed", train_seed);
    train_cmd->add_option("--out", train_out, "metrics JSON path (stdout if omitted)");
    train_cmd->add_option("--checkpoint", train_ckpt, "also save the best-validation parameters here");
    train_cmd->add_flag("--record-wall-time", record_wall_time, "include wall_time_s (output is then not reproducible)");

    // experiment
    auto* exp_cmd = app.add_subcommand("experiment", "multi-seed comparison of baseline, stratified and random division");
    DataArgs exp_data;
    ModelArgs exp_model;
    ExperimentOptions exp_opts;
    std::vector<std::string> exp_variants{"baseline", "stratified", "random"};
    std::string exp_out, exp_format = "csv";
    exp_data.attach(exp_cmd);
    exp_model.attach(exp_cmd);
    exp_cmd->add_option("--runs", exp_opts.runs)->check(CLI::PositiveNumber);
    exp_cmd->add_option("--base-seed", exp_opts.base_seed);
    exp_cmd->add_option("--workers", exp_opts.workers)->check(CLI::PositiveNumber);
    exp_cmd->add_option("--variants", exp_variants)->delimiter(',');
    exp_cmd->add_option("--format", exp_format)->check(CLI::IsMember({"csv", "json"}));
    exp_cmd->add_option("--out", exp_out);

    // sweep-theta
    auto* sweep_cmd = app.add_subcommand("sweep-theta", "stratified accuracy for a list of thresholds");
    DataArgs sweep_data;
    ModelArgs sweep_model;
    ExperimentOptions sweep_opts;
    std::string sweep_thetas = "1..10", sweep_out;
    sweep_data.attach(sweep_cmd);
    sweep_model.attach(sweep_cmd, false);
    sweep_cmd->add_option("--thetas", sweep_thetas, "'a..b' or a comma-separated list");
    sweep_cmd->add_option("--runs", sweep_opts.runs)->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--base-seed", sweep_opts.base_seed);
    sweep_cmd->add_option("--workers", sweep_opts.workers)->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--out", sweep_out);

    // spectrum
    auto* spec_cmd = app.add_subcommand("spectrum", "eigenvalues of a degree group's renormalized adjacency");
    DataArgs spec_data;
    std::string spec_theta = "auto", spec_group = "low", spec_norm = "subgraph", spec_out, spec_json;
    spec_data.attach(spec_cmd);
    spec_cmd->add_option("--theta", spec_theta);
    spec_cmd->add_option("--group", spec_group)->check(CLI::IsMember({"low", "high", "full"}));
    spec_cmd->add_option("--normalization", spec_norm)->check(CLI::IsMember({"subgraph", "full-restricted"}));
    spec_cmd->add_option("--out", spec_out, "CSV path (stdout if omitted)");
    spec_cmd->add_option("--summary", spec_json, "summary JSON path");

    // degree-hist
    auto* hist_cmd = app.add_subcommand("degree-hist", "degree histogram CSV and the Otsu threshold");
    DataArgs hist_data;
    std::string hist_out;
    hist_data.attach(hist_cmd);
    hist_cmd->add_option("--out", hist_out, "CSV path (stdout if omitted)");

    // validate
    auto* val_cmd = app.add_subcommand("validate", "load a dataset directory and report its counts");
    std::string val_dir;
    val_cmd->add_option("--data", val_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return 2;
    }

    try {
        if (*train_cmd) {
            const auto ds = train_data.load();
            auto config = train_model.config();
            config.variant = parse_variant(train_variant);
            config.seed = train_seed;
            auto output = train(config, ds);
            emit(out, train_out, to_json(output.result, record_wall_time).dump(2) + "\n");
            if (!train_ckpt.empty()) {
                save_checkpoint(train_ckpt, {config.model_spec(ds), output.result.theta, std::move(output.weights)});
            }
        } else if (*exp_cmd) {
            const auto ds = exp_data.load();
            exp_opts.variants.clear();
            for (const auto& v : exp_variants) exp_opts.variants.push_back(parse_variant(v));
            const auto summary = run_experiment(exp_model.config(), ds, exp_opts);
            if (exp_format == "json") {
                emit(out, exp_out, to_json(summary).dump(2) + "\n");
            } else {
                std::ostringstream csv;
                write_experiment_csv(csv, summary);
                emit(out, exp_out, csv.str());
            }
        } else if (*sweep_cmd) {
            const auto ds = sweep_data.load();
            const auto thetas = parse_theta_list(sweep_thetas);
            auto config = sweep_model.config();
            config.variant = Variant::stratified;
            std::ostringstream csv;
            write_sweep_csv(csv, theta_sweep(config, ds, thetas, sweep_opts));
            emit(out, sweep_out, csv.str());
        } else if (*spec_cmd) {
            const auto ds = spec_data.load();
            const auto deg = degrees(ds.graph);
            const auto fixed = ModelArgs::parse_theta(spec_theta);
            const auto theta = fixed ? *fixed : otsu_threshold(degree_histogram(deg));
            SpectrumOptions opts;
            opts.normalization = parse_normalization(spec_norm);
            const auto s = partition_spectrum(ds.graph, partition_by_degree(deg, theta),
                                              parse_spectrum_group(spec_group), opts);
            std::ostringstream csv;
            write_spectrum_csv(csv, s);
            emit(out, spec_out, csv.str());
            if (!spec_json.empty()) emit(out, spec_json, spectrum_summary_json(s).dump(2) + "\n");
        } else if (*hist_cmd) {
            const auto ds = hist_data.load();
            const auto hist = degree_histogram(degrees(ds.graph));
            std::ostringstream csv;
            write_histogram_csv(csv, hist);
            emit(out, hist_out, csv.str());
            if (!hist_out.empty()) out << "otsu theta: " << otsu_threshold(hist) << "\n";
        } else if (*val_cmd) {
            const auto ds = load_dataset(val_dir);
            out << ds.num_nodes() << " nodes, " << ds.graph.num_undirected_edges() << " edges, "
                << ds.num_features() << " features, " << ds.num_classes << " classes\n";
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace gnnstrat
