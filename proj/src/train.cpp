#include "gnnstrat/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "gnnstrat/optim.hpp"

namespace gnnstrat {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kRandomPartitionStream = 2;

std::string fixed6(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", x);
    return buf;
}

std::vector<std::uint32_t> filter_group(std::span<const std::uint32_t> mask, const std::vector<bool>& group) {
    std::vector<std::uint32_t> out;
    for (auto v : mask) {
        if (group.at(v)) out.push_back(v);
    }
    return out;
}

struct Snapshot {
    double val = -1.0;
    std::size_t epoch = 0;
    Matrix logits;
    ModelWeights weights;
};

}  // namespace

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw RunError("learning rate must be positive");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw RunError("weight decay must be non-negative");
    if (epochs == 0) throw RunError("epochs must be positive");
}

ModelSpec TrainConfig::model_spec(const Dataset& ds) const {
    ModelSpec spec;
    spec.arch = arch;
    spec.variant = variant;
    spec.num_layers = num_layers;
    spec.hidden_dim = hidden_dim;
    spec.input_dim = ds.num_features();
    spec.num_classes = ds.num_classes;
    spec.gat_heads = gat_heads;
    spec.leaky_slope = leaky_slope;
    spec.validate();
    return spec;
}

std::uint32_t resolve_theta(const TrainConfig& config, const Dataset& ds) {
    if (config.theta) return *config.theta;
    return otsu_threshold(degree_histogram(degrees(ds.graph)));
}

DegreePartition training_partition(const TrainConfig& config, const Dataset& ds) {
    const auto deg = degrees(ds.graph);
    auto by_degree = partition_by_degree(deg, resolve_theta(config, ds));
    if (config.variant != Variant::random_split) return by_degree;
    return random_partition(ds.num_nodes(), by_degree.low_count, derive_seed(config.seed, kRandomPartitionStream));
}

double evaluate_accuracy(const Matrix& logits, std::span<const std::uint32_t> labels,
                         std::span<const std::uint32_t> mask) {
    if (mask.empty()) throw std::invalid_argument("empty evaluation mask");
    if (labels.size() != logits.rows()) throw ShapeError("labels do not match logits rows");
    std::size_t correct = 0;
    for (auto v : mask) {
        if (v >= logits.rows()) throw std::out_of_range("mask node out of range");
        const auto row = logits.row(v);
        const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        if (best == labels[v]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(mask.size());
}

GroupAccuracy group_accuracy(const Matrix& logits, std::span<const std::uint32_t> labels,
                             std::span<const std::uint32_t> test_mask, const DegreePartition& partition) {
    const auto low = filter_group(test_mask, partition.low_mask);
    const auto high = filter_group(test_mask, partition.high_mask);
    if (low.empty()) throw RunError("low-degree group has no test nodes");
    if (high.empty()) throw RunError("high-degree group has no test nodes");
    return {evaluate_accuracy(logits, labels, low), evaluate_accuracy(logits, labels, high)};
}

TrainOutput train(const TrainConfig& config, const Dataset& ds) {
    const auto ctx = ForwardContext::build(ds, config.arch);
    return train(config, ds, ctx);
}

TrainOutput train(const TrainConfig& config, const Dataset& ds, const ForwardContext& ctx) {
    const auto start = std::chrono::steady_clock::now();
    config.validate();
    const auto spec = config.model_spec(ds);
    if (ctx.arch != config.arch || ctx.num_nodes != ds.num_nodes()) throw RunError("forward context does not match run");

    // Group metrics always refer to the degree partition, whatever the model trains with.
    std::optional<DegreePartition> degree_groups;
    std::optional<DegreePartition> model_groups;
    std::optional<std::uint32_t> theta;
    try {
        theta = resolve_theta(config, ds);
        degree_groups = partition_by_degree(degrees(ds.graph), *theta);
    } catch (const PartitionError&) {
        if (config.variant != Variant::baseline) throw;
    }
    if (config.variant == Variant::stratified) model_groups = degree_groups;
    if (config.variant == Variant::random_split) {
        model_groups = random_partition(ds.num_nodes(), degree_groups->low_count,
                                        derive_seed(config.seed, kRandomPartitionStream));
    }
    const DegreePartition* partition = model_groups ? &*model_groups : nullptr;

    TrainOutput out;
    auto weights = init_weights(spec, derive_seed(config.seed, kInitStream));
    auto params = weights.parameters();
    AdamState adam;
    Snapshot best;
    out.train_loss.reserve(config.epochs);

    const auto consider = [&](const Matrix& logits, std::size_t epoch) {
        const double val = evaluate_accuracy(logits, ds.labels, ds.split.val);
        if (val > best.val) {
            best.val = val;
            best.epoch = epoch;
            best.logits = logits;
            best.weights = weights.clone();
        }
    };

    // The forward pass of epoch e also scores the parameters produced by epoch e - 1.
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        Tape tape;
        const auto logits = model_forward(tape, spec, weights, ctx, partition);
        if (epoch > 1) consider(logits.value(), epoch - 1);
        const auto loss = cross_entropy_masked(tape, logits, ds.labels, ds.split.train);
        const double l = loss.at(0, 0);
        if (!std::isfinite(l)) {
            throw RunError("non-finite training loss at epoch " + std::to_string(epoch) + " (seed " +
                           std::to_string(config.seed) + ")");
        }
        out.train_loss.push_back(l);
        for (auto& p : params) p.zero_grad();
        tape.backward(loss);
        adam_step(params, adam, config.lr, config.weight_decay);
    }
    {
        Tape tape(Tape::Recording::off);
        consider(model_forward(tape, spec, weights, ctx, partition).value(), config.epochs);
    }

    auto& r = out.result;
    r.dataset = ds.name;
    r.arch = config.arch;
    r.variant = config.variant;
    r.theta = theta;
    r.seed = config.seed;
    r.epochs = config.epochs;
    r.best_val_accuracy = best.val;
    r.epoch_of_best = best.epoch;
    r.test_accuracy = evaluate_accuracy(best.logits, ds.labels, ds.split.test);
    if (degree_groups) {
        const auto low = filter_group(ds.split.test, degree_groups->low_mask);
        const auto high = filter_group(ds.split.test, degree_groups->high_mask);
        if (!low.empty()) r.low_degree_accuracy = evaluate_accuracy(best.logits, ds.labels, low);
        if (!high.empty()) r.high_degree_accuracy = evaluate_accuracy(best.logits, ds.labels, high);
    }
    out.weights = std::move(best.weights);
    r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

double mean_of(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean of empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

const VariantSummary& ExperimentSummary::at(Variant v) const {
    for (const auto& s : variants) {
        if (s.variant == v) return s;
    }
    throw std::out_of_range("variant not in experiment: " + std::string(to_string(v)));
}

ExperimentSummary run_experiment(const TrainConfig& config, const Dataset& ds, const ExperimentOptions& options) {
    if (options.runs == 0) throw RunError("runs must be positive");
    if (options.variants.empty()) throw RunError("no variants requested");
    const auto ctx = ForwardContext::build(ds, config.arch);

    const std::size_t jobs = options.variants.size() * options.runs;
    std::vector<std::optional<RunResult>> results(jobs);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    const auto worker = [&] {
        for (std::size_t j = next++; j < jobs; j = next++) {
            {
                std::lock_guard lock(failure_mutex);
                if (failure) return;
            }
            try {
                auto run = config;
                run.variant = options.variants[j / options.runs];
                run.seed = options.base_seed + j % options.runs;
                results[j] = train(run, ds, ctx).result;
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const std::size_t n_workers = std::clamp<std::size_t>(options.workers, 1, jobs);
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    ExperimentSummary summary;
    summary.dataset = ds.name;
    summary.arch = config.arch;
    for (std::size_t vi = 0; vi < options.variants.size(); ++vi) {
        VariantSummary vs;
        vs.variant = options.variants[vi];
        vs.runs = options.runs;
        std::vector<double> test, low, high;
        for (std::size_t k = 0; k < options.runs; ++k) {
            auto& r = *results[vi * options.runs + k];
            test.push_back(r.test_accuracy);
            if (r.low_degree_accuracy) low.push_back(*r.low_degree_accuracy);
            if (r.high_degree_accuracy) high.push_back(*r.high_degree_accuracy);
            vs.results.push_back(std::move(r));
        }
        vs.mean = mean_of(test);
        vs.std = sample_std(test);
        if (low.size() == options.runs) vs.low_mean = mean_of(low);
        if (high.size() == options.runs) vs.high_mean = mean_of(high);
        summary.variants.push_back(std::move(vs));
    }
    return summary;
}

SweepTable theta_sweep(const TrainConfig& config, const Dataset& ds, std::span<const std::uint32_t> thetas,
                       const ExperimentOptions& options) {
    SweepTable table;
    table.dataset = ds.name;
    table.arch = config.arch;

    auto base_opts = options;
    base_opts.variants = {Variant::baseline};
    const auto base = run_experiment(config, ds, base_opts).at(Variant::baseline);
    table.baseline_mean = base.mean;
    table.baseline_std = base.std;

    const auto deg = degrees(ds.graph);
    auto strat_opts = options;
    strat_opts.variants = {Variant::stratified};
    for (auto theta : thetas) {
        SweepRow row;
        row.theta = theta;
        try {
            (void)partition_by_degree(deg, theta);
        } catch (const PartitionError& e) {
            row.skipped = true;
            row.reason = e.what();
            table.rows.push_back(std::move(row));
            continue;
        }
        auto run = config;
        run.theta = theta;
        const auto s = run_experiment(run, ds, strat_opts).at(Variant::stratified);
        row.mean = s.mean;
        row.std = s.std;
        table.rows.push_back(std::move(row));
    }
    return table;
}

nlohmann::json to_json(const RunResult& r, bool include_wall_time) {
    const auto opt = [](const auto& o) -> nlohmann::json {
        if (o) return *o;
        return nullptr;
    };
    nlohmann::json j;
    j["dataset"] = r.dataset;
    j["arch"] = to_string(r.arch);
    j["variant"] = to_string(r.variant);
    j["theta"] = opt(r.theta);
    j["seed"] = r.seed;
    j["epochs"] = r.epochs;
    j["best_val_acc"] = r.best_val_accuracy;
    j["test_acc"] = r.test_accuracy;
    j["low_acc"] = opt(r.low_degree_accuracy);
    j["high_acc"] = opt(r.high_degree_accuracy);
    j["epoch_of_best"] = r.epoch_of_best;
    j["wall_time_s"] = include_wall_time ? nlohmann::json(r.wall_time_s) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const ExperimentSummary& s, bool include_wall_time) {
    nlohmann::json j;
    j["dataset"] = s.dataset;
    j["arch"] = to_string(s.arch);
    j["variants"] = nlohmann::json::array();
    for (const auto& v : s.variants) {
        nlohmann::json jv;
        jv["variant"] = to_string(v.variant);
        jv["runs"] = v.runs;
        jv["mean"] = v.mean;
        jv["std"] = v.std;
        jv["low_mean"] = v.low_mean ? nlohmann::json(*v.low_mean) : nlohmann::json(nullptr);
        jv["high_mean"] = v.high_mean ? nlohmann::json(*v.high_mean) : nlohmann::json(nullptr);
        jv["results"] = nlohmann::json::array();
        for (const auto& r : v.results) jv["results"].push_back(to_json(r, include_wall_time));
        j["variants"].push_back(std::move(jv));
    }
    return j;
}

void write_experiment_csv(std::ostream& out, const ExperimentSummary& s) {
    out << "dataset,arch,variant,runs,mean,std\n";
    for (const auto& v : s.variants) {
        out << s.dataset << ',' << to_string(s.arch) << ',' << to_string(v.variant) << ',' << v.runs << ','
            << fixed6(v.mean) << ',' << fixed6(v.std) << '\n';
    }
}

void write_sweep_csv(std::ostream& out, const SweepTable& t) {
    out << "theta,mean,std\n";
    out << "baseline," << fixed6(t.baseline_mean) << ',' << fixed6(t.baseline_std) << '\n';
    for (const auto& r : t.rows) {
        out << r.theta << ',';
        if (r.skipped) {
            out << "skipped,skipped\n";
        } else {
            out << fixed6(r.mean) << ',' << fixed6(r.std) << '\n';
        }
    }
}

}  // namespace gnnstrat
