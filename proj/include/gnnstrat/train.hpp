#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gnnstrat/dataset.hpp"
#include "gnnstrat/models.hpp"
#include "gnnstrat/stratify.hpp"

namespace gnnstrat {

class RunError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    Arch arch = Arch::gcn;
    Variant variant = Variant::baseline;
    double lr = 0.001;
    double weight_decay = 5e-4;
    std::size_t epochs = 200;
    std::uint64_t seed = 0;
    std::optional<std::uint32_t> theta;  // nullopt: Otsu threshold of the degree histogram
    std::size_t num_layers = 2;
    std::size_t hidden_dim = 32;
    std::size_t gat_heads = 1;
    double leaky_slope = 0.2;

    void validate() const;
    ModelSpec model_spec(const Dataset& ds) const;
};

struct RunResult {
    std::string dataset;
    Arch arch = Arch::gcn;
    Variant variant = Variant::baseline;
    std::optional<std::uint32_t> theta;
    std::uint64_t seed = 0;
    std::size_t epochs = 0;
    double best_val_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::optional<double> low_degree_accuracy;   // test nodes with deg <= theta
    std::optional<double> high_degree_accuracy;  // test nodes with deg > theta
    std::size_t epoch_of_best = 0;
    double wall_time_s = 0.0;
};

struct TrainOutput {
    ModelWeights weights;  // parameters of the best-validation epoch
    RunResult result;
    std::vector<double> train_loss;  // loss of each epoch's forward pass, before its update
};

/// Theta from the config, or Otsu's threshold on the dataset's degree histogram.
std::uint32_t resolve_theta(const TrainConfig& config, const Dataset& ds);

/// Full-batch training on the train split. After every epoch the validation
/// accuracy of the updated parameters is measured; the earliest epoch with the
/// highest value wins and its parameters produce the reported test metrics.
TrainOutput train(const TrainConfig& config, const Dataset& ds);
/// Same, reusing precomputed graph operators (read-only, shareable across threads).
TrainOutput train(const TrainConfig& config, const Dataset& ds, const ForwardContext& ctx);

/// The partition a run trains with: the degree partition for baseline/stratified,
/// a size-matched random partition (seeded by config.seed) for random_split.
DegreePartition training_partition(const TrainConfig& config, const Dataset& ds);

/// Fraction of masked nodes whose arg-max logit (lowest class id on ties) equals the label.
double evaluate_accuracy(const Matrix& logits, std::span<const std::uint32_t> labels,
                         std::span<const std::uint32_t> mask);

struct GroupAccuracy {
    double low = 0.0;
    double high = 0.0;
};

/// Accuracy on test ∩ low and test ∩ high. Throws naming the group whose intersection is empty.
GroupAccuracy group_accuracy(const Matrix& logits, std::span<const std::uint32_t> labels,
                             std::span<const std::uint32_t> test_mask, const DegreePartition& partition);

struct VariantSummary {
    Variant variant = Variant::baseline;
    std::size_t runs = 0;
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n - 1)
    std::optional<double> low_mean;
    std::optional<double> high_mean;
    std::vector<RunResult> results;  // ascending seed
};

struct ExperimentSummary {
    std::string dataset;
    Arch arch = Arch::gcn;
    std::vector<VariantSummary> variants;

    const VariantSummary& at(Variant v) const;
};

struct ExperimentOptions {
    std::size_t runs = 10;
    std::uint64_t base_seed = 0;
    std::vector<Variant> variants{Variant::baseline, Variant::stratified, Variant::random_split};
    std::size_t workers = 1;
};

/// Runs seeds base_seed .. base_seed + runs - 1 for every requested variant.
/// Results do not depend on the number of workers or on completion order.
ExperimentSummary run_experiment(const TrainConfig& config, const Dataset& ds, const ExperimentOptions& options);

double mean_of(std::span<const double> xs);
double sample_std(std::span<const double> xs);

struct SweepRow {
    std::uint32_t theta = 0;
    bool skipped = false;
    std::string reason;
    double mean = 0.0;
    double std = 0.0;
};

struct SweepTable {
    std::string dataset;
    Arch arch = Arch::gcn;
    double baseline_mean = 0.0;
    double baseline_std = 0.0;
    std::vector<SweepRow> rows;
};

/// One stratified experiment per theta plus a baseline reference. Thetas that
/// leave a group empty are kept as skipped rows.
SweepTable theta_sweep(const TrainConfig& config, const Dataset& ds, std::span<const std::uint32_t> thetas,
                       const ExperimentOptions& options);

/// Metrics JSON: {dataset, arch, variant, theta, seed, epochs, best_val_acc, test_acc,
/// low_acc, high_acc, epoch_of_best, wall_time_s}. wall_time_s is null unless requested.
nlohmann::json to_json(const RunResult& r, bool include_wall_time = false);
nlohmann::json to_json(const ExperimentSummary& s, bool include_wall_time = false);

/// "dataset,arch,variant,runs,mean,std", one row per variant.
void write_experiment_csv(std::ostream& out, const ExperimentSummary& s);
/// "theta,mean,std" with a leading baseline row; skipped thetas carry "skipped" in both value columns.
void write_sweep_csv(std::ostream& out, const SweepTable& t);

}  // namespace gnnstrat
