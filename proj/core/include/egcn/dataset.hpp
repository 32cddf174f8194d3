#ifndef EGCN_DATASET_HPP
#define EGCN_DATASET_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "egcn/graph.hpp"

namespace egcn {

enum class task_type { regression, classification };

std::string to_string(task_type t);
task_type task_type_from_string(const std::string& s);

struct dataset_manifest {
    std::string name;
    task_type type = task_type::regression;
    std::vector<std::string> task_names;
    index_t feature_dim = 0;
    index_t num_samples = 0;
    std::optional<index_t> max_degree;

    void validate() const;
};

struct dataset {
    dataset_manifest manifest;
    std::vector<graph> samples;
};

/// Loads a manifest JSON plus its JSON Lines samples file (same basename,
/// .jsonl extension, next to the manifest). Every graph invariant is
/// validated; the first violation raises data_error with the line number.
/// Non-fatal findings (duplicate edges summed, degree above the manifest
/// hint) are appended to `warnings` when provided.
dataset load_dataset(const std::filesystem::path& manifest_path,
                     std::vector<std::string>* warnings = nullptr);

/// Scans the whole file collecting every error instead of stopping at the
/// first one. Used by the validate-data lint command.
struct lint_report {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    index_t samples_ok = 0;
};
lint_report lint_dataset(const std::filesystem::path& manifest_path);

/// Writes manifest + samples files; load_dataset(write_dataset(d)) is
/// structurally identical to d.
void write_dataset(const dataset& d, const std::filesystem::path& manifest_path);

/// Desk-scale regression dataset whose labels are generated from a hidden
/// metric: node features carry high-variance distractor dimensions, the
/// intrinsic graph is built from plain Euclidean similarity over all
/// dimensions, but the labels come from a graph built with a hidden
/// projection that sees only the informative dimensions. A model that can
/// learn the metric can recover the label-generating graph; a fixed-graph
/// model cannot.
dataset synthesize_hidden_metric_dataset(index_t n_samples, index_t n_nodes_lo, index_t n_nodes_hi,
                                         index_t feature_dim, std::uint64_t seed);

} // namespace egcn

#endif // EGCN_DATASET_HPP
