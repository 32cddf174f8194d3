#include "egcn/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "egcn/metric.hpp"
#include "egcn/rng.hpp"
#include "egcn/spectral.hpp"

namespace egcn {

using nlohmann::json;

std::string to_string(task_type t) {
    return t == task_type::regression ? "regression" : "classification";
}

task_type task_type_from_string(const std::string& s) {
    if (s == "regression") return task_type::regression;
    if (s == "classification") return task_type::classification;
    throw data_error("unknown task_type '" + s + "' (expected regression or classification)");
}

void dataset_manifest::validate() const {
    if (feature_dim < 1) throw data_error("manifest: feature_dim must be >= 1");
    if (task_names.empty()) throw data_error("manifest: task_names must be nonempty");
    if (num_samples < 0) throw data_error("manifest: num_samples must be >= 0");
}

namespace {

std::filesystem::path samples_path_for(const std::filesystem::path& manifest_path) {
    std::filesystem::path p = manifest_path;
    p.replace_extension(".jsonl");
    return p;
}

dataset_manifest parse_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open manifest file '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw data_error("manifest '" + path.string() + "': " + e.what());
    }
    dataset_manifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.type = task_type_from_string(j.at("task_type").get<std::string>());
        m.task_names = j.at("task_names").get<std::vector<std::string>>();
        m.feature_dim = j.at("feature_dim").get<index_t>();
        m.num_samples = j.at("num_samples").get<index_t>();
        if (j.contains("max_degree")) m.max_degree = j.at("max_degree").get<index_t>();
    } catch (const json::exception& e) {
        throw data_error("manifest '" + path.string() + "': " + e.what());
    }
    m.validate();
    return m;
}

/// Parses one JSONL sample line against the manifest. Throws data_error with
/// a message that includes neither file nor line (the caller prefixes them).
graph parse_sample_line(const std::string& line, const dataset_manifest& m,
                        std::vector<std::string>* warnings, const std::string& where) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw data_error(where + ": malformed JSON: " + e.what());
    }
    std::string id;
    index_t n = 0;
    try {
        id = j.at("id").get<std::string>();
        n = j.at("n").get<index_t>();
    } catch (const json::exception& e) {
        throw data_error(where + ": " + e.what());
    }
    if (n < 1) throw data_error(where + ": sample '" + id + "' has n < 1");

    std::vector<double> feats;
    try {
        feats = j.at("node_features").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw data_error(where + ": sample '" + id + "': " + e.what());
    }
    if (static_cast<index_t>(feats.size()) != n * m.feature_dim) {
        throw data_error(where + ": sample '" + id + "' has " + std::to_string(feats.size()) +
                         " feature values, expected " + std::to_string(n * m.feature_dim));
    }
    tensor x = tensor::from({n, m.feature_dim}, std::move(feats));
    if (!x.all_finite()) throw data_error(where + ": sample '" + id + "' has non-finite features");

    tensor adj({n, n});
    if (j.contains("edges")) {
        if (!j.at("edges").is_array()) throw data_error(where + ": sample '" + id + "': edges must be an array");
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() < 3 || !e[0].is_number_integer() ||
                !e[1].is_number_integer() || !e[2].is_number()) {
                throw data_error(where + ": sample '" + id + "': edge entries must be [i, j, weight, ...]");
            }
            const auto i = e[0].get<index_t>();
            const auto k = e[1].get<index_t>();
            const auto w = e[2].get<double>();
            if (i < 0 || i >= n || k < 0 || k >= n) {
                throw data_error(where + ": sample '" + id + "': edge index out of range [" +
                                 std::to_string(i) + "," + std::to_string(k) + "]");
            }
            if (i == k) {
                throw data_error(where + ": sample '" + id + "': self-loop on node " + std::to_string(i));
            }
            if (!(w >= 0.0) || !std::isfinite(w)) {
                throw data_error(where + ": sample '" + id + "': edge weight must be finite and >= 0");
            }
            if (adj.at(i, k) != 0.0 && warnings) {
                warnings->push_back(where + ": sample '" + id + "': duplicate edge (" +
                                    std::to_string(i) + "," + std::to_string(k) + "), weights summed");
            }
            // Mirrored insertion keeps the adjacency symmetric by construction.
            adj.at(i, k) += w;
            adj.at(k, i) += w;
        }
    }

    std::optional<tensor> labels;
    std::vector<std::uint8_t> mask;
    const auto tasks = static_cast<index_t>(m.task_names.size());
    if (j.contains("labels")) {
        std::vector<double> lv;
        try {
            lv = j.at("labels").get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw data_error(where + ": sample '" + id + "': " + e.what());
        }
        if (static_cast<index_t>(lv.size()) != tasks) {
            throw data_error(where + ": sample '" + id + "' has " + std::to_string(lv.size()) +
                             " labels, expected " + std::to_string(tasks));
        }
        labels = tensor::row(std::move(lv));
        if (j.contains("label_mask")) {
            std::vector<bool> mb;
            try {
                mb = j.at("label_mask").get<std::vector<bool>>();
            } catch (const json::exception& e) {
                throw data_error(where + ": sample '" + id + "': " + e.what());
            }
            if (static_cast<index_t>(mb.size()) != tasks) {
                throw data_error(where + ": sample '" + id + "' label_mask length " +
                                 std::to_string(mb.size()) + " != " + std::to_string(tasks));
            }
            for (bool b : mb) mask.push_back(b ? 1 : 0);
        } else {
            mask.assign(static_cast<std::size_t>(tasks), 1);
        }
    }

    if (m.max_degree && warnings) {
        for (index_t i = 0; i < n; ++i) {
            index_t deg = 0;
            for (index_t k = 0; k < n; ++k) {
                if (adj.at(i, k) > 0.0) ++deg;
            }
            if (deg > *m.max_degree) {
                warnings->push_back(where + ": sample '" + id + "': node " + std::to_string(i) +
                                    " has degree " + std::to_string(deg) + " above the manifest hint " +
                                    std::to_string(*m.max_degree));
                break;
            }
        }
    }

    try {
        return graph::make(std::move(x), std::move(adj), std::move(labels), std::move(mask), id);
    } catch (const structural_error& e) {
        throw data_error(where + ": " + e.what());
    }
}

} // namespace

dataset load_dataset(const std::filesystem::path& manifest_path, std::vector<std::string>* warnings) {
    dataset d;
    d.manifest = parse_manifest(manifest_path);
    const auto samples_path = samples_path_for(manifest_path);
    std::ifstream in(samples_path);
    if (!in) throw data_error("cannot open samples file '" + samples_path.string() + "'");
    std::string line;
    index_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = samples_path.filename().string() + ":" + std::to_string(line_no);
        d.samples.push_back(parse_sample_line(line, d.manifest, warnings, where));
    }
    if (warnings && static_cast<index_t>(d.samples.size()) != d.manifest.num_samples) {
        warnings->push_back("manifest declares " + std::to_string(d.manifest.num_samples) +
                            " samples but the file holds " + std::to_string(d.samples.size()));
    }
    return d;
}

lint_report lint_dataset(const std::filesystem::path& manifest_path) {
    lint_report report;
    dataset_manifest m;
    try {
        m = parse_manifest(manifest_path);
    } catch (const error& e) {
        report.errors.push_back(e.what());
        return report;
    }
    const auto samples_path = samples_path_for(manifest_path);
    std::ifstream in(samples_path);
    if (!in) {
        report.errors.push_back("cannot open samples file '" + samples_path.string() + "'");
        return report;
    }
    std::string line;
    index_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = samples_path.filename().string() + ":" + std::to_string(line_no);
        try {
            parse_sample_line(line, m, &report.warnings, where);
            ++report.samples_ok;
        } catch (const error& e) {
            report.errors.push_back(e.what());
        }
    }
    if (line_no == 0) report.warnings.push_back("samples file is empty");
    return report;
}

void write_dataset(const dataset& d, const std::filesystem::path& manifest_path) {
    d.manifest.validate();
    if (manifest_path.has_parent_path()) {
        std::filesystem::create_directories(manifest_path.parent_path());
    }
    json mj;
    mj["name"] = d.manifest.name;
    mj["task_type"] = to_string(d.manifest.type);
    mj["task_names"] = d.manifest.task_names;
    mj["feature_dim"] = d.manifest.feature_dim;
    mj["num_samples"] = static_cast<index_t>(d.samples.size());
    if (d.manifest.max_degree) mj["max_degree"] = *d.manifest.max_degree;
    std::ofstream mout(manifest_path);
    if (!mout) throw data_error("cannot write manifest '" + manifest_path.string() + "'");
    mout << mj.dump(2) << "\n";

    std::ofstream sout(samples_path_for(manifest_path));
    if (!sout) throw data_error("cannot write samples file");
    for (const graph& g : d.samples) {
        json sj;
        sj["id"] = g.id;
        sj["n"] = g.num_nodes();
        sj["node_features"] = std::vector<double>(g.node_features.values().begin(),
                                                  g.node_features.values().end());
        json edges = json::array();
        for (index_t i = 0; i < g.num_nodes(); ++i) {
            for (index_t k = i + 1; k < g.num_nodes(); ++k) {
                if (g.adjacency.at(i, k) != 0.0) {
                    edges.push_back(json::array({i, k, g.adjacency.at(i, k)}));
                }
            }
        }
        sj["edges"] = std::move(edges);
        if (g.labels) {
            sj["labels"] = std::vector<double>(g.labels->values().begin(), g.labels->values().end());
            json mask = json::array();
            for (std::uint8_t b : g.label_mask) mask.push_back(b != 0);
            sj["label_mask"] = std::move(mask);
        }
        sout << sj.dump() << "\n";
    }
}

dataset synthesize_hidden_metric_dataset(index_t n_samples, index_t n_nodes_lo, index_t n_nodes_hi,
                                         index_t feature_dim, std::uint64_t seed) {
    if (n_samples < 1 || n_nodes_lo < 2 || n_nodes_hi < n_nodes_lo || feature_dim < 2) {
        throw parameter_error("synthesize_hidden_metric_dataset: need n_samples >= 1, "
                              "2 <= n_nodes_lo <= n_nodes_hi, feature_dim >= 2");
    }
    rng r(seed);
    const index_t d = feature_dim;
    const index_t num_distractor = d / 2;
    const double distractor_scale = 3.0;

    // Hidden projection: only the informative dimensions survive.
    tensor w_star({d, d});
    for (index_t i = num_distractor; i < d; ++i) w_star.at(i, i) = 1.0;

    // Fixed label functional; the higher-hop terms dominate so the label is
    // mostly carried by graph propagation, not by raw features.
    const chebyshev_coeffs theta_star = chebyshev_coeffs::from({0.1, 0.6, -0.7});
    tensor u({d, 1});
    for (index_t i = 0; i < d; ++i) u.at(i, 0) = r.normal();
    double un = 0.0;
    for (index_t i = 0; i < d; ++i) un += u.at(i, 0) * u.at(i, 0);
    un = std::sqrt(un);
    for (index_t i = 0; i < d; ++i) u.at(i, 0) /= un;

    // Bandwidths well below the typical pairwise distance, so edge weights
    // span orders of magnitude and each graph has sharp structure; a wide
    // bandwidth would make every graph the same near-uniform smoother.
    const double mean_sq_all =
        2.0 * (static_cast<double>(num_distractor) * distractor_scale * distractor_scale +
               static_cast<double>(d - num_distractor));
    const double sigma_euclid = std::sqrt(std::sqrt(mean_sq_all) / 5.0);
    const double sigma_star = 0.6;

    dataset out;
    out.manifest.name = "hidden-metric-synth";
    out.manifest.type = task_type::regression;
    out.manifest.task_names = {"target"};
    out.manifest.feature_dim = d;
    out.manifest.num_samples = n_samples;

    metric_params euclid;
    euclid.w_d = tensor::identity(d);
    euclid.gaussian_sigma = sigma_euclid;

    // Raw label: gathered rectified graph-filtered features. The per-node
    // rectification makes the aggregate genuinely depend on how the hidden
    // graph mixes features node by node; a plain linear aggregate would
    // mostly wash the graph out.
    std::vector<double> raw_labels;
    for (index_t s = 0; s < n_samples; ++s) {
        const index_t n = n_nodes_lo + static_cast<index_t>(r.below(
                              static_cast<std::uint64_t>(n_nodes_hi - n_nodes_lo + 1)));
        tensor x({n, d});
        for (index_t i = 0; i < n; ++i) {
            for (index_t j = 0; j < d; ++j) {
                x.at(i, j) = r.normal() * (j < num_distractor ? distractor_scale : 1.0);
            }
        }

        // Intrinsic graph: plain Euclidean similarity over all dimensions.
        tensor adj = similarity_to_adjacency(
            gaussian_similarity(mahalanobis_distances(x, euclid.w_d), euclid.gaussian_sigma), 0.0);

        tensor hidden_adj = similarity_to_adjacency(
            gaussian_similarity(mahalanobis_distances(x, w_star), sigma_star), 0.0);
        tensor l_star = normalized_laplacian(hidden_adj);
        tensor l_tilde = scale_laplacian(l_star, 2.0);
        tensor filtered = chebyshev_filter(l_tilde, x, theta_star);
        double y_raw = 0.0;
        for (index_t i = 0; i < n; ++i) {
            for (index_t j = 0; j < d; ++j) {
                const double rectified = filtered.at(i, j) > 0.0 ? filtered.at(i, j) : 0.0;
                y_raw += rectified * u.at(j, 0);
            }
        }
        raw_labels.push_back(y_raw);

        std::ostringstream id;
        id << "synth-" << std::setw(6) << std::setfill('0') << s;
        out.samples.push_back(graph::make(std::move(x), std::move(adj), tensor::scalar(y_raw), {1},
                                          id.str()));
    }

    // Standardize labels over the dataset (zero mean, unit variance).
    double mean = 0.0;
    for (double y : raw_labels) mean += y;
    mean /= static_cast<double>(n_samples);
    double var = 0.0;
    for (double y : raw_labels) var += (y - mean) * (y - mean);
    const double scale = n_samples > 1 ? std::sqrt(var / static_cast<double>(n_samples)) : 1.0;
    const double inv = scale > 0.0 ? 1.0 / scale : 1.0;
    for (index_t s = 0; s < n_samples; ++s) {
        auto& labels = out.samples[static_cast<std::size_t>(s)].labels;
        labels = tensor::scalar((raw_labels[static_cast<std::size_t>(s)] - mean) * inv);
    }
    return out;
}

} // namespace egcn
