#include "gnnstrat/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include <json.hpp>

namespace gnnstrat {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "binary dataset I/O assumes a little-endian host");

namespace {

std::vector<char> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw LoadError("missing file: " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& p) {
    const auto bytes = read_file(p);
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw LoadError("malformed JSON in " + p.string() + ": " + e.what());
    }
}

std::size_t meta_count(const json& meta, const char* key) {
    if (!meta.contains(key) || !meta[key].is_number_unsigned()) {
        throw LoadError(std::string("meta.json: missing or invalid '") + key + "'");
    }
    return meta[key].get<std::size_t>();
}

template <typename T>
std::vector<T> decode_exact(const fs::path& p, std::size_t expected_count) {
    const auto bytes = read_file(p);
    const std::size_t expected_bytes = expected_count * sizeof(T);
    if (bytes.size() != expected_bytes) {
        throw LoadError(p.filename().string() + ": size mismatch, expected " + std::to_string(expected_bytes) +
                        " bytes from meta.json, found " + std::to_string(bytes.size()));
    }
    std::vector<T> out(expected_count);
    if (expected_bytes > 0) std::memcpy(out.data(), bytes.data(), expected_bytes);
    return out;
}

std::vector<NodeId> split_ids(const json& split, const char* key) {
    if (!split.contains(key) || !split[key].is_array()) {
        throw LoadError(std::string("split.json: missing array '") + key + "'");
    }
    std::vector<NodeId> ids;
    for (const auto& v : split[key]) {
        if (!v.is_number_unsigned()) throw LoadError(std::string("split.json: non-integer id in '") + key + "'");
        ids.push_back(v.get<NodeId>());
    }
    return ids;
}

template <typename T>
void write_binary(const fs::path& p, const std::vector<T>& data) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(T)));
    if (!out) throw std::runtime_error("failed writing " + p.string());
}

}  // namespace

void validate(const Dataset& ds) {
    const std::size_t n = ds.num_nodes();
    if (ds.features.rows() != n) {
        throw LoadError("feature matrix has " + std::to_string(ds.features.rows()) + " rows for " + std::to_string(n) +
                        " nodes");
    }
    if (ds.labels.size() != n) throw LoadError("label count differs from node count");
    for (std::size_t v = 0; v < n; ++v) {
        if (ds.labels[v] >= ds.num_classes) {
            throw LoadError("label " + std::to_string(ds.labels[v]) + " of node " + std::to_string(v) +
                            " outside [0, " + std::to_string(ds.num_classes) + ")");
        }
    }
    std::vector<int> owner(n, -1);
    const std::vector<NodeId>* sets[] = {&ds.split.train, &ds.split.val, &ds.split.test};
    const char* names[] = {"train", "val", "test"};
    for (int s = 0; s < 3; ++s) {
        for (NodeId v : *sets[s]) {
            if (v >= n) throw LoadError(std::string(names[s]) + " split references node " + std::to_string(v));
            if (owner[v] == s) throw LoadError(std::string(names[s]) + " split lists node " + std::to_string(v) + " twice");
            if (owner[v] >= 0) {
                throw LoadError(std::string("overlapping splits: node ") + std::to_string(v) + " in both " +
                                names[owner[v]] + " and " + names[s]);
            }
            owner[v] = s;
        }
    }
}

Dataset load_dataset(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw LoadError("dataset directory not found: " + dir.string());
    const json meta = read_json(dir / "meta.json");
    Dataset ds;
    ds.name = meta.value("name", std::string{});
    const std::size_t n = meta_count(meta, "num_nodes");
    const std::size_t d = meta_count(meta, "num_features");
    ds.num_classes = meta_count(meta, "num_classes");
    const std::size_t m = meta_count(meta, "num_undirected_edges");

    const auto raw_edges = decode_exact<std::uint32_t>(dir / "edges.u32le", 2 * m);
    std::vector<Edge> edges(m);
    for (std::size_t e = 0; e < m; ++e) {
        const NodeId u = raw_edges[2 * e], v = raw_edges[2 * e + 1];
        if (u >= n || v >= n) {
            throw LoadError("edges.u32le: edge " + std::to_string(e) + " references node id >= " + std::to_string(n));
        }
        if (u == v) throw LoadError("edges.u32le: self-loop on node " + std::to_string(u));
        if (u > v) throw LoadError("edges.u32le: edge " + std::to_string(e) + " not stored as (min, max)");
        edges[e] = {u, v};
    }
    try {
        ds.graph = CsrGraph::from_undirected_edges(n, edges);
        gnnstrat::validate(ds.graph);
    } catch (const GraphError& e) {
        throw LoadError(std::string("edges.u32le: ") + e.what());
    }

    const auto feats = decode_exact<float>(dir / "features.f32le", n * d);
    ds.features = Matrix(n, d, std::vector<double>(feats.begin(), feats.end()));
    if (!ds.features.all_finite()) throw LoadError("features.f32le: non-finite feature value");

    ds.labels = decode_exact<std::uint32_t>(dir / "labels.u32le", n);

    const json split = read_json(dir / "split.json");
    ds.split.train = split_ids(split, "train");
    ds.split.val = split_ids(split, "val");
    ds.split.test = split_ids(split, "test");

    validate(ds);
    return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
    validate(ds);
    fs::create_directories(dir);
    const auto edges = ds.graph.edge_list();
    std::vector<std::uint32_t> flat;
    flat.reserve(edges.size() * 2);
    for (const auto& [u, v] : edges) {
        flat.push_back(u);
        flat.push_back(v);
    }
    write_binary(dir / "edges.u32le", flat);
    std::vector<float> feats(ds.features.data().begin(), ds.features.data().end());
    write_binary(dir / "features.f32le", feats);
    write_binary(dir / "labels.u32le", ds.labels);

    json meta = {{"name", ds.name},
                 {"num_nodes", ds.num_nodes()},
                 {"num_features", ds.num_features()},
                 {"num_classes", ds.num_classes},
                 {"num_undirected_edges", edges.size()}};
    std::ofstream(dir / "meta.json") << meta.dump(2) << "\n";
    json split = {{"train", ds.split.train}, {"val", ds.split.val}, {"test", ds.split.test}};
    std::ofstream(dir / "split.json") << split.dump() << "\n";
}

}  // namespace gnnstrat
