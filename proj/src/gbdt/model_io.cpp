#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "doseguard/errors.hpp"
#include "doseguard/gbdt.hpp"

namespace doseguard {

namespace {

constexpr const char* kFormatName = "doseguard-gbdt";

nlohmann::ordered_json node_to_json(const TreeNode& n) {
    nlohmann::ordered_json j;
    if (n.is_leaf()) {
        j["leaf_value"] = n.leaf_value;
    } else {
        j["feature"] = n.feature;
        j["threshold"] = n.threshold;
        j["left"] = n.left;
        j["right"] = n.right;
        j["gain"] = n.gain;
    }
    return j;
}

template <typename T>
T field(const nlohmann::json& j, const char* key, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end()) throw FormatError(fmt::format("{}: missing '{}'", where, key));
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw FormatError(fmt::format("{}: '{}' has the wrong type", where, key));
    }
}

Tree tree_from_json(const nlohmann::json& j, std::uint64_t n_features, std::size_t index) {
    const std::string where = fmt::format("tree {}", index);
    if (!j.is_array() || j.empty()) throw FormatError(where + ": expected a non-empty node array");
    Tree tree;
    tree.nodes.reserve(j.size());
    for (std::size_t k = 0; k < j.size(); ++k) {
        const auto& jn = j[k];
        const std::string nwhere = fmt::format("{} node {}", where, k);
        if (!jn.is_object()) throw FormatError(nwhere + ": expected an object");
        TreeNode n;
        if (jn.contains("leaf_value")) {
            n.leaf_value = field<double>(jn, "leaf_value", nwhere);
        } else {
            n.feature = field<std::int32_t>(jn, "feature", nwhere);
            n.threshold = field<double>(jn, "threshold", nwhere);
            n.left = field<std::int32_t>(jn, "left", nwhere);
            n.right = field<std::int32_t>(jn, "right", nwhere);
            n.gain = field<double>(jn, "gain", nwhere);
            const auto size = static_cast<std::int32_t>(j.size());
            if (n.feature < 0 || static_cast<std::uint64_t>(n.feature) >= n_features) {
                throw FormatError(nwhere + ": feature index out of range");
            }
            // Children always follow their parent, which also rules out cycles.
            if (n.left <= static_cast<std::int32_t>(k) || n.right <= static_cast<std::int32_t>(k) || n.left >= size ||
                n.right >= size || n.left == n.right) {
                throw FormatError(nwhere + ": invalid child index");
            }
        }
        tree.nodes.push_back(n);
    }
    std::vector<int> parents(tree.nodes.size(), 0);
    for (const auto& n : tree.nodes) {
        if (n.is_leaf()) continue;
        ++parents[static_cast<std::size_t>(n.left)];
        ++parents[static_cast<std::size_t>(n.right)];
    }
    for (std::size_t k = 1; k < parents.size(); ++k) {
        if (parents[k] != 1) throw FormatError(fmt::format("{}: node {} is not reachable exactly once", where, k));
    }
    return tree;
}

}  // namespace

nlohmann::ordered_json model_to_json(const GbdtModel& model) {
    nlohmann::ordered_json j;
    j["format"] = kFormatName;
    j["version"] = kModelFormatVersion;
    j["n_features"] = model.n_features;
    j["learning_rate"] = model.learning_rate;
    j["base_score"] = model.base_score;
    j["best_iteration"] = model.best_iteration;
    j["config"] = model.config.to_json();
    auto trees = nlohmann::ordered_json::array();
    for (const auto& t : model.trees) {
        auto nodes = nlohmann::ordered_json::array();
        for (const auto& n : t.nodes) nodes.push_back(node_to_json(n));
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    return j;
}

GbdtModel model_from_json(const nlohmann::json& j) {
    const std::string where = "model";
    if (!j.is_object()) throw FormatError("model: expected a JSON object");
    if (field<std::string>(j, "format", where) != kFormatName) throw FormatError("model: not a doseguard model");
    const int version = field<int>(j, "version", where);
    if (version != kModelFormatVersion) {
        throw UnsupportedVersionError(
            fmt::format("model format version {} is not supported (expected {})", version, kModelFormatVersion));
    }
    GbdtModel m;
    m.n_features = field<std::uint64_t>(j, "n_features", where);
    m.learning_rate = field<double>(j, "learning_rate", where);
    m.base_score = field<double>(j, "base_score", where);
    m.best_iteration = field<int>(j, "best_iteration", where);
    try {
        m.config = TrainConfig::from_json(field<nlohmann::json>(j, "config", where));
    } catch (const ConfigError& e) {
        throw FormatError(fmt::format("model: bad config: {}", e.what()));
    }
    const auto trees = field<nlohmann::json>(j, "trees", where);
    if (!trees.is_array()) throw FormatError("model: 'trees' must be an array");
    for (std::size_t t = 0; t < trees.size(); ++t) m.trees.push_back(tree_from_json(trees[t], m.n_features, t));
    if (m.best_iteration < 0 || static_cast<std::size_t>(m.best_iteration) > m.trees.size()) {
        throw FormatError("model: best_iteration exceeds the number of trees");
    }
    m.recompute_feature_gain();
    return m;
}

std::string model_to_string(const GbdtModel& model) { return model_to_json(model).dump(1); }

void save_model(const std::filesystem::path& path, const GbdtModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot open {} for writing", path.string()));
    out << model_to_string(model) << '\n';
    if (!out) throw Error(fmt::format("failed writing {}", path.string()));
}

GbdtModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot open model file {}", path.string()));
    std::stringstream buffer;
    buffer << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buffer.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(fmt::format("{}: malformed model JSON: {}", path.string(), e.what()));
    }
    return model_from_json(j);
}

}  // namespace doseguard
