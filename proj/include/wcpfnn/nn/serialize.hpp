#pragma once

// JSON model files:
//   {"format_version": 1, "net_G": NET, "net_v": NET}
//   NET = {"dims": [...], "layers": [{"weights": [row-major], "biases": [...]}],
//          "input_map": {"offset": [...], "scale": [...]}, "output_map": {...}}

#include <wcpfnn/core/errors.hpp>
#include <wcpfnn/nn/mlp.hpp>

#include <Eigen/Dense>
#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace wcpfnn::nn {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd json_vector(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array()) throw ValidationError(what + " must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ValidationError(what + " must contain numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

}  // namespace detail

inline nlohmann::json to_json(const MlpParams& net) {
    nlohmann::json j;
    std::vector<Eigen::Index> dims{net.input_dim()};
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net.layers) {
        dims.push_back(l.outputs());
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weights.size()));
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) w.push_back(l.weights(r, c));
        }
        layers.push_back({{"weights", w}, {"biases", detail::vector_json(l.biases)}});
    }
    j["dims"] = dims;
    j["layers"] = layers;
    j["input_map"] = {{"offset", detail::vector_json(net.input_map.offset)}, {"scale", detail::vector_json(net.input_map.scale)}};
    j["output_map"] = {{"offset", detail::vector_json(net.output_map.offset)},
                       {"scale", detail::vector_json(net.output_map.scale)}};
    return j;
}

inline MlpParams mlp_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("dims") || !j.contains("layers")) throw ValidationError("network JSON needs dims and layers");
    const auto dims = j.at("dims").get<std::vector<Eigen::Index>>();
    const auto& layers = j.at("layers");
    if (dims.size() != layers.size() + 1) throw DimensionError("network dims do not match the layer count");
    MlpParams net;
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const Eigen::VectorXd w = detail::json_vector(layers[k].at("weights"), "weights");
        const Eigen::VectorXd b = detail::json_vector(layers[k].at("biases"), "biases");
        if (w.size() != dims[k + 1] * dims[k] || b.size() != dims[k + 1]) {
            throw DimensionError("layer " + std::to_string(k) + " arrays do not match dims");
        }
        Layer l{Eigen::MatrixXd(dims[k + 1], dims[k]), b};
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = w[r * dims[k] + c];
        }
        net.layers.push_back(std::move(l));
    }
    auto read_map = [&](const char* key, Eigen::Index n) {
        if (!j.contains(key)) return AffineMap::identity(n);
        return AffineMap{detail::json_vector(j.at(key).at("offset"), std::string(key) + ".offset"),
                         detail::json_vector(j.at(key).at("scale"), std::string(key) + ".scale")};
    };
    net.input_map = read_map("input_map", dims.front());
    net.output_map = read_map("output_map", dims.back());
    net.check();
    return net;
}

inline nlohmann::json to_json(const PfnnPair& p) {
    return {{"format_version", kModelFormatVersion}, {"net_G", to_json(p.net_G)}, {"net_v", to_json(p.net_v)}};
}

inline PfnnPair pair_from_json(const nlohmann::json& j) {
    if (!j.contains("format_version") || j.at("format_version") != kModelFormatVersion) {
        throw ValidationError("unsupported model format_version");
    }
    return {mlp_from_json(j.at("net_G")), mlp_from_json(j.at("net_v"))};
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << j.dump(1) << '\n';
    if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace wcpfnn::nn
