#pragma once

// Feed-forward policy runtime for replaying exported weights.
//
// Weights file (JSON):
//   { "obs_dim": N, "act_dim": M, "activation": "tanh",
//     "layers": [ { "rows": out, "cols": in, "w": [row-major out×in], "b": [out] }, ... ],
//     "obs_mean": [N], "obs_std": [N] }        // normalization is optional
//
// Hidden layers apply the activation, the last layer is linear, and the
// output is clamped to [-1, 1].

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace quadgym {

struct DenseLayer {
    Eigen::MatrixXd weight;  ///< rows = outputs, cols = inputs
    Eigen::VectorXd bias;
};

struct PolicyWeights {
    std::size_t obs_dim = 0;
    std::size_t act_dim = 0;
    std::string activation = "tanh";
    std::vector<DenseLayer> layers;
    std::vector<double> obs_mean;
    std::vector<double> obs_std;

    void validate() const {
        if (activation != "tanh") throw std::invalid_argument("PolicyWeights: only tanh activation is supported");
        if (layers.empty()) throw std::invalid_argument("PolicyWeights: no layers");
        std::size_t in = obs_dim;
        for (const auto& l : layers) {
            if (static_cast<std::size_t>(l.weight.cols()) != in)
                throw std::invalid_argument("PolicyWeights: layer shapes do not chain");
            if (l.bias.size() != l.weight.rows()) throw std::invalid_argument("PolicyWeights: bias size mismatch");
            in = static_cast<std::size_t>(l.weight.rows());
        }
        if (in != act_dim) throw std::invalid_argument("PolicyWeights: last layer does not produce act_dim outputs");
        if (!obs_mean.empty() && obs_mean.size() != obs_dim)
            throw std::invalid_argument("PolicyWeights: obs_mean has the wrong size");
        if (!obs_std.empty()) {
            if (obs_std.size() != obs_dim) throw std::invalid_argument("PolicyWeights: obs_std has the wrong size");
            for (double s : obs_std)
                if (!(s > 0.0)) throw std::invalid_argument("PolicyWeights: obs_std must be positive");
        }
    }
};

inline std::vector<double> mlp_forward(const PolicyWeights& w, std::span<const double> obs) {
    if (obs.size() != w.obs_dim) throw std::invalid_argument("mlp_forward: observation has the wrong size");
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(obs.data(), static_cast<Eigen::Index>(obs.size()));
    if (!w.obs_mean.empty()) x -= Eigen::Map<const Eigen::VectorXd>(w.obs_mean.data(), x.size());
    if (!w.obs_std.empty()) x = x.cwiseQuotient(Eigen::Map<const Eigen::VectorXd>(w.obs_std.data(), x.size()));
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
        x = w.layers[i].weight * x + w.layers[i].bias;
        if (i + 1 < w.layers.size()) x = x.array().tanh().matrix();
    }
    std::vector<double> out(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) out[static_cast<std::size_t>(i)] = std::clamp(x(i), -1.0, 1.0);
    return out;
}

inline nlohmann::json to_json(const PolicyWeights& w) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : w.layers) {
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(l.weight.size()));
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) flat.push_back(l.weight(r, c));
        layers.push_back({{"rows", l.weight.rows()},
                          {"cols", l.weight.cols()},
                          {"w", flat},
                          {"b", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
    }
    nlohmann::json j = {{"obs_dim", w.obs_dim}, {"act_dim", w.act_dim}, {"activation", w.activation}, {"layers", layers}};
    if (!w.obs_mean.empty()) j["obs_mean"] = w.obs_mean;
    if (!w.obs_std.empty()) j["obs_std"] = w.obs_std;
    return j;
}

inline PolicyWeights policy_from_json(const nlohmann::json& j) {
    PolicyWeights w;
    w.obs_dim = j.at("obs_dim").get<std::size_t>();
    w.act_dim = j.at("act_dim").get<std::size_t>();
    w.activation = j.value("activation", std::string("tanh"));
    for (const auto& l : j.at("layers")) {
        const auto rows = l.at("rows").get<Eigen::Index>();
        const auto cols = l.at("cols").get<Eigen::Index>();
        const auto flat = l.at("w").get<std::vector<double>>();
        const auto b = l.at("b").get<std::vector<double>>();
        if (rows <= 0 || cols <= 0 || flat.size() != static_cast<std::size_t>(rows * cols))
            throw std::invalid_argument("PolicyWeights: weight array does not match rows × cols");
        DenseLayer layer;
        layer.weight = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            flat.data(), rows, cols);
        layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
        w.layers.push_back(std::move(layer));
    }
    if (j.contains("obs_mean")) w.obs_mean = j["obs_mean"].get<std::vector<double>>();
    if (j.contains("obs_std")) w.obs_std = j["obs_std"].get<std::vector<double>>();
    w.validate();
    return w;
}

inline PolicyWeights load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open policy file " + path);
    return policy_from_json(nlohmann::json::parse(in));
}

}  // namespace quadgym
