#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "ngp/losses.hpp"
#include "ngp/nets/model.hpp"
#include "ngp/shading/lights.hpp"
#include "ngp/training/adam.hpp"

namespace ngp {

struct StageIterations {
    std::int64_t reflectance = 2000;
    std::int64_t specular = 1000;
    std::int64_t joint = 500;
};

struct TrainConfig {
    AdamConfig adam;
    int batch_size = 1;
    StageIterations iterations;
    std::uint64_t seed = 0;
    ModelConfig model;
    ShadingProfile profile = ShadingProfile::car();
    GanObjective gan = GanObjective::LeastSquares;
    LossWeights weights;
    SpecularWeights specular_weights;
    double distance = 2.0;          // camera distance the depth normalization assumes
    double mask_threshold = 0.1;    // generated normalized depth above this is foreground
    std::int64_t checkpoint_every = 0;  // 0: only at the end of a stage

    void validate() const {
        if (!(adam.lr > 0)) throw InvalidArgument("train config: lr must be positive");
        if (batch_size < 1) throw InvalidArgument("train config: batch_size must be at least 1");
        if (iterations.reflectance < 0 || iterations.specular < 0 || iterations.joint < 0) {
            throw InvalidArgument("train config: iterations must be non-negative");
        }
    }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"adam", c.adam},
         {"batch_size", c.batch_size},
         {"iterations",
          {{"reflectance", c.iterations.reflectance}, {"specular", c.iterations.specular}, {"joint", c.iterations.joint}}},
         {"seed", c.seed},
         {"model", c.model},
         {"profile", {{"k_d", c.profile.k_d}, {"k_s", c.profile.k_s}}},
         {"gan", to_string(c.gan)},
         {"weights", c.weights},
         {"specular_weights", c.specular_weights},
         {"distance", c.distance},
         {"mask_threshold", c.mask_threshold},
         {"checkpoint_every", c.checkpoint_every}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    if (j.contains("adam")) c.adam = j["adam"].get<AdamConfig>();
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("iterations")) {
        const auto& it = j["iterations"];
        c.iterations.reflectance = it.value("reflectance", c.iterations.reflectance);
        c.iterations.specular = it.value("specular", c.iterations.specular);
        c.iterations.joint = it.value("joint", c.iterations.joint);
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("model")) c.model = j["model"].get<ModelConfig>();
    if (j.contains("profile")) {
        const auto& p = j["profile"];
        if (p.is_string()) {
            c.profile = ShadingProfile::named(p.get<std::string>());
        } else {
            c.profile.k_d = p.value("k_d", c.profile.k_d);
            c.profile.k_s = p.value("k_s", c.profile.k_s);
        }
    }
    if (j.contains("gan")) c.gan = gan_objective_from_string(j["gan"].get<std::string>());
    if (j.contains("weights")) c.weights = j["weights"].get<LossWeights>();
    if (j.contains("specular_weights")) c.specular_weights = j["specular_weights"].get<SpecularWeights>();
    c.distance = j.value("distance", c.distance);
    c.mask_threshold = j.value("mask_threshold", c.mask_threshold);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
}

} // namespace ngp
