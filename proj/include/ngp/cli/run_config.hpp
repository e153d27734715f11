#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ngp/datagen/generate.hpp"
#include "ngp/metrics/frechet.hpp"
#include "ngp/training/config.hpp"

namespace ngp {

/// Sizes and seeds of the generated corpora.
struct CorpusConfig {
    std::int64_t train_size = 500;
    std::int64_t eval_size = 300;
    std::uint64_t train_seed = 1;
    std::uint64_t eval_seed = 2;
};

/// Complete experiment configuration, serialized as one JSON document and
/// copied into every output directory.
struct RunConfig {
    DataConfig data;
    CorpusConfig corpus;
    TrainConfig train;
    FeatureConfig features;
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
    j = {{"data", c.data},
         {"corpus",
          {{"train_size", c.corpus.train_size},
           {"eval_size", c.corpus.eval_size},
           {"train_seed", c.corpus.train_seed},
           {"eval_seed", c.corpus.eval_seed}}},
         {"train", c.train},
         {"features", {{"grid", c.features.grid}, {"dim", c.features.dim}, {"seed", c.features.seed}}}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
    static const std::vector<std::string> known{"data", "corpus", "train", "features"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw InvalidArgument("run config: unknown section '" + key + "'");
        }
    }
    if (j.contains("data")) c.data = j["data"].get<DataConfig>();
    if (j.contains("corpus")) {
        const auto& k = j["corpus"];
        c.corpus.train_size = k.value("train_size", c.corpus.train_size);
        c.corpus.eval_size = k.value("eval_size", c.corpus.eval_size);
        c.corpus.train_seed = k.value("train_seed", c.corpus.train_seed);
        c.corpus.eval_seed = k.value("eval_seed", c.corpus.eval_seed);
    }
    if (j.contains("train")) c.train = j["train"].get<TrainConfig>();
    if (j.contains("features")) {
        const auto& f = j["features"];
        c.features.grid = f.value("grid", c.features.grid);
        c.features.dim = f.value("dim", c.features.dim);
        c.features.seed = f.value("seed", c.features.seed);
    }
    if (c.train.model.resolution != c.data.resolution) {
        throw InvalidArgument("run config: train.model.resolution (" + std::to_string(c.train.model.resolution) +
                              ") must equal data.resolution (" + std::to_string(c.data.resolution) + ")");
    }
}

/// Applies "a.b.c=value" overrides; the value is parsed as JSON when
/// possible and taken as a string otherwise.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidArgument("override '" + assignment + "' is not key=value");
    std::string path = "/" + assignment.substr(0, eq);
    std::replace(path.begin(), path.end(), '.', '/');
    const std::string raw = assignment.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error&) {
        value = raw;
    }
    doc[nlohmann::json::json_pointer(path)] = value;
}

/// Defaults, then the optional config file, then the overrides.
inline RunConfig resolve_run_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
    nlohmann::json doc = RunConfig{};
    if (!file.empty()) {
        std::ifstream is(file);
        if (!is) throw IoError("cannot read config " + file.string());
        try {
            doc.merge_patch(nlohmann::json::parse(is));
        } catch (const nlohmann::json::parse_error& e) {
            throw InvalidArgument("malformed config " + file.string() + ": " + e.what());
        }
    }
    for (const auto& o : overrides) apply_override(doc, o);
    try {
        return doc.get<RunConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("invalid config: ") + e.what());
    }
}

inline void write_run_config(const std::filesystem::path& dir, const RunConfig& c) {
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / "run_config.json");
    if (!os) throw IoError("cannot write " + (dir / "run_config.json").string());
    os << nlohmann::json(c).dump(2) << "\n";
}

} // namespace ngp
