#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "ngp/cli/commands.hpp"
#include "test_util.hpp"

namespace ngp::testing {

namespace fs = std::filesystem;

/// Small enough that a full gen-data / train / infer round runs in seconds.
inline RunConfig tiny_run_config() {
    RunConfig c;
    c.data.resolution = 16;
    c.corpus.train_size = 6;
    c.corpus.eval_size = 4;
    c.train.model.resolution = 16;
    c.train.model.base = 8;
    c.train.model.disc_base = 8;
    c.train.model.n_res = 1;
    c.train.iterations = {2, 2, 1};
    c.train.seed = 9;
    return c;
}

/// Fresh, empty directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("ngp_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

inline std::string file_bytes(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

/// Relative paths that are missing on one side or differ byte-wise.
inline std::vector<std::string> tree_differences(const fs::path& a, const fs::path& b) {
    std::vector<std::string> out;
    auto walk = [&](const fs::path& from, const fs::path& to, bool compare) {
        for (const auto& e : fs::recursive_directory_iterator(from)) {
            if (!e.is_regular_file()) continue;
            const auto rel = fs::relative(e.path(), from);
            if (!fs::exists(to / rel)) {
                out.push_back(rel.string() + " (missing)");
            } else if (compare && file_bytes(e.path()) != file_bytes(to / rel)) {
                out.push_back(rel.string());
            }
        }
    };
    walk(a, b, true);
    walk(b, a, false);
    return out;
}

inline std::size_t file_count(const fs::path& dir) {
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.is_regular_file();
    return n;
}

/// Model with random weights saved as a bare checkpoint.
inline fs::path random_checkpoint(const RunConfig& cfg, const fs::path& dir, std::uint64_t seed = 3) {
    save_model(dir, Model<float>(cfg.train.model, seed));
    return dir;
}

/// Same checkpoint with every g_respec parameter set to zero.
inline fs::path zero_respec_checkpoint(const RunConfig& cfg, const fs::path& from, const fs::path& dir) {
    auto m = load_checkpoint_model(from, &cfg.train.model);
    for (auto& [name, t] : m.parameters({"g_respec"})) {
        Tensor<float> h = t;
        std::fill(h.mutable_data().begin(), h.mutable_data().end(), 0.f);
    }
    save_model(dir, m);
    return dir;
}

inline InferenceRequest test_request(const RunConfig& cfg, std::uint64_t seed = 4) {
    Rng rng(seed);
    InferenceRequest r;
    r.z_shape.resize(static_cast<std::size_t>(cfg.data.family().latent_dim));
    for (auto& v : r.z_shape) v = rng.normal();
    r.z_da.resize(static_cast<std::size_t>(cfg.train.model.code_dim));
    for (auto& v : r.z_da) v = rng.normal();
    return r;
}

/// Frame directories written by a sweep.
inline std::vector<fs::path> sweep_frames(const fs::path& out, int steps) {
    std::vector<fs::path> v;
    for (int i = 0; i < steps; ++i) v.push_back(out / indexed("step_", i));
    return v;
}

/// Largest difference between each frame's emitted depth map and a direct
/// rasterization of the requested shape from the requested pose.
inline double camera_sweep_depth_error(const RunConfig& cfg, const std::vector<fs::path>& frames) {
    double worst = 0.0;
    for (const auto& f : frames) {
        const auto req = request_from_json(read_json_file(f / "request.json"));
        const auto cam = orbit_camera(req.theta_deg, req.phi_deg, cfg.data.views());
        const auto direct = rasterize_depth(sample_coarse_shape(req.z_shape, cfg.data.family()), cam);
        const auto emitted = load_tensor<float>(f / "depth");
        if (emitted.shape() != direct.shape()) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, max_abs_diff(emitted.data(), direct.data()));
    }
    return worst;
}

} // namespace ngp::testing
