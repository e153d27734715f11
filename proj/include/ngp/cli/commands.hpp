#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ngp/cli/inference.hpp"
#include "ngp/cli/run_config.hpp"
#include "ngp/datagen.hpp"
#include "ngp/io/png.hpp"
#include "ngp/metrics.hpp"
#include "ngp/training.hpp"

namespace ngp {

namespace fs = std::filesystem;

inline std::string indexed(const std::string& prefix, std::int64_t i, const char* ext = "") {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%05lld", static_cast<long long>(i));
    return prefix + buf + ext;
}

inline void write_png_batch(const fs::path& dir, const Tensor<float>& batch) {
    fs::create_directories(dir);
    for (std::int64_t i = 0; i < batch.dim(0); ++i) write_png(dir / indexed("", i, ".png"), sample_of(batch, i));
}

/// Train and held-out corpora produced by `gen_data`.
struct Corpora {
    ReflectanceDataset train;
    ImageSet train_images;
    ReflectanceDataset eval;
    ImageSet eval_images;
};

inline std::vector<std::int64_t> index_range(std::int64_t n) {
    std::vector<std::int64_t> v(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
    return v;
}

/// Diffuse renders of a map set under the training rig.
inline Tensor<float> map_set_diffuse(const MapSet& maps, double k_d) {
    NoGradGuard ng;
    return render_training_diffuse(maps.normal, maps.albedo, maps.mask, cameras_of(maps.info, index_range(maps.size())),
                                   k_d);
}

/// gen-data: train and held-out reflectance corpora and realistic image sets,
/// with PNG copies of every image domain for the `fid` scorer.
inline nlohmann::json gen_data(const RunConfig& cfg, const fs::path& out) {
    const auto& c = cfg.corpus;
    nlohmann::json summary;
    for (const auto& [split, n, seed] : {std::tuple{"train", c.train_size, c.train_seed}, std::tuple{"eval", c.eval_size, c.eval_seed}}) {
        const auto refl = make_reflectance_dataset(n, seed, cfg.data);
        const auto images = make_realistic_image_set(n, seed, cfg.data);
        const nlohmann::json meta{{"seed", seed}, {"data", cfg.data}};
        save_reflectance_dataset(out / split / "reflectance", refl, meta);
        save_image_set(out / split / "images", images, meta);
        write_png_batch(out / split / "png" / "realistic", images.image);
        write_png_batch(out / split / "png" / "map_diffuse", map_set_diffuse(refl.maps, cfg.train.profile.k_d));
        summary[split] = {{"depth", refl.depth.size()}, {"maps", refl.maps.size()}, {"images", images.size()}};
    }
    write_run_config(out, cfg);
    return summary;
}

inline Corpora load_corpora(const fs::path& data_dir, bool with_eval = true) {
    Corpora c;
    c.train = load_reflectance_dataset(data_dir / "train" / "reflectance");
    c.train_images = load_image_set(data_dir / "train" / "images");
    if (with_eval) {
        c.eval = load_reflectance_dataset(data_dir / "eval" / "reflectance");
        c.eval_images = load_image_set(data_dir / "eval" / "images");
    }
    return c;
}

/// Accepts either a training checkpoint (with `model/`) or a bare model directory.
inline Model<float> load_checkpoint_model(const fs::path& path, const ModelConfig* expected = nullptr) {
    if (fs::exists(path / "arch.json")) return load_model<float>(path, expected);
    if (fs::exists(path / "model" / "arch.json")) return load_model<float>(path / "model", expected);
    throw IoError("missing checkpoint: no model under " + path.string());
}

/// JSON-lines loss log plus checkpointing hooks writing into `out`.
class StageRecorder {
public:
    StageRecorder(const fs::path& out, const TrainConfig& cfg, bool append) : out_(out), cfg_(cfg) {
        fs::create_directories(out);
        log_.open(out / "loss_log.jsonl", append ? std::ios::app : std::ios::trunc);
        if (!log_) throw IoError("cannot write " + (out / "loss_log.jsonl").string());
    }

    StageHooks<float> hooks() {
        return {[this](const nlohmann::json& j) {
                    log_ << j.dump() << "\n";
                    log_.flush();
                },
                [this](const TrainState<float>& st) { save_train_state(out_, st, cfg_); }};
    }

private:
    fs::path out_;
    TrainConfig cfg_;
    std::ofstream log_;
};

/// Runs `body`, and on a non-finite loss leaves `diagnostic.json` next to the
/// checkpoint before re-raising.
template <typename F>
void with_diagnostics(const fs::path& out, F&& body) {
    try {
        body();
    } catch (const NonFiniteError& e) {
        fs::create_directories(out);
        std::ofstream os(out / "diagnostic.json");
        os << nlohmann::json{{"error", e.kind()}, {"message", e.what()}}.dump(2) << "\n";
        throw;
    }
}

inline nlohmann::json train_reflectance(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out,
                                        const fs::path& resume = {}) {
    const auto data = load_corpora(data_dir, false);
    TrainState<float> st = resume.empty() ? TrainState<float>{Model<float>(cfg.train.model, cfg.train.seed)}
                                          : load_train_state<float>(resume, &cfg.train.model);
    write_run_config(out, cfg);
    StageRecorder rec(out, cfg.train, !resume.empty() && fs::equivalent(resume, out));
    with_diagnostics(out, [&] { train_reflectance_stage(st, data.train, cfg.train, rec.hooks()); });
    return {{"stage", "reflectance"}, {"iterations", st.iteration}, {"checkpoint", out.string()}};
}

inline nlohmann::json train_specular(const RunConfig& cfg, const fs::path& data_dir, const fs::path& checkpoint,
                                     const fs::path& out) {
    const auto data = load_corpora(data_dir, false);
    TrainState<float> st{load_checkpoint_model(checkpoint, &cfg.train.model)};
    st.stage = Stage::Reflectance;
    write_run_config(out, cfg);
    StageRecorder rec(out, cfg.train, false);
    with_diagnostics(out, [&] { train_specular_stage(st, data.train, data.train_images, cfg.train, rec.hooks()); });
    return {{"stage", "specular"}, {"iterations", st.iteration}, {"checkpoint", out.string()}};
}

/// Reflectance networks from `reflectance_ckpt`, specular networks from `specular_ckpt`.
inline Model<float> merge_checkpoints(const fs::path& reflectance_ckpt, const fs::path& specular_ckpt,
                                      const ModelConfig& expected) {
    auto model = load_checkpoint_model(reflectance_ckpt, &expected);
    const auto spec = load_checkpoint_model(specular_ckpt, &expected);
    const auto nets = joined(specular_generators(), specular_critics());
    auto dst = model.parameters(nets);
    const auto src = spec.parameters(nets);
    for (std::size_t i = 0; i < dst.size(); ++i) {
        std::copy(src[i].second.data().begin(), src[i].second.data().end(), dst[i].second.mutable_data().begin());
    }
    return model;
}

inline nlohmann::json finetune(const RunConfig& cfg, const fs::path& data_dir, const fs::path& reflectance_ckpt,
                               const fs::path& specular_ckpt, const fs::path& out) {
    const auto data = load_corpora(data_dir, false);
    TrainState<float> st{merge_checkpoints(reflectance_ckpt, specular_ckpt, cfg.train.model)};
    write_run_config(out, cfg);
    StageRecorder rec(out, cfg.train, false);
    with_diagnostics(out, [&] { joint_finetune(st, data.train, data.train_images, cfg.train, rec.hooks()); });
    return {{"stage", "joint"}, {"iterations", st.iteration}, {"checkpoint", out.string()}};
}

inline InferenceContext inference_context(const RunConfig& cfg, const Model<float>& model) {
    return {&model, cfg.data, cfg.train.profile};
}

inline nlohmann::json infer_command(const RunConfig& cfg, const fs::path& checkpoint, const InferenceRequest& req,
                                    const fs::path& out) {
    const auto model = load_checkpoint_model(checkpoint, &cfg.train.model);
    write_inference(out, infer(req, inference_context(cfg, model)), req);
    write_run_config(out, cfg);
    return {{"output", out.string()}, {"variant", to_string(req.variant)}};
}

inline nlohmann::json run_sequence(const RunConfig& cfg, const fs::path& checkpoint,
                                   const std::vector<InferenceRequest>& reqs, const fs::path& out) {
    const auto model = load_checkpoint_model(checkpoint, &cfg.train.model);
    const auto ctx = inference_context(cfg, model);
    nlohmann::json frames = nlohmann::json::array();
    for (std::size_t i = 0; i < reqs.size(); ++i) {
        const auto dir = out / indexed("step_", static_cast<std::int64_t>(i));
        write_inference(dir, infer(reqs[i], ctx), reqs[i]);
        frames.push_back(dir.string());
    }
    write_run_config(out, cfg);
    return {{"frames", frames}};
}

inline nlohmann::json sweep_camera(const RunConfig& cfg, const fs::path& checkpoint, const InferenceRequest& req,
                                   int steps, const fs::path& out) {
    return run_sequence(cfg, checkpoint, camera_sweep(req, steps, cfg.data.views()), out);
}

inline nlohmann::json sweep_lights(const RunConfig& cfg, const fs::path& checkpoint, const InferenceRequest& req,
                                   int steps, double intensity_scale, const fs::path& out) {
    return run_sequence(cfg, checkpoint, light_sweep(req, steps, intensity_scale), out);
}

inline nlohmann::json sweep_lights(const RunConfig& cfg, const fs::path& checkpoint, const InferenceRequest& req,
                                   const std::vector<LightRig>& rigs, const fs::path& out) {
    return run_sequence(cfg, checkpoint, rig_sequence(req, rigs), out);
}

/// Appearance transfer: z_da becomes the encoder mean of the exemplar albedo image.
inline nlohmann::json transfer_appearance(const RunConfig& cfg, const fs::path& checkpoint, InferenceRequest req,
                                          const fs::path& exemplar, const fs::path& out) {
    req.z_da.clear();
    req.exemplar = exemplar;
    return infer_command(cfg, checkpoint, req, out);
}

/// Images of every held-out depth sample under the training rig, one random
/// albedo code per sample.
inline Tensor<float> render_eval_set(const RunConfig& cfg, const Model<float>& model, const DepthSet& depth,
                                     Ablation ablation, bool diffuse_only = false) {
    const auto ctx = inference_context(cfg, model);
    std::vector<Tensor<float>> out;
    NoGradGuard ng;
    for (std::int64_t i = 0; i < depth.size(); ++i) {
        const auto& info = depth.info[static_cast<std::size_t>(i)];
        Rng rng = Rng::stream(cfg.train.seed, 0x4556414cULL, static_cast<std::uint64_t>(i));
        std::vector<float> z(static_cast<std::size_t>(model.config.code_dim));
        for (auto& v : z) v = static_cast<float>(rng.normal());
        const auto code = Tensor<float>::from_data({1, model.config.code_dim}, z);
        const auto nd = sample_of(depth.depth, i);
        const auto mask = depth_mask(nd);
        Tensor<float> normal;
        if (ablation == Ablation::NoNormalGenerator) {
            const auto d = rasterize_depth(detail::sample_shape(info.shape_seed, cfg.data.family()), info.camera);
            normal = reshape(coarse_normals_from_depth(d, info.camera), {1, 3, nd.dim(2), nd.dim(3)});
        } else {
            normal = mul(model.g_norm(nd), mask);
        }
        const auto albedo = ablation == Ablation::NoAlbedoGenerator
                                ? mul(Tensor<float>::ones({1, 3, nd.dim(2), nd.dim(3)}), mask)
                                : mul(model.g_diffa(concat<float>({sample_of(depth.noc, i), normal}, 1), code), mask);
        const auto diffuse = render_training_diffuse(normal, albedo, mask, {info.camera}, ctx.profile.k_d);
        if (diffuse_only || ablation == Ablation::NoSpecularGenerator) {
            out.push_back(diffuse);
        } else {
            out.push_back(blend(diffuse, realistic_specular(model, normal, diffuse, mask)));
        }
    }
    return concat<float>(out, 0);
}

/// ablate: FID-lite of each variant's images against the held-out realistic set.
inline nlohmann::json run_ablation(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& data_dir,
                                   const fs::path& out, const std::vector<Ablation>& variants = all_ablations()) {
    if (!fs::exists(checkpoint)) throw IoError("missing checkpoint " + checkpoint.string());
    const auto model = load_checkpoint_model(checkpoint, &cfg.train.model);
    const auto eval_refl = load_reflectance_dataset(data_dir / "eval" / "reflectance");
    const auto eval_images = load_image_set(data_dir / "eval" / "images");
    nlohmann::json report{{"target", "eval/images"}, {"n_target", eval_images.size()}, {"F", cfg.features.dim}};
    for (auto v : variants) {
        const auto imgs = render_eval_set(cfg, model, eval_refl.depth, v);
        report["fid_lite"][to_string(v)] = fid_lite(imgs, eval_images.image, cfg.features);
        std::string name = to_string(v);
        std::replace(name.begin(), name.end(), '/', '_');
        write_png_batch(out / "images" / name, imgs);
    }
    fs::create_directories(out);
    std::ofstream os(out / "ablation.json");
    os << report.dump(2) << "\n";
    write_run_config(out, cfg);
    return report;
}

/// fid: FID-lite between two directories of PNG images.
inline nlohmann::json fid_command(const fs::path& a, const fs::path& b, const FeatureConfig& features = {}) {
    const auto ia = read_png_dir(a), ib = read_png_dir(b);
    return {{"fid_lite", fid_lite(ia, ib, features)}, {"n_a", ia.dim(0)}, {"n_b", ib.dim(0)}, {"F", features.dim}};
}

} // namespace ngp
