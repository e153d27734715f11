#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "ngp/training/adam.hpp"
#include "ngp/training/config.hpp"
#include "ngp/training/pipeline.hpp"

namespace ngp {

inline const std::vector<std::string>& reflectance_generators() {
    static const std::vector<std::string> v{"g_norm", "g_diffa", "g_depth", "e_diffa"};
    return v;
}
inline const std::vector<std::string>& reflectance_critics() {
    static const std::vector<std::string> v{"d_norm", "d_diffa", "d_diff", "d_depth", "d_noc"};
    return v;
}
inline const std::vector<std::string>& specular_generators() {
    static const std::vector<std::string> v{"g_respec", "g_despec"};
    return v;
}
inline const std::vector<std::string>& specular_critics() {
    static const std::vector<std::string> v{"d_image"};
    return v;
}

inline std::vector<std::string> joined(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    auto out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

enum class Stage { Reflectance, Specular, Joint };

inline const char* to_string(Stage s) {
    switch (s) {
    case Stage::Reflectance: return "reflectance";
    case Stage::Specular: return "specular";
    case Stage::Joint: return "joint";
    }
    return "?";
}

inline Stage stage_from_string(const std::string& s) {
    if (s == "reflectance") return Stage::Reflectance;
    if (s == "specular") return Stage::Specular;
    if (s == "joint") return Stage::Joint;
    throw InvalidArgument("unknown training stage '" + s + "'");
}

/// Model plus optimizer state of the stage in progress. `iteration` counts
/// completed iterations of `stage`.
template <typename T>
struct TrainState {
    Model<T> model;
    Stage stage = Stage::Reflectance;
    std::int64_t iteration = 0;
    AdamState<T> opt_g, opt_d;

    /// Switches to `s`, resetting the optimizers unless already in it.
    void enter(Stage s) {
        if (stage == s) return;
        stage = s;
        iteration = 0;
        opt_g = {};
        opt_d = {};
    }
};

template <typename T>
void save_train_state(const std::filesystem::path& dir, const TrainState<T>& st, const TrainConfig& cfg) {
    std::filesystem::create_directories(dir);
    save_model(dir / "model", st.model);
    save_adam_state(dir / "optim" / "g", st.opt_g);
    save_adam_state(dir / "optim" / "d", st.opt_d);
    std::ofstream os(dir / "state.json");
    if (!os) throw IoError("cannot write " + (dir / "state.json").string());
    os << nlohmann::json{{"stage", to_string(st.stage)}, {"iteration", st.iteration}, {"config", cfg}}.dump(2) << "\n";
}

template <typename T>
TrainState<T> load_train_state(const std::filesystem::path& dir, const ModelConfig* expected = nullptr) {
    const auto j = read_json_file(dir / "state.json");
    TrainState<T> st;
    st.model = load_model<T>(dir / "model", expected);
    st.stage = stage_from_string(j.at("stage").get<std::string>());
    st.iteration = j.at("iteration").get<std::int64_t>();
    st.opt_g = load_adam_state<T>(dir / "optim" / "g");
    st.opt_d = load_adam_state<T>(dir / "optim" / "d");
    return st;
}

/// Callbacks of a stage run: one JSON record per iteration, and a checkpoint
/// request every `checkpoint_every` iterations.
template <typename T>
struct StageHooks {
    std::function<void(const nlohmann::json&)> log;
    std::function<void(const TrainState<T>&)> checkpoint;
};

namespace detail {

inline std::vector<std::int64_t> draw_indices(Rng& rng, std::int64_t n, int count) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(count));
    for (auto& i : idx) i = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n)));
    return idx;
}

template <typename T>
Tensor<T> draw_code(Rng& rng, int batch, int dim) {
    std::vector<T> v(static_cast<std::size_t>(batch) * dim);
    for (auto& x : v) x = static_cast<T>(rng.normal());
    return Tensor<T>::from_data({batch, dim}, std::move(v));
}

template <typename T>
Tensor<T> sum_terms(const std::map<std::string, Tensor<T>>& terms) {
    Tensor<T> total;
    for (const auto& [name, t] : terms) total = total.defined() ? add(total, t) : t;
    return total;
}

/// Aborts the iteration with the full breakdown if the loss is not finite.
inline void require_finite(double value, const nlohmann::json& record, const char* what) {
    if (!std::isfinite(value)) {
        throw NonFiniteError(std::string("non-finite ") + what + " loss; breakdown: " + record.dump());
    }
}

template <typename T>
void step(TrainState<T>& st, const std::vector<std::string>& nets, const Tensor<T>& loss, AdamState<T>& opt,
          const TrainConfig& cfg) {
    const auto grads = backward(loss);
    adam_step(st.model.parameters(nets), grads, opt, cfg.adam);
}

inline constexpr std::uint64_t kStageStream[3] = {0x5245464cULL, 0x53504543ULL, 0x4a4f494eULL};

inline Rng iteration_rng(const TrainConfig& cfg, Stage s, std::int64_t it) {
    return Rng::stream(cfg.seed, kStageStream[static_cast<int>(s)], static_cast<std::uint64_t>(it));
}

template <typename T>
void run_stage(TrainState<T>& st, Stage s, std::int64_t iterations, const TrainConfig& cfg, const StageHooks<T>& hooks,
               const std::function<nlohmann::json(std::int64_t)>& iterate) {
    cfg.validate();
    st.enter(s);
    while (st.iteration < iterations) {
        auto record = iterate(st.iteration);
        ++st.iteration;
        if (hooks.log) hooks.log(record);
        if (hooks.checkpoint && cfg.checkpoint_every > 0 && st.iteration % cfg.checkpoint_every == 0 &&
            st.iteration < iterations) {
            hooks.checkpoint(st);
        }
    }
    if (hooks.checkpoint) hooks.checkpoint(st);
}

} // namespace detail

/// One reflectance-stage iteration: a generator step on the weighted total,
/// then a critic step on the same batch's detached fakes.
template <typename T>
nlohmann::json reflectance_iteration(TrainState<T>& st, const ReflectanceDataset& data, const TrainConfig& cfg,
                                     std::int64_t it) {
    Rng rng = detail::iteration_rng(cfg, Stage::Reflectance, it);
    const auto di = detail::draw_indices(rng, data.depth.size(), cfg.batch_size);
    const auto mi = detail::draw_indices(rng, data.maps.size(), cfg.batch_size);
    const auto code = detail::draw_code<T>(rng, cfg.batch_size, st.model.config.code_dim);
    auto views = std::make_shared<const BatchViews<T>>(cameras_of(data.depth.info, di), cameras_of(data.maps.info, mi));
    const PipelineConstants k{cfg.profile.k_d, cfg.distance, cfg.mask_threshold};
    const auto batch = reflectance_batch(data, di, mi, code, *views, cfg.profile.k_d);
    const auto f = model_functions(st.model, views, k);

    nlohmann::json record{{"stage", "reflectance"}, {"iteration", it}};
    st.model.set_trainable(reflectance_critics(), false);
    const auto fwd = reflectance_forward(f, batch, cfg.gan);
    const auto g = total_2d_loss(fwd.terms, cfg.weights);
    for (const auto& [name, v] : g.terms) record[name] = v;
    record["g_total"] = static_cast<double>(g.total.item());
    st.model.set_trainable(reflectance_critics(), true);
    detail::require_finite(g.total.item(), record, "generator");
    detail::step(st, reflectance_generators(), g.total, st.opt_g, cfg);

    const auto critic = reflectance_critic_terms(f, batch, fwd.fakes, cfg.gan);
    const auto d_total = detail::sum_terms(critic);
    for (const auto& [name, t] : critic) record[name] = static_cast<double>(t.item());
    record["d_total"] = static_cast<double>(d_total.item());
    detail::require_finite(d_total.item(), record, "critic");
    detail::step(st, reflectance_critics(), d_total, st.opt_d, cfg);
    return record;
}

/// One specular-stage iteration. Reflectance generators are frozen and only
/// supply (normal, diffuse image) from a real depth sample.
template <typename T>
nlohmann::json specular_iteration(TrainState<T>& st, const ReflectanceDataset& data, const ImageSet& images,
                                  const TrainConfig& cfg, std::int64_t it) {
    if (images.size() == 0) throw EmptyDatasetError("image corpus is empty");
    if (data.depth.size() == 0) throw EmptyDatasetError("depth corpus is empty");
    Rng rng = detail::iteration_rng(cfg, Stage::Specular, it);
    const auto di = detail::draw_indices(rng, data.depth.size(), cfg.batch_size);
    const auto ii = detail::draw_indices(rng, images.size(), cfg.batch_size);
    const auto code = detail::draw_code<T>(rng, cfg.batch_size, st.model.config.code_dim);
    GeneratedMaps<T> maps;
    Tensor<T> real;
    {
        NoGradGuard ng;
        maps = generate_maps(st.model, gather_samples(data.depth.depth, di).template cast<T>(),
                             gather_samples(data.depth.noc, di).template cast<T>(), code,
                             cameras_of(data.depth.info, di), cfg.profile.k_d);
        real = gather_samples(images.image, ii).template cast<T>();
    }

    nlohmann::json record{{"stage", "specular"}, {"iteration", it}};
    st.model.set_trainable(specular_critics(), false);
    const auto sf = specular_forward(st.model, maps.normal, maps.diffuse, maps.mask, cfg.gan);
    const auto g = total_specular_loss(sf.terms, cfg.specular_weights);
    for (const auto& [name, v] : g.terms) record[name] = v;
    record["g_total"] = static_cast<double>(g.total.item());
    st.model.set_trainable(specular_critics(), true);
    detail::require_finite(g.total.item(), record, "generator");
    detail::step(st, specular_generators(), g.total, st.opt_g, cfg);

    const auto d = gan_d_loss(st.model.d_image(real), st.model.d_image(sf.composite.detach()), cfg.gan);
    record["d_image"] = static_cast<double>(d.item());
    record["d_total"] = static_cast<double>(d.item());
    detail::require_finite(d.item(), record, "critic");
    detail::step(st, specular_critics(), d, st.opt_d, cfg);
    return record;
}

/// One joint iteration: the reflectance objective plus the specular objective
/// applied to the top cycle's generated maps, with gradients into every generator.
template <typename T>
nlohmann::json joint_iteration(TrainState<T>& st, const ReflectanceDataset& data, const ImageSet& images,
                               const TrainConfig& cfg, std::int64_t it) {
    if (images.size() == 0) throw EmptyDatasetError("image corpus is empty");
    Rng rng = detail::iteration_rng(cfg, Stage::Joint, it);
    const auto di = detail::draw_indices(rng, data.depth.size(), cfg.batch_size);
    const auto mi = detail::draw_indices(rng, data.maps.size(), cfg.batch_size);
    const auto ii = detail::draw_indices(rng, images.size(), cfg.batch_size);
    const auto code = detail::draw_code<T>(rng, cfg.batch_size, st.model.config.code_dim);
    auto views = std::make_shared<const BatchViews<T>>(cameras_of(data.depth.info, di), cameras_of(data.maps.info, mi));
    const PipelineConstants k{cfg.profile.k_d, cfg.distance, cfg.mask_threshold};
    const auto batch = reflectance_batch(data, di, mi, code, *views, cfg.profile.k_d);
    const auto f = model_functions(st.model, views, k);
    Tensor<T> real;
    {
        NoGradGuard ng;
        real = gather_samples(images.image, ii).template cast<T>();
    }

    const auto critics = joined(reflectance_critics(), specular_critics());
    nlohmann::json record{{"stage", "joint"}, {"iteration", it}};
    st.model.set_trainable(critics, false);
    const auto fwd = reflectance_forward(f, batch, cfg.gan);
    const auto g2d = total_2d_loss(fwd.terms, cfg.weights);
    const auto sf = specular_forward(st.model, fwd.fakes.normal, fwd.fakes.diffuse, batch.depth_mask, cfg.gan);
    const auto gsp = total_specular_loss(sf.terms, cfg.specular_weights);
    const auto g_total = add(g2d.total, gsp.total);
    for (const auto& [name, v] : g2d.terms) record[name] = v;
    for (const auto& [name, v] : gsp.terms) record[name] = v;
    record["g_total"] = static_cast<double>(g_total.item());
    st.model.set_trainable(critics, true);
    detail::require_finite(g_total.item(), record, "generator");
    detail::step(st, joined(reflectance_generators(), specular_generators()), g_total, st.opt_g, cfg);

    auto critic = reflectance_critic_terms(f, batch, fwd.fakes, cfg.gan);
    critic["d_image"] = gan_d_loss(st.model.d_image(real), st.model.d_image(sf.composite.detach()), cfg.gan);
    const auto d_total = detail::sum_terms(critic);
    for (const auto& [name, t] : critic) record[name] = static_cast<double>(t.item());
    record["d_total"] = static_cast<double>(d_total.item());
    detail::require_finite(d_total.item(), record, "critic");
    detail::step(st, critics, d_total, st.opt_d, cfg);
    return record;
}

template <typename T>
void train_reflectance_stage(TrainState<T>& st, const ReflectanceDataset& data, const TrainConfig& cfg,
                             const StageHooks<T>& hooks = {}) {
    if (data.depth.size() == 0 || data.maps.size() == 0) throw EmptyDatasetError("reflectance corpus is empty");
    detail::run_stage(st, Stage::Reflectance, cfg.iterations.reflectance, cfg, hooks,
                      [&](std::int64_t it) { return reflectance_iteration(st, data, cfg, it); });
}

template <typename T>
void train_specular_stage(TrainState<T>& st, const ReflectanceDataset& data, const ImageSet& images,
                          const TrainConfig& cfg, const StageHooks<T>& hooks = {}) {
    if (data.depth.size() == 0 || images.size() == 0) throw EmptyDatasetError("specular stage needs depth and image corpora");
    detail::run_stage(st, Stage::Specular, cfg.iterations.specular, cfg, hooks,
                      [&](std::int64_t it) { return specular_iteration(st, data, images, cfg, it); });
}

template <typename T>
void joint_finetune(TrainState<T>& st, const ReflectanceDataset& data, const ImageSet& images, const TrainConfig& cfg,
                    const StageHooks<T>& hooks = {}) {
    if (data.depth.size() == 0 || data.maps.size() == 0 || images.size() == 0) {
        throw EmptyDatasetError("joint fine-tune needs reflectance and image corpora");
    }
    detail::run_stage(st, Stage::Joint, cfg.iterations.joint, cfg, hooks,
                      [&](std::int64_t it) { return joint_iteration(st, data, images, cfg, it); });
}

} // namespace ngp
