#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ngp/cli/commands.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out = true) {
    cmd->add_option("--config", c.config, "JSON run configuration");
    cmd->add_option("--set", c.sets, "override, e.g. train.seed=3 (repeatable)");
    if (needs_out) cmd->add_option("--out", c.out, "output directory")->required();
}

struct RequestArgs {
    std::string file;
    std::optional<std::uint64_t> shape_seed;
    std::optional<double> theta, phi;
    std::optional<std::uint64_t> z_da_seed;
    std::string variant;
    std::string ablation;
    std::optional<int> extra_lights;
    std::uint64_t light_seed = 7;
};

void add_request(CLI::App* cmd, RequestArgs& r) {
    cmd->add_option("--request", r.file, "inference request JSON");
    cmd->add_option("--shape-seed", r.shape_seed, "draws z_shape from N(0, I)");
    cmd->add_option("--theta", r.theta, "camera elevation in degrees");
    cmd->add_option("--phi", r.phi, "camera azimuth in degrees");
    cmd->add_option("--z-da-seed", r.z_da_seed, "draws z_da from N(0, I)");
    cmd->add_option("--variant", r.variant, "NGP, NGP-BP or NGP-plus");
    cmd->add_option("--ablation", r.ablation, "full, w/o-G_norm, w/o-G_diffa or w/o-G_respec");
    cmd->add_option("--extra-lights", r.extra_lights, "random extra lights (NGP-plus default 0, NGP-BP default 1)");
    cmd->add_option("--light-seed", r.light_seed, "seed for the extra lights");
}

std::vector<double> gaussian(std::uint64_t seed, int n) {
    ngp::Rng rng(seed);
    std::vector<double> z(static_cast<std::size_t>(n));
    for (auto& v : z) v = rng.normal();
    return z;
}

ngp::InferenceRequest build_request(const RequestArgs& a, const ngp::RunConfig& cfg) {
    ngp::InferenceRequest r;
    if (!a.file.empty()) r = ngp::request_from_json(ngp::read_json_file(a.file));
    if (a.shape_seed) r.z_shape = gaussian(*a.shape_seed, cfg.data.family().latent_dim);
    if (r.z_shape.empty()) r.z_shape = gaussian(0, cfg.data.family().latent_dim);
    if (a.theta) r.theta_deg = *a.theta;
    if (a.phi) r.phi_deg = *a.phi;
    if (a.z_da_seed) r.z_da = gaussian(*a.z_da_seed, cfg.train.model.code_dim);
    if (r.z_da.empty() && r.exemplar.empty()) r.z_da = gaussian(1, cfg.train.model.code_dim);
    if (!a.variant.empty()) r.variant = ngp::variant_from_string(a.variant);
    if (!a.ablation.empty()) r.ablation = ngp::ablation_from_string(a.ablation);
    // NGP-BP relights with one random extra light unless told otherwise; the
    // other variants add none by default.
    const int n_extra = a.extra_lights.value_or(r.variant == ngp::Variant::NgpBp && r.extra_lights.empty() ? 1 : 0);
    if (n_extra > 0) {
        ngp::Rng rng(a.light_seed);
        r.extra_lights.lights.clear();
        for (int i = 0; i < n_extra; ++i) r.extra_lights.lights.push_back(ngp::random_extra_light(rng));
    }
    return r;
}

ngp::RunConfig resolve(const Common& c) { return ngp::resolve_run_config(c.config, c.sets); }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural graphics pipeline: data generation, training, inference and evaluation"};
    app.require_subcommand(1);

    Common common;
    RequestArgs req;
    std::string data, checkpoint, resume, reflectance_ckpt, specular_ckpt, exemplar, dir_a, dir_b;
    int steps = 8;
    double intensity_scale = 1.0;
    std::vector<std::string> variants;
    std::string rigs_file;
    std::function<json()> run;

    auto* gen = app.add_subcommand("gen-data", "generate train and held-out corpora");
    add_common(gen, common);
    gen->callback([&] { run = [&] { return ngp::gen_data(resolve(common), common.out); }; });

    auto* tr = app.add_subcommand("train-reflectance", "train the reflectance stage");
    add_common(tr, common);
    tr->add_option("--data", data, "gen-data output directory")->required();
    tr->add_option("--resume", resume, "checkpoint directory to continue from");
    tr->callback([&] { run = [&] { return ngp::train_reflectance(resolve(common), data, common.out, resume); }; });

    auto* ts = app.add_subcommand("train-specular", "train the realistic-specular stage");
    add_common(ts, common);
    ts->add_option("--data", data, "gen-data output directory")->required();
    ts->add_option("--checkpoint", checkpoint, "reflectance-stage checkpoint")->required();
    ts->callback([&] { run = [&] { return ngp::train_specular(resolve(common), data, checkpoint, common.out); }; });

    auto* ft = app.add_subcommand("finetune", "joint fine-tuning of both stages");
    add_common(ft, common);
    ft->add_option("--data", data, "gen-data output directory")->required();
    ft->add_option("--reflectance", reflectance_ckpt, "reflectance-stage checkpoint")->required();
    ft->add_option("--specular", specular_ckpt, "specular-stage checkpoint")->required();
    ft->callback([&] {
        run = [&] { return ngp::finetune(resolve(common), data, reflectance_ckpt, specular_ckpt, common.out); };
    });

    auto* inf = app.add_subcommand("infer", "render one image and its intermediate maps");
    add_common(inf, common);
    inf->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    add_request(inf, req);
    inf->callback([&] {
        run = [&] {
            const auto cfg = resolve(common);
            return ngp::infer_command(cfg, checkpoint, build_request(req, cfg), common.out);
        };
    });

    auto* sc = app.add_subcommand("sweep-camera", "azimuth sweep over the view range");
    add_common(sc, common);
    sc->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    sc->add_option("--steps", steps, "number of frames");
    add_request(sc, req);
    sc->callback([&] {
        run = [&] {
            const auto cfg = resolve(common);
            return ngp::sweep_camera(cfg, checkpoint, build_request(req, cfg), steps, common.out);
        };
    });

    auto* sl = app.add_subcommand("sweep-lights", "rotate the light rig about the vertical axis");
    add_common(sl, common);
    sl->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    sl->add_option("--steps", steps, "number of frames");
    sl->add_option("--intensity-scale", intensity_scale, "multiplier on every light intensity");
    sl->add_option("--rigs", rigs_file, "JSON array of rigs to render in order instead of the rotation");
    add_request(sl, req);
    sl->callback([&] {
        run = [&] {
            const auto cfg = resolve(common);
            const auto request = build_request(req, cfg);
            if (!rigs_file.empty()) {
                std::vector<ngp::LightRig> rigs;
                for (const auto& j : ngp::read_json_file(rigs_file)) rigs.push_back(ngp::rig_from_json(j));
                return ngp::sweep_lights(cfg, checkpoint, request, rigs, common.out);
            }
            return ngp::sweep_lights(cfg, checkpoint, request, steps, intensity_scale, common.out);
        };
    });

    auto* tf = app.add_subcommand("transfer", "take the appearance code from an exemplar albedo image");
    add_common(tf, common);
    tf->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    tf->add_option("--exemplar", exemplar, "albedo PNG")->required();
    add_request(tf, req);
    tf->callback([&] {
        run = [&] {
            const auto cfg = resolve(common);
            return ngp::transfer_appearance(cfg, checkpoint, build_request(req, cfg), exemplar, common.out);
        };
    });

    auto* ab = app.add_subcommand("ablate", "FID-lite of ablated pipelines on the held-out set");
    add_common(ab, common);
    ab->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    ab->add_option("--data", data, "gen-data output directory")->required();
    ab->add_option("--variants", variants, "subset of full, w/o-G_norm, w/o-G_diffa, w/o-G_respec");
    ab->callback([&] {
        run = [&] {
            std::vector<ngp::Ablation> which;
            for (const auto& v : variants) which.push_back(ngp::ablation_from_string(v));
            if (which.empty()) which = ngp::all_ablations();
            return ngp::run_ablation(resolve(common), checkpoint, data, common.out, which);
        };
    });

    auto* fid = app.add_subcommand("fid", "FID-lite between two PNG directories");
    add_common(fid, common, false);
    fid->add_option("a", dir_a, "first image directory")->required();
    fid->add_option("b", dir_b, "second image directory")->required();
    fid->callback([&] { run = [&] { return ngp::fid_command(dir_a, dir_b, resolve(common).features); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        std::cout << run().dump(2) << std::endl;
        return 0;
    } catch (const ngp::Error& e) {
        std::cerr << json{{"error", e.kind()}, {"message", e.what()}}.dump() << std::endl;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << std::endl;
    }
    return 1;
}
