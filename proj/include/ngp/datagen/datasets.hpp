#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ngp/core/error.hpp"
#include "ngp/geometry/camera.hpp"
#include "ngp/tensor/ops.hpp"
#include "ngp/tensor/serialize.hpp"

namespace ngp {

/// Where and how one sample was viewed.
struct SampleInfo {
    std::uint64_t shape_seed = 0;
    double theta_deg = 0.0;
    double phi_deg = 0.0;
    Camera camera;
};

/// "Real" depth domain: normalized depth and NOC per sample.
struct DepthSet {
    std::vector<SampleInfo> info;
    Tensor<float> depth;  // [N,1,H,W] normalized depth, background 0
    Tensor<float> noc;    // [N,3,H,W]
    std::int64_t size() const { return static_cast<std::int64_t>(info.size()); }
};

/// "Real" reflectance-map domain: detailed normals and diffuse albedo.
struct MapSet {
    std::vector<SampleInfo> info;
    Tensor<float> normal;  // [N,3,H,W] view frame, unit on foreground
    Tensor<float> albedo;  // [N,3,H,W] in [0,1]
    Tensor<float> mask;    // [N,1,H,W]
    Tensor<float> depth;   // [N,1,H,W] normalized depth of the same view
    std::int64_t size() const { return static_cast<std::int64_t>(info.size()); }
};

/// "Real photo" domain: diffuse renders with baked highlights, plus the
/// diffuse-only render of each image.
struct ImageSet {
    std::vector<SampleInfo> info;
    Tensor<float> image;    // [N,3,H,W]
    Tensor<float> diffuse;  // [N,3,H,W]
    Tensor<float> mask;     // [N,1,H,W]
    std::int64_t size() const { return static_cast<std::int64_t>(info.size()); }
};

inline nlohmann::json camera_to_json(const Camera& c) {
    auto mat = [](const Mat3& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (int i = 0; i < 3; ++i) rows.push_back({m(i, 0), m(i, 1), m(i, 2)});
        return rows;
    };
    return {{"K", mat(c.K)},          {"R", mat(c.R)},           {"t", {c.t.x(), c.t.y(), c.t.z()}},
            {"width", c.width},       {"height", c.height},      {"focal_mm", c.focal_mm}};
}

inline Camera camera_from_json(const nlohmann::json& j) {
    auto mat = [](const nlohmann::json& rows) {
        Mat3 m;
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) m(i, k) = rows.at(i).at(k).get<double>();
        return m;
    };
    Camera c;
    c.K = mat(j.at("K"));
    c.R = mat(j.at("R"));
    const auto& t = j.at("t");
    c.t = Vec3(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.focal_mm = j.value("focal_mm", 50.0);
    return c;
}

/// Sample `i` of a batched [N,...] tensor, keeping the batch axis.
template <typename T>
Tensor<T> sample_of(const Tensor<T>& t, std::int64_t i) {
    return slice(t, 0, i, i + 1);
}

/// Rows `idx` of a batched tensor, in order.
template <typename T>
Tensor<T> gather_samples(const Tensor<T>& t, const std::vector<std::int64_t>& idx) {
    NoGradGuard ng;
    std::vector<Tensor<T>> parts;
    parts.reserve(idx.size());
    for (auto i : idx) parts.push_back(sample_of(t, i));
    return parts.size() == 1 ? parts.front() : concat<T>(parts, 0);
}

// ---------------------------------------------------------------------------
// Manifests. A corpus directory holds manifest.json plus one tensor file pair
// per sample and field (`<field>/<index>.{bin,json}`) and one camera JSON per
// sample (`cameras/<index>.json`).

inline std::vector<Camera> cameras_of(const std::vector<SampleInfo>& info, const std::vector<std::int64_t>& idx) {
    std::vector<Camera> cams;
    for (auto i : idx) cams.push_back(info[static_cast<std::size_t>(i)].camera);
    return cams;
}

namespace detail {

inline std::string sample_stem(const std::string& field, std::int64_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%05lld", static_cast<long long>(i));
    return field + "/" + buf;
}

inline nlohmann::json write_samples(const std::filesystem::path& root, const std::vector<SampleInfo>& info,
                                    const std::vector<std::pair<std::string, Tensor<float>>>& fields) {
    nlohmann::json samples = nlohmann::json::array();
    for (std::size_t i = 0; i < info.size(); ++i) {
        const auto idx = static_cast<std::int64_t>(i);
        nlohmann::json s{{"shape_seed", info[i].shape_seed}, {"theta", info[i].theta_deg}, {"phi", info[i].phi_deg}};
        const std::string cam_rel = sample_stem("cameras", idx) + ".json";
        std::filesystem::create_directories((root / cam_rel).parent_path());
        std::ofstream cam_os(root / cam_rel);
        if (!cam_os) throw IoError("cannot write " + (root / cam_rel).string());
        cam_os << camera_to_json(info[i].camera).dump(2) << "\n";
        s["camera"] = cam_rel;
        nlohmann::json files;
        for (const auto& [name, t] : fields) {
            const std::string rel = sample_stem(name, idx);
            std::filesystem::create_directories((root / rel).parent_path());
            auto one = reshape(sample_of(t, idx), {t.dim(1), t.dim(2), t.dim(3)});
            save_tensor(root / rel, one);
            files[name] = rel;
        }
        s["files"] = files;
        samples.push_back(s);
    }
    return samples;
}

inline std::vector<SampleInfo> read_infos(const std::filesystem::path& root, const nlohmann::json& samples) {
    std::vector<SampleInfo> info;
    for (const auto& s : samples) {
        SampleInfo si;
        si.shape_seed = s.at("shape_seed").get<std::uint64_t>();
        si.theta_deg = s.at("theta").get<double>();
        si.phi_deg = s.at("phi").get<double>();
        std::ifstream is(root / s.at("camera").get<std::string>());
        if (!is) throw IoError("missing camera file " + (root / s.at("camera").get<std::string>()).string());
        si.camera = camera_from_json(nlohmann::json::parse(is));
        info.push_back(si);
    }
    return info;
}

inline Tensor<float> read_field(const std::filesystem::path& root, const nlohmann::json& samples, const std::string& name) {
    std::vector<Tensor<float>> parts;
    for (const auto& s : samples) {
        auto t = load_tensor<float>(root / s.at("files").at(name).get<std::string>());
        parts.push_back(reshape(t, {1, t.dim(0), t.dim(1), t.dim(2)}));
    }
    if (parts.empty()) throw EmptyDatasetError("corpus " + root.string() + " has no samples");
    NoGradGuard ng;
    return concat<float>(parts, 0);
}

inline nlohmann::json read_manifest(const std::filesystem::path& root, const std::string& kind) {
    std::ifstream is(root / "manifest.json");
    if (!is) throw IoError("missing manifest " + (root / "manifest.json").string());
    auto j = nlohmann::json::parse(is);
    if (j.value("kind", "") != kind) {
        throw InvalidArgument("manifest " + (root / "manifest.json").string() + " is not a '" + kind + "' corpus");
    }
    return j;
}

inline void write_manifest(const std::filesystem::path& root, const nlohmann::json& j) {
    std::ofstream os(root / "manifest.json");
    if (!os) throw IoError("cannot write " + (root / "manifest.json").string());
    os << j.dump(2) << "\n";
}

} // namespace detail

/// Depth and map sets of one reflectance corpus. The two halves come from
/// disjoint shape pools and share no sample correspondence.
struct ReflectanceDataset {
    DepthSet depth;
    MapSet maps;
};

inline nlohmann::json save_reflectance_dataset(const std::filesystem::path& root, const ReflectanceDataset& d,
                                               const nlohmann::json& meta) {
    std::filesystem::create_directories(root);
    nlohmann::json j = meta;
    j["kind"] = "reflectance";
    j["counts"] = {{"depth", d.depth.size()}, {"maps", d.maps.size()}};
    j["depth_samples"] =
        detail::write_samples(root / "depth_set", d.depth.info, {{"depth", d.depth.depth}, {"noc", d.depth.noc}});
    j["map_samples"] = detail::write_samples(
        root / "map_set", d.maps.info,
        {{"normal", d.maps.normal}, {"albedo", d.maps.albedo}, {"mask", d.maps.mask}, {"depth", d.maps.depth}});
    detail::write_manifest(root, j);
    return j;
}

inline ReflectanceDataset load_reflectance_dataset(const std::filesystem::path& root) {
    const auto j = detail::read_manifest(root, "reflectance");
    const auto& ds = j.at("depth_samples");
    const auto& ms = j.at("map_samples");
    if (ds.size() != j.at("counts").at("depth").get<std::size_t>() ||
        ms.size() != j.at("counts").at("maps").get<std::size_t>()) {
        throw InvalidArgument("manifest counts do not match its sample lists");
    }
    ReflectanceDataset d;
    d.depth.info = detail::read_infos(root / "depth_set", ds);
    d.depth.depth = detail::read_field(root / "depth_set", ds, "depth");
    d.depth.noc = detail::read_field(root / "depth_set", ds, "noc");
    d.maps.info = detail::read_infos(root / "map_set", ms);
    d.maps.normal = detail::read_field(root / "map_set", ms, "normal");
    d.maps.albedo = detail::read_field(root / "map_set", ms, "albedo");
    d.maps.mask = detail::read_field(root / "map_set", ms, "mask");
    d.maps.depth = detail::read_field(root / "map_set", ms, "depth");
    return d;
}

inline nlohmann::json save_image_set(const std::filesystem::path& root, const ImageSet& s, const nlohmann::json& meta) {
    std::filesystem::create_directories(root);
    nlohmann::json j = meta;
    j["kind"] = "images";
    j["counts"] = {{"images", s.size()}};
    j["samples"] = detail::write_samples(root, s.info, {{"image", s.image}, {"diffuse", s.diffuse}, {"mask", s.mask}});
    detail::write_manifest(root, j);
    return j;
}

inline ImageSet load_image_set(const std::filesystem::path& root) {
    const auto j = detail::read_manifest(root, "images");
    const auto& ss = j.at("samples");
    if (ss.size() != j.at("counts").at("images").get<std::size_t>()) {
        throw InvalidArgument("manifest counts do not match its sample lists");
    }
    ImageSet s;
    s.info = detail::read_infos(root, ss);
    s.image = detail::read_field(root, ss, "image");
    s.diffuse = detail::read_field(root, ss, "diffuse");
    s.mask = detail::read_field(root, ss, "mask");
    return s;
}

} // namespace ngp
