#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ngp/core/error.hpp"
#include "ngp/tensor/tensor.hpp"

namespace ngp {

// On-disk format: `<stem>.bin` holds the flat payload in little-endian order,
// `<stem>.json` holds {"shape": [...], "dtype": "float32" | "float64"}.

namespace detail {

template <typename U>
void write_le(std::ofstream& os, U value) {
    unsigned char bytes[sizeof(U)];
    std::memcpy(bytes, &value, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(U));
    os.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U read_le(const unsigned char* p) {
    unsigned char bytes[sizeof(U)];
    std::memcpy(bytes, p, sizeof(U));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(U));
    U value;
    std::memcpy(&value, bytes, sizeof(U));
    return value;
}

inline std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* ext) {
    return std::filesystem::path(stem.string() + ext);
}

} // namespace detail

enum class DType { Float32, Float64 };

inline const char* dtype_name(DType d) { return d == DType::Float32 ? "float32" : "float64"; }

/// Writes `<stem>.bin` and `<stem>.json`. Parent directories are created.
template <typename T>
void save_tensor(const std::filesystem::path& stem, const Tensor<T>& t, DType dtype = DType::Float32) {
    if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
    {
        std::ofstream os(detail::with_suffix(stem, ".bin"), std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write " + detail::with_suffix(stem, ".bin").string());
        for (T v : t.data()) {
            if (dtype == DType::Float32)
                detail::write_le(os, static_cast<float>(v));
            else
                detail::write_le(os, static_cast<double>(v));
        }
        if (!os) throw IoError("short write to " + detail::with_suffix(stem, ".bin").string());
    }
    nlohmann::json meta{{"shape", t.shape()}, {"dtype", dtype_name(dtype)}};
    std::ofstream js(detail::with_suffix(stem, ".json"), std::ios::trunc);
    if (!js) throw IoError("cannot write " + detail::with_suffix(stem, ".json").string());
    js << meta.dump() << '\n';
}

template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& stem) {
    std::ifstream js(detail::with_suffix(stem, ".json"));
    if (!js) throw IoError("cannot read " + detail::with_suffix(stem, ".json").string());
    nlohmann::json meta;
    try {
        js >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed tensor sidecar " + detail::with_suffix(stem, ".json").string() + ": " + e.what());
    }
    const Shape shape = meta.at("shape").get<Shape>();
    const std::string dtype = meta.at("dtype").get<std::string>();
    const std::size_t width = dtype == "float32" ? 4 : dtype == "float64" ? 8 : 0;
    if (width == 0) throw IoError("unsupported dtype '" + dtype + "' in " + stem.string());
    std::ifstream is(detail::with_suffix(stem, ".bin"), std::ios::binary);
    if (!is) throw IoError("cannot read " + detail::with_suffix(stem, ".bin").string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    const auto n = static_cast<std::size_t>(numel(shape));
    if (bytes.size() != n * width) {
        throw IoError("payload size mismatch in " + stem.string() + ": expected " + std::to_string(n * width) +
                      " bytes, found " + std::to_string(bytes.size()));
    }
    std::vector<T> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        data[i] = width == 4 ? static_cast<T>(detail::read_le<float>(bytes.data() + i * 4))
                             : static_cast<T>(detail::read_le<double>(bytes.data() + i * 8));
    }
    return Tensor<T>::from_data(shape, std::move(data));
}

} // namespace ngp
