// Copyright (c) 2026 stylefuse authors
// SPDX-License-Identifier: Apache-2.0

#include "stylefuse/serialize.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace stylefuse {

namespace {

constexpr char kContainerMagic[4] = {'S', 'F', 'C', '1'};
constexpr char kArchiveMagic[4] = {'S', 'F', 'A', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw CheckpointError("container: truncated header");
    return static_cast<std::uint32_t>(b[0]) |
           (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

float get_f32(std::istream& is) {
    const std::uint32_t bits = get_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u32(os, static_cast<std::uint32_t>(bits & 0xffffffffULL));
    put_u32(os, static_cast<std::uint32_t>(bits >> 32));
}

double get_f64(std::istream& is) {
    const std::uint64_t lo = get_u32(is);
    const std::uint64_t hi = get_u32(is);
    const std::uint64_t bits = lo | (hi << 32);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    return is;
}

struct Header {
    ContainerDtype dtype;
    ContainerKind kind;
    std::vector<std::uint32_t> dims;
};

void write_header(std::ostream& os, ContainerDtype dtype, ContainerKind kind,
                  const std::vector<std::uint32_t>& dims) {
    os.write(kContainerMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(dtype));
    put_u32(os, static_cast<std::uint32_t>(kind));
    put_u32(os, static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) put_u32(os, d);
}

Header read_header(std::istream& is, const std::filesystem::path& path) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kContainerMagic, 4) != 0)
        throw CheckpointError("container: bad magic in " + path.string());
    const std::uint32_t version = get_u32(is);
    if (version != kVersion)
        throw CheckpointError("container: unsupported version " +
                              std::to_string(version) + " in " + path.string());
    Header h;
    const std::uint32_t dtype = get_u32(is);
    if (dtype > 1) throw CheckpointError("container: bad dtype");
    h.dtype = static_cast<ContainerDtype>(dtype);
    h.kind = static_cast<ContainerKind>(get_u32(is));
    const std::uint32_t rank = get_u32(is);
    if (rank > 8) throw CheckpointError("container: implausible rank");
    h.dims.resize(rank);
    for (auto& d : h.dims) d = get_u32(is);
    return h;
}

void write_payload(std::ostream& os, const double* data, std::size_t n,
                   ContainerDtype dtype) {
    if (dtype == ContainerDtype::f32) {
        for (std::size_t i = 0; i < n; ++i)
            put_f32(os, static_cast<float>(data[i]));
    } else {
        for (std::size_t i = 0; i < n; ++i) put_f64(os, data[i]);
    }
}

Eigen::VectorXd read_payload(std::istream& is, std::size_t n,
                             ContainerDtype dtype,
                             const std::filesystem::path& path) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(n));
    if (dtype == ContainerDtype::f32) {
        for (std::size_t i = 0; i < n; ++i)
            out[static_cast<Eigen::Index>(i)] = static_cast<double>(get_f32(is));
    } else {
        for (std::size_t i = 0; i < n; ++i)
            out[static_cast<Eigen::Index>(i)] = get_f64(is);
    }
    if (!is) throw CheckpointError("container: truncated payload in " +
                                   path.string());
    return out;
}

}  // namespace

void save_latent(const std::filesystem::path& path, const LatentCode& code) {
    code.validate();
    auto os = open_out(path);
    write_header(os, ContainerDtype::f32, ContainerKind::latent,
                 {static_cast<std::uint32_t>(code.layers()),
                  static_cast<std::uint32_t>(code.width())});
    write_payload(os, code.values.data(),
                  static_cast<std::size_t>(code.values.size()),
                  ContainerDtype::f32);
    if (!os) throw IoError("failed writing " + path.string());
}

LatentCode load_latent(const std::filesystem::path& path) {
    auto is = open_in(path);
    const Header h = read_header(is, path);
    if (h.kind != ContainerKind::latent || h.dims.size() != 2)
        throw CheckpointError("container: not a latent file: " + path.string());
    const std::size_t n =
        static_cast<std::size_t>(h.dims[0]) * static_cast<std::size_t>(h.dims[1]);
    const Eigen::VectorXd flat = read_payload(is, n, h.dtype, path);
    LatentCode code(h.dims[0], h.dims[1]);
    std::copy(flat.data(), flat.data() + flat.size(), code.values.data());
    return code;
}

void save_pose(const std::filesystem::path& path, const CameraPose& pose) {
    pose.validate();
    auto os = open_out(path);
    write_header(os, ContainerDtype::f32, ContainerKind::pose,
                 {CameraPose::kComponents});
    const auto flat = pose.flatten();
    write_payload(os, flat.data(), CameraPose::kComponents, ContainerDtype::f32);
    if (!os) throw IoError("failed writing " + path.string());
}

CameraPose load_pose(const std::filesystem::path& path) {
    auto is = open_in(path);
    const Header h = read_header(is, path);
    if (h.kind != ContainerKind::pose || h.dims.size() != 1 ||
        h.dims[0] != CameraPose::kComponents)
        throw CheckpointError("container: not a pose file: " + path.string());
    const Eigen::VectorXd flat =
        read_payload(is, CameraPose::kComponents, h.dtype, path);
    Eigen::Matrix<double, CameraPose::kComponents, 1> fixed = flat;
    return CameraPose::from_flat(fixed);
}

void save_array(const std::filesystem::path& path, const Eigen::VectorXd& values,
                ContainerDtype dtype) {
    auto os = open_out(path);
    write_header(os, dtype, ContainerKind::generic,
                 {static_cast<std::uint32_t>(values.size())});
    write_payload(os, values.data(), static_cast<std::size_t>(values.size()),
                  dtype);
    if (!os) throw IoError("failed writing " + path.string());
}

Eigen::VectorXd load_array(const std::filesystem::path& path) {
    auto is = open_in(path);
    const Header h = read_header(is, path);
    if (h.kind != ContainerKind::generic || h.dims.size() != 1)
        throw CheckpointError("container: not an array file: " + path.string());
    return read_payload(is, h.dims[0], h.dtype, path);
}

void TensorArchive::save(const std::filesystem::path& path) const {
    auto os = open_out(path);
    os.write(kArchiveMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(entries.size()));
    for (const auto& [name, values] : entries) {
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<std::uint32_t>(values.size()));
        write_payload(os, values.data(), static_cast<std::size_t>(values.size()),
                      ContainerDtype::f64);
    }
    if (!os) throw IoError("failed writing " + path.string());
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
    auto is = open_in(path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kArchiveMagic, 4) != 0)
        throw CheckpointError("archive: bad magic in " + path.string());
    const std::uint32_t version = get_u32(is);
    if (version != kVersion)
        throw CheckpointError("archive: unsupported version in " + path.string());
    const std::uint32_t count = get_u32(is);
    if (count > 1u << 20) throw CheckpointError("archive: implausible entry count");
    TensorArchive ar;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(is);
        if (name_len > 4096) throw CheckpointError("archive: implausible name");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const std::uint32_t n = get_u32(is);
        ar.entries[name] = read_payload(is, n, ContainerDtype::f64, path);
    }
    return ar;
}

std::string latent_to_text(const LatentCode& code) {
    nlohmann::json j;
    j["kind"] = "latent";
    j["layers"] = code.layers();
    j["width"] = code.width();
    auto& rows = j["values"];
    for (Eigen::Index l = 0; l < code.layers(); ++l) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < code.width(); ++k)
            row.push_back(code.values(l, k));
        rows.push_back(std::move(row));
    }
    return j.dump(2);
}

std::string pose_to_text(const CameraPose& pose) {
    nlohmann::json j;
    j["kind"] = "pose";
    j["yaw_deg"] = pose.yaw_deg();
    j["pitch_deg"] = pose.pitch_deg();
    j["radius"] = pose.radius();
    const auto flat = pose.flatten();
    auto& comp = j["components"];
    for (int i = 0; i < CameraPose::kComponents; ++i) comp.push_back(flat[i]);
    return j.dump(2);
}

}  // namespace stylefuse
