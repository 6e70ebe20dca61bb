#include "gms/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace gms {

namespace {

constexpr char kMagic[4] = {'G', 'M', 'S', 'T'};
constexpr uint32_t kVersion = 1;

void store_u32_le(uint32_t v, uint8_t* out) {
    for (int i = 0; i < 4; ++i) out[i] = static_cast<uint8_t>((v >> (8 * i)) & 0xff);
}

void store_u64_le(uint64_t v, uint8_t* out) {
    for (int i = 0; i < 8; ++i) out[i] = static_cast<uint8_t>((v >> (8 * i)) & 0xff);
}

uint32_t load_u32_le(const uint8_t* p) {
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

uint64_t load_u64_le(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

template <typename T>
std::vector<uint8_t> values_to_le(const T* v, size_t n) {
    std::vector<uint8_t> out(n * sizeof(T));
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(out.data(), v, out.size());
    } else {
        for (size_t i = 0; i < n; ++i)
            for (size_t b = 0; b < sizeof(T); ++b)
                out[i * sizeof(T) + b] =
                    reinterpret_cast<const uint8_t*>(v + i)[sizeof(T) - 1 - b];
    }
    return out;
}

template <typename T>
std::vector<T> values_from_le(const std::vector<uint8_t>& bytes) {
    std::vector<T> out(bytes.size() / sizeof(T));
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(out.data(), bytes.data(), bytes.size());
    } else {
        for (size_t i = 0; i < out.size(); ++i)
            for (size_t b = 0; b < sizeof(T); ++b)
                reinterpret_cast<uint8_t*>(out.data() + i)[sizeof(T) - 1 - b] = bytes[i * sizeof(T) + b];
    }
    return out;
}

size_t align8(size_t v) { return (v + 7) & ~static_cast<size_t>(7); }

size_t dtype_size(const std::string& dtype) {
    if (dtype == "f32") return 4;
    if (dtype == "f64") return 8;
    throw FormatError("archive: unknown dtype '" + dtype + "'");
}

}  // namespace

void Archive::add(const std::string& name, const Tensor<float>& t) {
    if (name.empty()) throw UsageError("archive: tensor name must be non-empty");
    if (tensors.count(name)) throw UsageError("archive: duplicate tensor name '" + name + "'");
    tensors[name] = ArchiveTensor{"f32", t.shape(), values_to_le(t.data(), t.numel())};
}

void Archive::add(const std::string& name, const Tensor<double>& t) {
    if (name.empty()) throw UsageError("archive: tensor name must be non-empty");
    if (tensors.count(name)) throw UsageError("archive: duplicate tensor name '" + name + "'");
    tensors[name] = ArchiveTensor{"f64", t.shape(), values_to_le(t.data(), t.numel())};
}

Tensor<float> Archive::get_f32(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw UsageError("archive: no tensor named '" + name + "'");
    if (it->second.dtype != "f32")
        throw UsageError("archive: tensor '" + name + "' has dtype " + it->second.dtype);
    return Tensor<float>::from_data(it->second.shape, values_from_le<float>(it->second.bytes));
}

Tensor<double> Archive::get_f64(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw UsageError("archive: no tensor named '" + name + "'");
    if (it->second.dtype != "f64")
        throw UsageError("archive: tensor '" + name + "' has dtype " + it->second.dtype);
    return Tensor<double>::from_data(it->second.shape, values_from_le<double>(it->second.bytes));
}

const std::string& Archive::meta(const std::string& key) const {
    auto it = metadata.find(key);
    if (it == metadata.end()) throw UsageError("archive: no metadata key '" + key + "'");
    return it->second;
}

void write_archive(const std::string& path, const Archive& a) {
    // assign payload offsets in name order, 8-byte aligned
    nlohmann::json jtensors = nlohmann::json::array();
    size_t offset = 0;
    for (const auto& [name, t] : a.tensors) {
        const size_t expect = t.numel() * dtype_size(t.dtype);
        if (t.bytes.size() != expect)
            throw UsageError(strfmt("archive: tensor '%s' has %zu bytes, shape needs %zu", name.c_str(),
                                    t.bytes.size(), expect));
        nlohmann::json jt;
        jt["name"] = name;
        jt["dtype"] = t.dtype;
        jt["shape"] = t.shape;
        jt["offset"] = offset;
        jt["nbytes"] = t.bytes.size();
        jtensors.push_back(jt);
        offset = align8(offset + t.bytes.size());
    }
    nlohmann::json header;
    header["tensors"] = jtensors;
    header["metadata"] = a.metadata;
    std::string hs = header.dump();
    hs.resize(align8(hs.size()), ' ');  // keep the payload 8-byte aligned

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("archive: cannot open '" + path + "' for writing");
    uint8_t fixed[16];
    std::memcpy(fixed, kMagic, 4);
    store_u32_le(kVersion, fixed + 4);
    store_u64_le(hs.size(), fixed + 8);
    f.write(reinterpret_cast<const char*>(fixed), 16);
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    size_t written = 0;
    for (const auto& [name, t] : a.tensors) {
        f.write(reinterpret_cast<const char*>(t.bytes.data()), static_cast<std::streamsize>(t.bytes.size()));
        written += t.bytes.size();
        const size_t padded = align8(written);
        static const char zeros[8] = {0};
        f.write(zeros, static_cast<std::streamsize>(padded - written));
        written = padded;
    }
    if (!f) throw IoError("archive: write failed for '" + path + "'");
}

Archive read_archive(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("archive: cannot open '" + path + "'");
    std::vector<uint8_t> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (raw.size() < 16) throw FormatError("archive: file too short for fixed header");
    if (std::memcmp(raw.data(), kMagic, 4) != 0) throw FormatError("archive: bad magic bytes");
    const uint32_t version = load_u32_le(raw.data() + 4);
    if (version > kVersion)
        throw VersionError(strfmt("archive: version %u is newer than supported %u", version, kVersion));
    const uint64_t header_len = load_u64_le(raw.data() + 8);
    if (16 + header_len > raw.size())
        throw CorruptionError(strfmt("archive: header claims %llu bytes but file has %zu after prefix",
                                     static_cast<unsigned long long>(header_len), raw.size() - 16));

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(raw.begin() + 16, raw.begin() + 16 + static_cast<long>(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("archive: header is not valid JSON: ") + e.what());
    }

    const size_t payload_start = 16 + header_len;
    const size_t payload_size = raw.size() - payload_start;

    Archive a;
    try {
        a.metadata = header.at("metadata").get<std::map<std::string, std::string>>();
        size_t prev_end = 0;
        for (const auto& jt : header.at("tensors")) {
            ArchiveTensor t;
            const std::string name = jt.at("name").get<std::string>();
            t.dtype = jt.at("dtype").get<std::string>();
            t.shape = jt.at("shape").get<Shape>();
            const size_t offset = jt.at("offset").get<size_t>();
            const size_t nbytes = jt.at("nbytes").get<size_t>();
            if (offset % 8 != 0)
                throw CorruptionError(strfmt("archive: tensor '%s' offset %zu not 8-byte aligned",
                                             name.c_str(), offset));
            if (offset < prev_end)
                throw CorruptionError(strfmt("archive: tensor '%s' overlaps the previous tensor",
                                             name.c_str()));
            if (nbytes != t.numel() * dtype_size(t.dtype))
                throw CorruptionError(strfmt("archive: tensor '%s' nbytes %zu != element size * %zu",
                                             name.c_str(), nbytes, t.numel()));
            if (offset + nbytes > payload_size)
                throw CorruptionError(strfmt(
                    "archive: tensor '%s' needs payload bytes [%zu,%zu) but only %zu are present",
                    name.c_str(), offset, offset + nbytes, payload_size));
            t.bytes.assign(raw.begin() + static_cast<long>(payload_start + offset),
                           raw.begin() + static_cast<long>(payload_start + offset + nbytes));
            if (a.tensors.count(name)) throw CorruptionError("archive: duplicate tensor name '" + name + "'");
            a.tensors[name] = std::move(t);
            prev_end = offset + nbytes;
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("archive: malformed header fields: ") + e.what());
    }
    return a;
}

}  // namespace gms
