#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gms/tensor.hpp"

namespace gms {

// Minimal bit-exact tensor container:
//   magic "GMST" | version u32 LE (=1) | header_len u64 LE | header | payload
// The header is UTF-8 JSON listing tensors {name, dtype, shape, offset,
// nbytes} plus a free-form string metadata map. Offsets are relative to the
// payload start, 8-byte aligned, ascending and non-overlapping; floats are
// stored little-endian regardless of host. Serialization is canonical
// (tensors sorted by name), so write-read-write reproduces identical bytes.

struct ArchiveTensor {
    std::string dtype;  // "f32" | "f64"
    Shape shape;
    std::vector<uint8_t> bytes;  // little-endian payload

    size_t numel() const { return shape_numel(shape); }
};

class Archive {
  public:
    std::map<std::string, ArchiveTensor> tensors;   // name -> tensor, canonically sorted
    std::map<std::string, std::string> metadata;

    void add(const std::string& name, const Tensor<float>& t);
    void add(const std::string& name, const Tensor<double>& t);

    bool has(const std::string& name) const { return tensors.count(name) > 0; }
    Tensor<float> get_f32(const std::string& name) const;
    Tensor<double> get_f64(const std::string& name) const;
    const std::string& meta(const std::string& key) const;
};

void write_archive(const std::string& path, const Archive& a);
Archive read_archive(const std::string& path);

}  // namespace gms
