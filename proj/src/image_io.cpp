#include "gms/image_io.hpp"

#include <cctype>
#include <cmath>
#include <fstream>

namespace gms {

namespace {

uint8_t quantize(float v) {
    float q = std::round(std::min(std::max(v, 0.0f), 1.0f) * 255.0f);
    return static_cast<uint8_t>(q);
}

struct PnmHeader {
    int width = 0;
    int height = 0;
    int maxval = 0;
    size_t payload_offset = 0;
};

// Parses "P5"/"P6" headers with whitespace and '#' comments; reports byte
// offsets on failure.
PnmHeader parse_header(const std::vector<uint8_t>& raw, const std::string& path, char kind) {
    PnmHeader h;
    size_t pos = 0;
    auto fail = [&](const std::string& what) {
        throw ParseError(strfmt("%s: %s at byte offset %zu", path.c_str(), what.c_str(), pos));
    };
    if (raw.size() < 2 || raw[0] != 'P' || raw[1] != kind) {
        pos = 0;
        fail(strfmt("expected magic 'P%c'", kind));
    }
    pos = 2;
    int fields[3];
    for (int fi = 0; fi < 3; ++fi) {
        // skip whitespace and comments
        for (;;) {
            while (pos < raw.size() && std::isspace(raw[pos])) ++pos;
            if (pos < raw.size() && raw[pos] == '#') {
                while (pos < raw.size() && raw[pos] != '\n') ++pos;
                continue;
            }
            break;
        }
        if (pos >= raw.size() || !std::isdigit(raw[pos])) fail("expected a decimal header field");
        long v = 0;
        while (pos < raw.size() && std::isdigit(raw[pos])) {
            v = v * 10 + (raw[pos] - '0');
            if (v > 1 << 20) fail("header field out of range");
            ++pos;
        }
        fields[fi] = static_cast<int>(v);
    }
    if (pos >= raw.size() || !std::isspace(raw[pos])) fail("expected single whitespace before payload");
    ++pos;
    h.width = fields[0];
    h.height = fields[1];
    h.maxval = fields[2];
    h.payload_offset = pos;
    if (h.width < 1 || h.height < 1) fail("non-positive image dimensions");
    return h;
}

std::vector<uint8_t> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    return std::vector<uint8_t>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void check_payload(const std::vector<uint8_t>& raw, const PnmHeader& h, size_t expect,
                   const std::string& path) {
    const size_t have = raw.size() - h.payload_offset;
    if (have < expect)
        throw ParseError(strfmt("%s: truncated payload, expected %zu bytes but found %zu (offset %zu)",
                                path.c_str(), expect, have, h.payload_offset));
}

}  // namespace

void write_ppm(const std::string& path, const Tensor<float>& image) {
    if (image.rank() != 3 || image.dim(0) != 3)
        throw DimensionError("write_ppm: image must be [3,H,W], got " + shape_str(image.shape()));
    const int H = image.dim(1), W = image.dim(2);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "P6\n" << W << " " << H << "\n255\n";
    const size_t hw = static_cast<size_t>(H) * W;
    std::vector<uint8_t> row(static_cast<size_t>(W) * 3);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c)
                row[static_cast<size_t>(x) * 3 + c] =
                    quantize(image.data()[static_cast<size_t>(c) * hw + static_cast<size_t>(y) * W + x]);
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw IoError("write failed for '" + path + "'");
}

Tensor<float> read_ppm(const std::string& path) {
    auto raw = slurp(path);
    PnmHeader h = parse_header(raw, path, '6');
    if (h.maxval != 255)
        throw ParseError(strfmt("%s: maxval %d unsupported, expected 255", path.c_str(), h.maxval));
    const size_t hw = static_cast<size_t>(h.height) * h.width;
    check_payload(raw, h, hw * 3, path);
    Tensor<float> img = Tensor<float>::zeros({3, h.height, h.width});
    const uint8_t* p = raw.data() + h.payload_offset;
    for (size_t i = 0; i < hw; ++i)
        for (int c = 0; c < 3; ++c)
            img.data()[static_cast<size_t>(c) * hw + i] = static_cast<float>(p[i * 3 + c]) / 255.0f;
    return img;
}

void write_pgm_mask(const std::string& path, const Mask& mask) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "P5\n" << mask.w << " " << mask.h << "\n255\n";
    std::vector<uint8_t> buf(mask.v.size());
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = mask.v[i] ? 255 : 0;
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw IoError("write failed for '" + path + "'");
}

Mask read_pgm_mask(const std::string& path) {
    auto raw = slurp(path);
    PnmHeader h = parse_header(raw, path, '5');
    if (h.maxval != 255)
        throw ParseError(strfmt("%s: maxval %d unsupported, expected 255", path.c_str(), h.maxval));
    const size_t hw = static_cast<size_t>(h.height) * h.width;
    check_payload(raw, h, hw, path);
    Mask m(h.height, h.width);
    const uint8_t* p = raw.data() + h.payload_offset;
    for (size_t i = 0; i < hw; ++i) {
        if (p[i] != 0 && p[i] != 255)
            throw ValidationError(strfmt("%s: mask value %d at pixel %zu is not in {0,255}", path.c_str(),
                                         p[i], i));
        m.v[i] = p[i] ? 1 : 0;
    }
    return m;
}

void write_pgm_gray(const std::string& path, const Tensor<float>& gray) {
    if (gray.rank() != 2)
        throw DimensionError("write_pgm_gray: expected [H,W], got " + shape_str(gray.shape()));
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "P5\n" << gray.dim(1) << " " << gray.dim(0) << "\n255\n";
    std::vector<uint8_t> buf(gray.numel());
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = quantize(gray.data()[i]);
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw IoError("write failed for '" + path + "'");
}

}  // namespace gms
