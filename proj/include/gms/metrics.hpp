#pragma once

#include <cstdint>
#include <vector>

#include "gms/common.hpp"

namespace gms {

// Binary segmentation mask, values in {0,1}.
struct Mask {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> v;

    Mask() = default;
    Mask(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, 0) {}

    uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
    uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }

    size_t area() const {
        size_t n = 0;
        for (uint8_t p : v) n += p;
        return n;
    }
    bool empty_fg() const { return area() == 0; }
    bool operator==(const Mask& o) const { return h == o.h && w == o.w && v == o.v; }
};

struct MetricResult {
    double dsc = 0.0;
    double iou = 0.0;
    double hd95 = 0.0;
};

// dsc = 2|A^B|/(|A|+|B|), iou = |A^B|/|AvB|; both-empty convention: 1/1.
std::pair<double, double> dsc_iou(const Mask& a, const Mask& b);

// 95th-percentile symmetric boundary Hausdorff distance in pixels.
// Boundary = foreground pixel with a background 4-neighbor or on the image
// edge; percentile is nearest-rank (index ceil(0.95 n) of the ascending
// sorted list). Both masks empty -> 0; exactly one empty -> image diagonal.
double hd95(const Mask& a, const Mask& b);

MetricResult all_metrics(const Mask& truth, const Mask& pred);

// Boundary pixel coordinates (row, col) in row-major scan order.
std::vector<std::pair<int, int>> boundary_pixels(const Mask& m);

}  // namespace gms
