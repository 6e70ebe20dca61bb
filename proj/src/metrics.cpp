#include "gms/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gms {

namespace {

void check_same_dims(const Mask& a, const Mask& b) {
    if (a.h != b.h || a.w != b.w)
        throw DimensionError(strfmt("masks differ in size: %dx%d vs %dx%d", a.h, a.w, b.h, b.w));
}

// index ceil(0.95*n) of the ascending sorted list, computed in integers to
// avoid 0.95*n rounding artifacts
size_t nearest_rank_95(size_t n) { return (95 * n + 99) / 100; }

// directed 95th percentile of distances from each boundary pixel of `from`
// to the nearest boundary pixel of `to`
double directed_p95(const std::vector<std::pair<int, int>>& from,
                    const std::vector<std::pair<int, int>>& to) {
    std::vector<double> dists;
    dists.reserve(from.size());
    for (const auto& [ay, ax] : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [by, bx] : to) {
            const double dy = ay - by, dx = ax - bx;
            best = std::min(best, dy * dy + dx * dx);
        }
        dists.push_back(std::sqrt(best));
    }
    const size_t rank = nearest_rank_95(dists.size());
    auto nth = dists.begin() + static_cast<std::ptrdiff_t>(rank - 1);
    std::nth_element(dists.begin(), nth, dists.end());
    return *nth;
}

}  // namespace

std::pair<double, double> dsc_iou(const Mask& a, const Mask& b) {
    check_same_dims(a, b);
    size_t inter = 0, ca = 0, cb = 0, uni = 0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        const bool pa = a.v[i] != 0, pb = b.v[i] != 0;
        inter += pa && pb;
        uni += pa || pb;
        ca += pa;
        cb += pb;
    }
    if (ca == 0 && cb == 0) return {1.0, 1.0};
    const double dsc = 2.0 * static_cast<double>(inter) / static_cast<double>(ca + cb);
    const double iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    return {dsc, iou};
}

std::vector<std::pair<int, int>> boundary_pixels(const Mask& m) {
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            if (!m.at(y, x)) continue;
            const bool edge = y == 0 || x == 0 || y == m.h - 1 || x == m.w - 1;
            if (edge || !m.at(y - 1, x) || !m.at(y + 1, x) || !m.at(y, x - 1) || !m.at(y, x + 1))
                out.emplace_back(y, x);
        }
    return out;
}

double hd95(const Mask& a, const Mask& b) {
    check_same_dims(a, b);
    const bool ea = a.empty_fg(), eb = b.empty_fg();
    if (ea && eb) return 0.0;
    if (ea != eb) return std::hypot(static_cast<double>(a.h), static_cast<double>(a.w));
    const auto ba = boundary_pixels(a);
    const auto bb = boundary_pixels(b);
    return std::max(directed_p95(ba, bb), directed_p95(bb, ba));
}

MetricResult all_metrics(const Mask& truth, const Mask& pred) {
    MetricResult r;
    auto [d, i] = dsc_iou(truth, pred);
    r.dsc = d;
    r.iou = i;
    r.hd95 = hd95(truth, pred);
    return r;
}

}  // namespace gms
