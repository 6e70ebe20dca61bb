#include "gms/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace gms {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

float lerp(float a, float b, float t) { return a + (b - a) * t; }

// --- foreground shapes ----------------------------------------------------

Mask rasterize_ellipse(int size, double cx, double cy, double ax, double ay, double theta) {
    Mask m(size, size);
    const double ct = std::cos(theta), st = std::sin(theta);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double u = (dx * ct + dy * st) / ax;
            const double v = (-dx * st + dy * ct) / ay;
            if (u * u + v * v <= 1.0) m.at(y, x) = 1;
        }
    return m;
}

// polygon fill (even-odd rule), then two box-blur passes and a re-threshold
// to round the corners
Mask rasterize_rounded_polygon(int size, const std::vector<double>& vx, const std::vector<double>& vy) {
    const size_t nv = vx.size();
    std::vector<float> ind(static_cast<size_t>(size) * size, 0.0f);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            bool inside = false;
            for (size_t i = 0, j = nv - 1; i < nv; j = i++) {
                const bool crosses = (vy[i] > y) != (vy[j] > y);
                if (crosses && x < (vx[j] - vx[i]) * (y - vy[i]) / (vy[j] - vy[i]) + vx[i])
                    inside = !inside;
            }
            if (inside) ind[static_cast<size_t>(y) * size + x] = 1.0f;
        }
    std::vector<float> tmp(ind.size());
    for (int pass = 0; pass < 2; ++pass) {
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                float acc = 0.0f;
                int cnt = 0;
                for (int dy = -2; dy <= 2; ++dy)
                    for (int dx = -2; dx <= 2; ++dx) {
                        const int yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= size || xx < 0 || xx >= size) continue;
                        acc += ind[static_cast<size_t>(yy) * size + xx];
                        ++cnt;
                    }
                tmp[static_cast<size_t>(y) * size + x] = acc / static_cast<float>(cnt);
            }
        std::swap(ind, tmp);
    }
    Mask m(size, size);
    for (size_t i = 0; i < ind.size(); ++i) m.v[i] = ind[i] >= 0.5f ? 1 : 0;
    return m;
}

Mask draw_shape(const DomainSpec& spec, int size, Rng& rng) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Mask m;
        if (spec.domain == Domain::A) {
            const double cx = rng.uniform(0.30, 0.70) * size;
            const double cy = rng.uniform(0.30, 0.70) * size;
            const double ax = rng.uniform(0.12, 0.32) * size;
            const double ay = rng.uniform(0.12, 0.32) * size;
            const double theta = rng.uniform(0.0, kPi);
            m = rasterize_ellipse(size, cx, cy, ax, ay, theta);
        } else {
            const int nv = 5 + static_cast<int>(rng.below(5));  // 5..9 vertices
            const double cx = rng.uniform(0.35, 0.65) * size;
            const double cy = rng.uniform(0.35, 0.65) * size;
            std::vector<double> vx(nv), vy(nv);
            for (int i = 0; i < nv; ++i) {
                const double ang = 2.0 * kPi * i / nv + rng.uniform(-0.3, 0.3) * (2.0 * kPi / nv);
                const double r = rng.uniform(0.14, 0.32) * size;
                vx[static_cast<size_t>(i)] = cx + r * std::cos(ang);
                vy[static_cast<size_t>(i)] = cy + r * std::sin(ang);
            }
            m = rasterize_rounded_polygon(size, vx, vy);
        }
        const double frac = static_cast<double>(m.area()) / static_cast<double>(m.v.size());
        if (frac >= DomainSpec::kMinArea && frac <= DomainSpec::kMaxArea) return m;
    }
    throw StateError("generate: could not draw a mask inside the [2%,60%] area band");
}

// --- backgrounds ----------------------------------------------------------

void fill_background_a(Tensor<float>& img, const DomainSpec& spec, Rng& rng) {
    const int S = img.dim(1);
    const size_t hw = static_cast<size_t>(S) * S;
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    const double gx = std::cos(phi), gy = std::sin(phi);
    float c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = static_cast<float>(rng.uniform(spec.bg_lo, spec.bg_hi));
        c1[c] = static_cast<float>(rng.uniform(spec.bg_lo, spec.bg_hi));
    }
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            const double t = ((gx * x + gy * y) / S + 1.0) * 0.5;  // [0,1]-ish along gradient
            for (int c = 0; c < 3; ++c)
                img.data()[static_cast<size_t>(c) * hw + static_cast<size_t>(y) * S + x] =
                    lerp(c0[c], c1[c], static_cast<float>(t));
        }
}

void fill_background_b(Tensor<float>& img, const DomainSpec& spec, Rng& rng) {
    const int S = img.dim(1);
    const size_t hw = static_cast<size_t>(S) * S;
    float base[3];
    for (int c = 0; c < 3; ++c) base[c] = static_cast<float>(rng.uniform(spec.bg_lo, spec.bg_hi));
    struct Wave {
        double fx, fy, phase, amp;
    };
    Wave waves[3];
    for (auto& w : waves) {
        w.fx = rng.uniform(1.0, 4.0);
        w.fy = rng.uniform(1.0, 4.0);
        w.phase = rng.uniform(0.0, 2.0 * kPi);
        w.amp = rng.uniform(0.03, 0.08);
    }
    float tint[3];
    for (int c = 0; c < 3; ++c) tint[c] = static_cast<float>(rng.uniform(0.8, 1.2));
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            double tex = 0.0;
            for (const auto& w : waves)
                tex += w.amp * std::sin(2.0 * kPi * (w.fx * x + w.fy * y) / S + w.phase);
            for (int c = 0; c < 3; ++c)
                img.data()[static_cast<size_t>(c) * hw + static_cast<size_t>(y) * S + x] =
                    base[c] + tint[c] * static_cast<float>(tex);
        }
}

void clamp01(Tensor<float>& img) {
    for (size_t i = 0; i < img.numel(); ++i)
        img.data()[i] = std::min(std::max(img.data()[i], 0.0f), 1.0f);
}

}  // namespace

Sample generate_sample(const DomainSpec& spec, int size, uint64_t sample_seed, const std::string& id) {
    Rng rng(sample_seed);
    Sample s;
    s.id = id;
    s.mask = draw_shape(spec, size, rng);
    s.image = Tensor<float>::zeros({3, size, size});
    if (spec.domain == Domain::A)
        fill_background_a(s.image, spec, rng);
    else
        fill_background_b(s.image, spec, rng);

    const size_t hw = static_cast<size_t>(size) * size;
    float fg[3];
    const float fg_base = static_cast<float>(rng.uniform(spec.fg_lo, spec.fg_hi));
    for (int c = 0; c < 3; ++c)
        fg[c] = fg_base + static_cast<float>(rng.uniform(-0.05, 0.05));
    for (size_t i = 0; i < hw; ++i)
        if (s.mask.v[i])
            for (int c = 0; c < 3; ++c) s.image.data()[static_cast<size_t>(c) * hw + i] = fg[c];

    if (spec.domain == Domain::A) {
        for (size_t i = 0; i < s.image.numel(); ++i)
            s.image.data()[i] += static_cast<float>(spec.noise_sigma * rng.normal());
    } else {
        for (size_t i = 0; i < s.image.numel(); ++i)
            s.image.data()[i] *= 1.0f + static_cast<float>(spec.noise_sigma * rng.normal());
    }
    clamp01(s.image);
    return s;
}

void generate_synthetic(const DomainSpec& spec, int n, int size, uint64_t seed, const std::string& root) {
    if (n < 1) throw UsageError("generate_synthetic: n must be >= 1");
    if (size % 8 != 0) throw ConfigError("generate_synthetic: size must be divisible by 8");
    std::error_code ec;
    fs::create_directories(root + "/images", ec);
    fs::create_directories(root + "/masks", ec);
    if (ec) throw IoError("generate_synthetic: cannot create '" + root + "': " + ec.message());

    const uint64_t domain_tag = spec.domain == Domain::A ? 0xA : 0xB;
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
        const std::string id = strfmt("%s%04d", domain_name(spec.domain), i);
        Sample s = generate_sample(spec, size, Rng::derive(seed, domain_tag, static_cast<uint64_t>(i)), id);
        save_sample(root, s);
        ids.push_back(id);
    }
    save_manifest(root, ids);
}

std::vector<std::string> load_manifest(const std::string& root) {
    DatasetPaths p{root};
    std::ifstream f(p.manifest_path());
    if (!f) throw IoError("cannot open manifest '" + p.manifest_path() + "'");
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

void save_manifest(const std::string& root, const std::vector<std::string>& ids) {
    DatasetPaths p{root};
    std::ofstream f(p.manifest_path(), std::ios::trunc);
    if (!f) throw IoError("cannot write manifest '" + p.manifest_path() + "'");
    for (const auto& id : ids) f << id << "\n";
}

Sample load_sample(const std::string& root, const std::string& id) {
    DatasetPaths p{root};
    Sample s;
    s.id = id;
    s.image = read_ppm(p.image_path(id));
    s.mask = read_pgm_mask(p.mask_path(id));
    if (s.image.dim(1) != s.mask.h || s.image.dim(2) != s.mask.w)
        throw ValidationError(strfmt("sample %s: image %dx%d vs mask %dx%d", id.c_str(), s.image.dim(1),
                                     s.image.dim(2), s.mask.h, s.mask.w));
    return s;
}

void save_sample(const std::string& root, const Sample& s) {
    DatasetPaths p{root};
    write_ppm(p.image_path(s.id), s.image);
    write_pgm_mask(p.mask_path(s.id), s.mask);
}

Tensor<float> resize_image_bilinear(const Tensor<float>& img, int th, int tw) {
    const int H = img.dim(1), W = img.dim(2);
    Tensor<float> out = Tensor<float>::zeros({3, th, tw});
    const float sy = static_cast<float>(H) / th, sx = static_cast<float>(W) / tw;
    const size_t hw = static_cast<size_t>(H) * W;
    const size_t ohw = static_cast<size_t>(th) * tw;
    for (int y = 0; y < th; ++y) {
        float fy = (y + 0.5f) * sy - 0.5f;
        fy = std::min(std::max(fy, 0.0f), static_cast<float>(H - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, H - 1);
        const float wy = fy - y0;
        for (int x = 0; x < tw; ++x) {
            float fx = (x + 0.5f) * sx - 0.5f;
            fx = std::min(std::max(fx, 0.0f), static_cast<float>(W - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, W - 1);
            const float wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const float* pc = img.data() + static_cast<size_t>(c) * hw;
                const float top = lerp(pc[static_cast<size_t>(y0) * W + x0],
                                       pc[static_cast<size_t>(y0) * W + x1], wx);
                const float bot = lerp(pc[static_cast<size_t>(y1) * W + x0],
                                       pc[static_cast<size_t>(y1) * W + x1], wx);
                out.data()[static_cast<size_t>(c) * ohw + static_cast<size_t>(y) * tw + x] =
                    lerp(top, bot, wy);
            }
        }
    }
    return out;
}

Mask resize_mask_nearest(const Mask& m, int th, int tw) {
    Mask out(th, tw);
    for (int y = 0; y < th; ++y) {
        const int sy = std::min(m.h - 1, static_cast<int>((y + 0.5f) * m.h / th));
        for (int x = 0; x < tw; ++x) {
            const int sx = std::min(m.w - 1, static_cast<int>((x + 0.5f) * m.w / tw));
            out.at(y, x) = m.at(sy, sx);
        }
    }
    return out;
}

Sample resize(const Sample& s, int target) {
    if (target % 8 != 0) throw ConfigError("resize: target must be divisible by 8");
    if (s.image.dim(1) == target && s.image.dim(2) == target) return s;
    Sample out;
    out.id = s.id;
    out.image = resize_image_bilinear(s.image, target, target);
    out.mask = resize_mask_nearest(s.mask, target, target);
    return out;
}

// --- geometric primitives ---------------------------------------------------

Tensor<float> flip_h(const Tensor<float>& img) {
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    Tensor<float> out = Tensor<float>::zeros(img.shape());
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                out.data()[(static_cast<size_t>(c) * H + y) * W + x] =
                    img.data()[(static_cast<size_t>(c) * H + y) * W + (W - 1 - x)];
    return out;
}

Tensor<float> flip_v(const Tensor<float>& img) {
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    Tensor<float> out = Tensor<float>::zeros(img.shape());
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                out.data()[(static_cast<size_t>(c) * H + y) * W + x] =
                    img.data()[(static_cast<size_t>(c) * H + (H - 1 - y)) * W + x];
    return out;
}

// counter-clockwise quarter turns; square images only (augmentation uses
// square samples)
Tensor<float> rot90(const Tensor<float>& img, int quarter_turns) {
    const int q = ((quarter_turns % 4) + 4) % 4;
    if (q == 0) return img;
    const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    if (H != W) throw DimensionError("rot90: only square images supported");
    Tensor<float> out = Tensor<float>::zeros(img.shape());
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                int sy = y, sx = x;
                if (q == 1) {
                    sy = x;
                    sx = W - 1 - y;
                } else if (q == 2) {
                    sy = H - 1 - y;
                    sx = W - 1 - x;
                } else {
                    sy = H - 1 - x;
                    sx = y;
                }
                out.data()[(static_cast<size_t>(c) * H + y) * W + x] =
                    img.data()[(static_cast<size_t>(c) * H + sy) * W + sx];
            }
    return out;
}

Mask flip_h(const Mask& m) {
    Mask out(m.h, m.w);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) out.at(y, x) = m.at(y, m.w - 1 - x);
    return out;
}

Mask flip_v(const Mask& m) {
    Mask out(m.h, m.w);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) out.at(y, x) = m.at(m.h - 1 - y, x);
    return out;
}

Mask rot90(const Mask& m, int quarter_turns) {
    const int q = ((quarter_turns % 4) + 4) % 4;
    if (q == 0) return m;
    if (m.h != m.w) throw DimensionError("rot90: only square masks supported");
    Mask out(m.h, m.w);
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            int sy = y, sx = x;
            if (q == 1) {
                sy = x;
                sx = m.w - 1 - y;
            } else if (q == 2) {
                sy = m.h - 1 - y;
                sx = m.w - 1 - x;
            } else {
                sy = m.h - 1 - x;
                sx = y;
            }
            out.at(y, x) = m.at(sy, sx);
        }
    return out;
}

// --- HSV ---------------------------------------------------------------------

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
    const float mx = std::max({r, g, b});
    const float mn = std::min({r, g, b});
    const float d = mx - mn;
    v = mx;
    s = mx <= 0.0f ? 0.0f : d / mx;
    if (d <= 0.0f) {
        h = 0.0f;
        return;
    }
    float hh;
    if (mx == r)
        hh = (g - b) / d;
    else if (mx == g)
        hh = 2.0f + (b - r) / d;
    else
        hh = 4.0f + (r - g) / d;
    hh /= 6.0f;
    if (hh < 0.0f) hh += 1.0f;
    h = hh;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
    if (s <= 0.0f) {
        r = g = b = v;
        return;
    }
    float hh = h - std::floor(h);  // wrap to [0,1)
    hh *= 6.0f;
    const int sector = std::min(5, static_cast<int>(hh));
    const float f = hh - sector;
    const float p = v * (1.0f - s);
    const float q = v * (1.0f - s * f);
    const float t = v * (1.0f - s * (1.0f - f));
    switch (sector) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

Sample augment(const Sample& s, const AugmentConfig& cfg, Rng& rng) {
    if (!cfg.enabled) return s;
    // fixed draw order: hflip, vflip, rotation, hue, sat, val
    const bool do_h = rng.bernoulli(cfg.p_hflip);
    const bool do_v = rng.bernoulli(cfg.p_vflip);
    const int quarters = static_cast<int>(rng.below(4));
    const float dh = static_cast<float>(rng.uniform(-cfg.hue_delta, cfg.hue_delta));
    const float ds = static_cast<float>(rng.uniform(cfg.sat_lo, cfg.sat_hi));
    const float dv = static_cast<float>(rng.uniform(cfg.val_lo, cfg.val_hi));

    Sample out;
    out.id = s.id;
    out.image = s.image;
    out.mask = s.mask;
    if (do_h) {
        out.image = flip_h(out.image);
        out.mask = flip_h(out.mask);
    }
    if (do_v) {
        out.image = flip_v(out.image);
        out.mask = flip_v(out.mask);
    }
    if (quarters) {
        out.image = rot90(out.image, quarters);
        out.mask = rot90(out.mask, quarters);
    }

    Tensor<float> jittered = Tensor<float>::zeros(out.image.shape());
    const size_t hw = static_cast<size_t>(out.image.dim(1)) * out.image.dim(2);
    for (size_t i = 0; i < hw; ++i) {
        float h, sat, val, r, g, b;
        rgb_to_hsv(out.image.data()[i], out.image.data()[hw + i], out.image.data()[2 * hw + i], h, sat, val);
        h += dh;
        h -= std::floor(h);
        sat = std::min(std::max(sat * ds, 0.0f), 1.0f);
        val = std::min(std::max(val * dv, 0.0f), 1.0f);
        hsv_to_rgb(h, sat, val, r, g, b);
        jittered.data()[i] = std::min(std::max(r, 0.0f), 1.0f);
        jittered.data()[hw + i] = std::min(std::max(g, 0.0f), 1.0f);
        jittered.data()[2 * hw + i] = std::min(std::max(b, 0.0f), 1.0f);
    }
    out.image = jittered;
    return out;
}

std::pair<std::vector<std::string>, std::vector<std::string>> split(const std::vector<std::string>& ids,
                                                                    double train_fraction, uint64_t seed) {
    if (ids.empty()) throw UsageError("split: manifest is empty");
    std::vector<std::string> shuffled = ids;
    Rng rng(seed);
    rng.shuffle(shuffled);
    const size_t ntrain = static_cast<size_t>(
        std::lround(train_fraction * static_cast<double>(shuffled.size())));
    std::vector<std::string> train(shuffled.begin(), shuffled.begin() + static_cast<long>(ntrain));
    std::vector<std::string> test(shuffled.begin() + static_cast<long>(ntrain), shuffled.end());
    return {train, test};
}

}  // namespace gms
