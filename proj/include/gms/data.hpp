#pragma once

#include <string>
#include <vector>

#include "gms/image_io.hpp"
#include "gms/rng.hpp"

namespace gms {

struct Sample {
    std::string id;
    Tensor<float> image;  // [3,H,W] in [0,1]
    Mask mask;            // same spatial dims
};

enum class Domain { A, B };

inline const char* domain_name(Domain d) { return d == Domain::A ? "A" : "B"; }

inline Domain domain_from_name(const std::string& s) {
    if (s == "A") return Domain::A;
    if (s == "B") return Domain::B;
    throw ConfigError("unknown domain: " + s);
}

// Two synthetic domains with deliberate covariate shift:
//   A: elliptical foregrounds, smooth gradient background, additive Gaussian
//      noise (sigma 0.05)
//   B: rounded-polygon foregrounds, textured sinusoid background,
//      multiplicative speckle (sigma 0.15)
// Every generated mask covers between 2% and 60% of the image.
struct DomainSpec {
    Domain domain = Domain::A;
    double noise_sigma = 0.05;
    double fg_lo = 0.60, fg_hi = 0.90;
    double bg_lo = 0.10, bg_hi = 0.40;
    static constexpr double kMinArea = 0.02;
    static constexpr double kMaxArea = 0.60;

    static DomainSpec standard(Domain d) {
        DomainSpec s;
        s.domain = d;
        if (d == Domain::B) {
            s.noise_sigma = 0.15;
            s.fg_lo = 0.55;
            s.fg_hi = 0.95;
            s.bg_lo = 0.15;
            s.bg_hi = 0.50;
        }
        return s;
    }
};

struct AugmentConfig {
    bool enabled = true;
    double p_hflip = 0.5;
    double p_vflip = 0.5;
    // rotation drawn uniformly from {0,90,180,270} degrees
    double hue_delta = 0.03;   // hue shift ~ U(-0.03,0.03)
    double sat_lo = 0.8, sat_hi = 1.2;
    double val_lo = 0.8, val_hi = 1.2;
};

// dataset layout: <root>/images/<id>.ppm, <root>/masks/<id>.pgm, manifest.txt
struct DatasetPaths {
    std::string root;
    std::string image_path(const std::string& id) const { return root + "/images/" + id + ".ppm"; }
    std::string mask_path(const std::string& id) const { return root + "/masks/" + id + ".pgm"; }
    std::string manifest_path() const { return root + "/manifest.txt"; }
};

// generation, fully determined by (spec, n, size, seed)
Sample generate_sample(const DomainSpec& spec, int size, uint64_t sample_seed, const std::string& id);
void generate_synthetic(const DomainSpec& spec, int n, int size, uint64_t seed, const std::string& root);

// manifest / sample IO
std::vector<std::string> load_manifest(const std::string& root);
void save_manifest(const std::string& root, const std::vector<std::string>& ids);
Sample load_sample(const std::string& root, const std::string& id);
void save_sample(const std::string& root, const Sample& s);

// image geometry
Sample resize(const Sample& s, int target);                    // bilinear image, nearest mask
Tensor<float> resize_image_bilinear(const Tensor<float>& img, int th, int tw);
Mask resize_mask_nearest(const Mask& m, int th, int tw);

// geometric primitives exposed for property tests
Tensor<float> flip_h(const Tensor<float>& img);
Tensor<float> flip_v(const Tensor<float>& img);
Tensor<float> rot90(const Tensor<float>& img, int quarter_turns);
Mask flip_h(const Mask& m);
Mask flip_v(const Mask& m);
Mask rot90(const Mask& m, int quarter_turns);

// pixelwise hexcone conversions, inputs/outputs in [0,1]
void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v);
void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b);

// geometric transforms hit image and mask identically; HSV jitter hits the
// image only; output image is clamped to [0,1]
Sample augment(const Sample& s, const AugmentConfig& cfg, Rng& rng);

// deterministic shuffle then round(train_fraction*n) / rest partition
std::pair<std::vector<std::string>, std::vector<std::string>> split(const std::vector<std::string>& ids,
                                                                    double train_fraction, uint64_t seed);

}  // namespace gms
