#pragma once

#include "gms/hash.hpp"
#include "gms/layers.hpp"
#include "gms/metrics.hpp"
#include "gms/optim.hpp"

namespace gms {

enum class TokenizerKind { Patch, ConvVae };

inline const char* tokenizer_kind_name(TokenizerKind k) {
    return k == TokenizerKind::Patch ? "patch" : "conv_vae";
}

inline TokenizerKind tokenizer_kind_from_name(const std::string& s) {
    if (s == "patch") return TokenizerKind::Patch;
    if (s == "conv_vae") return TokenizerKind::ConvVae;
    throw ConfigError("unknown tokenizer kind: " + s);
}

// conv -> PReLU -> GN with configurable stride (the VAE uses stride 2 on the
// way down; LMM conv blocks are the spatial-preserving ConvBlock type).
template <typename T>
struct TokBlock {
    Conv2dLayer<T> conv;
    Tensor<T> prelu_a, gn_gamma, gn_beta;
    int gn_groups = 8;
    T gn_eps = static_cast<T>(1e-5);

    Tensor<T> forward(const Tensor<T>& x) const {
        return group_norm(prelu(conv.forward(x), prelu_a), gn_groups, gn_gamma, gn_beta, gn_eps);
    }

    void collect(const std::string& prefix, ParamList<T>& out) const {
        conv.collect(prefix + ".conv", out);
        out.emplace_back(prefix + ".prelu_a", prelu_a);
        out.emplace_back(prefix + ".gn_gamma", gn_gamma);
        out.emplace_back(prefix + ".gn_beta", gn_beta);
    }
};

template <typename T>
TokBlock<T> make_tok_block(int cin, int cout, int stride, Rng& rng) {
    TokBlock<T> b;
    b.conv = make_conv<T>(cin, cout, 3, stride, 1, rng);
    b.prelu_a = Tensor<T>::full({cout}, static_cast<T>(0.25));
    b.gn_gamma = Tensor<T>::full({cout}, T(1));
    b.gn_beta = Tensor<T>::zeros({cout});
    b.gn_groups = default_gn_groups(cout);
    b.prelu_a.set_requires_grad(true);
    b.gn_gamma.set_requires_grad(true);
    b.gn_beta.set_requires_grad(true);
    return b;
}

// Convolutional VAE: three stride-2 blocks (3->32->64->128) with a head to
// 2*c_lat channels (posterior mean / log-variance), mirrored decoder with
// nearest-neighbor x2 upsampling. Works in the [-1,1] value domain; the
// decoder head is squashed by tanh and mapped back to [0,1].
template <typename T>
struct ConvVae {
    static constexpr int kLatentChannels = 4;
    TokBlock<T> down1, down2, down3;
    Conv2dLayer<T> enc_head;
    TokBlock<T> dec_in, up1, up2, up3;
    Conv2dLayer<T> dec_head;

    static ConvVae build(Rng& rng) {
        ConvVae v;
        v.down1 = make_tok_block<T>(3, 32, 2, rng);
        v.down2 = make_tok_block<T>(32, 64, 2, rng);
        v.down3 = make_tok_block<T>(64, 128, 2, rng);
        v.enc_head = make_conv<T>(128, 2 * kLatentChannels, 3, 1, 1, rng);
        v.dec_in = make_tok_block<T>(kLatentChannels, 128, 1, rng);
        v.up1 = make_tok_block<T>(128, 64, 1, rng);
        v.up2 = make_tok_block<T>(64, 32, 1, rng);
        v.up3 = make_tok_block<T>(32, 32, 1, rng);
        v.dec_head = make_conv<T>(32, 3, 3, 1, 1, rng);
        return v;
    }

    // x in [-1,1], [N,3,H,W] -> {mu, logvar} each [N,c_lat,H/8,W/8]
    std::pair<Tensor<T>, Tensor<T>> encode_dist(const Tensor<T>& x) const {
        Tensor<T> h = down3.forward(down2.forward(down1.forward(x)));
        Tensor<T> stats = enc_head.forward(h);
        return {channel_slice(stats, 0, kLatentChannels),
                channel_slice(stats, kLatentChannels, 2 * kLatentChannels)};
    }

    // [N,c_lat,h,w] -> [N,3,8h,8w] in [0,1]
    Tensor<T> decode(const Tensor<T>& z) const {
        Tensor<T> h = dec_in.forward(z);
        h = up1.forward(upsample_nearest2x(h));
        h = up2.forward(upsample_nearest2x(h));
        h = up3.forward(upsample_nearest2x(h));
        return shift(scale(tanh(dec_head.forward(h)), static_cast<T>(0.5)), static_cast<T>(0.5));
    }

    void collect(ParamList<T>& out) const {
        down1.collect("enc.down1", out);
        down2.collect("enc.down2", out);
        down3.collect("enc.down3", out);
        enc_head.collect("enc.head", out);
        dec_in.collect("dec.in", out);
        up1.collect("dec.up1", out);
        up2.collect("dec.up2", out);
        up3.collect("dec.up3", out);
        dec_head.collect("dec.head", out);
    }
};

// Mask adapter: replicate to three channels on encode, channel-mean plus a
// fixed >= 0.5 threshold on decode.
struct MaskCodec {
    static constexpr double kThreshold = 0.5;
};

// Frozen encoder/decoder pair. The patch tokenizer is an exact, parameter
// free space-to-depth rearrangement (decode inverts it bit-for-bit on [0,1]
// inputs); the conv_vae reproduces the 3-down/3-up, 4-latent-channel
// structural contract at desk scale.
template <typename T>
class FrozenTokenizer {
  public:
    static constexpr int kDownsample = 8;

    TokenizerKind kind = TokenizerKind::Patch;
    int c_lat = 3 * kDownsample * kDownsample;
    bool frozen = true;
    std::shared_ptr<ConvVae<T>> vae;  // null for patch

    static FrozenTokenizer make_patch() { return FrozenTokenizer(); }

    static FrozenTokenizer wrap_vae(std::shared_ptr<ConvVae<T>> v, bool freeze = true) {
        FrozenTokenizer t;
        t.kind = TokenizerKind::ConvVae;
        t.c_lat = ConvVae<T>::kLatentChannels;
        t.vae = std::move(v);
        if (freeze) t.freeze();
        return t;
    }

    // random-weight conv_vae, frozen; used by shape/gradient tests
    static FrozenTokenizer make_conv_vae_random(Rng& rng) {
        return wrap_vae(std::make_shared<ConvVae<T>>(ConvVae<T>::build(rng)));
    }

    void freeze() {
        if (vae)
            for (auto& [name, p] : vae_params()) p.set_requires_grad(false);
        frozen = true;
    }

    // [N,3,H,W] in [0,1] -> [N,c_lat,H/8,W/8]
    Tensor<T> encode_image_batch(const Tensor<T>& img) const {
        detail::check_rank(img, 4, "encode_image");
        if (img.dim(1) != 3)
            throw DimensionError(strfmt("encode_image: expected 3 channels, got %d", img.dim(1)));
        check_divisible(img.dim(2), img.dim(3));
        if (kind == TokenizerKind::Patch) return space_to_depth(img, kDownsample);
        Tensor<T> x = shift(scale(img, T(2)), T(-1));  // [0,1] -> [-1,1]
        return vae->encode_dist(x).first;              // deterministic posterior mean
    }

    Tensor<T> encode_image(const Tensor<T>& img) const {
        detail::check_rank(img, 3, "encode_image");
        Shape s = img.shape();
        Tensor<T> z = encode_image_batch(reshape(img, {1, s[0], s[1], s[2]}));
        return reshape(z, {z.dim(1), z.dim(2), z.dim(3)});
    }

    // [N,c_lat,h,w] -> [N,3,8h,8w] in [0,1]; differentiable w.r.t. z even
    // with frozen parameters.
    Tensor<T> decode_latent_batch(const Tensor<T>& z) const {
        detail::check_rank(z, 4, "decode_latent");
        if (z.dim(1) != c_lat)
            throw DimensionError(strfmt("decode_latent: latent channels %d != tokenizer c_lat %d",
                                        z.dim(1), c_lat));
        if (kind == TokenizerKind::Patch) return clamp(depth_to_space(z, kDownsample), T(0), T(1));
        return vae->decode(z);
    }

    Tensor<T> decode_latent(const Tensor<T>& z) const {
        detail::check_rank(z, 3, "decode_latent");
        Shape s = z.shape();
        Tensor<T> d = decode_latent_batch(reshape(z, {1, s[0], s[1], s[2]}));
        return reshape(d, {d.dim(1), d.dim(2), d.dim(3)});
    }

    // [N,H,W] binary in {0,1} -> latents; mask is replicated to 3 channels
    // and sent through the image encode core (the conv_vae core maps the
    // values to {-1,+1}).
    Tensor<T> encode_mask_batch(const Tensor<T>& mask) const {
        detail::check_rank(mask, 3, "encode_mask");
        for (size_t i = 0; i < mask.numel(); ++i) {
            T v = mask.data()[i];
            if (v != T(0) && v != T(1))
                throw ValidationError(strfmt("encode_mask: value %g at element %zu is not binary",
                                             static_cast<double>(v), i));
        }
        const int N = mask.dim(0), H = mask.dim(1), W = mask.dim(2);
        Tensor<T> img = Tensor<T>::zeros({N, 3, H, W});
        const size_t hw = static_cast<size_t>(H) * W;
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < 3; ++c)
                std::copy(mask.data() + static_cast<size_t>(n) * hw,
                          mask.data() + static_cast<size_t>(n + 1) * hw,
                          img.data() + (static_cast<size_t>(n) * 3 + c) * hw);
        return encode_image_batch(img);
    }

    Tensor<T> encode_mask(const Tensor<T>& mask) const {
        detail::check_rank(mask, 2, "encode_mask");
        Shape s = mask.shape();
        Tensor<T> z = encode_mask_batch(reshape(mask, {1, s[0], s[1]}));
        return reshape(z, {z.dim(1), z.dim(2), z.dim(3)});
    }

    // channel-mean grayscale of the decoded batch: [N,c_lat,h,w] -> [N,H,W]
    Tensor<T> decode_gray_batch(const Tensor<T>& z) const {
        Tensor<T> d = decode_latent_batch(z);
        const int N = d.dim(0), H = d.dim(2), W = d.dim(3);
        Tensor<T> g = scale(
            add(add(channel_slice(d, 0, 1), channel_slice(d, 1, 2)), channel_slice(d, 2, 3)),
            T(1) / T(3));
        return reshape(g, {N, H, W});
    }

    struct MaskDecode {
        Tensor<T> gray;  // [H,W] in [0,1], the pre-threshold map Eq-style losses consume
        Mask binary;     // gray >= 0.5
    };

    MaskDecode decode_to_mask(const Tensor<T>& z) const {
        detail::check_rank(z, 3, "decode_to_mask");
        Shape s = z.shape();
        Tensor<T> gb = decode_gray_batch(reshape(z, {1, s[0], s[1], s[2]}));
        Tensor<T> gray = reshape(gb, {gb.dim(1), gb.dim(2)});
        return {gray, binarize(gray)};
    }

    static Mask binarize(const Tensor<T>& gray) {
        detail::check_rank(gray, 2, "binarize");
        Mask m(gray.dim(0), gray.dim(1));
        for (size_t i = 0; i < gray.numel(); ++i)
            m.v[i] = gray.data()[i] >= static_cast<T>(MaskCodec::kThreshold) ? 1 : 0;
        return m;
    }

    static Tensor<T> mask_to_tensor(const Mask& m) {
        Tensor<T> t = Tensor<T>::zeros({m.h, m.w});
        for (size_t i = 0; i < m.v.size(); ++i) t.data()[i] = static_cast<T>(m.v[i]);
        return t;
    }

    ParamList<T> named_params() const {
        ParamList<T> out;
        if (vae) vae->collect(out);
        return out;
    }

    std::string param_hash() const;

  private:
    ParamList<T> vae_params() {
        ParamList<T> out;
        vae->collect(out);
        return out;
    }

    void check_divisible(int H, int W) const {
        if (H % kDownsample != 0 || W % kDownsample != 0)
            throw ConfigError(strfmt(
                "encode: spatial dims %dx%d are not divisible by %d; resize the input first", H, W,
                kDownsample));
    }
};

template <typename T>
std::string FrozenTokenizer<T>::param_hash() const {
    Fnv1a h;
    h.update(std::string(tokenizer_kind_name(kind)));
    h.update_values(&c_lat, 1);
    for (const auto& [name, p] : named_params()) {
        h.update(name);
        h.update_values(p.data(), p.numel());
    }
    return h.hex();
}

// ---------------------------------------------------------------------------
// desk-scale VAE training (stand-in for a large pretrained tokenizer)
// ---------------------------------------------------------------------------

struct VaeTrainConfig {
    int epochs = 120;
    double lr = 2e-3;
    double kl_weight = 1e-6;
    int batch_size = 8;
    uint64_t seed = 7;
    bool verbose = false;
};

// Trains on reconstruction MSE + kl_weight * KL(q || N(0,I)) and returns the
// pair frozen; encode thereafter uses the posterior mean only. kl_weight = 0
// skips the KL term entirely (plain autoencoder).
template <typename T>
FrozenTokenizer<T> train_conv_vae(const std::vector<Tensor<T>>& images, const VaeTrainConfig& cfg) {
    if (images.empty()) throw UsageError("train_conv_vae: dataset is empty");
    for (const auto& img : images) {
        detail::check_rank(img, 3, "train_conv_vae image");
        if (img.dim(1) % 8 != 0 || img.dim(2) % 8 != 0)
            throw ConfigError("train_conv_vae: image dims must be divisible by 8");
    }
    Rng rng(cfg.seed);
    auto vae = std::make_shared<ConvVae<T>>(ConvVae<T>::build(rng));
    ParamList<T> params;
    vae->collect(params);
    AdamW<T> opt(params);
    CosineSchedule sched{cfg.lr, 0.0, cfg.epochs};

    const int S1 = images[0].dim(1), S2 = images[0].dim(2);
    std::vector<size_t> idx(images.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = sched.lr(epoch);
        Rng erng(Rng::derive(cfg.seed, 0xA1, static_cast<uint64_t>(epoch)));
        erng.shuffle(idx);
        double epoch_loss = 0.0;
        int batches = 0;
        for (size_t b0 = 0; b0 < idx.size(); b0 += static_cast<size_t>(cfg.batch_size)) {
            const size_t k = std::min(static_cast<size_t>(cfg.batch_size), idx.size() - b0);
            Tensor<T> x = Tensor<T>::zeros({static_cast<int>(k), 3, S1, S2});
            for (size_t i = 0; i < k; ++i)
                std::copy(images[idx[b0 + i]].data(), images[idx[b0 + i]].data() + images[idx[b0 + i]].numel(),
                          x.data() + i * images[idx[b0 + i]].numel());
            Tensor<T> xin = shift(scale(x, T(2)), T(-1));
            auto [mu, logvar] = vae->encode_dist(xin);
            Tensor<T> eps = Tensor<T>::randn(mu.shape(), erng);
            Tensor<T> z = add(mu, mul(exp(scale(logvar, static_cast<T>(0.5))), eps));
            Tensor<T> recon = vae->decode(z);
            Tensor<T> loss = mean(square(sub(recon, x)));
            if (cfg.kl_weight > 0) {
                Tensor<T> kl_elem = scale(
                    add(add(shift(logvar, T(1)), scale(square(mu), T(-1))), scale(exp(logvar), T(-1))),
                    static_cast<T>(-0.5));
                Tensor<T> kl = mean(sum_per_sample(kl_elem));
                loss = add(loss, scale(kl, static_cast<T>(cfg.kl_weight)));
            }
            const double lv = static_cast<double>(loss.item());
            if (!std::isfinite(lv))
                throw StateError(strfmt("train_conv_vae: non-finite loss at epoch %d", epoch));
            epoch_loss += lv;
            ++batches;
            GradMap<T> grads = backward(loss);
            opt.step(grads, lr);
        }
        if (cfg.verbose && (epoch % 10 == 0 || epoch == cfg.epochs - 1))
            std::fprintf(stderr, "vae epoch %d loss %.6f\n", epoch, epoch_loss / batches);
    }
    return FrozenTokenizer<T>::wrap_vae(std::move(vae));
}

}  // namespace gms
