#pragma once

#include <nlohmann/json.hpp>

#include "gms/layers.hpp"

namespace gms {

enum class StageKind { ConvPair, Attention };

inline const char* stage_kind_name(StageKind k) {
    return k == StageKind::ConvPair ? "conv_pair" : "attention";
}

inline StageKind stage_kind_from_name(const std::string& s) {
    if (s == "conv_pair") return StageKind::ConvPair;
    if (s == "attention") return StageKind::Attention;
    throw ConfigError("unknown stage kind: " + s);
}

// Latent-to-latent mapping network configuration. No stage changes spatial
// dimensions; in/out channels must equal the bound tokenizer's latent
// channel count.
struct LmmConfig {
    int width = 128;
    std::vector<StageKind> pattern = {StageKind::ConvPair, StageKind::Attention, StageKind::ConvPair,
                                      StageKind::Attention, StageKind::ConvPair};
    int in_channels = 4;
    int out_channels = 4;
    bool use_skips = true;
    int gn_groups = 0;  // 0 = auto

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["width"] = width;
        std::vector<std::string> pat;
        for (StageKind k : pattern) pat.push_back(stage_kind_name(k));
        j["pattern"] = pat;
        j["in_channels"] = in_channels;
        j["out_channels"] = out_channels;
        j["use_skips"] = use_skips;
        j["gn_groups"] = gn_groups;
        return j;
    }

    static LmmConfig from_json(const nlohmann::json& j) {
        LmmConfig c;
        c.width = j.at("width").get<int>();
        c.pattern.clear();
        for (const auto& s : j.at("pattern")) c.pattern.push_back(stage_kind_from_name(s.get<std::string>()));
        c.in_channels = j.at("in_channels").get<int>();
        c.out_channels = j.at("out_channels").get<int>();
        c.use_skips = j.at("use_skips").get<bool>();
        c.gn_groups = j.at("gn_groups").get<int>();
        return c;
    }
};

// The trainable latent mapping model: 3x3 input projection, a sequence of
// conv pairs (with additive skips) and self-attention stages, 3x3 output
// projection with no final activation. Spatial dims are preserved
// throughout; there is no down-sampling anywhere.
template <typename T>
struct LmmModel {
    struct Stage {
        StageKind kind;
        ConvBlock<T> c1, c2;      // ConvPair
        SelfAttention2d<T> attn;  // Attention
    };

    LmmConfig cfg;
    Conv2dLayer<T> input_proj;
    std::vector<Stage> stages;
    Conv2dLayer<T> output_proj;

    // Parameter draw order is fixed (input_proj, stages in order, output_proj)
    // so a seed fully determines the initial weights.
    static LmmModel build(const LmmConfig& cfg, Rng& rng) {
        if (cfg.width < 1) throw ConfigError("lmm: width must be >= 1");
        if (cfg.in_channels != cfg.out_channels)
            throw ConfigError("lmm: in_channels must equal out_channels (tokenizer latent contract)");
        LmmModel m;
        m.cfg = cfg;
        m.input_proj = make_conv<T>(cfg.in_channels, cfg.width, 3, 1, 1, rng);
        for (StageKind kind : cfg.pattern) {
            Stage s;
            s.kind = kind;
            if (kind == StageKind::ConvPair) {
                s.c1 = make_conv_block<T>(cfg.width, cfg.width, rng, cfg.gn_groups);
                s.c2 = make_conv_block<T>(cfg.width, cfg.width, rng, cfg.gn_groups);
            } else {
                s.attn = make_self_attention<T>(cfg.width, rng);
            }
            m.stages.push_back(std::move(s));
        }
        m.output_proj = make_conv<T>(cfg.width, cfg.out_channels, 3, 1, 1, rng);
        return m;
    }

    // [N,c_lat,h,w] -> [N,c_lat,h,w]
    Tensor<T> forward(const Tensor<T>& z) const {
        detail::check_rank(z, 4, "lmm_forward");
        if (z.dim(1) != cfg.in_channels)
            throw DimensionError(strfmt("lmm_forward: latent channels %d != configured %d", z.dim(1),
                                        cfg.in_channels));
        Tensor<T> x = input_proj.forward(z);
        for (const Stage& s : stages) {
            if (s.kind == StageKind::ConvPair) {
                Tensor<T> y = s.c2.forward(s.c1.forward(x));
                x = cfg.use_skips ? add(y, x) : y;
            } else {
                x = s.attn.forward(x);
            }
        }
        return output_proj.forward(x);
    }

    // [c_lat,h,w] -> [c_lat,h,w]
    Tensor<T> forward_single(const Tensor<T>& z) const {
        detail::check_rank(z, 3, "lmm_forward");
        Shape s = z.shape();
        Tensor<T> out = forward(reshape(z, {1, s[0], s[1], s[2]}));
        return reshape(out, s);
    }

    ParamList<T> named_params() const {
        ParamList<T> out;
        input_proj.collect("input_proj", out);
        for (size_t i = 0; i < stages.size(); ++i) {
            const std::string prefix = "stage" + std::to_string(i);
            if (stages[i].kind == StageKind::ConvPair) {
                stages[i].c1.collect(prefix + ".c1", out);
                stages[i].c2.collect(prefix + ".c2", out);
            } else {
                stages[i].attn.collect(prefix + ".attn", out);
            }
        }
        output_proj.collect("output_proj", out);
        return out;
    }

    // Exact element count over the model's own tensors; the frozen tokenizer
    // contributes nothing.
    size_t count_trainable_params() const {
        size_t n = 0;
        for (const auto& [name, t] : named_params()) n += t.numel();
        return n;
    }
};

}  // namespace gms
