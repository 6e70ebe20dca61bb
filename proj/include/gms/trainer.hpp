#pragma once

#include <optional>

#include "gms/archive.hpp"
#include "gms/data.hpp"
#include "gms/lmm.hpp"
#include "gms/losses.hpp"
#include "gms/tokenizer.hpp"

namespace gms {

struct TrainConfig {
    std::string dataset_root;
    TokenizerKind tokenizer = TokenizerKind::Patch;
    std::string tokenizer_weights;  // archive path, required for conv_vae
    LmmConfig lmm;                  // in/out channels are bound to the tokenizer at train time
    LossConfig loss;
    int batch_size = 8;
    int epochs = 200;          // desk-scale default; paper-scale runs use 1000
    int image_size = 64;       // desk-scale default; 224 supported
    uint64_t seed = 7;
    bool augment = true;
    bool deterministic = true;
    double lr = 2e-3;
    double val_fraction = 0.1;  // carved from the train split for best-checkpoint selection
    std::string out_dir;

    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
    std::string config_hash() const;
};

struct SampleMetrics {
    std::string id;
    double dsc = 0.0, iou = 0.0, hd95 = 0.0;
};

struct EvalReport {
    double dsc = 0.0, iou = 0.0, hd95 = 0.0;  // arithmetic means over per_sample
    size_t n = 0;
    uint64_t seed = 0;
    std::string config_hash;
    size_t trainable_params = 0;
    double wall_clock_seconds = 0.0;  // 0 in deterministic mode
    std::vector<SampleMetrics> per_sample;

    nlohmann::json to_json() const;
    void write(const std::string& path) const;
};

// Step-0 loss components (double precision) for the loss-ablation identity.
struct StepZeroLosses {
    double lm = 0.0;
    double seg = 0.0;
    double total = 0.0;
};

struct TrainResult {
    std::string checkpoint_best;
    std::string checkpoint_final;
    EvalReport report;
    StepZeroLosses step0;
    std::string init_param_hash;       // LMM parameter bytes right after seeding
    std::string tokenizer_hash_before;
    std::string tokenizer_hash_after;
    double best_val_dsc = 0.0;
    int best_epoch = -1;
    double final_train_loss = 0.0;
};

struct LoadedCheckpoint {
    TrainConfig config;
    LmmModel<float> model;
    FrozenTokenizer<float> tokenizer;
    std::string tokenizer_hash;
    int epoch = 0;
    double best_val_dsc = 0.0;
};

// tokenizer persistence (archive container with {kind, c_lat, downsample_factor})
void save_tokenizer(const std::string& path, const FrozenTokenizer<float>& tok);
FrozenTokenizer<float> load_tokenizer(const std::string& path);

void save_checkpoint(const std::string& path, const LmmModel<float>& model,
                     const FrozenTokenizer<float>& tok, const TrainConfig& cfg, int epoch,
                     double best_val_dsc, const AdamW<float>* opt);
LoadedCheckpoint load_checkpoint(const std::string& path);

// Full training run: seeded split and init, per-epoch shuffle/augment/encode,
// compound loss, AdamW with cosine annealing, best-validation-DSC checkpoint
// selection, and a final report on the test split.
TrainResult train(const TrainConfig& cfg, const FrozenTokenizer<float>& tok);

EvalReport evaluate(const LmmModel<float>& model, const FrozenTokenizer<float>& tok,
                    const std::vector<Sample>& samples, const TrainConfig& cfg);
EvalReport evaluate_checkpoint(const LoadedCheckpoint& ck, const FrozenTokenizer<float>& tok,
                               const std::vector<Sample>& samples);

struct PredictResult {
    std::string mask_path;
    std::string gray_path;
    std::optional<double> dsc;  // set when a ground-truth mask is supplied
};
PredictResult predict(const LoadedCheckpoint& ck, const std::string& image_path,
                      const std::string& mask_path, const std::string& out_dir);

// ---------------------------------------------------------------------------
// experiment protocols
// ---------------------------------------------------------------------------

struct AblationRow {
    std::string label;  // "lm" | "seg" | "both"
    double dsc = 0.0, iou = 0.0, hd95 = 0.0;
    StepZeroLosses step0;
    std::string init_param_hash;
};

struct AblationResult {
    std::vector<AblationRow> rows;  // exactly three
    std::string table_path;
};

// Three runs ({lm}, {seg}, {lm+seg}) sharing seed and tokenizer.
AblationResult run_ablation(const TrainConfig& base, const FrozenTokenizer<float>& tok);

struct CrossDomainCell {
    std::string train_domain, test_domain;
    double dsc = 0.0, iou = 0.0, hd95 = 0.0;
};

struct CrossDomainResult {
    std::vector<CrossDomainCell> cells;  // A->A, A->B, B->B, B->A
    bool in_domain_ge_cross_a = false;   // logged trend, not asserted
    bool in_domain_ge_cross_b = false;
    std::string table_path;
};

// Trains one model per domain and evaluates each on both test splits; the
// four cells come from exactly two checkpoints.
CrossDomainResult run_cross_domain(const TrainConfig& cfg_a, const TrainConfig& cfg_b,
                                   const FrozenTokenizer<float>& tok);

struct TokenizerAblationRow {
    std::string tokenizer;
    int latent_channels = 0;
    uint64_t seed = 0;
    double dsc = 0.0, iou = 0.0, hd95 = 0.0;
};

struct TokenizerAblationResult {
    std::vector<TokenizerAblationRow> rows;  // patch, conv_vae
    std::string table_path;
};

TokenizerAblationResult run_tokenizer_ablation(const TrainConfig& base,
                                               const FrozenTokenizer<float>& patch_tok,
                                               const FrozenTokenizer<float>& vae_tok);

// worker-pool width: GMS_THREADS env caps it; defaults to 1 in deterministic
// mode
int worker_threads(bool deterministic);

}  // namespace gms
