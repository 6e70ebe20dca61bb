#include "gms/trainer.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

namespace gms {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// config / report serialization
// ---------------------------------------------------------------------------

nlohmann::json TrainConfig::to_json() const {
    nlohmann::json j;
    j["dataset_root"] = dataset_root;
    j["tokenizer"] = tokenizer_kind_name(tokenizer);
    j["tokenizer_weights"] = tokenizer_weights;
    j["lmm"] = lmm.to_json();
    j["loss"] = {{"use_lm", loss.use_lm},
                 {"use_seg", loss.use_seg},
                 {"lm_reduction", loss.lm_reduction == LmReduction::Sum ? "sum" : "mean"}};
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["image_size"] = image_size;
    j["seed"] = seed;
    j["augment"] = augment;
    j["deterministic"] = deterministic;
    j["lr"] = lr;
    j["val_fraction"] = val_fraction;
    j["out_dir"] = out_dir;
    return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.dataset_root = j.at("dataset_root").get<std::string>();
    c.tokenizer = tokenizer_kind_from_name(j.at("tokenizer").get<std::string>());
    c.tokenizer_weights = j.at("tokenizer_weights").get<std::string>();
    c.lmm = LmmConfig::from_json(j.at("lmm"));
    c.loss.use_lm = j.at("loss").at("use_lm").get<bool>();
    c.loss.use_seg = j.at("loss").at("use_seg").get<bool>();
    c.loss.lm_reduction =
        j.at("loss").at("lm_reduction").get<std::string>() == "mean" ? LmReduction::Mean : LmReduction::Sum;
    c.batch_size = j.at("batch_size").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.image_size = j.at("image_size").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    c.augment = j.at("augment").get<bool>();
    c.deterministic = j.at("deterministic").get<bool>();
    c.lr = j.at("lr").get<double>();
    c.val_fraction = j.at("val_fraction").get<double>();
    c.out_dir = j.at("out_dir").get<std::string>();
    return c;
}

std::string TrainConfig::config_hash() const {
    Fnv1a h;
    h.update(to_json().dump());
    return h.hex();
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["dsc"] = dsc;
    j["iou"] = iou;
    j["hd95"] = hd95;
    j["n"] = n;
    j["seed"] = seed;
    j["config_hash"] = config_hash;
    j["trainable_params"] = trainable_params;
    j["wall_clock_seconds"] = wall_clock_seconds;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : per_sample)
        rows.push_back({{"id", s.id}, {"dsc", s.dsc}, {"iou", s.iou}, {"hd95", s.hd95}});
    j["per_sample"] = rows;
    return j;
}

void EvalReport::write(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write report '" + path + "'");
    f << to_json().dump(2) << "\n";
}

int worker_threads(bool deterministic) {
    if (const char* env = std::getenv("GMS_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return std::min(v, 64);
    }
    if (deterministic) return 1;
    const unsigned hc = std::thread::hardware_concurrency();
    return static_cast<int>(std::min(4u, hc == 0 ? 1u : hc));
}

// ---------------------------------------------------------------------------
// checkpoint / tokenizer persistence
// ---------------------------------------------------------------------------

namespace {

std::string fmt_double(double v) { return strfmt("%.17g", v); }

void add_params(Archive& a, const std::string& prefix, const ParamList<float>& params) {
    for (const auto& [name, t] : params) a.add(prefix + name, t);
}

void load_params_into(const Archive& a, const std::string& prefix, ParamList<float>& params) {
    for (auto& [name, t] : params) {
        Tensor<float> stored = a.get_f32(prefix + name);
        if (stored.shape() != t.shape())
            throw CorruptionError(strfmt("checkpoint: tensor '%s' has shape %s, expected %s",
                                         (prefix + name).c_str(), shape_str(stored.shape()).c_str(),
                                         shape_str(t.shape()).c_str()));
        std::copy(stored.data(), stored.data() + stored.numel(), t.data());
    }
}

void add_tokenizer_fields(Archive& a, const FrozenTokenizer<float>& tok) {
    a.metadata["tok_kind"] = tokenizer_kind_name(tok.kind);
    a.metadata["tok_c_lat"] = std::to_string(tok.c_lat);
    a.metadata["tok_downsample_factor"] = std::to_string(FrozenTokenizer<float>::kDownsample);
    add_params(a, "tok.", tok.named_params());
}

FrozenTokenizer<float> tokenizer_from_archive(const Archive& a) {
    const TokenizerKind kind = tokenizer_kind_from_name(a.meta("tok_kind"));
    if (kind == TokenizerKind::Patch) return FrozenTokenizer<float>::make_patch();
    Rng dummy(0);
    auto vae = std::make_shared<ConvVae<float>>(ConvVae<float>::build(dummy));
    FrozenTokenizer<float> tok = FrozenTokenizer<float>::wrap_vae(std::move(vae), /*freeze=*/false);
    ParamList<float> params = tok.named_params();
    load_params_into(a, "tok.", params);
    tok.freeze();
    return tok;
}

std::string params_hash(const ParamList<float>& params) {
    Fnv1a h;
    for (const auto& [name, t] : params) {
        h.update(name);
        h.update_values(t.data(), t.numel());
    }
    return h.hex();
}

std::vector<Sample> load_samples(const std::string& root, const std::vector<std::string>& ids,
                                 int image_size) {
    std::vector<Sample> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(resize(load_sample(root, id), image_size));
    return out;
}

void write_id_list(const std::string& path, const std::vector<std::string>& ids) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write '" + path + "'");
    for (const auto& id : ids) f << id << "\n";
}

Tensor<float> resize_gray_bilinear(const Tensor<float>& gray, int th, int tw) {
    Tensor<float> rgb = Tensor<float>::zeros({3, gray.dim(0), gray.dim(1)});
    for (int c = 0; c < 3; ++c)
        std::copy(gray.data(), gray.data() + gray.numel(), rgb.data() + static_cast<size_t>(c) * gray.numel());
    Tensor<float> r = resize_image_bilinear(rgb, th, tw);
    Tensor<float> out = Tensor<float>::zeros({th, tw});
    std::copy(r.data(), r.data() + out.numel(), out.data());
    return out;
}

}  // namespace

void save_tokenizer(const std::string& path, const FrozenTokenizer<float>& tok) {
    Archive a;
    a.metadata["kind"] = "tokenizer";
    add_tokenizer_fields(a, tok);
    write_archive(path, a);
}

FrozenTokenizer<float> load_tokenizer(const std::string& path) {
    Archive a = read_archive(path);
    if (a.meta("kind") != "tokenizer")
        throw FormatError("'" + path + "' is not a tokenizer archive (kind=" + a.meta("kind") + ")");
    return tokenizer_from_archive(a);
}

void save_checkpoint(const std::string& path, const LmmModel<float>& model,
                     const FrozenTokenizer<float>& tok, const TrainConfig& cfg, int epoch,
                     double best_val_dsc, const AdamW<float>* opt) {
    Archive a;
    a.metadata["kind"] = "checkpoint";
    a.metadata["config"] = cfg.to_json().dump();
    a.metadata["lmm_config"] = model.cfg.to_json().dump();
    a.metadata["epoch"] = std::to_string(epoch);
    a.metadata["best_val_dsc"] = fmt_double(best_val_dsc);
    a.metadata["tokenizer_hash"] = tok.param_hash();
    add_tokenizer_fields(a, tok);
    add_params(a, "lmm.", model.named_params());
    if (opt) {
        a.metadata["opt_step_count"] = std::to_string(opt->step_count());
        add_params(a, "", opt->named_state());
    }
    write_archive(path, a);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    Archive a = read_archive(path);
    if (a.meta("kind") != "checkpoint")
        throw FormatError("'" + path + "' is not a checkpoint archive (kind=" + a.meta("kind") + ")");
    LoadedCheckpoint ck;
    ck.config = TrainConfig::from_json(nlohmann::json::parse(a.meta("config")));
    const LmmConfig mc = LmmConfig::from_json(nlohmann::json::parse(a.meta("lmm_config")));
    Rng dummy(0);
    ck.model = LmmModel<float>::build(mc, dummy);
    ParamList<float> params = ck.model.named_params();
    load_params_into(a, "lmm.", params);
    ck.tokenizer = tokenizer_from_archive(a);
    ck.tokenizer_hash = a.meta("tokenizer_hash");
    ck.epoch = std::atoi(a.meta("epoch").c_str());
    ck.best_val_dsc = std::atof(a.meta("best_val_dsc").c_str());
    return ck;
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

namespace {

SampleMetrics eval_one(const LmmModel<float>& model, const FrozenTokenizer<float>& tok, const Sample& s) {
    NoGradGuard ng;
    Tensor<float> z = tok.encode_image(s.image);
    Tensor<float> z_hat = model.forward_single(z);
    auto dec = tok.decode_to_mask(z_hat);
    MetricResult m = all_metrics(s.mask, dec.binary);
    return SampleMetrics{s.id, m.dsc, m.iou, m.hd95};
}

}  // namespace

EvalReport evaluate(const LmmModel<float>& model, const FrozenTokenizer<float>& tok,
                    const std::vector<Sample>& samples, const TrainConfig& cfg) {
    if (samples.empty()) throw UsageError("evaluate: no samples");
    std::vector<SampleMetrics> results(samples.size());
    const int nthreads = std::min<int>(worker_threads(cfg.deterministic), static_cast<int>(samples.size()));
    if (nthreads <= 1) {
        for (size_t i = 0; i < samples.size(); ++i) results[i] = eval_one(model, tok, samples[i]);
    } else {
        // strided workers; each result slot is owned by exactly one worker,
        // aggregation below runs in index order
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back([&, t]() {
                for (size_t i = static_cast<size_t>(t); i < samples.size(); i += static_cast<size_t>(nthreads))
                    results[i] = eval_one(model, tok, samples[i]);
            });
        for (auto& th : pool) th.join();
    }
    EvalReport r;
    r.per_sample = std::move(results);
    for (const auto& s : r.per_sample) {
        r.dsc += s.dsc;
        r.iou += s.iou;
        r.hd95 += s.hd95;
    }
    const double inv = 1.0 / static_cast<double>(r.per_sample.size());
    r.dsc *= inv;
    r.iou *= inv;
    r.hd95 *= inv;
    r.n = r.per_sample.size();
    r.seed = cfg.seed;
    r.config_hash = cfg.config_hash();
    r.trainable_params = model.count_trainable_params();
    return r;
}

EvalReport evaluate_checkpoint(const LoadedCheckpoint& ck, const FrozenTokenizer<float>& tok,
                               const std::vector<Sample>& samples) {
    if (ck.tokenizer_hash != tok.param_hash())
        throw ContractError("evaluate: tokenizer hash mismatch between checkpoint and supplied tokenizer");
    return evaluate(ck.model, tok, samples, ck.config);
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

TrainResult train(const TrainConfig& cfg, const FrozenTokenizer<float>& tok) {
    if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (cfg.image_size % 8 != 0) throw ConfigError("train: image_size must be divisible by 8");
    if (cfg.out_dir.empty()) throw UsageError("train: out_dir is required");
    if (!cfg.loss.use_lm && !cfg.loss.use_seg)
        throw ConfigError("train: at least one loss component must be enabled");
    if (!tok.frozen) throw ContractError("train: tokenizer must be frozen");

    const auto t_start = std::chrono::steady_clock::now();

    std::vector<std::string> ids = load_manifest(cfg.dataset_root);
    auto [train_ids, test_ids] = split(ids, 0.8, cfg.seed);
    if (train_ids.empty() || test_ids.empty())
        throw UsageError(strfmt("train: split of %zu ids produced an empty subset", ids.size()));

    size_t val_n = 0;
    if (train_ids.size() >= 10)
        val_n = static_cast<size_t>(std::lround(cfg.val_fraction * static_cast<double>(train_ids.size())));
    else if (train_ids.size() >= 2)
        val_n = 1;
    std::vector<std::string> val_ids(train_ids.begin(), train_ids.begin() + static_cast<long>(val_n));
    std::vector<std::string> fit_ids(train_ids.begin() + static_cast<long>(val_n), train_ids.end());
    if (fit_ids.empty()) throw UsageError("train: no samples left after validation carve");

    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("train: cannot create out dir '" + cfg.out_dir + "': " + ec.message());
    write_id_list(cfg.out_dir + "/split_train.txt", fit_ids);
    write_id_list(cfg.out_dir + "/split_val.txt", val_ids);
    write_id_list(cfg.out_dir + "/split_test.txt", test_ids);

    std::vector<Sample> fit = load_samples(cfg.dataset_root, fit_ids, cfg.image_size);
    std::vector<Sample> val = load_samples(cfg.dataset_root, val_ids, cfg.image_size);
    std::vector<Sample> test = load_samples(cfg.dataset_root, test_ids, cfg.image_size);

    TrainResult result;
    result.tokenizer_hash_before = tok.param_hash();

    LmmConfig mc = cfg.lmm;
    mc.in_channels = mc.out_channels = tok.c_lat;
    Rng init_rng(cfg.seed);
    LmmModel<float> model = LmmModel<float>::build(mc, init_rng);
    result.init_param_hash = params_hash(model.named_params());

    AdamW<float> opt(model.named_params());
    CosineSchedule sched{cfg.lr, 0.0, cfg.epochs};
    AugmentConfig aug;
    aug.enabled = cfg.augment;

    const int S = cfg.image_size;
    const size_t hw = static_cast<size_t>(S) * S;
    std::vector<size_t> order(fit.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::ofstream log(cfg.out_dir + "/train_log.txt", std::ios::trunc);
    if (!log) throw IoError("train: cannot write train_log.txt");

    double best_val = -1.0;
    int best_epoch = -1;
    std::vector<std::vector<float>> best_weights;
    double epoch_loss_mean = 0.0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = sched.lr(epoch);
        Rng erng(Rng::derive(cfg.seed, 0xE11, static_cast<uint64_t>(epoch)));
        erng.shuffle(order);

        double epoch_loss = 0.0;
        int nbatches = 0;
        for (size_t b0 = 0; b0 < order.size(); b0 += static_cast<size_t>(cfg.batch_size)) {
            const int k = static_cast<int>(
                std::min(static_cast<size_t>(cfg.batch_size), order.size() - b0));

            Tensor<float> imgs = Tensor<float>::zeros({k, 3, S, S});
            Tensor<float> masks = Tensor<float>::zeros({k, S, S});
            for (int i = 0; i < k; ++i) {
                const size_t di = order[b0 + static_cast<size_t>(i)];
                Sample s = fit[di];
                if (cfg.augment) {
                    Rng arng(Rng::derive(cfg.seed, static_cast<uint64_t>(epoch), di));
                    s = augment(s, aug, arng);
                }
                std::copy(s.image.data(), s.image.data() + s.image.numel(),
                          imgs.data() + static_cast<size_t>(i) * 3 * hw);
                for (size_t p = 0; p < hw; ++p)
                    masks.data()[static_cast<size_t>(i) * hw + p] = static_cast<float>(s.mask.v[p]);
            }

            Tensor<float> z_i, z_m;
            {
                NoGradGuard ng;
                z_i = tok.encode_image_batch(imgs);
                z_m = tok.encode_mask_batch(masks);
            }

            Tensor<float> z_hat = model.forward(z_i);
            Tensor<float> gray_b;
            if (cfg.loss.use_seg) gray_b = tok.decode_gray_batch(z_hat);

            Tensor<float> total;
            double s0_lm = 0.0, s0_seg = 0.0;
            for (int i = 0; i < k; ++i) {
                Tensor<float> li;
                Tensor<float> lm_i, seg_i;
                if (cfg.loss.use_lm)
                    lm_i = latent_matching_loss(slice_batch(z_m, i), slice_batch(z_hat, i),
                                                cfg.loss.lm_reduction);
                if (cfg.loss.use_seg) {
                    Tensor<float> m_i = reshape(slice_batch(masks, i), {S, S});
                    Tensor<float> gray_i = reshape(slice_batch(gray_b, i), {S, S});
                    seg_i = soft_dice_loss(m_i, gray_i);
                }
                if (cfg.loss.use_lm && cfg.loss.use_seg)
                    li = add(lm_i, seg_i);
                else
                    li = cfg.loss.use_lm ? lm_i : seg_i;
                if (epoch == 0 && b0 == 0) {
                    if (cfg.loss.use_lm) s0_lm += static_cast<double>(lm_i.item());
                    if (cfg.loss.use_seg) s0_seg += static_cast<double>(seg_i.item());
                }
                total = total.defined() ? add(total, li) : li;
            }
            Tensor<float> batch_loss = scale(total, 1.0f / static_cast<float>(k));
            const double lv = static_cast<double>(batch_loss.item());
            if (!std::isfinite(lv))
                throw StateError(strfmt(
                    "train: loss diverged to non-finite value at epoch %d batch %d (lr %.3g)", epoch,
                    nbatches, lr));

            if (epoch == 0 && b0 == 0) {
                result.step0.lm = s0_lm / k;
                result.step0.seg = s0_seg / k;
                result.step0.total = result.step0.lm + result.step0.seg;
            }

            GradMap<float> grads = backward(batch_loss);
            opt.step(grads, lr);
            epoch_loss += lv;
            ++nbatches;
        }
        epoch_loss_mean = epoch_loss / nbatches;

        double val_dsc = -1.0;
        if (!val.empty()) {
            double acc = 0.0;
            for (const Sample& s : val) acc += eval_one(model, tok, s).dsc;
            val_dsc = acc / static_cast<double>(val.size());
            if (val_dsc > best_val) {
                best_val = val_dsc;
                best_epoch = epoch;
                best_weights.clear();
                for (const auto& [name, t] : model.named_params())
                    best_weights.emplace_back(t.data(), t.data() + t.numel());
            }
        }
        log << strfmt("epoch %d loss %.8f lr %.8g", epoch, epoch_loss_mean, lr);
        if (val_dsc >= 0.0) log << strfmt(" val_dsc %.6f", val_dsc);
        log << "\n";
    }
    result.final_train_loss = epoch_loss_mean;

    if (best_weights.empty()) {  // no validation split: final weights are best
        best_epoch = cfg.epochs - 1;
        best_val = 0.0;
        for (const auto& [name, t] : model.named_params())
            best_weights.emplace_back(t.data(), t.data() + t.numel());
    }
    result.best_val_dsc = best_val;
    result.best_epoch = best_epoch;

    result.checkpoint_final = cfg.out_dir + "/final.gmst";
    save_checkpoint(result.checkpoint_final, model, tok, cfg, cfg.epochs, best_val, &opt);

    // restore best weights for the best checkpoint and the test report
    {
        ParamList<float> params = model.named_params();
        for (size_t i = 0; i < params.size(); ++i)
            std::copy(best_weights[i].begin(), best_weights[i].end(), params[i].second.data());
    }
    result.checkpoint_best = cfg.out_dir + "/best.gmst";
    save_checkpoint(result.checkpoint_best, model, tok, cfg, best_epoch, best_val, nullptr);

    result.tokenizer_hash_after = tok.param_hash();
    if (result.tokenizer_hash_after != result.tokenizer_hash_before)
        throw ContractError("train: tokenizer parameters changed during training");

    result.report = evaluate(model, tok, test, cfg);
    if (!cfg.deterministic)
        result.report.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    result.report.write(cfg.out_dir + "/report.json");
    return result;
}

// ---------------------------------------------------------------------------
// prediction
// ---------------------------------------------------------------------------

PredictResult predict(const LoadedCheckpoint& ck, const std::string& image_path,
                      const std::string& mask_path, const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("predict: cannot create out dir '" + out_dir + "': " + ec.message());

    Tensor<float> img = read_ppm(image_path);
    const int H = img.dim(1), W = img.dim(2);
    const int S = ck.config.image_size;
    Tensor<float> model_in = (H == S && W == S) ? img : resize_image_bilinear(img, S, S);

    NoGradGuard ng;
    Tensor<float> z = ck.tokenizer.encode_image(model_in);
    Tensor<float> z_hat = ck.model.forward_single(z);
    auto dec = ck.tokenizer.decode_to_mask(z_hat);

    Tensor<float> gray = dec.gray;
    Mask binary = dec.binary;
    if (H != S || W != S) {  // map back to the input geometry
        gray = resize_gray_bilinear(gray, H, W);
        binary = resize_mask_nearest(binary, H, W);
    }

    PredictResult r;
    r.mask_path = out_dir + "/pred_mask.pgm";
    r.gray_path = out_dir + "/pred_gray.pgm";
    write_pgm_mask(r.mask_path, binary);
    write_pgm_gray(r.gray_path, gray);

    if (!mask_path.empty()) {
        Mask truth = read_pgm_mask(mask_path);
        if (truth.h != H || truth.w != W)
            throw ValidationError(strfmt("predict: mask %dx%d does not match image %dx%d", truth.h,
                                         truth.w, H, W));
        r.dsc = dsc_iou(truth, binary).first;
    }
    return r;
}

// ---------------------------------------------------------------------------
// experiment protocols
// ---------------------------------------------------------------------------

AblationResult run_ablation(const TrainConfig& base, const FrozenTokenizer<float>& tok) {
    struct Mode {
        const char* label;
        bool lm, seg;
    };
    const Mode modes[3] = {{"lm", true, false}, {"seg", false, true}, {"both", true, true}};

    AblationResult out;
    for (const Mode& m : modes) {
        TrainConfig cfg = base;
        cfg.loss.use_lm = m.lm;
        cfg.loss.use_seg = m.seg;
        cfg.out_dir = base.out_dir + "/" + m.label;
        TrainResult tr = train(cfg, tok);
        AblationRow row;
        row.label = m.label;
        row.dsc = tr.report.dsc;
        row.iou = tr.report.iou;
        row.hd95 = tr.report.hd95;
        row.step0 = tr.step0;
        row.init_param_hash = tr.init_param_hash;
        out.rows.push_back(row);
    }

    nlohmann::json j;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : out.rows)
        j["rows"].push_back({{"loss", r.label},
                             {"dsc", r.dsc},
                             {"iou", r.iou},
                             {"hd95", r.hd95},
                             {"step0_lm", r.step0.lm},
                             {"step0_seg", r.step0.seg},
                             {"step0_total", r.step0.total},
                             {"init_param_hash", r.init_param_hash}});
    j["step0_identity_abs_err"] =
        std::abs(out.rows[2].step0.total - (out.rows[0].step0.total + out.rows[1].step0.total));
    out.table_path = base.out_dir + "/ablation.json";
    std::ofstream f(out.table_path, std::ios::trunc);
    if (!f) throw IoError("cannot write '" + out.table_path + "'");
    f << j.dump(2) << "\n";
    return out;
}

CrossDomainResult run_cross_domain(const TrainConfig& cfg_a, const TrainConfig& cfg_b,
                                   const FrozenTokenizer<float>& tok) {
    TrainResult ra = train(cfg_a, tok);
    TrainResult rb = train(cfg_b, tok);

    LoadedCheckpoint ck_a = load_checkpoint(ra.checkpoint_best);
    LoadedCheckpoint ck_b = load_checkpoint(rb.checkpoint_best);

    auto test_split_samples = [](const TrainConfig& cfg, int image_size) {
        auto ids = load_manifest(cfg.dataset_root);
        auto [train_ids, test_ids] = split(ids, 0.8, cfg.seed);
        (void)train_ids;
        return load_samples(cfg.dataset_root, test_ids, image_size);
    };
    std::vector<Sample> test_b_for_a = test_split_samples(cfg_b, cfg_a.image_size);
    std::vector<Sample> test_a_for_b = test_split_samples(cfg_a, cfg_b.image_size);

    EvalReport a_on_b = evaluate_checkpoint(ck_a, tok, test_b_for_a);
    EvalReport b_on_a = evaluate_checkpoint(ck_b, tok, test_a_for_b);

    CrossDomainResult out;
    out.cells = {
        {"A", "A", ra.report.dsc, ra.report.iou, ra.report.hd95},
        {"A", "B", a_on_b.dsc, a_on_b.iou, a_on_b.hd95},
        {"B", "B", rb.report.dsc, rb.report.iou, rb.report.hd95},
        {"B", "A", b_on_a.dsc, b_on_a.iou, b_on_a.hd95},
    };
    out.in_domain_ge_cross_a = out.cells[0].dsc >= out.cells[1].dsc;
    out.in_domain_ge_cross_b = out.cells[2].dsc >= out.cells[3].dsc;

    nlohmann::json j;
    j["cells"] = nlohmann::json::array();
    for (const auto& c : out.cells)
        j["cells"].push_back({{"train", c.train_domain},
                              {"test", c.test_domain},
                              {"dsc", c.dsc},
                              {"iou", c.iou},
                              {"hd95", c.hd95}});
    j["in_domain_ge_cross_a"] = out.in_domain_ge_cross_a;
    j["in_domain_ge_cross_b"] = out.in_domain_ge_cross_b;
    j["seed_a"] = cfg_a.seed;
    j["seed_b"] = cfg_b.seed;
    j["dataset_a"] = cfg_a.dataset_root;
    j["dataset_b"] = cfg_b.dataset_root;
    j["checkpoint_a"] = ra.checkpoint_best;
    j["checkpoint_b"] = rb.checkpoint_best;

    const std::string root = fs::path(cfg_a.out_dir).parent_path().string();
    out.table_path = (root.empty() ? cfg_a.out_dir : root) + "/cross_domain.json";
    std::ofstream f(out.table_path, std::ios::trunc);
    if (!f) throw IoError("cannot write '" + out.table_path + "'");
    f << j.dump(2) << "\n";
    return out;
}

TokenizerAblationResult run_tokenizer_ablation(const TrainConfig& base,
                                               const FrozenTokenizer<float>& patch_tok,
                                               const FrozenTokenizer<float>& vae_tok) {
    TokenizerAblationResult out;
    struct Row {
        const char* label;
        const FrozenTokenizer<float>* tok;
        TokenizerKind kind;
    };
    const Row rows[2] = {{"patch", &patch_tok, TokenizerKind::Patch},
                         {"conv_vae", &vae_tok, TokenizerKind::ConvVae}};
    for (const Row& r : rows) {
        TrainConfig cfg = base;
        cfg.tokenizer = r.kind;
        cfg.out_dir = base.out_dir + "/" + r.label;
        TrainResult tr = train(cfg, *r.tok);
        TokenizerAblationRow row;
        row.tokenizer = r.label;
        row.latent_channels = r.tok->c_lat;
        row.seed = cfg.seed;
        row.dsc = tr.report.dsc;
        row.iou = tr.report.iou;
        row.hd95 = tr.report.hd95;
        out.rows.push_back(row);
    }

    nlohmann::json j;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : out.rows)
        j["rows"].push_back({{"tokenizer", r.tokenizer},
                             {"latent_channels", r.latent_channels},
                             {"seed", r.seed},
                             {"dsc", r.dsc},
                             {"iou", r.iou},
                             {"hd95", r.hd95}});
    out.table_path = base.out_dir + "/tokenizer_ablation.json";
    std::ofstream f(out.table_path, std::ios::trunc);
    if (!f) throw IoError("cannot write '" + out.table_path + "'");
    f << j.dump(2) << "\n";
    return out;
}

}  // namespace gms
