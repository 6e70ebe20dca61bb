// Command-line entry point for the full pipeline: synthetic data generation,
// tokenizer training, LMM training/evaluation/prediction, and the three
// experiment protocols. Exit codes: 0 success, 1 usage/validation problems,
// 2 internal errors.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "gms/trainer.hpp"

namespace {

struct CliOptions {
    std::string dataset;
    std::string dataset_b;
    std::string domain = "A";
    int n = 250;
    int size = 64;
    uint64_t seed = 7;
    std::string tokenizer = "patch";
    std::string tokenizer_weights;
    int epochs = 200;
    int batch_size = 8;
    double lr = 2e-3;
    double kl_weight = 1e-6;
    std::string loss = "both";
    std::string out;
    std::string checkpoint;
    std::string image;
    std::string mask;
    std::string deterministic = "on";
};

gms::LossConfig parse_loss(const std::string& s) {
    gms::LossConfig c;
    if (s == "lm") {
        c.use_lm = true;
        c.use_seg = false;
    } else if (s == "seg") {
        c.use_lm = false;
        c.use_seg = true;
    } else if (s == "both") {
        c.use_lm = true;
        c.use_seg = true;
    } else {
        throw gms::UsageError("--loss must be one of {lm|seg|both}, got '" + s + "'");
    }
    return c;
}

bool parse_deterministic(const std::string& s) {
    if (s == "on") return true;
    if (s == "off") return false;
    throw gms::UsageError("--deterministic must be 'on' or 'off', got '" + s + "'");
}

gms::FrozenTokenizer<float> resolve_tokenizer(const CliOptions& o) {
    if (o.tokenizer == "patch") return gms::FrozenTokenizer<float>::make_patch();
    if (o.tokenizer == "vae") {
        if (o.tokenizer_weights.empty())
            throw gms::UsageError("--tokenizer vae requires --tokenizer-weights <archive>");
        return gms::load_tokenizer(o.tokenizer_weights);
    }
    throw gms::UsageError("--tokenizer must be 'patch' or 'vae', got '" + o.tokenizer + "'");
}

gms::TrainConfig make_train_config(const CliOptions& o) {
    gms::TrainConfig cfg;
    cfg.dataset_root = o.dataset;
    cfg.tokenizer = o.tokenizer == "vae" ? gms::TokenizerKind::ConvVae : gms::TokenizerKind::Patch;
    cfg.tokenizer_weights = o.tokenizer_weights;
    cfg.loss = parse_loss(o.loss);
    cfg.batch_size = o.batch_size;
    cfg.epochs = o.epochs;
    cfg.image_size = o.size;
    cfg.seed = o.seed;
    cfg.deterministic = parse_deterministic(o.deterministic);
    cfg.lr = o.lr;
    cfg.out_dir = o.out;
    return cfg;
}

void print_report_line(const gms::EvalReport& r) {
    std::printf("n=%zu dsc=%.4f iou=%.4f hd95=%.4f params=%zu\n", r.n, r.dsc, r.iou, r.hd95,
                r.trainable_params);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gms: latent-space segmentation pipeline (generate, train, evaluate, ablate)"};
    app.require_subcommand(1);
    app.footer("Environment: GMS_THREADS caps worker pools (default 1 in deterministic mode).");

    CliOptions o;
    std::function<int()> action;

    auto add_dataset = [&](CLI::App* cmd) {
        cmd->add_option("--dataset", o.dataset, "dataset root directory")->required();
    };
    auto add_common_train = [&](CLI::App* cmd) {
        add_dataset(cmd);
        cmd->add_option("--tokenizer", o.tokenizer, "image tokenizer {patch|vae}");
        cmd->add_option("--tokenizer-weights", o.tokenizer_weights, "tokenizer archive (for vae)");
        cmd->add_option("--epochs", o.epochs, "training epochs");
        cmd->add_option("--batch-size", o.batch_size, "batch size");
        cmd->add_option("--lr", o.lr, "initial learning rate");
        cmd->add_option("--size", o.size, "square image size (divisible by 8)");
        cmd->add_option("--seed", o.seed, "rng seed");
        cmd->add_option("--deterministic", o.deterministic, "deterministic mode {on|off}");
        cmd->add_option("--out", o.out, "output directory")->required();
    };

    // gen-data
    {
        CLI::App* cmd = app.add_subcommand("gen-data", "generate a synthetic two-domain dataset");
        cmd->add_option("--domain", o.domain, "domain {A|B}")->required();
        cmd->add_option("--n", o.n, "number of samples");
        cmd->add_option("--size", o.size, "square image size (divisible by 8)");
        cmd->add_option("--seed", o.seed, "rng seed");
        cmd->add_option("--out", o.out, "dataset root directory")->required();
        cmd->callback([&]() {
            action = [&]() {
                auto spec = gms::DomainSpec::standard(gms::domain_from_name(o.domain));
                gms::generate_synthetic(spec, o.n, o.size, o.seed, o.out);
                std::printf("wrote %d samples to %s\n", o.n, o.out.c_str());
                return 0;
            };
        });
    }

    // train-tokenizer
    {
        CLI::App* cmd = app.add_subcommand("train-tokenizer", "train the desk-scale conv VAE tokenizer");
        add_dataset(cmd);
        cmd->add_option("--epochs", o.epochs, "training epochs")->default_val(120);
        cmd->add_option("--lr", o.lr, "initial learning rate");
        cmd->add_option("--kl-weight", o.kl_weight, "KL divergence weight");
        cmd->add_option("--size", o.size, "square image size (divisible by 8)");
        cmd->add_option("--seed", o.seed, "rng seed");
        cmd->add_option("--out", o.out, "output archive path (e.g. runs/tokenizer.gmst)")->required();
        cmd->callback([&]() {
            action = [&]() {
                auto ids = gms::load_manifest(o.dataset);
                std::vector<gms::Tensor<float>> images;
                images.reserve(ids.size());
                for (const auto& id : ids)
                    images.push_back(gms::resize(gms::load_sample(o.dataset, id), o.size).image);
                gms::VaeTrainConfig vc;
                vc.epochs = o.epochs;
                vc.lr = o.lr;
                vc.kl_weight = o.kl_weight;
                vc.seed = o.seed;
                vc.verbose = true;
                auto tok = gms::train_conv_vae<float>(images, vc);
                gms::save_tokenizer(o.out, tok);
                std::printf("tokenizer saved to %s (hash %s)\n", o.out.c_str(),
                            tok.param_hash().c_str());
                return 0;
            };
        });
    }

    // train
    {
        CLI::App* cmd = app.add_subcommand("train", "train the latent mapping model");
        add_common_train(cmd);
        cmd->add_option("--loss", o.loss, "loss composition {lm|seg|both}");
        cmd->callback([&]() {
            action = [&]() {
                auto tok = resolve_tokenizer(o);
                auto cfg = make_train_config(o);
                auto res = gms::train(cfg, tok);
                std::printf("best epoch %d (val dsc %.4f), checkpoints: %s %s\n", res.best_epoch,
                            res.best_val_dsc, res.checkpoint_best.c_str(), res.checkpoint_final.c_str());
                print_report_line(res.report);
                return 0;
            };
        });
    }

    // eval
    {
        CLI::App* cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset's test split");
        add_dataset(cmd);
        cmd->add_option("--checkpoint", o.checkpoint, "checkpoint archive")->required();
        cmd->add_option("--out", o.out, "output directory")->required();
        cmd->callback([&]() {
            action = [&]() {
                auto ck = gms::load_checkpoint(o.checkpoint);
                auto ids = gms::load_manifest(o.dataset);
                auto [train_ids, test_ids] = gms::split(ids, 0.8, ck.config.seed);
                (void)train_ids;
                std::vector<gms::Sample> samples;
                for (const auto& id : test_ids)
                    samples.push_back(gms::resize(gms::load_sample(o.dataset, id), ck.config.image_size));
                auto report = gms::evaluate_checkpoint(ck, ck.tokenizer, samples);
                std::filesystem::create_directories(o.out);
                report.write(o.out + "/report_eval.json");
                print_report_line(report);
                return 0;
            };
        });
    }

    // predict
    {
        CLI::App* cmd = app.add_subcommand("predict", "segment a single image");
        cmd->add_option("--checkpoint", o.checkpoint, "checkpoint archive")->required();
        cmd->add_option("--image", o.image, "input PPM image")->required();
        cmd->add_option("--mask", o.mask, "optional ground-truth PGM mask (prints DSC)");
        cmd->add_option("--out", o.out, "output directory")->required();
        cmd->callback([&]() {
            action = [&]() {
                auto ck = gms::load_checkpoint(o.checkpoint);
                auto res = gms::predict(ck, o.image, o.mask, o.out);
                std::printf("mask: %s\ngray: %s\n", res.mask_path.c_str(), res.gray_path.c_str());
                if (res.dsc) std::printf("dsc=%.4f\n", *res.dsc);
                return 0;
            };
        });
    }

    // ablate
    {
        CLI::App* cmd = app.add_subcommand("ablate", "loss ablation: lm only / seg only / compound");
        add_common_train(cmd);
        cmd->callback([&]() {
            action = [&]() {
                auto tok = resolve_tokenizer(o);
                auto base = make_train_config(o);
                auto res = gms::run_ablation(base, tok);
                std::printf("%-6s %-8s %-8s %-8s\n", "loss", "dsc", "iou", "hd95");
                for (const auto& r : res.rows)
                    std::printf("%-6s %-8.4f %-8.4f %-8.4f\n", r.label.c_str(), r.dsc, r.iou, r.hd95);
                std::printf("table: %s\n", res.table_path.c_str());
                return 0;
            };
        });
    }

    // cross-domain
    {
        CLI::App* cmd = app.add_subcommand("cross-domain",
                                           "train per domain, evaluate in- and cross-domain");
        add_common_train(cmd);
        cmd->add_option("--dataset-b", o.dataset_b, "second domain dataset root")->required();
        cmd->add_option("--loss", o.loss, "loss composition {lm|seg|both}");
        cmd->callback([&]() {
            action = [&]() {
                auto tok = resolve_tokenizer(o);
                auto cfg_a = make_train_config(o);
                cfg_a.out_dir = o.out + "/A";
                auto cfg_b = cfg_a;
                cfg_b.dataset_root = o.dataset_b;
                cfg_b.out_dir = o.out + "/B";
                auto res = gms::run_cross_domain(cfg_a, cfg_b, tok);
                std::printf("%-6s %-6s %-8s %-8s\n", "train", "test", "dsc", "hd95");
                for (const auto& c : res.cells)
                    std::printf("%-6s %-6s %-8.4f %-8.4f\n", c.train_domain.c_str(),
                                c.test_domain.c_str(), c.dsc, c.hd95);
                std::printf("table: %s\n", res.table_path.c_str());
                return 0;
            };
        });
    }

    // tok-ablate
    {
        CLI::App* cmd = app.add_subcommand("tok-ablate", "tokenizer ablation: patch vs conv VAE");
        add_common_train(cmd);
        cmd->add_option("--loss", o.loss, "loss composition {lm|seg|both}");
        cmd->callback([&]() {
            action = [&]() {
                if (o.tokenizer_weights.empty())
                    throw gms::UsageError("tok-ablate requires --tokenizer-weights for the vae row");
                auto patch = gms::FrozenTokenizer<float>::make_patch();
                auto vae = gms::load_tokenizer(o.tokenizer_weights);
                auto base = make_train_config(o);
                auto res = gms::run_tokenizer_ablation(base, patch, vae);
                std::printf("%-10s %-6s %-8s %-8s %-8s\n", "tokenizer", "c_lat", "dsc", "iou", "hd95");
                for (const auto& r : res.rows)
                    std::printf("%-10s %-6d %-8.4f %-8.4f %-8.4f\n", r.tokenizer.c_str(),
                                r.latent_channels, r.dsc, r.iou, r.hd95);
                std::printf("table: %s\n", res.table_path.c_str());
                return 0;
            };
        });
    }

    // inspect-archive
    {
        CLI::App* cmd = app.add_subcommand("inspect-archive", "list tensors and metadata of an archive");
        cmd->add_option("--checkpoint", o.checkpoint, "archive path")->required();
        cmd->callback([&]() {
            action = [&]() {
                auto a = gms::read_archive(o.checkpoint);
                std::printf("metadata (%zu entries):\n", a.metadata.size());
                for (const auto& [k, v] : a.metadata) {
                    std::string shown = v.size() > 72 ? v.substr(0, 69) + "..." : v;
                    std::printf("  %s = %s\n", k.c_str(), shown.c_str());
                }
                std::printf("tensors (%zu):\n", a.tensors.size());
                for (const auto& [name, t] : a.tensors)
                    std::printf("  %-40s %s %s (%zu bytes)\n", name.c_str(), t.dtype.c_str(),
                                gms::shape_str(t.shape).c_str(), t.bytes.size());
                return 0;
            };
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        return action();
    } catch (const gms::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
    } catch (const gms::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
    } catch (const gms::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
    } catch (const gms::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
    } catch (const gms::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
    } catch (const gms::VersionError& e) {
        std::cerr << "version error: " << e.what() << "\n";
    } catch (const gms::CorruptionError& e) {
        std::cerr << "corrupt archive: " << e.what() << "\n";
    } catch (const gms::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
    } catch (const gms::Error& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
