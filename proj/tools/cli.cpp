#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hdrgan/checkpoint.hpp"
#include "hdrgan/data_synth.hpp"
#include "hdrgan/error.hpp"
#include "hdrgan/evaluation.hpp"
#include "hdrgan/image_io.hpp"
#include "hdrgan/inference.hpp"
#include "hdrgan/log.hpp"
#include "hdrgan/oemask.hpp"
#include "hdrgan/tonemap.hpp"
#include "hdrgan/training.hpp"

namespace hdrgan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
T parse_number(const std::string& s, const std::string& what) {
    T v{};
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
        throw ArgumentError("bad " + what + " '" + s + "'");
    }
    return v;
}

// Flags of a subcommand as TOML text, defaults included.
std::string echo_flags(const CLI::App& sub) { return sub.config_to_str(true, false); }

void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

void ensure_dir(const fs::path& dir) {
    if (dir.empty()) return;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// Flags carry exposures as base-2 exponents.
std::vector<double> exposure_times(const std::vector<double>& exponents) {
    return exponents.empty() ? ExposureModel{}.exposure_times : ExposureModel::from_log2(exponents);
}

bool is_hdr_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".pfm" || ext == ".hdr" || ext == ".pic";
}

struct ToysetArgs {
    std::string out;
    std::string seeds = "0..8";
    int size = 64;
    std::vector<double> exposures;
    double gamma = 2.2;
};

struct SynthArgs {
    std::string hdr_dir;
    std::string hdr;
    std::string out;
    std::vector<double> exposures;
    double gamma = 2.2;
};

struct MaskArgs {
    std::string provider = "threshold";
    std::string ldr;
    std::string out;
    double tau = kDefaultMaskTau;
    int dilate = 0;
};

struct TrainArgs {
    std::string manifest;
    std::string out;
    std::string epochs;
    std::string resume;
    std::string variant = "AttnR2";
    std::string norm = "instance";
    std::string disc_norm = "instance";
    std::string config;
    TrainConfig cfg;
};

struct InferArgs {
    std::string ldr;
    std::string ckpt;
    std::string out;
    std::string mask;
    double tau = kDefaultMaskTau;
    int dilate = 0;
    bool dump_stages = false;
    std::string preview;
    bool stochastic = false;
    std::uint64_t seed = 0;
    bool no_pad = false;
};

struct EvalArgs {
    std::string manifest;
    std::string ckpt;
    std::string out;
    std::string table;
    int size = 0;
    double mu = 5000.0;
    std::string mask_provider = "threshold";
    double tau = kDefaultMaskTau;
    int dilate = 0;
};

struct TonemapArgs {
    double mu = 5000.0;
    std::string in;
    std::string out;
};

int do_toyset(const ToysetArgs& a, const CLI::App& sub, std::ostream& out) {
    const auto [first, last] = parse_seed_range(a.seeds);
    ExposureModel model;
    model.gamma = a.gamma;
    model.exposure_times = exposure_times(a.exposures);
    model.validate();
    const fs::path root(a.out);
    ensure_dir(root / "hdr");
    ensure_dir(root / "ldr");
    DatasetManifest m;
    m.root = root;
    for (std::uint64_t s = first; s < last; ++s) {
        const HdrImage h = make_toy_scene(s, a.size);
        const std::string base = "toy_" + std::to_string(s);
        const fs::path hp = root / "hdr" / (base + ".pfm");
        save_pfm(h, hp);
        for (std::size_t k = 0; k < model.exposure_times.size(); ++k) {
            const fs::path lp = root / "ldr" / (base + "_e" + std::to_string(k) + ".png");
            save_ldr(synthesize_ldr(h, model.exposure_times[k], model), lp);
            m.entries.push_back({lp, hp, std::nullopt});
        }
    }
    std::vector<std::string> comments{"hdrgan toyset"};
    std::istringstream flags(echo_flags(sub));
    for (std::string line; std::getline(flags, line);) {
        if (!line.empty()) comments.push_back(line);
    }
    save_manifest(m, root / "manifest.tsv", comments);
    out << "wrote " << m.entries.size() << " pairs (" << (last - first) << " scenes) to " << (root / "manifest.tsv").string()
        << '\n';
    return kOk;
}

int do_synth(const SynthArgs& a, const CLI::App& sub, std::ostream& out) {
    ExposureModel model;
    model.gamma = a.gamma;
    model.exposure_times = exposure_times(a.exposures);
    model.validate();
    std::vector<fs::path> inputs;
    if (!a.hdr.empty()) inputs.emplace_back(a.hdr);
    if (!a.hdr_dir.empty()) {
        if (!fs::is_directory(a.hdr_dir)) throw IoError("not a directory: " + a.hdr_dir);
        std::vector<fs::path> found;
        for (const auto& e : fs::directory_iterator(a.hdr_dir)) {
            if (e.is_regular_file() && is_hdr_file(e.path())) found.push_back(e.path());
        }
        std::sort(found.begin(), found.end());
        inputs.insert(inputs.end(), found.begin(), found.end());
    }
    if (inputs.empty()) throw ArgumentError("synth needs --hdr-dir with HDR files or --hdr");
    const fs::path root(a.out);
    ensure_dir(root);
    DatasetManifest m;
    m.root = root;
    json files = json::array();
    for (const auto& in : inputs) {
        const HdrImage h = load_hdr(in);
        const std::string stem = in.stem().string();
        for (std::size_t k = 0; k < model.exposure_times.size(); ++k) {
            const fs::path lp = root / (stem + "_e" + std::to_string(k) + ".png");
            save_ldr(synthesize_ldr(h, model.exposure_times[k], model), lp);
            m.entries.push_back({lp, fs::absolute(in), std::nullopt});
            files.push_back({{"file", lp.filename().string()}, {"source", in.string()}, {"exposure", model.exposure_times[k]}});
        }
    }
    save_manifest(m, root / "manifest.tsv", {"hdrgan synth"});
    write_json({{"command", "synth"}, {"flags", echo_flags(sub)}, {"outputs", files}}, root / "synth.json");
    out << "wrote " << m.entries.size() << " LDR images from " << inputs.size() << " HDR file(s) to " << root.string()
        << '\n';
    return kOk;
}

int do_mask(const MaskArgs& a, const CLI::App& sub, std::ostream& out) {
    if (a.provider != "threshold") {
        throw ArgumentError("mask provider '" + a.provider + "' cannot run standalone; only 'threshold' can");
    }
    const LdrImage ldr = load_ldr(a.ldr);
    const OEMask m = ThresholdMaskProvider(a.tau, a.dilate).mask_for(ldr);
    ensure_dir(fs::path(a.out).parent_path());
    save_mask(m, a.out);
    write_json({{"command", "mask"}, {"flags", echo_flags(sub)}, {"coverage", m.coverage()}}, a.out + ".json");
    out << "mask coverage " << m.coverage() << " written to " << a.out << '\n';
    return kOk;
}

// Fills options not given on the command line from a flat TOML file.
void apply_config_file(CLI::App& sub, const std::string& path) {
    if (!fs::exists(path)) throw IoError("config file " + path + " not found");
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_file(path);
    } catch (const CLI::Error& e) {
        throw ConfigError("cannot parse " + path + ": " + e.what());
    }
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;
        if (!item.parents.empty()) throw ConfigError(path + ": sections are not supported ('" + item.fullname() + "')");
        CLI::Option* opt = sub.get_option_no_throw("--" + item.name);
        if (opt == nullptr || item.name == "config") throw ConfigError(path + ": unknown key '" + item.name + "'");
        if (opt->count() > 0) continue;
        try {
            for (const auto& v : item.inputs) opt->add_result(v);
            opt->run_callback();
        } catch (const CLI::Error& e) {
            throw ConfigError(path + ": bad value for '" + item.name + "': " + e.what());
        }
    }
}

int do_train(TrainArgs& a, CLI::App& sub, std::ostream& out) {
    if (!a.config.empty()) apply_config_file(sub, a.config);
    TrainConfig& cfg = a.cfg;
    if (!a.epochs.empty()) std::tie(cfg.epochs_const, cfg.epochs_decay) = parse_epochs(a.epochs);
    cfg.arch.variant = parse_variant(a.variant);
    cfg.arch.norm = parse_norm(a.norm);
    cfg.disc.norm = parse_norm(a.disc_norm);
    cfg.validate();
    const DatasetManifest manifest = load_manifest(a.manifest);
    const fs::path dir(a.out);
    ensure_dir(dir);
    write_json({{"command", "train"}, {"flags", echo_flags(sub)}, {"config", to_json(cfg)}}, dir / "run.json");
    FitOptions opts;
    if (!a.resume.empty()) opts.resume_from = fs::path(a.resume);
    std::int64_t shown = 0;
    opts.on_step = [&](const LossRecord& r) {
        if (++shown % 50 == 1) {
            out << "step " << r.step << " epoch " << r.epoch << " L_D " << r.loss_d << " L_rec " << r.loss_rec
                << " L_total " << r.loss_total << '\n';
        }
    };
    const FitResult res = fit(manifest, cfg, dir, opts);
    out << "trained " << res.records.size() << " steps; checkpoint " << res.final_checkpoint.string() << '\n';
    return kOk;
}

int do_infer(const InferArgs& a, const CLI::App& sub, std::ostream& out) {
    const Checkpoint ck = read_checkpoint(a.ckpt);
    const auto gen = load_generator(ck);
    const LdrImage ldr = load_ldr(a.ldr);
    const OEMask mask = a.mask.empty() ? ThresholdMaskProvider(a.tau, a.dilate).mask_for(ldr)
                                       : FileMaskProvider(a.mask, a.dilate).mask_for(ldr);
    InferOptions io;
    io.auto_pad = !a.no_pad;
    io.stochastic = a.stochastic;
    io.seed = a.seed;
    const InferResult r = infer(*gen, ldr, mask, io);

    const fs::path dst(a.out);
    ensure_dir(dst.parent_path());
    save_hdr(r.hdr, dst);
    json outputs{{"hdr", dst.filename().string()}};
    if (a.dump_stages) {
        const fs::path e = dst.parent_path() / (dst.stem().string() + "_linearized.pfm");
        const fs::path m = dst.parent_path() / (dst.stem().string() + "_corrected.pfm");
        save_pfm(r.linearized, e);
        save_pfm(r.corrected, m);
        outputs["linearized"] = e.filename().string();
        outputs["corrected"] = m.filename().string();
    }
    if (!a.preview.empty()) {
        ensure_dir(fs::path(a.preview).parent_path());
        save_ldr(tonemap_preview(r.hdr), a.preview);
        outputs["preview"] = fs::path(a.preview).filename().string();
    }
    write_json({{"command", "infer"},
                {"flags", echo_flags(sub)},
                {"architecture", to_json(gen->config())},
                {"mask_coverage", mask.coverage()},
                {"pad", {r.pad_right, r.pad_bottom}},
                {"outputs", outputs}},
               a.out + ".json");
    out << "wrote " << dst.string() << " (" << ldr.width() << "x" << ldr.height() << ")\n";
    return kOk;
}

int do_eval(const EvalArgs& a, const CLI::App& sub, std::ostream& out) {
    const DatasetManifest manifest = load_manifest(a.manifest, false);
    EvalOptions opts;
    opts.mu = a.mu;
    opts.mask.provider = a.mask_provider;
    opts.mask.tau = a.tau;
    opts.mask.dilate = a.dilate;
    opts.mask.validate();
    opts.meta["command"] = "eval";
    std::string flags = echo_flags(sub);
    while (!flags.empty() && flags.back() == '\n') flags.pop_back();
    std::replace(flags.begin(), flags.end(), '\n', ';');
    opts.meta["flags"] = flags;
    const MetricReport rep = evaluate(manifest, a.ckpt, opts, a.size);
    ensure_dir(fs::path(a.out).parent_path());
    write_report_csv(rep, a.out);
    const std::string table = format_summary_table({{fs::path(a.ckpt).stem().string(), rep}});
    if (!a.table.empty()) {
        std::ofstream t(a.table, std::ios::trunc);
        if (!t) throw IoError("cannot write " + a.table);
        t << table;
    }
    out << table;
    if (rep.excluded_count()) out << rep.excluded_count() << " row(s) excluded (non-finite prediction)\n";
    return kOk;
}

int do_tonemap(const TonemapArgs& a, std::ostream& out) {
    const MuLawParams p{a.mu};
    validate(p);
    const HdrImage h = load_hdr(a.in);
    ensure_dir(fs::path(a.out).parent_path());
    save_ldr(tonemap_preview(h, p), a.out);
    out << "wrote " << a.out << '\n';
    return kOk;
}

void add_train_flags(CLI::App* c, TrainArgs& a) {
    TrainConfig& cfg = a.cfg;
    c->add_option("--config", a.config, "TOML file of flag values (flat keys as below); explicit flags win");
    c->add_option("--manifest", a.manifest, "Dataset manifest (ldr<TAB>hdr[<TAB>mask])")->required();
    c->add_option("--out", a.out, "Output directory for checkpoints and losses.csv")->required();
    c->add_option("--resume", a.resume, "Continue from a training checkpoint");
    c->add_option("--epochs", a.epochs, "Epoch split CONST+DECAY (overrides epochs_const/epochs_decay)");
    c->add_option("--epochs_const", cfg.epochs_const, "Epochs at the initial learning rate");
    c->add_option("--epochs_decay", cfg.epochs_decay, "Epochs of linear decay to zero");
    c->add_option("--seed", cfg.seed, "Seed for initialisation, shuffling and dropout");
    c->add_option("--lr0", cfg.lr0, "Initial learning rate");
    c->add_option("--adam_beta1", cfg.adam_beta1, "Adam beta1");
    c->add_option("--adam_beta2", cfg.adam_beta2, "Adam beta2");
    c->add_option("--adam_eps", cfg.adam_eps, "Adam epsilon");
    c->add_option("--clip_norm", cfg.clip_norm, "Global gradient-norm clip (0 = off)");
    c->add_option("--batch_size", cfg.batch_size, "Pairs per step");
    c->add_option("--image_size", cfg.image_size, "Training resolution (pairs are resized to it)");
    c->add_option("--mu", cfg.mu, "mu-law compression");
    c->add_option("--gamma", cfg.gamma, "Display gamma of the capture model");
    c->add_option("--rec_weight", cfg.weights.rec_weight, "Weight of the reconstruction terms");
    c->add_option("--perc_weight", cfg.weights.perc_weight, "Weight of the perceptual term inside rec_weight");
    c->add_option("--variant", a.variant, "Generator block variant: AttnR2, R2 or Attn");
    c->add_option("--base_filters", cfg.arch.base_filters, "Filters at the first generator level");
    c->add_option("--depth", cfg.arch.depth, "Generator levels");
    c->add_option("--recurrence_steps", cfg.arch.recurrence_steps, "Convolutions per recurrent unit");
    c->add_option("--dropout", cfg.arch.dropout, "Decoder dropout rate while training");
    c->add_option("--dropout_levels", cfg.arch.dropout_levels, "Deepest decoder levels with dropout");
    c->add_option("--norm", a.norm, "Generator normalisation: instance or none");
    c->add_option("--disc_filters", cfg.disc.base_filters, "Filters of the first discriminator stage");
    c->add_option("--disc_norm", a.disc_norm, "Discriminator normalisation: instance or none");
    c->add_option("--mask_provider", cfg.mask.provider, "threshold, file (manifest column), zeros or ones");
    c->add_option("--mask_tau", cfg.mask.tau, "Over-exposure threshold on max(R,G,B)");
    c->add_option("--mask_dilate", cfg.mask.dilate, "Mask dilation radius in pixels");
    c->add_option("--checkpoint_every", cfg.checkpoint_every, "Checkpoint period in epochs (0 = final only)");
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Single-image LDR to HDR reconstruction with a three-stage adversarial generator", "hdrgan"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1, 1);
    app.get_formatter()->column_width(34);

    ToysetArgs toy;
    auto* c_toy = app.add_subcommand("toyset", "Write procedural HDR scenes, their synthetic LDRs and a manifest");
    c_toy->add_option("--out", toy.out, "Output directory")->required();
    c_toy->add_option("--seeds", toy.seeds, "Scene seeds, half-open range a..b");
    c_toy->add_option("--size", toy.size, "Scene side length in pixels");
    c_toy->add_option("--exposures", toy.exposures, "Exposures as powers of two (default 0.5,1,2,4)")->delimiter(',');
    c_toy->add_option("--gamma", toy.gamma, "Display gamma");

    SynthArgs syn;
    auto* c_syn = app.add_subcommand("synth", "Synthesize exposure stacks of HDR images and a manifest");
    c_syn->add_option("--hdr-dir", syn.hdr_dir, "Directory of PFM/RGBE files");
    c_syn->add_option("--hdr", syn.hdr, "Single PFM/RGBE file");
    c_syn->add_option("--out", syn.out, "Output directory")->required();
    c_syn->add_option("--exposures", syn.exposures, "Exposures as powers of two (default 0.5,1,2,4)")->delimiter(',');
    c_syn->add_option("--gamma", syn.gamma, "Display gamma");

    MaskArgs msk;
    auto* c_msk = app.add_subcommand("mask", "Threshold over-exposure mask of an LDR image");
    c_msk->add_option("--provider", msk.provider, "Mask provider (threshold)");
    c_msk->add_option("--tau", msk.tau, "Threshold on max(R,G,B)");
    c_msk->add_option("--dilate", msk.dilate, "Dilation radius in pixels");
    c_msk->add_option("in", msk.ldr, "Input PNG/JPEG")->required();
    c_msk->add_option("out", msk.out, "Output mask PNG (255 = over-exposed)")->required();

    TrainArgs trn;
    auto* c_trn = app.add_subcommand("train", "Adversarial training from a manifest");
    add_train_flags(c_trn, trn);

    InferArgs inf;
    auto* c_inf = app.add_subcommand("infer", "Reconstruct HDR from one LDR image");
    c_inf->add_option("--ldr", inf.ldr, "Input PNG/JPEG")->required();
    c_inf->add_option("--ckpt", inf.ckpt, "Training checkpoint")->required();
    c_inf->add_option("--out", inf.out, "Output HDR (.pfm, or .hdr for RGBE)")->required();
    c_inf->add_option("--mask", inf.mask, "Mask PNG instead of thresholding");
    c_inf->add_option("--mask_tau", inf.tau, "Threshold when no mask file is given");
    c_inf->add_option("--mask_dilate", inf.dilate, "Mask dilation radius");
    c_inf->add_flag("--dump-stages", inf.dump_stages, "Also write the linearized and corrected stages");
    c_inf->add_option("--tonemap-preview", inf.preview, "Write an 8-bit mu-law preview PNG here");
    c_inf->add_flag("--stochastic", inf.stochastic, "Keep decoder dropout active");
    c_inf->add_option("--seed", inf.seed, "Dropout seed with --stochastic");
    c_inf->add_flag("--no-pad", inf.no_pad, "Reject sizes the generator cannot take instead of padding");

    EvalArgs ev;
    auto* c_ev = app.add_subcommand("eval", "PSNR/SSIM of a checkpoint over a manifest");
    c_ev->add_option("--manifest", ev.manifest, "Dataset manifest")->required();
    c_ev->add_option("--ckpt", ev.ckpt, "Training checkpoint")->required();
    c_ev->add_option("--out", ev.out, "Report CSV")->required();
    c_ev->add_option("--table", ev.table, "Also write the summary table here");
    c_ev->add_option("--size", ev.size, "Evaluation resolution (0: training resolution of the checkpoint)");
    c_ev->add_option("--mu", ev.mu, "mu-law compression");
    c_ev->add_option("--mask_provider", ev.mask_provider, "threshold, file, zeros or ones");
    c_ev->add_option("--mask_tau", ev.tau, "Over-exposure threshold");
    c_ev->add_option("--mask_dilate", ev.dilate, "Mask dilation radius");

    TonemapArgs tm;
    auto* c_tm = app.add_subcommand("tonemap", "mu-law tonemap an HDR file to an 8-bit PNG");
    c_tm->add_option("--mu", tm.mu, "mu-law compression");
    c_tm->add_option("in", tm.in, "Input PFM or RGBE")->required();
    c_tm->add_option("out", tm.out, "Output PNG")->required();

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return kUsage;
    }

    if (c_toy->parsed()) return do_toyset(toy, *c_toy, out);
    if (c_syn->parsed()) return do_synth(syn, *c_syn, out);
    if (c_msk->parsed()) return do_mask(msk, *c_msk, out);
    if (c_trn->parsed()) return do_train(trn, *c_trn, out);
    if (c_inf->parsed()) return do_infer(inf, *c_inf, out);
    if (c_ev->parsed()) return do_eval(ev, *c_ev, out);
    if (c_tm->parsed()) return do_tonemap(tm, out);
    err << app.help();
    return kUsage;
}

}  // namespace

std::pair<int, int> parse_epochs(const std::string& text) {
    const auto plus = text.find('+');
    if (plus == std::string::npos) return {parse_number<int>(text, "epoch count"), 0};
    return {parse_number<int>(text.substr(0, plus), "epoch count"),
            parse_number<int>(text.substr(plus + 1), "epoch count")};
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
    const auto dots = text.find("..");
    if (dots == std::string::npos) {
        const auto s = parse_number<std::uint64_t>(text, "seed");
        return {s, s + 1};
    }
    const auto a = parse_number<std::uint64_t>(text.substr(0, dots), "seed");
    const auto b = parse_number<std::uint64_t>(text.substr(dots + 2), "seed");
    if (b <= a) throw ArgumentError("empty seed range '" + text + "' (ranges are half-open a..b)");
    return {a, b};
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    struct Restore {
        WarningHandler previous;
        ~Restore() { set_warning_handler(std::move(previous)); }
    } restore{set_warning_handler([&err](const std::string& msg) { err << "warning: " << msg << '\n'; })};
    try {
        return dispatch(args, out, err);
    } catch (const DivergenceError& e) {
        err << "error: training diverged: " << e.what() << '\n';
        err << "last checkpoint: " << (e.last_checkpoint().empty() ? "(none written yet)" : e.last_checkpoint())
            << '\n';
        return kDiverged;
    } catch (const NumericError& e) {
        err << "error: numeric failure: " << e.what() << '\n';
        return kDiverged;
    } catch (const ArgumentError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    }
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace hdrgan::cli
