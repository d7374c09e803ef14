#include "hdrgan/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hdrgan/error.hpp"
#include "hdrgan/log.hpp"

namespace hdrgan {

namespace fs = std::filesystem;
using nlohmann::json;

void MaskConfig::validate() const {
    if (provider != "threshold" && provider != "file" && provider != "zeros" && provider != "ones") {
        throw ConfigError("unknown mask provider '" + provider + "' (threshold, file, zeros, ones)");
    }
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("mask tau must lie in (0,1)");
    if (dilate < 0) throw ConfigError("mask dilation radius must be >= 0");
}

OEMask resolve_mask(const PairedSample& sample, const MaskConfig& cfg) {
    const int w = sample.ldr.width(), h = sample.ldr.height();
    OEMask m;
    if (cfg.provider == "file") {
        if (!sample.mask) throw DataError("sample '" + sample.id + "' has no mask file but mask provider is 'file'");
        m = *sample.mask;
    } else if (cfg.provider == "zeros") {
        m = OEMask::zeros(w, h);
    } else if (cfg.provider == "ones") {
        m = OEMask::ones(w, h);
    } else {
        m = threshold_mask(sample.ldr, cfg.tau);
    }
    return cfg.dilate > 0 ? dilate_mask(m, cfg.dilate) : m;
}

void TrainConfig::validate() const {
    if (!(lr0 >= 0.0) || !std::isfinite(lr0)) throw ConfigError("lr0 must be finite and >= 0");
    if (epochs_const < 0 || epochs_decay < 0 || total_epochs() < 1) {
        throw ConfigError("epochs must be non-negative with at least one epoch in total");
    }
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (image_size < 1) throw ConfigError("image_size must be >= 1");
    if (!(mu > 0.0)) throw ConfigError("mu must be > 0");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
    if (clip_norm < 0.0) throw ConfigError("clip_norm must be >= 0");
    weights.validate();
    arch.validate();
    disc.validate();
    mask.validate();
    if (image_size % arch.size_multiple() != 0) {
        throw ConfigError("image_size " + std::to_string(image_size) + " is not a multiple of " +
                          std::to_string(arch.size_multiple()) + " required by depth " + std::to_string(arch.depth));
    }
}

json to_json(const ArchConfig& a) {
    return json{{"variant", to_string(a.variant)},
                {"base_filters", a.base_filters},
                {"depth", a.depth},
                {"recurrence_steps", a.recurrence_steps},
                {"in_channels", a.in_channels},
                {"out_channels", a.out_channels},
                {"dropout", a.dropout},
                {"dropout_levels", a.dropout_levels},
                {"norm", to_string(a.norm)}};
}

ArchConfig arch_config_from_json(const json& j) {
    try {
        ArchConfig a;
        a.variant = parse_variant(j.at("variant").get<std::string>());
        a.base_filters = j.at("base_filters").get<int>();
        a.depth = j.at("depth").get<int>();
        a.recurrence_steps = j.at("recurrence_steps").get<int>();
        a.in_channels = j.at("in_channels").get<int>();
        a.out_channels = j.at("out_channels").get<int>();
        a.dropout = j.at("dropout").get<double>();
        a.dropout_levels = j.at("dropout_levels").get<int>();
        a.norm = parse_norm(j.at("norm").get<std::string>());
        a.validate();
        return a;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad architecture record: ") + e.what());
    }
}

json to_json(const TrainConfig& c) {
    return json{{"lr0", c.lr0},
                {"epochs_const", c.epochs_const},
                {"epochs_decay", c.epochs_decay},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"adam_eps", c.adam_eps},
                {"clip_norm", c.clip_norm},
                {"batch_size", c.batch_size},
                {"image_size", c.image_size},
                {"seed", c.seed},
                {"rec_weight", c.weights.rec_weight},
                {"perc_weight", c.weights.perc_weight},
                {"arch", to_json(c.arch)},
                {"disc", {{"base_filters", c.disc.base_filters},
                          {"downsampling_layers", c.disc.downsampling_layers},
                          {"norm", to_string(c.disc.norm)}}},
                {"mask", {{"provider", c.mask.provider}, {"tau", c.mask.tau}, {"dilate", c.mask.dilate}}},
                {"mu", c.mu},
                {"gamma", c.gamma},
                {"perceptual_channels", c.perceptual_channels},
                {"perceptual_taps", c.perceptual_taps},
                {"checkpoint_every", c.checkpoint_every}};
}

TrainConfig train_config_from_json(const json& j) {
    try {
        TrainConfig c;
        c.lr0 = j.at("lr0").get<double>();
        c.epochs_const = j.at("epochs_const").get<int>();
        c.epochs_decay = j.at("epochs_decay").get<int>();
        c.adam_beta1 = j.at("adam_beta1").get<double>();
        c.adam_beta2 = j.at("adam_beta2").get<double>();
        c.adam_eps = j.at("adam_eps").get<double>();
        c.clip_norm = j.at("clip_norm").get<double>();
        c.batch_size = j.at("batch_size").get<int>();
        c.image_size = j.at("image_size").get<int>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.weights.rec_weight = j.at("rec_weight").get<double>();
        c.weights.perc_weight = j.at("perc_weight").get<double>();
        c.arch = arch_config_from_json(j.at("arch"));
        const auto& d = j.at("disc");
        c.disc.base_filters = d.at("base_filters").get<int>();
        c.disc.downsampling_layers = d.at("downsampling_layers").get<int>();
        c.disc.norm = parse_norm(d.at("norm").get<std::string>());
        const auto& m = j.at("mask");
        c.mask.provider = m.at("provider").get<std::string>();
        c.mask.tau = m.at("tau").get<double>();
        c.mask.dilate = m.at("dilate").get<int>();
        c.mu = j.at("mu").get<double>();
        c.gamma = j.at("gamma").get<double>();
        c.perceptual_channels = j.at("perceptual_channels").get<std::vector<int>>();
        c.perceptual_taps = j.at("perceptual_taps").get<std::vector<int>>();
        c.checkpoint_every = j.at("checkpoint_every").get<int>();
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad training config record: ") + e.what());
    }
}

double lr_at(int epoch, const TrainConfig& cfg) {
    if (epoch < 0 || epoch >= cfg.total_epochs()) {
        throw ArgumentError("epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(cfg.total_epochs()) +
                            ")");
    }
    if (epoch < cfg.epochs_const) return cfg.lr0;
    const double frac = static_cast<double>(epoch - cfg.epochs_const + 1) / cfg.epochs_decay;
    return cfg.lr0 * (1.0 - frac);
}

namespace {

AdamConfig adam_config(const TrainConfig& c) {
    return AdamConfig{c.adam_beta1, c.adam_beta2, c.adam_eps, c.clip_norm};
}

RandomConvExtractor::Options extractor_options(const TrainConfig& c) {
    RandomConvExtractor::Options o;
    o.channels = c.perceptual_channels;
    o.taps = c.perceptual_taps;
    return o;
}

bool all_finite(const ag::Tensor& t) {
    return std::all_of(t.data.begin(), t.data.end(), [](double v) { return std::isfinite(v); });
}

void check_finite(double v, const char* what, std::int64_t step) {
    if (!std::isfinite(v)) {
        throw DivergenceError(std::string(what) + " is not finite at step " + std::to_string(step), "");
    }
}

void put_store(Checkpoint& ck, const std::string& prefix, const nn::ParamStore& store, const Adam& adam) {
    const auto& params = store.params();
    for (std::size_t k = 0; k < params.size(); ++k) {
        ck.tensors.emplace_back(prefix + "/" + params[k].name, params[k].var.value());
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        ck.tensors.emplace_back(prefix + ".m/" + params[k].name, adam.first_moments()[k]);
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        ck.tensors.emplace_back(prefix + ".v/" + params[k].name, adam.second_moments()[k]);
    }
}

void restore_params(const Checkpoint& ck, const std::string& prefix, nn::ParamStore& store) {
    std::map<std::string, ag::Tensor> values;
    for (const auto& p : store.params()) {
        const std::string key = prefix + "/" + p.name;
        if (!ck.has_tensor(key)) throw ConfigError("checkpoint lacks parameter '" + key + "' (architecture mismatch?)");
        values.emplace(p.name, ck.tensor(key));
    }
    try {
        store.restore(values);
    } catch (const Error& e) {
        throw ConfigError(std::string("checkpoint does not match the architecture: ") + e.what());
    }
}

void restore_moments(const Checkpoint& ck, const std::string& prefix, const nn::ParamStore& store, Adam& adam,
                     std::int64_t steps) {
    std::vector<ag::Tensor> m, v;
    for (const auto& p : store.params()) {
        m.push_back(ck.tensor(prefix + ".m/" + p.name));
        v.push_back(ck.tensor(prefix + ".v/" + p.name));
    }
    adam.set_state(steps, std::move(m), std::move(v));
}

json record_to_json(const LossRecord& r) {
    return json::array({r.step, r.epoch, r.loss_d, r.loss_g_gan, r.loss_rec, r.loss_perc, r.loss_total});
}

LossRecord record_from_json(const json& j) {
    LossRecord r;
    r.step = j.at(0).get<std::int64_t>();
    r.epoch = j.at(1).get<int>();
    r.loss_d = j.at(2).get<double>();
    r.loss_g_gan = j.at(3).get<double>();
    r.loss_rec = j.at(4).get<double>();
    r.loss_perc = j.at(5).get<double>();
    r.loss_total = j.at(6).get<double>();
    return r;
}

}  // namespace

Trainer::Trainer(TrainConfig cfg)
    : cfg_((cfg.validate(), std::move(cfg))),
      gen_(cfg_.arch, derive_seed(cfg_.seed, 1)),
      disc_(cfg_.disc, derive_seed(cfg_.seed, 2)),
      extractor_(extractor_options(cfg_)),
      adam_g_(gen_.params(), adam_config(cfg_)),
      adam_d_(disc_.params(), adam_config(cfg_)),
      dropout_rng_(derive_seed(cfg_.seed, 3)) {}

StepContext Trainer::prepare(const std::vector<PairedSample>& batch) {
    if (batch.empty()) throw ArgumentError("empty training batch");
    std::vector<ag::Tensor> ldr, hdr, alpha;
    for (const auto& s : batch) {
        s.validate();
        ldr.push_back(to_tensor(s.ldr));
        hdr.push_back(to_tensor(s.hdr));
        alpha.push_back(to_tensor(resolve_mask(s, cfg_.mask)));
    }
    StepContext ctx;
    ctx.ldr = ag::constant(stack(ldr));
    ctx.hdr = ag::constant(stack(hdr));
    {
        ag::NoGradGuard ng;
        ctx.hdr_tonemapped = ag::mu_tonemap(ctx.hdr, cfg_.mu);
    }
    ctx.outputs = gen_.forward(ctx.ldr, stack(alpha), true, &dropout_rng_);
    if (!all_finite(ctx.outputs.hdr.value())) {
        throw DivergenceError("generator produced non-finite HDR at step " + std::to_string(state_.global_step), "");
    }
    return ctx;
}

void Trainer::discriminator_step(StepContext& ctx, double lr) {
    disc_.params().zero_grad();
    const ag::Var fake_tm = ag::mu_tonemap(ag::detach(ctx.outputs.hdr), cfg_.mu);
    const ag::Var loss = gan_loss_d(disc_.forward(ctx.ldr, ctx.hdr_tonemapped), disc_.forward(ctx.ldr, fake_tm));
    ctx.loss_d = loss.item();
    check_finite(ctx.loss_d, "discriminator loss", state_.global_step);
    ag::backward(loss);
    adam_d_.step(lr);
    disc_.params().zero_grad();
}

LossRecord Trainer::generator_step(StepContext& ctx, double lr) {
    gen_.params().zero_grad();
    disc_.params().zero_grad();
    const ag::Var& h = ctx.outputs.hdr;
    const ag::Var gan = gan_loss_g(disc_.forward(ctx.ldr, ag::mu_tonemap(h, cfg_.mu)));
    const ag::Var rec = rec_loss(h, ctx.hdr, cfg_.mu);
    const ag::Var perc = perceptual_loss(h, ctx.hdr, extractor_, cfg_.mu);

    LossRecord r;
    r.step = state_.global_step;
    r.epoch = state_.epoch;
    r.loss_d = ctx.loss_d;
    r.loss_g_gan = gan.item();
    r.loss_rec = rec.item();
    r.loss_perc = perc.item();
    check_finite(r.loss_g_gan, "generator adversarial loss", r.step);
    check_finite(r.loss_rec, "reconstruction loss", r.step);
    check_finite(r.loss_perc, "perceptual loss", r.step);
    const ag::Var total = total_g_loss(gan, rec, perc, cfg_.weights);
    r.loss_total = total.item();
    check_finite(r.loss_total, "total generator loss", r.step);

    ag::backward(total);
    adam_g_.step(lr);
    // D accumulated gradients through the fresh logits; they are discarded, not applied.
    disc_.params().zero_grad();
    gen_.params().zero_grad();

    ++state_.global_step;
    state_.history.push_back(r);
    while (state_.history.size() > TrainState::kHistoryCapacity) state_.history.pop_front();
    return r;
}

LossRecord Trainer::train_step(const std::vector<PairedSample>& batch, double lr) {
    StepContext ctx = prepare(batch);
    discriminator_step(ctx, lr);
    return generator_step(ctx, lr);
}

LossRecord Trainer::train_step(const std::vector<PairedSample>& batch) {
    return train_step(batch, lr_at(state_.epoch, cfg_));
}

Checkpoint Trainer::to_checkpoint() const {
    Checkpoint ck;
    json history = json::array();
    for (const auto& r : state_.history) history.push_back(record_to_json(r));
    ck.meta = json{{"kind", "train-state"},
                   {"config", to_json(cfg_)},
                   {"epoch", state_.epoch},
                   {"global_step", state_.global_step},
                   {"dropout_rng", dropout_rng_.state()},
                   {"adam_g_steps", adam_g_.steps()},
                   {"adam_d_steps", adam_d_.steps()},
                   {"history", history}};
    put_store(ck, "G", gen_.params(), adam_g_);
    put_store(ck, "D", disc_.params(), adam_d_);
    return ck;
}

std::unique_ptr<Trainer> Trainer::from_checkpoint(const Checkpoint& ck) {
    if (ck.meta.value("kind", "") != "train-state") throw ConfigError("checkpoint is not a training state");
    try {
        auto t = std::make_unique<Trainer>(train_config_from_json(ck.meta.at("config")));
        restore_params(ck, "G", t->gen_.params());
        restore_params(ck, "D", t->disc_.params());
        restore_moments(ck, "G", t->gen_.params(), t->adam_g_, ck.meta.at("adam_g_steps").get<std::int64_t>());
        restore_moments(ck, "D", t->disc_.params(), t->adam_d_, ck.meta.at("adam_d_steps").get<std::int64_t>());
        t->dropout_rng_.set_state(ck.meta.at("dropout_rng").get<std::uint64_t>());
        t->state_.epoch = ck.meta.at("epoch").get<int>();
        t->state_.global_step = ck.meta.at("global_step").get<std::int64_t>();
        for (const auto& r : ck.meta.at("history")) t->state_.history.push_back(record_from_json(r));
        return t;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed training checkpoint: ") + e.what());
    }
}

void Trainer::save(const fs::path& path) const { write_checkpoint(to_checkpoint(), path); }

std::unique_ptr<Trainer> Trainer::load(const fs::path& path) { return from_checkpoint(read_checkpoint(path)); }

std::unique_ptr<Generator> load_generator(const Checkpoint& ck) {
    if (!ck.meta.contains("config")) throw ConfigError("checkpoint carries no configuration");
    ArchConfig arch;
    try {
        arch = arch_config_from_json(ck.meta.at("config").at("arch"));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("checkpoint carries no architecture: ") + e.what());
    }
    auto g = std::make_unique<Generator>(arch, 0);
    restore_params(ck, "G", g->params());
    return g;
}

std::string format_loss_row(const LossRecord& r) {
    std::string out = std::to_string(r.step);
    char buf[64];
    for (double v : {r.loss_d, r.loss_g_gan, r.loss_rec, r.loss_perc, r.loss_total}) {
        auto res = std::to_chars(buf, buf + sizeof buf, v);
        out += ',';
        out.append(buf, res.ptr);
    }
    return out;
}

std::vector<LossRecord> read_loss_log(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open loss log " + path.string());
    std::string line;
    std::vector<LossRecord> rows;
    if (!std::getline(in, line) || line != kLossLogHeader) throw FormatError("loss log " + path.string() + " has no header");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 6) throw FormatError("loss log line " + std::to_string(lineno) + " needs 6 columns");
        LossRecord r;
        auto parse = [&](const std::string& s, auto& dst) {
            auto res = std::from_chars(s.data(), s.data() + s.size(), dst);
            if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
                throw FormatError("loss log line " + std::to_string(lineno) + ": bad number '" + s + "'");
            }
        };
        parse(cells[0], r.step);
        parse(cells[1], r.loss_d);
        parse(cells[2], r.loss_g_gan);
        parse(cells[3], r.loss_rec);
        parse(cells[4], r.loss_perc);
        parse(cells[5], r.loss_total);
        rows.push_back(r);
    }
    return rows;
}

namespace {

// Keeps the header and rows up to (excluding) first_step, so a resumed run appends cleanly.
void prepare_log(const fs::path& path, std::int64_t first_step) {
    std::vector<std::string> kept;
    if (first_step > 0 && fs::exists(path)) {
        std::ifstream in(path);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::int64_t step = -1;
            std::from_chars(line.data(), line.data() + line.size(), step);
            if (step >= 0 && step < first_step) kept.push_back(line);
        }
    } else if (first_step > 0) {
        warn("loss log " + path.string() + " missing on resume; starting a new one");
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write loss log " + path.string());
    out << kLossLogHeader << '\n';
    for (const auto& l : kept) out << l << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

fs::path epoch_checkpoint_name(int epoch) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "epoch_%04d.ckpt", epoch);
    return buf;
}

}  // namespace

FitResult fit(const SampleSource& source, const TrainConfig& cfg, const fs::path& out_dir, const FitOptions& options) {
    if (source.size() == 0) throw DataError("training set is empty");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    std::unique_ptr<Trainer> trainer;
    std::string last_ckpt;
    if (options.resume_from) {
        trainer = Trainer::load(*options.resume_from);
        last_ckpt = options.resume_from->string();
    } else {
        trainer = std::make_unique<Trainer>(cfg);
    }
    const TrainConfig& c = trainer->config();
    const fs::path log_path = out_dir / "losses.csv";
    prepare_log(log_path, trainer->state().global_step);
    std::ofstream log(log_path, std::ios::app);
    if (!log) throw IoError("cannot append to " + log_path.string());

    FitResult result;
    const std::size_t n = source.size();
    int ran = 0;
    while (trainer->state().epoch < c.total_epochs()) {
        if (options.max_epochs >= 0 && ran >= options.max_epochs) break;
        const int epoch = trainer->state().epoch;
        const double lr = lr_at(epoch, c);
        const auto order = shuffled_indices(n, derive_seed(c.seed, 1000 + static_cast<std::uint64_t>(epoch)));
        for (std::size_t start = 0; start < n; start += c.batch_size) {
            std::vector<PairedSample> batch;
            for (std::size_t k = start; k < std::min(n, start + c.batch_size); ++k) batch.push_back(source.get(order[k]));
            LossRecord r;
            try {
                r = trainer->train_step(batch, lr);
            } catch (const NumericError& e) {
                throw DivergenceError(e.what(), last_ckpt);
            }
            log << format_loss_row(r) << '\n';
            if (!log) throw IoError("write failed for " + log_path.string());
            result.records.push_back(r);
            if (options.on_step) options.on_step(r);
        }
        log.flush();
        trainer->finish_epoch();
        ++ran;
        if (c.checkpoint_every > 0 && trainer->state().epoch % c.checkpoint_every == 0) {
            const fs::path p = out_dir / epoch_checkpoint_name(trainer->state().epoch);
            trainer->save(p);
            last_ckpt = p.string();
        }
    }
    const bool finished = trainer->state().epoch >= c.total_epochs();
    result.final_checkpoint = out_dir / (finished ? fs::path("final.ckpt") : epoch_checkpoint_name(trainer->state().epoch));
    trainer->save(result.final_checkpoint);
    return result;
}

FitResult fit(const DatasetManifest& manifest, const TrainConfig& cfg, const fs::path& out_dir,
              const FitOptions& options) {
    ManifestSource source(manifest, cfg.image_size);
    return fit(source, cfg, out_dir, options);
}

}  // namespace hdrgan
