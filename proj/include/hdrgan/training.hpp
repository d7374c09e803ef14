#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hdrgan/checkpoint.hpp"
#include "hdrgan/data_synth.hpp"
#include "hdrgan/losses.hpp"
#include "hdrgan/networks.hpp"
#include "hdrgan/oemask.hpp"
#include "hdrgan/optim.hpp"
#include "hdrgan/rng.hpp"

namespace hdrgan {

// How the over-exposure mask of a training pair is obtained.
struct MaskConfig {
    std::string provider = "threshold";  // "threshold" | "file" (mask column of the manifest)
    double tau = kDefaultMaskTau;
    int dilate = 0;

    void validate() const;
};

OEMask resolve_mask(const PairedSample& sample, const MaskConfig& cfg);

struct TrainConfig {
    double lr0 = 2e-4;
    int epochs_const = 100;
    int epochs_decay = 100;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 0.0;
    int batch_size = 1;
    int image_size = 256;
    std::uint64_t seed = 0;
    LossWeights weights;
    ArchConfig arch;
    DiscriminatorConfig disc;
    MaskConfig mask;
    double mu = 5000.0;
    double gamma = 2.2;
    std::vector<int> perceptual_channels{16, 32, 64, 64, 64};
    std::vector<int> perceptual_taps{0, 1, 2, 3, 4};
    int checkpoint_every = 10;

    void validate() const;
    int total_epochs() const { return epochs_const + epochs_decay; }
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ArchConfig& cfg);
ArchConfig arch_config_from_json(const nlohmann::json& j);

// lr0 for epoch < epochs_const, then lr0 * (1 - (epoch - epochs_const + 1) / epochs_decay).
double lr_at(int epoch, const TrainConfig& cfg);

struct LossRecord {
    std::int64_t step = 0;
    int epoch = 0;
    double loss_d = 0.0;
    double loss_g_gan = 0.0;
    double loss_rec = 0.0;
    double loss_perc = 0.0;
    double loss_total = 0.0;

    friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

struct TrainState {
    static constexpr std::size_t kHistoryCapacity = 256;

    int epoch = 0;  // next epoch to run
    std::int64_t global_step = 0;
    std::deque<LossRecord> history;  // most recent records, oldest first
};

// Tensors shared by the discriminator and generator halves of one step.
struct StepContext {
    ag::Var ldr;
    ag::Var hdr;
    ag::Var hdr_tonemapped;
    GeneratorOutputs outputs;
    double loss_d = 0.0;
};

class Trainer {
public:
    explicit Trainer(TrainConfig cfg);
    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    // Alternating update at lr_at(state().epoch). Throws DivergenceError on a non-finite loss.
    LossRecord train_step(const std::vector<PairedSample>& batch);
    LossRecord train_step(const std::vector<PairedSample>& batch, double lr);

    // The three phases of train_step, exposed so the update isolation can be inspected.
    StepContext prepare(const std::vector<PairedSample>& batch);
    void discriminator_step(StepContext& ctx, double lr);
    LossRecord generator_step(StepContext& ctx, double lr);

    void finish_epoch() { ++state_.epoch; }

    Checkpoint to_checkpoint() const;
    static std::unique_ptr<Trainer> from_checkpoint(const Checkpoint& ckpt);
    void save(const std::filesystem::path& path) const;
    static std::unique_ptr<Trainer> load(const std::filesystem::path& path);

    Generator& generator() { return gen_; }
    const Generator& generator() const { return gen_; }
    Discriminator& discriminator() { return disc_; }
    const FeatureExtractor& extractor() const { return extractor_; }
    const TrainConfig& config() const { return cfg_; }
    const TrainState& state() const { return state_; }

private:
    TrainConfig cfg_;
    Generator gen_;
    Discriminator disc_;
    RandomConvExtractor extractor_;
    Adam adam_g_;
    Adam adam_d_;
    Rng dropout_rng_;
    TrainState state_;
};

// Rebuilds just the generator of a training checkpoint (for inference).
std::unique_ptr<Generator> load_generator(const Checkpoint& ckpt);

struct FitOptions {
    std::optional<std::filesystem::path> resume_from;
    // Stop (with a checkpoint) after this many epochs in this invocation; < 0 runs to the end.
    int max_epochs = -1;
    std::function<void(const LossRecord&)> on_step;
};

struct FitResult {
    std::filesystem::path final_checkpoint;
    std::vector<LossRecord> records;  // steps run by this invocation
};

inline constexpr const char* kLossLogHeader = "step,L_D,L_G_gan,L_rec,L_perc,L_total";

// Runs the remaining epochs, checkpointing every cfg.checkpoint_every epochs and at the
// end ("final.ckpt"), and writes out_dir/losses.csv. With resume_from set, the stored
// training state (including its configuration) is continued.
FitResult fit(const SampleSource& source, const TrainConfig& cfg, const std::filesystem::path& out_dir,
              const FitOptions& options = {});
FitResult fit(const DatasetManifest& manifest, const TrainConfig& cfg, const std::filesystem::path& out_dir,
              const FitOptions& options = {});

std::string format_loss_row(const LossRecord& r);
std::vector<LossRecord> read_loss_log(const std::filesystem::path& path);

}  // namespace hdrgan
