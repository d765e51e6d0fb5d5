#pragma once

#include "flowlab/dataset.hpp"
#include "flowlab/rng.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace flowlab {

/// Staged convolutional binary classifier: stem conv from 1 channel, four
/// stages of 3×3 conv + ReLU blocks (stride-2 entering stages 2–4), global
/// average pool and a single-logit sigmoid head.
struct NetConfig {
    std::array<int, 4> channels{16, 32, 64, 128};
    int blocks_per_stage = 2;
    int input_size = 128;
    bool skip_connections = false;

    void validate() const;
    std::uint64_t hash() const;
};

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    int batch_size = 16;
    int max_epochs = 20;
    double target_accuracy = 0.99;
    std::uint64_t seed = 0;

    std::uint64_t hash() const;
};

/// Per-image input normalization to zero mean and unit std. Rejects
/// constant images.
template <typename T>
std::vector<T> normalize_input(const GrayImage& img);

/// Stage activations of one forward pass: four (C, H, W) tensors.
template <typename T>
struct StageActivations {
    std::array<std::vector<T>, 4> data;
    std::array<int, 4> channels{};
    std::array<int, 4> hw{}; // square spatial size per stage
};

template <typename T>
class StageNetT {
public:
    explicit StageNetT(const NetConfig& config);

    const NetConfig& config() const { return config_; }

    /// He fan-in init for convolutions, zeros for the head.
    void init_params(Rng& rng);

    std::vector<T>& params() { return params_; }
    const std::vector<T>& params() const { return params_; }
    std::size_t param_count() const { return params_.size(); }

    /// Names and spans of the parameter tensors in the flat vector.
    struct TensorInfo {
        std::string name;
        std::vector<int> shape;
        std::size_t offset = 0;
        std::size_t count = 0;
    };
    const std::vector<TensorInfo>& tensors() const { return tensors_; }

    /// Logit of one normalized image; optionally captures stage outputs.
    T forward(const std::vector<T>& input, StageActivations<T>* stages = nullptr) const;

    /// Binary cross-entropy of one image (label 0 or 1) plus reverse-mode
    /// gradients accumulated into `grad` (same layout as params). The
    /// weight-decay term is NOT included here; train() adds it per batch.
    T forward_backward(const std::vector<T>& input, T label, std::vector<T>& grad) const;

    /// Mean loss and gradient over a batch, including the coupled weight
    /// decay term (wd/2)·‖θ‖². Deterministic regardless of thread count.
    T batch_gradient(const std::vector<const std::vector<T>*>& inputs,
                     const std::vector<T>& labels, double weight_decay,
                     std::vector<T>& grad) const;

    int stage_channels(int stage) const { return config_.channels[stage]; }
    int stage_hw(int stage) const;

private:
    struct ConvSpec {
        int cin = 0, cout = 0, stride = 1;
        int in_hw = 0, out_hw = 0;
        std::size_t w_off = 0, b_off = 0;
        bool skip = false;      // identity skip (requires cin==cout, stride 1)
        int capture_stage = -1; // stage index whose output this block ends
    };

    NetConfig config_;
    std::vector<ConvSpec> convs_;
    std::size_t head_w_off_ = 0, head_b_off_ = 0;
    std::vector<T> params_;
    std::vector<TensorInfo> tensors_;
};

using StageNet = StageNetT<float>;

/// Adam with bias correction; weight decay is folded into the incoming
/// gradient (coupled form).
template <typename T>
struct AdamState {
    std::vector<T> m, v;
    long long step = 0;

    void init(std::size_t n) {
        m.assign(n, T(0));
        v.assign(n, T(0));
        step = 0;
    }
};

template <typename T>
void adam_update(std::vector<T>& params, const std::vector<T>& grad, AdamState<T>& state,
                 const TrainConfig& config);

/// Checkpoint: JSON header line (tensor directory, config hash, seed, epoch)
/// followed by raw little-endian float32 payload (params, then Adam moments).
struct Checkpoint {
    NetConfig net_config;
    std::vector<float> params;
    AdamState<float> adam;
    int epoch = 0;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::array<std::string, 2> class_labels; // index 1 = positive class
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Rebuilds a runnable network from checkpoint parameters.
StageNet net_from_checkpoint(const Checkpoint& ckpt);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double test_accuracy = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochLog> log;
    bool reached_target = false;
    std::vector<std::string> warnings;
};

/// In-memory two-class image set: images as 8-bit rows plus binary labels.
struct LabeledImages {
    int image_size = 0;
    std::vector<GrayImage> images;
    std::vector<int> labels; // 0 or 1
    std::array<std::string, 2> class_names;
};

/// Loads both splits of a two-class manifest. Label 1 is the
/// lexicographically larger class name.
struct ManifestData {
    LabeledImages train, test;
};
ManifestData load_manifest_images(const DatasetManifest& manifest);

/// Seeded training loop with early stop at target test accuracy.
TrainResult train(const ManifestData& data, const NetConfig& net_config,
                  const TrainConfig& train_config);

struct EvalResult {
    double accuracy = 0.0;
    std::vector<double> probabilities; // P(class 1), per image in input order
};

EvalResult evaluate(const Checkpoint& ckpt, const LabeledImages& set);

/// Probabilities only, for sets without meaningful labels.
std::vector<double> predict(const Checkpoint& ckpt, const std::vector<GrayImage>& images);

void write_train_log(const std::string& path, const std::vector<EpochLog>& log);

} // namespace flowlab
