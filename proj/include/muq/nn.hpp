#pragma once

/// Minimal deep-learning engine, sufficient for the homogenization surrogate:
/// dense and 3D-convolution layers, ReLU, max pooling, dropout, fixed input
/// standardization, reverse-mode gradients and Adam/AMSGrad. Double precision
/// throughout; training is single-threaded and deterministic per seed.
///
/// A network has two input branches, a voxel branch (the CNN) and a numeric
/// branch, concatenated and fed into a dense trunk. Layers cache activations
/// for the backward pass, so a Network instance is not safe to share across
/// threads; clone() per worker for parallel inference.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "muq/error.hpp"
#include "muq/grid.hpp"
#include "muq/rng.hpp"

namespace muq::nn {

struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> shape_);
    static Tensor vec(std::vector<double> values);

    std::size_t size() const { return data.size(); }
};

std::size_t shape_size(const std::vector<int>& shape);

enum class LayerKind : std::uint8_t {
    Dense = 0,
    Conv3D = 1,
    ReLU = 2,
    MaxPool3D = 3,
    Flatten = 4,
    Dropout = 5,
    Concat = 6,       // marker between branch blocks in the checkpoint format
    Standardize = 7,
};

struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    int units = 0;       // Dense
    int filters = 0;     // Conv3D
    int kernel = 0;      // Conv3D
    int stride = 1;      // Conv3D
    int window = 0;      // MaxPool3D
    double rate = 0.0;   // Dropout

    static LayerSpec dense(int units);
    static LayerSpec conv3d(int filters, int kernel, int stride = 1);
    static LayerSpec relu();
    static LayerSpec max_pool3d(int window);
    static LayerSpec flatten();
    static LayerSpec dropout(double rate);
    static LayerSpec standardize();
};

class Layer {
  public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& in, bool train, Rng& rng) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual LayerSpec spec() const = 0;

    // Trainable state; empty for parameter-free layers. Weights are subject
    // to L2 regularization, biases are not.
    virtual std::vector<double>* weights() { return nullptr; }
    virtual std::vector<double>* biases() { return nullptr; }
    virtual std::vector<double>* weight_grads() { return nullptr; }
    virtual std::vector<double>* bias_grads() { return nullptr; }
};

/// Per-feature fixed statistics for input standardization and label
/// de-standardization.
struct FeatureStats {
    std::vector<double> mean;
    std::vector<double> stddev;  // > 0 for every feature
};

struct TrainingMeta {
    std::uint32_t epochs_run = 0;
    double best_val_loss = 0.0;
    std::uint64_t seed = 0;
};

struct Topology {
    std::vector<LayerSpec> voxel_branch;
    std::vector<LayerSpec> numeric_branch;
    std::vector<LayerSpec> trunk;
};

/// Default CNN topology: blocks of {Conv3D(n_F, 3), ReLU, MaxPool3D(2)}
/// followed by Flatten on the voxel branch (block count capped at
/// `max_blocks` and shrunk automatically when the grid is too small), a
/// Standardize numeric branch, and n_L blocks of {Dense(n_u), ReLU,
/// Dropout(rate)} plus a final Dense(n_out) trunk.
struct TopologyConfig {
    int n_u = 128;
    int n_F = 8;
    int n_L = 2;
    int kernel = 3;
    int pool = 2;
    int max_blocks = 3;
    double dropout = 0.0;
    int n_out = 6;
};

Topology make_default_topology(int grid_n, const TopologyConfig& cfg);

class Network {
  public:
    /// Builds the network with Glorot-initialized weights (uniform in
    /// +-sqrt(6/(fan_in+fan_out)), deterministic per seed) and identity
    /// input/label statistics.
    Network(Topology topology, int grid_n, int numeric_dim, std::uint64_t seed);

    // Movable but not copyable: layers reference shared standardizer state.
    // clone() is the deep copy.
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;
    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;

    Network clone() const;

    int grid_n() const { return grid_n_; }
    int numeric_dim() const { return numeric_dim_; }
    const Topology& topology() const { return topology_; }

    FeatureStats& input_stats() { return *input_stats_; }
    const FeatureStats& input_stats() const { return *input_stats_; }
    FeatureStats& label_stats() { return label_stats_; }
    const FeatureStats& label_stats() const { return label_stats_; }
    TrainingMeta& meta() { return meta_; }
    const TrainingMeta& meta() const { return meta_; }

    /// Forward pass in standardized label space. Dropout is active only in
    /// train mode.
    Tensor forward(const Tensor& numeric, const Tensor& voxel, bool train, Rng& rng);

    /// Backward pass for the most recent train-mode forward; fills parameter
    /// gradients (accumulating) and returns nothing the caller needs.
    void backward(const Tensor& grad_out);

    /// Inference: standardizes x1, runs the network, de-standardizes the
    /// prediction. Deterministic (dropout off).
    std::vector<double> predict(const std::vector<double>& numeric, const VoxelGrid& grid);

    std::size_t n_outputs() const { return static_cast<std::size_t>(n_out_); }

    // Flat parameter access for optimizers and serialization.
    struct ParamBlock {
        std::vector<double>* values;
        std::vector<double>* grads;
        bool regularized;
    };
    std::vector<ParamBlock> param_blocks();
    std::size_t n_params() const;
    void zero_grads();
    std::vector<double> flat_params() const;
    void set_flat_params(const std::vector<double>& p);

    Tensor voxel_to_tensor(const VoxelGrid& g) const;

  private:
    Network() = default;
    void build_layers(std::uint64_t seed);

    Topology topology_;
    int grid_n_ = 0;
    int numeric_dim_ = 0;
    int n_out_ = 6;
    std::vector<std::unique_ptr<Layer>> voxel_layers_;
    std::vector<std::unique_ptr<Layer>> numeric_layers_;
    std::vector<std::unique_ptr<Layer>> trunk_layers_;
    std::shared_ptr<FeatureStats> input_stats_;  ///< referenced by Standardize layers
    FeatureStats label_stats_;
    TrainingMeta meta_;
    std::size_t voxel_out_size_ = 0;  // cached for the concat split in backward
};

/// Batch loss: mean over the batch of the squared L2 prediction error (raw
/// label units, predictions de-standardized) plus lambda_l2 * (sum of
/// squared weights and kernels); biases are excluded from the penalty.
/// Optional per-sample weights multiply each squared error (the training
/// loop uses 1/|y|^2 weights to target relative accuracy). Dropout off.
double loss(Network& net, const std::vector<std::vector<double>>& x1,
            const std::vector<const VoxelGrid*>& x2, const std::vector<std::vector<double>>& y,
            double lambda_l2, const std::vector<double>* sample_weights = nullptr);

/// Reverse-mode gradients of `loss` (train-mode forward, dropout driven by
/// rng). Leaves the gradient of every parameter in the layer grad buffers
/// and returns the batch loss.
double gradients(Network& net, const std::vector<std::vector<double>>& x1,
                 const std::vector<const VoxelGrid*>& x2, const std::vector<std::vector<double>>& y,
                 double lambda_l2, Rng& rng, const std::vector<double>* sample_weights = nullptr);

/// Plain gradient-descent update p <- p - alpha * g.
void sgd_step(std::vector<double>& params, const std::vector<double>& grads, double alpha);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::vector<double> vhat;
    long t = 0;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0), vhat(n, 0.0) {}
};

/// Adam with the AMSGrad running maximum of the (bias-corrected) second
/// moment. Defaults beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
void adam_amsgrad_step(AdamState& state, std::vector<double>& params,
                       const std::vector<double>& grads, double alpha, double beta1 = 0.9,
                       double beta2 = 0.999, double eps = 1e-8);

/// Checkpoint file: magic "MUQM", version u32, topology descriptor block,
/// standardizer blocks, then f64 parameter arrays in topology order,
/// little-endian. Round trips bit-exactly.
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace muq::nn
