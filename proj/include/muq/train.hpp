#pragma once

/// Training of the homogenization surrogate: mini-batch Adam/AMSGrad with
/// early stopping and learning-rate decay on validation plateaus, test-set
/// evaluation and random hyperparameter search.

#include <cstdint>
#include <string>
#include <vector>

#include "muq/dataset.hpp"
#include "muq/nn.hpp"

namespace muq::nn {

/// In-memory training arrays: numeric inputs x1 = {K_M, G_M, K_I, G_I,
/// macro strain}, realized voxel grids, and stress labels made O(1) by the
/// per-sample output scale (see stress_scale).
struct TrainingData {
    int grid_n = 0;
    std::vector<std::vector<double>> x1;
    std::vector<VoxelGrid> grids;
    std::vector<std::vector<double>> labels;  ///< stress / scale
    std::vector<double> scale;                ///< per-sample stress scale

    std::size_t size() const { return x1.size(); }
};

TrainingData to_training_data(const Dataset& ds);

/// Numeric feature vector of one sample (shared with the UQ pipeline so
/// training and inference agree on the encoding).
std::vector<double> numeric_features(const MaterialParams& mat_M, const MaterialParams& mat_I,
                                     const VoigtVector& eps_bar);

/// Physical output scale of a sample: the norm of the Voigt-bound (phase
/// arithmetic mean) stress under the sample's macro strain. Raw stress
/// labels span several orders of magnitude across moduli, contrast and
/// volume fraction; dividing by this inference-computable bound makes every
/// training target O(1). Effective stresses sit between the Reuss and Voigt
/// bounds, so the scaled labels are bounded above by roughly one.
double stress_scale(const std::vector<double>& x1, const VoxelGrid& grid);

/// Inference through the surrogate in physical units: network prediction
/// times the sample's stress scale.
std::vector<double> surrogate_predict(Network& net, const std::vector<double>& x1,
                                      const VoxelGrid& grid);

struct TrainConfig {
    double alpha = 1e-3;       ///< learning rate
    double beta_dropout = 0.0;
    double lambda_l2 = 0.0;
    int batch_size = 32;
    int max_epochs = 200;
    int patience = 20;         ///< early-stop window (epochs without improvement)
    double lr_decay = 0.5;     ///< multiplier applied after half the patience window
    /// Weight each sample's squared error by 1/|y|^2. The stress labels span
    /// orders of magnitude across volume fractions and moduli; the absolute
    /// objective ignores the small-norm samples that dominate the mean
    /// relative error.
    bool relative_loss = true;
    std::uint64_t seed = 0;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    Network net;
    std::vector<EpochRecord> log;
    double best_val_loss = 0.0;
    int epochs_run = 0;
};

/// Trains `topology` on the train split, monitors the validation split, and
/// returns the checkpoint with the best validation weights. Fits the input
/// and label standardizers from the training split (constant features get
/// unit scale). Throws DatasetTooSmallError when the training split holds
/// fewer than two batches and DivergedError when the loss becomes
/// non-finite.
TrainResult train(const TrainingData& train_set, const TrainingData& val_set,
                  const Topology& topology, const TrainConfig& cfg);

/// Mean over the set of |y - yhat| / |y| in the L2 norm, skipping samples
/// with |y| < 1e-12. Throws EmptySetError on an empty set.
double evaluate(Network& net, const TrainingData& test_set);

struct HpSearchSpace {
    double alpha_lo = 1e-4, alpha_hi = 1e-2;       ///< log-uniform
    double lambda_lo = 1e-6, lambda_hi = 1e-1;     ///< log-uniform
    double lambda_zero_prob = 0.25;                ///< point mass at exactly 0
    std::vector<double> dropout_choices = {0.0, 0.1, 0.15, 0.2};
    std::vector<int> n_u_choices = {64, 128, 256, 512, 1024, 2048};
    std::vector<int> n_f_choices = {4, 8, 16, 32};
    std::vector<int> n_l_choices = {1, 2, 3};
    int trials = 10;
    std::uint64_t seed = 0;
};

struct HpTrial {
    TrainConfig cfg;
    TopologyConfig topo;
    double val_loss = 0.0;
    bool failed = false;
    std::string error;
};

struct HpSearchResult {
    std::vector<HpTrial> trials;
    std::size_t best = 0;
};

/// True when the (cfg, topo) point lies inside the sampling ranges of the
/// space (lambda may also be exactly zero).
bool space_contains(const HpSearchSpace& space, const TrainConfig& cfg, const TopologyConfig& topo);

/// Random search: samples `trials` configurations, trains each on the tuning
/// split, returns every trial plus the index of the lowest validation loss.
/// Per-trial training failures are recorded, not propagated.
HpSearchResult hp_random_search(const HpSearchSpace& space, const TrainingData& tune_train,
                                const TrainingData& tune_val, const TrainConfig& base_cfg,
                                TopologyConfig topo_template);

}  // namespace muq::nn
