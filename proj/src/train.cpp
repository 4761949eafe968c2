#include "muq/train.hpp"

#include <algorithm>
#include <cmath>

namespace muq::nn {

std::vector<double> numeric_features(const MaterialParams& mat_M, const MaterialParams& mat_I,
                                     const VoigtVector& eps_bar) {
    const MaterialParams m = convert_params(mat_M, ParamRep::KG);
    const MaterialParams i = convert_params(mat_I, ParamRep::KG);
    std::vector<double> x = {m.p1, m.p2, i.p1, i.p2};
    for (int c = 0; c < 6; ++c) x.push_back(eps_bar[c]);
    return x;
}

double stress_scale(const std::vector<double>& x1, const VoxelGrid& grid) {
    if (x1.size() != 10) throw ShapeMismatchError("expected 10 numeric features");
    const double vf = volume_fraction(grid);
    const VoigtMatrix C_V = (1.0 - vf) * isotropic_stiffness(x1[0], x1[1]) +
                            vf * isotropic_stiffness(x1[2], x1[3]);
    VoigtVector eps;
    for (int c = 0; c < 6; ++c) eps[c] = x1[static_cast<std::size_t>(c) + 4];
    const VoigtVector sigma = C_V * eps;
    double norm2 = 0.0;
    for (int c = 0; c < 6; ++c) norm2 += sigma[c] * sigma[c];
    return std::sqrt(norm2);
}

std::vector<double> surrogate_predict(Network& net, const std::vector<double>& x1,
                                      const VoxelGrid& grid) {
    const double s = stress_scale(x1, grid);
    std::vector<double> y = net.predict(x1, grid);
    for (double& v : y) v *= s;
    return y;
}

TrainingData to_training_data(const Dataset& ds) {
    TrainingData td;
    td.grid_n = ds.grid_n;
    td.x1.reserve(ds.size());
    td.grids.reserve(ds.size());
    td.labels.reserve(ds.size());
    td.scale.reserve(ds.size());
    for (const Sample& s : ds.samples) {
        td.x1.push_back(numeric_features(s.mat_M, s.mat_I, unit_strain(s.strain_index)));
        td.grids.push_back(realize_grid(ds, s));
        const double sc = stress_scale(td.x1.back(), td.grids.back());
        td.labels.push_back({s.label[0] / sc, s.label[1] / sc, s.label[2] / sc, s.label[3] / sc,
                             s.label[4] / sc, s.label[5] / sc});
        td.scale.push_back(sc);
    }
    return td;
}

namespace {

FeatureStats fit_stats(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    const std::size_t d = rows.empty() ? 0 : rows[0].size();
    FeatureStats st;
    st.mean.assign(d, 0.0);
    st.stddev.assign(d, 1.0);
    for (const auto& r : rows)
        for (std::size_t j = 0; j < d; ++j) st.mean[j] += r[j];
    for (std::size_t j = 0; j < d; ++j) st.mean[j] /= static_cast<double>(n);
    for (std::size_t j = 0; j < d; ++j) {
        double var = 0.0;
        for (const auto& r : rows) var += (r[j] - st.mean[j]) * (r[j] - st.mean[j]);
        const double sd = std::sqrt(var / static_cast<double>(n));
        // Constant features keep unit scale so standardization stays a
        // well-defined no-op for them.
        st.stddev[j] = sd > 1e-12 * (std::abs(st.mean[j]) + 1.0) ? sd : 1.0;
    }
    return st;
}

std::vector<double> relative_weights(const TrainingData& data) {
    std::vector<double> w(data.size(), 1.0);
    for (std::size_t k = 0; k < data.size(); ++k) {
        double norm2 = 0.0;
        for (double v : data.labels[k]) norm2 += v * v;
        w[k] = 1.0 / std::max(norm2, 1e-24);
    }
    return w;
}

double batch_pass(Network& net, const TrainingData& data, const std::vector<double>* weights,
                  const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end,
                  double lambda_l2, Rng& rng) {
    std::vector<std::vector<double>> x1;
    std::vector<const VoxelGrid*> x2;
    std::vector<std::vector<double>> y;
    std::vector<double> w;
    x1.reserve(end - begin);
    x2.reserve(end - begin);
    y.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        x1.push_back(data.x1[idx[i]]);
        x2.push_back(&data.grids[idx[i]]);
        y.push_back(data.labels[idx[i]]);
        if (weights) w.push_back((*weights)[idx[i]]);
    }
    return gradients(net, x1, x2, y, lambda_l2, rng, weights ? &w : nullptr);
}

double full_loss(Network& net, const TrainingData& data, const std::vector<double>* weights,
                 double lambda_l2) {
    std::vector<std::vector<double>> x1 = data.x1;
    std::vector<const VoxelGrid*> x2;
    x2.reserve(data.size());
    for (const auto& g : data.grids) x2.push_back(&g);
    return loss(net, x1, x2, data.labels, lambda_l2, weights);
}

}  // namespace

TrainResult train(const TrainingData& train_set, const TrainingData& val_set,
                  const Topology& topology, const TrainConfig& cfg) {
    if (train_set.size() < 2 * static_cast<std::size_t>(cfg.batch_size))
        throw DatasetTooSmallError("training split smaller than two batches");
    if (val_set.size() == 0) throw DatasetTooSmallError("validation split is empty");
    if (!(cfg.alpha > 0.0)) throw OutOfRangeError("learning rate must be > 0");
    if (cfg.lambda_l2 < 0.0) throw OutOfRangeError("L2 factor must be >= 0");
    if (cfg.patience < 1) throw OutOfRangeError("patience must be >= 1");

    const int numeric_dim = static_cast<int>(train_set.x1[0].size());
    TrainResult result{Network(topology, train_set.grid_n, numeric_dim, cfg.seed), {}, 0.0, 0};
    Network& net = result.net;
    net.input_stats() = fit_stats(train_set.x1);
    net.label_stats() = fit_stats(train_set.labels);

    std::vector<double> train_weights, val_weights;
    if (cfg.relative_loss) {
        train_weights = relative_weights(train_set);
        val_weights = relative_weights(val_set);
    }
    const std::vector<double>* tw = cfg.relative_loss ? &train_weights : nullptr;
    const std::vector<double>* vw = cfg.relative_loss ? &val_weights : nullptr;

    AdamState adam(net.n_params());
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);  // shuffling + dropout stream

    double lr = cfg.alpha;
    double best_val = 1e300;
    std::vector<double> best_params = net.flat_params();
    int best_epoch = 0;
    int since_improve = 0;
    const int decay_window = std::max(1, cfg.patience / 2);

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    // Flat gradient buffer mirrored over the parameter blocks.
    std::vector<double> flat_grads(net.n_params(), 0.0);
    std::vector<double> flat_params(net.n_params(), 0.0);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(i)]);

        double train_loss = 0.0;
        std::size_t batches = 0;
        const auto bs = static_cast<std::size_t>(cfg.batch_size);
        for (std::size_t begin = 0; begin < order.size(); begin += bs, ++batches) {
            const std::size_t end = std::min(begin + bs, order.size());
            train_loss += batch_pass(net, train_set, tw, order, begin, end, cfg.lambda_l2, rng);

            std::size_t off = 0;
            for (auto& b : net.param_blocks()) {
                std::copy(b.grads->begin(), b.grads->end(),
                          flat_grads.begin() + static_cast<std::ptrdiff_t>(off));
                std::copy(b.values->begin(), b.values->end(),
                          flat_params.begin() + static_cast<std::ptrdiff_t>(off));
                off += b.grads->size();
            }
            adam_amsgrad_step(adam, flat_params, flat_grads, lr);
            net.set_flat_params(flat_params);
        }
        train_loss /= static_cast<double>(batches);

        const double val_loss = full_loss(net, val_set, vw, cfg.lambda_l2);
        result.log.push_back({epoch, train_loss, val_loss, lr});
        result.epochs_run = epoch;
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
            throw DivergedError("loss became non-finite in epoch " + std::to_string(epoch));

        if (val_loss < best_val) {
            best_val = val_loss;
            best_params = net.flat_params();
            best_epoch = epoch;
            since_improve = 0;
        } else {
            ++since_improve;
            if (since_improve >= cfg.patience) break;
            if (since_improve % decay_window == 0) lr *= cfg.lr_decay;
        }
    }

    net.set_flat_params(best_params);
    net.meta().epochs_run = static_cast<std::uint32_t>(result.epochs_run);
    net.meta().best_val_loss = best_val;
    net.meta().seed = cfg.seed;
    result.best_val_loss = best_val;
    (void)best_epoch;
    return result;
}

double evaluate(Network& net, const TrainingData& test_set) {
    if (test_set.size() == 0) throw EmptySetError("evaluation set is empty");
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t k = 0; k < test_set.size(); ++k) {
        const std::vector<double> yhat = net.predict(test_set.x1[k], test_set.grids[k]);
        double err2 = 0.0, ref2 = 0.0;
        for (std::size_t c = 0; c < yhat.size(); ++c) {
            const double d = yhat[c] - test_set.labels[k][c];
            err2 += d * d;
            ref2 += test_set.labels[k][c] * test_set.labels[k][c];
        }
        if (std::sqrt(ref2) < 1e-12) continue;
        total += std::sqrt(err2) / std::sqrt(ref2);
        ++counted;
    }
    if (counted == 0) throw EmptySetError("all labels below the norm threshold");
    return total / static_cast<double>(counted);
}

bool space_contains(const HpSearchSpace& space, const TrainConfig& cfg, const TopologyConfig& topo) {
    auto in_set = [](const auto& set, auto v) { return std::find(set.begin(), set.end(), v) != set.end(); };
    if (cfg.alpha < space.alpha_lo || cfg.alpha > space.alpha_hi) return false;
    if (cfg.lambda_l2 != 0.0 && (cfg.lambda_l2 < space.lambda_lo || cfg.lambda_l2 > space.lambda_hi))
        return false;
    return in_set(space.dropout_choices, cfg.beta_dropout) && in_set(space.n_u_choices, topo.n_u) &&
           in_set(space.n_f_choices, topo.n_F) && in_set(space.n_l_choices, topo.n_L);
}

HpSearchResult hp_random_search(const HpSearchSpace& space, const TrainingData& tune_train,
                                const TrainingData& tune_val, const TrainConfig& base_cfg,
                                TopologyConfig topo_template) {
    if (space.trials < 1) throw OutOfRangeError("search needs at least one trial");
    Rng rng(space.seed);
    HpSearchResult result;
    double best_val = 1e300;

    for (int t = 0; t < space.trials; ++t) {
        HpTrial trial;
        trial.cfg = base_cfg;
        trial.topo = topo_template;
        trial.cfg.alpha =
            std::exp(rng.uniform(std::log(space.alpha_lo), std::log(space.alpha_hi)));
        trial.cfg.lambda_l2 =
            rng.uniform() < space.lambda_zero_prob
                ? 0.0
                : std::exp(rng.uniform(std::log(space.lambda_lo), std::log(space.lambda_hi)));
        trial.cfg.beta_dropout =
            space.dropout_choices[rng.uniform_int(space.dropout_choices.size())];
        trial.topo.n_u = space.n_u_choices[rng.uniform_int(space.n_u_choices.size())];
        trial.topo.n_F = space.n_f_choices[rng.uniform_int(space.n_f_choices.size())];
        trial.topo.n_L = space.n_l_choices[rng.uniform_int(space.n_l_choices.size())];
        trial.topo.dropout = trial.cfg.beta_dropout;
        trial.cfg.seed = base_cfg.seed + static_cast<std::uint64_t>(t);

        try {
            const Topology topo = make_default_topology(tune_train.grid_n, trial.topo);
            TrainResult tr = train(tune_train, tune_val, topo, trial.cfg);
            trial.val_loss = tr.best_val_loss;
        } catch (const std::exception& e) {
            trial.failed = true;
            trial.error = e.what();
            trial.val_loss = 1e300;
        }
        if (!trial.failed && trial.val_loss < best_val) {
            best_val = trial.val_loss;
            result.best = static_cast<std::size_t>(t);
        }
        result.trials.push_back(std::move(trial));
    }
    return result;
}

}  // namespace muq::nn
