#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "muq/train.hpp"

using namespace muq;
using namespace muq::nn;

namespace {

Topology dense_only(int n_u, int n_l, int n_out) {
    Topology t;
    t.voxel_branch = {LayerSpec::flatten()};
    t.numeric_branch = {LayerSpec::standardize()};
    for (int l = 0; l < n_l; ++l) {
        t.trunk.push_back(LayerSpec::dense(n_u));
        t.trunk.push_back(LayerSpec::relu());
    }
    t.trunk.push_back(LayerSpec::dense(n_out));
    return t;
}

// y = x on scalar inputs, trivially learnable by one dense unit.
TrainingData identity_map_data(std::size_t n, std::uint64_t seed) {
    TrainingData td;
    td.grid_n = 2;
    Rng rng(seed);
    for (std::size_t k = 0; k < n; ++k) {
        const double x = rng.uniform(-2.0, 2.0);
        td.x1.push_back({x});
        td.grids.emplace_back(2);
        td.labels.push_back({x});
    }
    return td;
}

// Homogenization of an inclusion-free cell: the label is a column of the
// matrix-phase stiffness, a closed-form map of (K_M, G_M).
TrainingData homogeneous_map_data(std::size_t n, std::uint64_t seed) {
    TrainingData td;
    td.grid_n = 4;
    Rng rng(seed);
    for (std::size_t k = 0; k < n; ++k) {
        const double K = rng.uniform(1.0, 10.0);
        const double G = rng.uniform(1.0, 10.0);
        const int strain = 1 + static_cast<int>(rng.uniform_int(6));
        const VoigtMatrix C = isotropic_stiffness(K, G);
        std::vector<double> y(6);
        for (int r = 0; r < 6; ++r) y[static_cast<std::size_t>(r)] = C(r, strain - 1);
        td.x1.push_back(numeric_features(MaterialParams::k_g(K, G), MaterialParams::k_g(5.0, 5.0),
                                         unit_strain(strain)));
        td.grids.emplace_back(4);
        td.labels.push_back(std::move(y));
    }
    return td;
}

}  // namespace

TEST_CASE("training learns the identity map to high precision") {
    const TrainingData train_set = identity_map_data(100, 1);
    const TrainingData val_set = identity_map_data(20, 2);
    TrainConfig cfg;
    cfg.alpha = 0.02;
    cfg.batch_size = 10;
    cfg.max_epochs = 400;
    cfg.patience = 400;
    cfg.seed = 5;
    TrainResult res = train(train_set, val_set, dense_only(1, 0, 1), cfg);
    CHECK(res.log.back().train_loss < 1e-6);
    CHECK(evaluate(res.net, val_set) < 1e-3);
}

TEST_CASE("training learns the homogeneous homogenization map") {
    const TrainingData train_set = homogeneous_map_data(480, 11);
    const TrainingData val_set = homogeneous_map_data(60, 12);
    const TrainingData test_set = homogeneous_map_data(60, 13);
    TrainConfig cfg;
    cfg.alpha = 5e-3;
    cfg.batch_size = 32;
    cfg.max_epochs = 300;
    cfg.patience = 60;
    cfg.lr_decay = 0.7;
    cfg.seed = 3;
    TrainResult res = train(train_set, val_set, dense_only(96, 2, 6), cfg);
    CHECK(evaluate(res.net, test_set) < 0.02);
}

TEST_CASE("early stopping with constant validation loss") {
    // All-zero inputs and labels: the network is exact from epoch one, the
    // loss never improves, and patience = 1 stops after the second epoch.
    TrainingData td;
    td.grid_n = 2;
    for (int k = 0; k < 20; ++k) {
        td.x1.push_back({0.0});
        td.grids.emplace_back(2);
        td.labels.push_back({0.0});
    }
    TrainConfig cfg;
    cfg.alpha = 0.01;
    cfg.batch_size = 5;
    cfg.max_epochs = 50;
    cfg.patience = 1;
    TrainResult res = train(td, td, dense_only(4, 1, 1), cfg);
    CHECK(res.epochs_run == 2);
}

TEST_CASE("training is deterministic per seed") {
    const TrainingData train_set = identity_map_data(64, 21);
    const TrainingData val_set = identity_map_data(16, 22);
    TrainConfig cfg;
    cfg.alpha = 0.01;
    cfg.batch_size = 8;
    cfg.max_epochs = 20;
    cfg.patience = 20;
    cfg.beta_dropout = 0.1;
    Topology topo = dense_only(8, 1, 1);
    topo.trunk.insert(topo.trunk.begin() + 2, LayerSpec::dropout(0.1));
    TrainResult a = train(train_set, val_set, topo, cfg);
    TrainResult b = train(train_set, val_set, topo, cfg);
    CHECK(a.net.flat_params() == b.net.flat_params());
    CHECK(a.best_val_loss == b.best_val_loss);
}

TEST_CASE("divergence is reported") {
    const TrainingData train_set = identity_map_data(64, 31);
    const TrainingData val_set = identity_map_data(16, 32);
    TrainConfig cfg;
    // Step size large enough that the squared error overflows within the
    // first epochs.
    cfg.alpha = 1e160;
    cfg.batch_size = 8;
    cfg.max_epochs = 20;
    CHECK_THROWS_AS(train(train_set, val_set, dense_only(4, 1, 1), cfg), DivergedError);
}

TEST_CASE("undersized datasets are rejected") {
    const TrainingData tiny = identity_map_data(10, 41);
    TrainConfig cfg;
    cfg.batch_size = 32;
    CHECK_THROWS_AS(train(tiny, tiny, dense_only(4, 1, 1), cfg), DatasetTooSmallError);
}

TEST_CASE("evaluation metric") {
    Topology t = dense_only(1, 0, 2);
    Network net(t, 2, 1, 0);

    TrainingData td;
    td.grid_n = 2;
    td.x1 = {{1.0}, {2.0}};
    td.grids.emplace_back(2);
    td.grids.emplace_back(2);

    SUBCASE("perfect predictor scores zero") {
        std::vector<double> yhat0 = net.predict({1.0}, td.grids[0]);
        std::vector<double> yhat1 = net.predict({2.0}, td.grids[1]);
        td.labels = {yhat0, yhat1};
        CHECK(evaluate(net, td) == doctest::Approx(0.0).epsilon(1e-14));
    }
    SUBCASE("doubling predictor scores one") {
        // Labels y, predictor produces 2y: set labels to half the output.
        std::vector<double> yhat0 = net.predict({1.0}, td.grids[0]);
        std::vector<double> yhat1 = net.predict({2.0}, td.grids[1]);
        for (auto* v : {&yhat0, &yhat1})
            for (double& u : *v) u *= 0.5;
        td.labels = {yhat0, yhat1};
        if (std::abs(yhat0[0]) + std::abs(yhat0[1]) > 1e-9)
            CHECK(evaluate(net, td) == doctest::Approx(1.0).epsilon(1e-10));
    }
    SUBCASE("a one-percent perturbation scores 0.01") {
        std::vector<double> y0 = {3.0, 4.0};  // norm 5
        net.label_stats().mean = {0.0, 0.0};
        net.label_stats().stddev = {1.0, 1.0};
        std::vector<double> p(net.n_params(), 0.0);
        // Bias-only network that always outputs y0 + 0.01 * |y0| * e1.
        p[net.n_params() - 2] = 3.0 + 0.05;
        p[net.n_params() - 1] = 4.0;
        net.set_flat_params(p);
        td.labels = {y0, y0};
        CHECK(evaluate(net, td) == doctest::Approx(0.01).epsilon(1e-10));
    }
    SUBCASE("tiny-norm labels are skipped") {
        td.labels = {{0.0, 0.0}, {3.0, 4.0}};
        CHECK_NOTHROW(evaluate(net, td));
        TrainingData empty;
        CHECK_THROWS_AS(evaluate(net, empty), EmptySetError);
    }
}

TEST_CASE("random hyperparameter search") {
    const TrainingData tune_train = identity_map_data(64, 51);
    const TrainingData tune_val = identity_map_data(16, 52);
    TrainConfig base;
    base.alpha = 0.01;
    base.batch_size = 8;
    base.max_epochs = 8;
    base.patience = 8;
    TopologyConfig topo;
    topo.n_out = 1;

    SUBCASE("single trial returns that trial") {
        HpSearchSpace space;
        space.trials = 1;
        space.seed = 1;
        const HpSearchResult res = hp_random_search(space, tune_train, tune_val, base, topo);
        REQUIRE(res.trials.size() == 1);
        CHECK(res.best == 0);
        CHECK_FALSE(res.trials[0].failed);
    }
    SUBCASE("collapsed space returns the single point") {
        HpSearchSpace space;
        space.trials = 3;
        space.alpha_lo = space.alpha_hi = 0.004;
        space.lambda_zero_prob = 1.0;
        space.dropout_choices = {0.0};
        space.n_u_choices = {16};
        space.n_f_choices = {4};
        space.n_l_choices = {1};
        const HpSearchResult res = hp_random_search(space, tune_train, tune_val, base, topo);
        for (const auto& trial : res.trials) {
            CHECK(trial.cfg.alpha == doctest::Approx(0.004).epsilon(1e-12));
            CHECK(trial.cfg.lambda_l2 == 0.0);
            CHECK(trial.topo.n_u == 16);
            CHECK(trial.topo.n_L == 1);
        }
    }
    SUBCASE("default space contains the reference optimum") {
        const HpSearchSpace space;
        TrainConfig opt;
        opt.alpha = 0.005;
        opt.beta_dropout = 0.0;
        opt.lambda_l2 = 0.0;
        TopologyConfig t;
        t.n_u = 2048;
        t.n_F = 32;
        t.n_L = 2;
        CHECK(space_contains(space, opt, t));
    }
    SUBCASE("failing trials are recorded, not propagated") {
        HpSearchSpace space;
        space.trials = 2;
        space.n_u_choices = {4};
        space.n_f_choices = {4};
        space.n_l_choices = {1};
        space.dropout_choices = {0.0};
        TrainConfig bad = base;
        bad.batch_size = 64;  // tune split holds fewer than two batches
        const HpSearchResult res = hp_random_search(space, tune_train, tune_val, bad, topo);
        REQUIRE(res.trials.size() == 2);
        CHECK(res.trials[0].failed);
        CHECK(res.trials[1].failed);
    }
}
