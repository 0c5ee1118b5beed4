#include <doctest.h>

#include <cmath>

#include "icsd/models.hpp"
#include "oracles.hpp"

using namespace icsd;
using namespace icsd::nn;

namespace {

// short two-feature series with visible structure
TimeSeriesDataset wave_dataset(size_t T, uint64_t seed) {
    TimeSeriesDataset ds;
    ds.features = Matrix(T, 2);
    Rng rng(seed);
    for (size_t t = 0; t < T; ++t) {
        double phase = 2.0 * M_PI * static_cast<double>(t) / 24.0;
        ds.features.at(t, 0) = 0.5 + 0.4 * std::sin(phase) + 0.01 * rng.gaussian();
        ds.features.at(t, 1) = 0.5 + 0.4 * std::cos(phase) + 0.01 * rng.gaussian();
        ds.timestamps.push_back(static_cast<int64_t>(t));
    }
    FeatureMeta a, b;
    a.name = "sin";
    b.name = "cos";
    ds.meta = {a, b};
    ds.step_seconds = 1;
    return ds;
}

} // namespace

TEST_CASE("uae construction enforces the undercomplete code") {
    UaeConfig cfg;
    cfg.input_len = 4;
    cfg.code_ratio = 0.5;
    auto m = make_uae(cfg, 2, 1);
    CHECK(m.code_dim() == 4);           // 0.5 * (4*2)
    CHECK(m.code_dim() < m.raw_dim());
    CHECK(m.inflate_dim() == 24);       // 3x inflation of l*F

    UaeConfig tiny;
    tiny.input_len = 1;
    tiny.code_ratio = 0.9;
    CHECK_THROWS(make_uae(tiny, 1, 1)); // cannot be undercomplete at size 1
}

TEST_CASE("uae predict returns the input shape and is deterministic") {
    auto ds = wave_dataset(120, 3);
    UaeConfig cfg;
    cfg.input_len = 6;
    auto model = make_uae(cfg, 2, 7);
    auto windows = make_autoencoder_sequences(ds, 6, 1);
    TrainConfig tc;
    tc.max_epochs = 5;
    tc.target_train_error = 0.0;
    tc.seed = 7;
    train(model, windows, tc);
    auto p1 = predict(model, windows);
    auto p2 = predict(model, windows);
    CHECK(p1.size() == windows.batch * 6 * 2);
    CHECK(p1 == p2); // bitwise deterministic in eval mode
}

TEST_CASE("training is bitwise reproducible under a fixed seed") {
    auto ds = wave_dataset(150, 5);
    auto windows = make_autoencoder_sequences(ds, 4, 2);
    TrainConfig tc;
    tc.max_epochs = 6;
    tc.target_train_error = 0.0;
    tc.seed = 42;

    UaeConfig cfg;
    cfg.input_len = 4;
    cfg.noise_std = 0.05; // corruption active, still deterministic
    auto m1 = make_uae(cfg, 2, 42);
    auto m2 = make_uae(cfg, 2, 42);
    auto r1 = train(m1, windows, tc);
    auto r2 = train(m2, windows, tc);
    CHECK(r1.loss_history == r2.loss_history);
    CHECK(m1.w_decode.v == m2.w_decode.v);
}

TEST_CASE("zero learning rate leaves the loss history constant") {
    auto ds = wave_dataset(100, 9);
    auto windows = make_autoencoder_sequences(ds, 4, 2);
    TrainConfig tc;
    tc.learning_rate = 0.0;
    tc.optimizer = OptimizerKind::sgd;
    tc.max_epochs = 4;
    tc.target_train_error = 0.0;
    UaeConfig cfg;
    cfg.input_len = 4;
    auto model = make_uae(cfg, 2, 11);
    auto r = train(model, windows, tc);
    REQUIRE(r.loss_history.size() == 4);
    for (double v : r.loss_history) CHECK(v == doctest::Approx(r.loss_history[0]).epsilon(1e-12));
}

TEST_CASE("uae training loss trends down on its own corpus") {
    auto ds = wave_dataset(300, 13);
    auto windows = make_autoencoder_sequences(ds, 6, 1);
    UaeConfig cfg;
    cfg.input_len = 6;
    auto model = make_uae(cfg, 2, 13);
    TrainConfig tc;
    tc.max_epochs = 10;
    tc.target_train_error = 0.0;
    tc.seed = 13;
    auto r = train(model, windows, tc);
    REQUIRE(r.loss_history.size() == 10);
    for (double v : r.loss_history) CHECK(v > 0.0);
    CHECK(r.loss_history.back() < r.loss_history.front());
}

TEST_CASE("training stops when the target error is reached") {
    auto ds = wave_dataset(200, 17);
    auto windows = make_autoencoder_sequences(ds, 4, 1);
    UaeConfig cfg;
    cfg.input_len = 4;
    auto model = make_uae(cfg, 2, 17);
    TrainConfig tc;
    tc.max_epochs = 200;
    tc.target_train_error = 0.1; // loose: normalized data starts near this
    auto r = train(model, windows, tc);
    CHECK(r.reached_target);
    CHECK(r.loss_history.size() < 200);
    CHECK(r.loss_history.back() <= 0.1);
}

TEST_CASE("cnn forward shape and eval determinism") {
    auto ds = wave_dataset(100, 19);
    CnnConfig cfg;
    cfg.seq_len = 12;
    cfg.depth = 4;
    cfg.filters = 8;
    cfg.output_len = 1;
    auto model = make_cnn(cfg, 2, 3);
    auto windows = make_sequences(ds, 12, 1, 0, 1);
    TrainConfig tc;
    tc.max_epochs = 3;
    tc.target_train_error = 0.0;
    train(model, windows, tc);
    auto p = predict(model, windows);
    CHECK(p.size() == windows.batch * 1 * 2); // one F-vector per window
    CHECK(p == predict(model, windows));
}

TEST_CASE("cnn accepts the 8-layer l=18 configuration and learns") {
    auto ds = wave_dataset(400, 23);
    CnnConfig cfg;
    cfg.seq_len = 18;
    cfg.depth = 8;
    cfg.filters = 8; // smaller than the default 32 to keep the test quick
    auto model = make_cnn(cfg, 2, 5);
    auto windows = make_sequences(ds, 18, 1, 0, 2);
    TrainConfig tc;
    tc.max_epochs = 8;
    tc.target_train_error = 0.0;
    tc.seed = 23;
    auto r = train(model, windows, tc);
    CHECK(r.loss_history.back() < r.loss_history.front());
}

TEST_CASE("whole-sequence loss equals final-step loss when l = m = 1") {
    // the two scoring regimes coincide for single-step sequences
    auto ds = wave_dataset(50, 29);
    auto windows = make_autoencoder_sequences(ds, 1, 1);
    UaeConfig cfg;
    cfg.input_len = 1;
    cfg.code_ratio = 0.5;
    auto model = make_uae(cfg, 2, 31);
    TrainConfig tc;
    tc.max_epochs = 2;
    tc.target_train_error = 0.0;
    train(model, windows, tc);
    auto preds = predict(model, windows);
    // mse over the whole "sequence" (length 1) == mse over the final step
    double whole = 0.0, final_step = 0.0;
    for (size_t b = 0; b < windows.batch; ++b)
        for (size_t f = 0; f < 2; ++f) {
            double d = preds[b * 2 + f] - windows.targets[b * 2 + f];
            whole += d * d;
            final_step += d * d;
        }
    CHECK(whole == final_step);
}

TEST_CASE("uae and cnn gradients survive a full-model finite-difference check") {
    Rng rng(37);
    // UAE: derivative wrt the input window
    {
        UaeConfig cfg;
        cfg.input_len = 3;
        auto model = make_uae(cfg, 2, 41);
        Tensor x({2, 3, 2});
        for (double& v : x.v) v = rng.uniform(0.0, 1.0);
        Tensor target = x;
        Graph g;
        Graph::NodeId xi = g.input(x);
        auto f = uae_forward(g, model, xi, false, nullptr);
        Graph::NodeId loss = g.mse(f.output, g.input(target));
        g.backward(loss);
        auto fn = [&](const std::vector<double>& flat) {
            Graph g2;
            Tensor t = x;
            t.v = flat;
            Graph::NodeId xi2 = g2.input(std::move(t));
            auto f2 = uae_forward(g2, model, xi2, false, nullptr);
            return g2.value(g2.mse(f2.output, g2.input(target))).v[0];
        };
        CHECK(oracle::gradient_rel_error(fn, x.v, g.grad(xi)) < 1e-4);
    }
    // CNN: derivative wrt the first conv kernel
    {
        CnnConfig cfg;
        cfg.seq_len = 6;
        cfg.depth = 3;
        cfg.filters = 4;
        auto model = make_cnn(cfg, 2, 43);
        Tensor x({2, 6, 2});
        for (double& v : x.v) v = rng.uniform(0.0, 1.0);
        Tensor target({2, 1, 2});
        for (double& v : target.v) v = rng.uniform(0.0, 1.0);
        Graph g;
        Graph::NodeId xi = g.input(x);
        auto f = cnn_forward(g, model, xi);
        Graph::NodeId loss = g.mse(f.output, g.input(target));
        g.backward(loss);
        std::vector<double> analytic = g.grad(f.params[0]);
        auto fn = [&](const std::vector<double>& flat) {
            CnnModel probe = model;
            probe.kernels[0].v = flat;
            Graph g2;
            Graph::NodeId xi2 = g2.input(x);
            auto f2 = cnn_forward(g2, probe, xi2);
            return g2.value(g2.mse(f2.output, g2.input(target))).v[0];
        };
        CHECK(oracle::gradient_rel_error(fn, model.kernels[0].v, analytic) < 1e-4);
    }
}

TEST_CASE("uae derivative channel keeps shapes and gradients intact") {
    Rng rng(61);
    UaeConfig cfg;
    cfg.input_len = 4;
    cfg.derivative_channel = true;
    auto model = make_uae(cfg, 2, 61);
    CHECK(model.input_dim() == 16); // 2 * l * F
    Tensor x({1, 4, 2});
    for (double& v : x.v) v = rng.uniform(0.0, 1.0);
    Graph g;
    Graph::NodeId xi = g.input(x);
    auto f = uae_forward(g, model, xi, false, nullptr);
    CHECK(g.value(f.output).shape == std::vector<size_t>{1, 4, 2});
    Graph::NodeId loss = g.mse(f.output, g.input(x));
    g.backward(loss);
    auto fn = [&](const std::vector<double>& flat) {
        Graph g2;
        Tensor t = x;
        t.v = flat;
        Graph::NodeId xi2 = g2.input(std::move(t));
        auto f2 = uae_forward(g2, model, xi2, false, nullptr);
        return g2.value(g2.mse(f2.output, g2.input(x))).v[0];
    };
    CHECK(oracle::gradient_rel_error(fn, x.v, g.grad(xi)) < 1e-4);
}

TEST_CASE("model persistence round-trips parameters exactly") {
    auto ds = wave_dataset(80, 47);
    UaeConfig ucfg;
    ucfg.input_len = 4;
    auto uae = make_uae(ucfg, 2, 47);
    auto windows = make_autoencoder_sequences(ds, 4, 1);
    TrainConfig tc;
    tc.max_epochs = 2;
    tc.target_train_error = 0.0;
    train(uae, windows, tc);
    save_uae(uae, "/tmp/icsd_test_uae.json");
    auto back = load_uae("/tmp/icsd_test_uae.json");
    CHECK(back.w_decode.v == uae.w_decode.v);
    CHECK(back.trained);
    CHECK(predict(back, windows) == predict(uae, windows));

    CnnConfig ccfg;
    ccfg.seq_len = 6;
    ccfg.depth = 2;
    ccfg.filters = 4;
    auto cnn = make_cnn(ccfg, 2, 53);
    auto fwindows = make_sequences(ds, 6, 1, 0, 1);
    train(cnn, fwindows, tc);
    save_cnn(cnn, "/tmp/icsd_test_cnn.json");
    auto cback = load_cnn("/tmp/icsd_test_cnn.json");
    CHECK(cback.kernels[0].v == cnn.kernels[0].v);
    CHECK(predict(cback, fwindows) == predict(cnn, fwindows));
}

TEST_CASE("diverging training aborts with a diagnostic") {
    auto ds = wave_dataset(60, 59);
    auto windows = make_autoencoder_sequences(ds, 4, 1);
    UaeConfig cfg;
    cfg.input_len = 4;
    auto model = make_uae(cfg, 2, 59);
    TrainConfig tc;
    tc.optimizer = OptimizerKind::sgd;
    tc.learning_rate = 1e9; // blow up on purpose
    tc.max_epochs = 50;
    tc.target_train_error = 0.0;
    CHECK_THROWS_AS(train(model, windows, tc), Error);
}
