#include "gmmn_garch/gmmn.hpp"
#include "gmmn_garch/mmd.hpp"
#include "gmmn_garch/synthetic.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

using namespace gmmn_garch;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
    return m;
}

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

std::vector<std::vector<double>> rows_of(const Matrix& m) {
    std::vector<std::vector<double>> out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).data(), m.row(i).data() + m.cols());
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Kernel and MMD

TEST_CASE("kernel: identical points give the number of bandwidths") {
    const std::vector<double> u{0.2, 0.7, 0.1};
    CHECK(kernel_mix(u, u, KernelSpec::training_default()) == 6.0);
    CHECK(kernel_mix(u, u, KernelSpec::assessment_default()) == 5.0);
}

TEST_CASE("kernel: single bandwidth hand value") {
    const std::vector<double> u{0.0, 0.0}, v{0.5, 0.5};  // squared distance 0.5
    CHECK_THAT(kernel_mix(u, v, KernelSpec{{0.5}}), WithinAbs(std::exp(-1.0), 1e-15));
    CHECK_THAT(std::exp(-1.0), WithinAbs(0.367879, 1e-6));
}

TEST_CASE("kernel: symmetric with values in (0, n_krn]") {
    Rng rng(1);
    const auto k = KernelSpec::assessment_default();
    for (int i = 0; i < 100; ++i) {
        std::vector<double> u(3), v(3);
        for (auto& x : u) x = rng.uniform();
        for (auto& x : v) x = rng.uniform();
        const double a = kernel_mix(u, v, k);
        CHECK(a == kernel_mix(v, u, k));
        CHECK(a > 0.0);
        CHECK(a <= 5.0);
    }
}

TEST_CASE("kernel spec validation") {
    CHECK_THROWS_AS(KernelSpec{}.validate(), InputError);
    CHECK_THROWS_AS((KernelSpec{{0.1, -0.2}}.validate()), InputError);
    CHECK_THROWS_AS((KernelSpec{{0.0}}.validate()), InputError);
}

TEST_CASE("mmd: identical samples") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Matrix a = uniform_matrix(37, 3, s);
        CHECK(mmd(a, a, KernelSpec::training_default()) <= 1e-12);
    }
}

TEST_CASE("mmd: singleton closed form") {
    const KernelSpec k{{0.3}};
    Matrix a(1, 2), b(1, 2);
    a << 0.1, 0.4;
    b << 0.5, 0.2;
    const double d2 = 0.4 * 0.4 + 0.2 * 0.2;
    const double kxy = std::exp(-d2 / (2.0 * 0.09));
    CHECK_THAT(mmd(a, b, k), WithinAbs(std::sqrt(2.0 * (1.0 - kxy)), 1e-12));
}

TEST_CASE("mmd: matches the direct triple sum") {
    const Matrix a = uniform_matrix(23, 3, 5), b = uniform_matrix(31, 3, 6);
    for (const auto& k : {KernelSpec::training_default(), KernelSpec::assessment_default()})
        CHECK_THAT(mmd(a, b, k), WithinAbs(oracle::mmd(rows_of(a), rows_of(b), k.bandwidths), 1e-12));
}

TEST_CASE("mmd: exact symmetry and permutation invariance") {
    const auto k = KernelSpec::training_default();
    const Matrix a = uniform_matrix(40, 2, 7), b = uniform_matrix(25, 2, 8);
    CHECK(mmd(a, b, k) == mmd(b, a, k));
    Matrix pa = a.colwise().reverse();
    Matrix pb = b;
    std::swap_ranges(pb.row(0).data(), pb.row(0).data() + 2, pb.row(24).data());
    CHECK(mmd(pa, pb, k) == mmd(a, b, k));
}

TEST_CASE("mmd: empty input is an error") {
    CHECK_THROWS_AS(mmd(Matrix(0, 2), Matrix::Zero(3, 2), KernelSpec::training_default()), InputError);
}

TEST_CASE("mmd: separates a dependent copula from independence") {
    int wins = 0;
    const auto k = KernelSpec::assessment_default();
    const auto gc = GaussianCopula::equicorrelated(2, 0.8);
    for (std::uint64_t s = 0; s < 10; ++s) {
        Rng rng(100 + s);
        const int n = 2000;
        const Matrix a = gc.sample(n, rng), b = gc.sample(n, rng);
        const Matrix ind = sample_independence(2, n, rng);
        if (mmd(a, b, k) < mmd(a, ind, k)) ++wins;
    }
    CHECK(wins >= 6);
}

// ---------------------------------------------------------------------------
// Network

TEST_CASE("network: zero parameters give one half") {
    const auto m = GmmnModel::zeros({3, 5, 3});
    const Matrix out = nn_forward(m, normal_matrix(10, 3, 1), InferMode{});
    for (Eigen::Index i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 0.5);
}

TEST_CASE("network: at least one hidden layer is required") {
    CHECK_THROWS_AS(GmmnModel::zeros({2, 2}), ConfigError);
}

TEST_CASE("network: hand forward pass of a 1-1-1 net with batch statistics") {
    auto m = GmmnModel::zeros({1, 1, 1}, 0.0);
    m.weights[0](0, 0) = 1.0;
    m.weights[1](0, 0) = 1.0;
    Matrix v(2, 1);
    v << 1.0, -1.0;
    // Batch mean 0, biased variance 1.
    const double h = 1.0 / std::sqrt(1.0 + 1e-5);
    const Matrix out = nn_forward(m, v, TrainMode{0});
    CHECK_THAT(out(0, 0), WithinAbs(1.0 / (1.0 + std::exp(-h)), 1e-15));
    CHECK_THAT(out(1, 0), WithinAbs(0.5, 1e-15));
    CHECK_THAT(m.running_mean[0][0], WithinAbs(0.0, 1e-15));
    CHECK_THAT(m.running_var[0][0], WithinAbs(1.0, 1e-15));

    // Batch (1, 3): mean 2, variance 1; running stats move by 1 - momentum.
    v << 1.0, 3.0;
    const Matrix out2 = nn_forward(m, v, TrainMode{0});
    CHECK_THAT(out2(1, 0), WithinAbs(1.0 / (1.0 + std::exp(-h)), 1e-15));
    CHECK_THAT(m.running_mean[0][0], WithinAbs(0.01 * 2.0, 1e-15));
    CHECK_THAT(m.running_var[0][0], WithinAbs(1.0, 1e-15));

    // Inference uses the running statistics: (1 - 0.02) / sqrt(1 + eps).
    Matrix one(1, 1);
    one << 1.0;
    const Matrix inf = nn_forward(m, one, InferMode{});
    CHECK_THAT(inf(0, 0), WithinAbs(1.0 / (1.0 + std::exp(-0.98 / std::sqrt(1.0 + 1e-5))), 1e-15));
}

TEST_CASE("network: inverted dropout scales kept units") {
    auto m = GmmnModel::zeros({1, 50, 1}, 0.5);
    for (Eigen::Index i = 0; i < 50; ++i) m.weights[0](i, 0) = 1.0;
    Matrix v(2, 1);
    v << 1.0, -1.0;
    ForwardCache c;
    forward_train(m, v, 42, &c);
    for (Eigen::Index i = 0; i < c.mask[0].size(); ++i) {
        const double x = c.mask[0].data()[i];
        CHECK((x == 0.0 || x == 2.0));
    }
    ForwardCache c2;
    forward_train(m, v, 42, &c2);
    CHECK(c.mask[0] == c2.mask[0]);
}

TEST_CASE("network: outputs stay in (0, 1)") {
    const auto m = gradcheck::random_model({3, 20, 20, 3}, 0.5, 3);
    const Matrix v = normal_matrix(1000, 3, 4) * 3.0;
    for (const Matrix& out : {forward_infer(m, v), forward_train(m, v, 5)}) {
        CHECK(out.minCoeff() > 0.0);
        CHECK(out.maxCoeff() < 1.0);
    }
}

TEST_CASE("network: inference is pure and training touches only running statistics") {
    auto m = gradcheck::random_model({2, 6, 2}, 0.5, 6);
    const auto before = m;
    const Matrix v = normal_matrix(8, 2, 7);
    forward_infer(m, v);
    CHECK(m.flatten() == before.flatten());
    CHECK(m.running_mean[0] == before.running_mean[0]);
    nn_forward(m, v, TrainMode{1});
    CHECK(m.flatten() == before.flatten());
    CHECK(m.running_mean[0] != before.running_mean[0]);
}

TEST_CASE("network: flatten and unflatten are inverse") {
    auto m = gradcheck::random_model({2, 4, 3, 2}, 0.5, 8);
    const Vector theta = m.flatten();
    CHECK(theta.size() == m.num_params());
    CHECK(theta.size() == (4 * 2 + 3 * 4 + 2 * 3) + (4 + 3 + 2) + 2 * (4 + 3));
    auto copy = GmmnModel::zeros({2, 4, 3, 2});
    copy.unflatten(theta);
    CHECK(copy.flatten() == theta);
    CHECK(copy.weights[1] == m.weights[1]);
}

TEST_CASE("glorot initialization bounds") {
    TrainConfig cfg;
    cfg.hidden = {30, 10};
    cfg.seed = 9;
    const auto m = init_gmmn(4, cfg);
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        const double bound = std::sqrt(6.0 / (m.layer_dims[l + 1] + m.layer_dims[l]));
        CHECK(m.weights[l].cwiseAbs().maxCoeff() <= bound);
        CHECK(m.weights[l].cwiseAbs().maxCoeff() > 0.5 * bound);
        CHECK(m.biases[l].isZero(0.0));
    }
}

// ---------------------------------------------------------------------------
// Loss and gradient

TEST_CASE("gradient matches central differences for 1 to 3 hidden layers") {
    const std::vector<std::vector<int>> nets{{2, 8, 2}, {2, 6, 5, 2}, {3, 5, 4, 6, 3}};
    for (std::size_t n = 0; n < nets.size(); ++n) {
        const int d = nets[n].front();
        const auto m = gradcheck::random_model(nets[n], 0.5, 20 + n);
        const Matrix u = uniform_matrix(16, d, 30 + n), v = normal_matrix(16, d, 40 + n);
        const auto r = gradcheck::check(m, u, v, KernelSpec::training_default(), 50 + n);
        INFO("net " << n << " worst coordinate " << r.worst);
        CHECK(r.max_relative_error < 1e-4);
    }
}

TEST_CASE("loss equals the MMD of the training-mode output") {
    const auto m = gradcheck::random_model({2, 8, 2}, 0.5, 1);
    const Matrix u = uniform_matrix(16, 2, 2), v = normal_matrix(16, 2, 3);
    const auto lg = mmd_loss_and_grad(m, u, v, KernelSpec::training_default(), 77);
    CHECK(lg.loss == mmd(u, forward_train(m, v, 77), KernelSpec::training_default()));
}

TEST_CASE("loss is invariant under row permutation of the target") {
    const auto m = gradcheck::random_model({2, 8, 2}, 0.5, 4);
    const Matrix u = uniform_matrix(16, 2, 5), v = normal_matrix(16, 2, 6);
    const Matrix pu = u.colwise().reverse();
    const auto k = KernelSpec::training_default();
    const auto a = mmd_loss_and_grad(m, u, v, k, 1), b = mmd_loss_and_grad(m, pu, v, k, 1);
    CHECK(a.loss == b.loss);
}

TEST_CASE("zero loss gives a zero gradient") {
    const auto m = gradcheck::random_model({2, 8, 2}, 0.5, 7);
    const Matrix v = normal_matrix(16, 2, 8);
    const Matrix u = forward_train(m, v, 3);
    const auto lg = mmd_loss_and_grad(m, u, v, KernelSpec::training_default(), 3);
    CHECK(lg.loss == 0.0);
    CHECK(lg.grad.isZero(0.0));
}

TEST_CASE("loss needs a batch of at least two") {
    const auto m = GmmnModel::zeros({2, 4, 2});
    CHECK_THROWS_AS(mmd_loss_and_grad(m, Matrix::Zero(1, 2), Matrix::Zero(1, 2), KernelSpec::training_default(), 0),
                    InputError);
}

// ---------------------------------------------------------------------------
// Adam

TEST_CASE("adam: zero gradient leaves theta unchanged") {
    auto s = AdamState::zeros(3);
    Vector theta(3);
    theta << 1.0, -2.0, 0.5;
    const Vector before = theta;
    adam_step(s, Vector::Zero(3), theta);
    CHECK(theta == before);
    CHECK(s.step == 1);
}

TEST_CASE("adam: single scalar step") {
    auto s = AdamState::zeros(1);
    Vector theta = Vector::Zero(1), g = Vector::Constant(1, 2.0);
    adam_step(s, g, theta);
    CHECK_THAT(theta[0], WithinAbs(-0.001 * 2.0 / (2.0 + 1e-8), 1e-18));
    CHECK_THAT(theta[0], WithinAbs(-0.000999999995, 1e-15));
    CHECK(s.m2.minCoeff() >= 0.0);
}

TEST_CASE("adam: two steps on a quadratic") {
    // Reference recursion written out for f(theta) = theta^2.
    double th = 1.0, m1 = 0.0, m2 = 0.0;
    for (int r = 1; r <= 2; ++r) {
        const double g = 2.0 * th;
        m1 = 0.9 * m1 + 0.1 * g;
        m2 = 0.999 * m2 + 0.001 * g * g;
        th -= 0.001 * (m1 / (1.0 - std::pow(0.9, r))) / (std::sqrt(m2 / (1.0 - std::pow(0.999, r))) + 1e-8);
    }
    auto s = AdamState::zeros(1);
    Vector theta = Vector::Constant(1, 1.0);
    for (int r = 0; r < 2; ++r) adam_step(s, Vector::Constant(1, 2.0 * theta[0]), theta);
    CHECK_THAT(theta[0], WithinAbs(th, 1e-12));
}

// ---------------------------------------------------------------------------
// Training and sampling

TEST_CASE("training: configuration errors") {
    const Matrix u = uniform_matrix(10, 2, 1);
    TrainConfig cfg;
    cfg.hidden = {4};
    cfg.n_epo = 1;
    cfg.n_bat = 3;
    CHECK_THROWS_AS(train_gmmn(u, cfg), ConfigError);
    cfg.n_bat = 1;
    CHECK_THROWS_AS(train_gmmn(Matrix(u.topRows(1)), cfg), ConfigError);
}

TEST_CASE("training: batch mode makes one step per epoch and is bit-reproducible") {
    const Matrix u = pseudo_observations(uniform_matrix(40, 2, 2)).u;
    TrainConfig cfg;
    cfg.hidden = {8};
    cfg.n_epo = 25;
    cfg.seed = 3;
    TrainingTrace ta, tb;
    const auto a = train_gmmn(u, cfg, &ta);
    const auto b = train_gmmn(u, cfg, &tb);
    CHECK(ta.adam.step == 25);
    CHECK(a.flatten() == b.flatten());
    CHECK(a.running_var[0] == b.running_var[0]);
    CHECK(ta.epoch_loss == tb.epoch_loss);
    cfg.n_bat = 10;
    TrainingTrace tc;
    train_gmmn(u, cfg, &tc);
    CHECK(tc.adam.step == 100);
    cfg.seed = 4;
    cfg.n_bat = 0;
    CHECK(train_gmmn(u, cfg).flatten() != a.flatten());
}

TEST_CASE("sampling: columns are the rank grid and draws are reproducible") {
    const auto m = gradcheck::random_model({3, 10, 3}, 0.5, 11);
    Rng a(1), b(1);
    const int n = 57;
    const Matrix s = sample_gmmn(m, n, a);
    CHECK(s == sample_gmmn(m, n, b));
    for (Eigen::Index j = 0; j < 3; ++j) {
        std::vector<double> c;
        for (Eigen::Index i = 0; i < n; ++i) c.push_back(s(i, j));
        std::sort(c.begin(), c.end());
        for (int i = 0; i < n; ++i) CHECK(c[static_cast<std::size_t>(i)] == (i + 1) / static_cast<double>(n + 1));
    }
}
