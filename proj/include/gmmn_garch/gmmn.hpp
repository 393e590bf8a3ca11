#pragma once

#include "gmmn_garch/copula.hpp"
#include "gmmn_garch/core.hpp"
#include "gmmn_garch/mmd.hpp"
#include "gmmn_garch/rng.hpp"

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

namespace gmmn_garch {

/// Feedforward generator f_theta: R^p -> (0, 1)^{d*}.
///
/// Hidden layers compute dropout(relu(batchnorm(W a + b))); the output layer
/// is sigmoid(W a + b). The prior is N(0, I_p) with p = d*.
struct GmmnModel {
    std::vector<int> layer_dims;  // p, d_1, ..., d_L, d*
    std::vector<Matrix> weights;  // W_l: d_l x d_{l-1}
    std::vector<Vector> biases;
    std::vector<Vector> bn_scale;  // one per hidden layer
    std::vector<Vector> bn_shift;
    std::vector<Vector> running_mean;
    std::vector<Vector> running_var;
    double bn_momentum = 0.99;
    double bn_epsilon = 1e-5;
    double dropout_rate = 0.5;
    KernelSpec kernel = KernelSpec::training_default();
    std::uint64_t seed = 0;

    [[nodiscard]] std::size_t hidden_layers() const { return layer_dims.size() - 2; }
    [[nodiscard]] int prior_dim() const { return layer_dims.front(); }
    [[nodiscard]] int output_dim() const { return layer_dims.back(); }

    /// Zero-initialized network with unit BN scale and unit running variance.
    static GmmnModel zeros(std::vector<int> dims, double dropout_rate = 0.5) {
        if (dims.size() < 3) throw ConfigError("GmmnModel: at least one hidden layer is required");
        for (int d : dims)
            if (d < 1) throw ConfigError("GmmnModel: layer widths must be positive");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("GmmnModel: dropout rate must lie in [0, 1)");
        GmmnModel m;
        m.layer_dims = std::move(dims);
        m.dropout_rate = dropout_rate;
        for (std::size_t l = 1; l < m.layer_dims.size(); ++l) {
            m.weights.push_back(Matrix::Zero(m.layer_dims[l], m.layer_dims[l - 1]));
            m.biases.push_back(Vector::Zero(m.layer_dims[l]));
        }
        for (std::size_t l = 1; l + 1 < m.layer_dims.size(); ++l) {
            m.bn_scale.push_back(Vector::Ones(m.layer_dims[l]));
            m.bn_shift.push_back(Vector::Zero(m.layer_dims[l]));
            m.running_mean.push_back(Vector::Zero(m.layer_dims[l]));
            m.running_var.push_back(Vector::Ones(m.layer_dims[l]));
        }
        return m;
    }

    /// Length of the flattened trainable vector.
    [[nodiscard]] Eigen::Index num_params() const {
        Eigen::Index n = 0;
        for (const auto& w : weights) n += w.size();
        for (const auto& b : biases) n += b.size();
        for (const auto& g : bn_scale) n += 2 * g.size();
        return n;
    }

    /// theta = (W_1, ..., W_{L+1}, b_1, ..., b_{L+1}, BN scales, BN shifts), matrices row-major.
    [[nodiscard]] Vector flatten() const {
        Vector theta(num_params());
        Eigen::Index i = 0;
        const auto put = [&](const double* p, Eigen::Index n) {
            std::copy(p, p + n, theta.data() + i);
            i += n;
        };
        for (const auto& w : weights) put(w.data(), w.size());
        for (const auto& b : biases) put(b.data(), b.size());
        for (const auto& g : bn_scale) put(g.data(), g.size());
        for (const auto& s : bn_shift) put(s.data(), s.size());
        return theta;
    }

    void unflatten(const Vector& theta) {
        require(theta.size() == num_params(), "GmmnModel: parameter vector has the wrong length");
        Eigen::Index i = 0;
        const auto take = [&](double* p, Eigen::Index n) {
            std::copy(theta.data() + i, theta.data() + i + n, p);
            i += n;
        };
        for (auto& w : weights) take(w.data(), w.size());
        for (auto& b : biases) take(b.data(), b.size());
        for (auto& g : bn_scale) take(g.data(), g.size());
        for (auto& s : bn_shift) take(s.data(), s.size());
    }
};

/// Batch statistics and activations of a training-mode pass.
struct ForwardCache {
    std::vector<Matrix> inputs;   // a_{l-1} for every layer
    std::vector<Matrix> xhat;     // normalized pre-activations (hidden layers)
    std::vector<Matrix> bn_out;   // BN output before ReLU
    std::vector<Matrix> mask;     // scaled dropout mask
    std::vector<Vector> batch_mean;
    std::vector<Vector> batch_var;
    std::vector<Vector> inv_std;
    Matrix output;
};

namespace detail {

inline Matrix affine(const Matrix& a, const Matrix& w, const Vector& b) {
    Matrix h = a * w.transpose();
    h.rowwise() += b.transpose();
    return h;
}

inline Matrix sigmoid(const Matrix& x) {
    return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

}  // namespace detail

/// Training-mode pass: batch statistics, dropout masks drawn from `mask_seed`.
/// The model is not modified; use update_running_stats with the cache.
inline Matrix forward_train(const GmmnModel& model, const Matrix& v, std::uint64_t mask_seed,
                            ForwardCache* cache = nullptr) {
    require(v.cols() == model.prior_dim(), "nn_forward: input dimension mismatch");
    if (v.rows() < 2) throw InputError("nn_forward: training mode needs a batch of at least 2");
    ForwardCache local;
    ForwardCache& c = cache ? *cache : local;
    c = ForwardCache{};
    Rng mask_rng(mask_seed);
    const double keep = 1.0 - model.dropout_rate;
    const double n = static_cast<double>(v.rows());

    Matrix a = v;
    for (std::size_t l = 0; l < model.hidden_layers(); ++l) {
        c.inputs.push_back(a);
        Matrix h = detail::affine(a, model.weights[l], model.biases[l]);
        const Vector mean = h.colwise().mean().transpose();
        h.rowwise() -= mean.transpose();
        const Vector var = (h.array().square().colwise().sum() / n).matrix().transpose();
        const Vector inv_std = (var.array() + model.bn_epsilon).rsqrt().matrix();
        Matrix xhat = h * inv_std.asDiagonal();
        Matrix y = xhat * model.bn_scale[l].asDiagonal();
        y.rowwise() += model.bn_shift[l].transpose();

        Matrix mask(y.rows(), y.cols());
        for (Eigen::Index i = 0; i < mask.rows(); ++i)
            for (Eigen::Index j = 0; j < mask.cols(); ++j)
                mask(i, j) = model.dropout_rate > 0.0 ? (mask_rng.uniform() < keep ? 1.0 / keep : 0.0) : 1.0;

        a = y.cwiseMax(0.0).cwiseProduct(mask);
        c.xhat.push_back(std::move(xhat));
        c.bn_out.push_back(std::move(y));
        c.mask.push_back(std::move(mask));
        c.batch_mean.push_back(mean);
        c.batch_var.push_back(var);
        c.inv_std.push_back(inv_std);
    }
    c.inputs.push_back(a);
    c.output = detail::sigmoid(detail::affine(a, model.weights.back(), model.biases.back()));
    return c.output;
}

/// Inference pass: running statistics, no dropout. Pure.
inline Matrix forward_infer(const GmmnModel& model, const Matrix& v) {
    require(v.cols() == model.prior_dim(), "nn_forward: input dimension mismatch");
    Matrix a = v;
    for (std::size_t l = 0; l < model.hidden_layers(); ++l) {
        Matrix h = detail::affine(a, model.weights[l], model.biases[l]);
        h.rowwise() -= model.running_mean[l].transpose();
        const Vector factor =
            ((model.running_var[l].array() + model.bn_epsilon).rsqrt() * model.bn_scale[l].array()).matrix();
        h = h * factor.asDiagonal();
        h.rowwise() += model.bn_shift[l].transpose();
        a = h.cwiseMax(0.0);
    }
    return detail::sigmoid(detail::affine(a, model.weights.back(), model.biases.back()));
}

struct TrainMode {
    std::uint64_t mask_seed = 0;
};
struct InferMode {};

inline Matrix nn_forward(GmmnModel& model, const Matrix& v, TrainMode mode);

inline Matrix nn_forward(const GmmnModel& model, const Matrix& v, InferMode) { return forward_infer(model, v); }

inline void update_running_stats(GmmnModel& model, const ForwardCache& cache) {
    const double m = model.bn_momentum;
    for (std::size_t l = 0; l < model.hidden_layers(); ++l) {
        model.running_mean[l] = m * model.running_mean[l] + (1.0 - m) * cache.batch_mean[l];
        model.running_var[l] = m * model.running_var[l] + (1.0 - m) * cache.batch_var[l];
    }
}

/// Training-mode forward pass that also folds the batch statistics into the
/// running BN estimates.
inline Matrix nn_forward(GmmnModel& model, const Matrix& v, TrainMode mode) {
    ForwardCache cache;
    Matrix out = forward_train(model, v, mode.mask_seed, &cache);
    update_running_stats(model, cache);
    return out;
}

/// Gradient of a scalar loss with respect to theta, given dLoss/dOutput.
inline Vector backward(const GmmnModel& model, const ForwardCache& c, const Matrix& d_output) {
    const std::size_t layers = model.weights.size();
    const std::size_t hidden = model.hidden_layers();
    std::vector<Matrix> dw(layers);
    std::vector<Vector> db(layers);
    std::vector<Vector> dscale(hidden);
    std::vector<Vector> dshift(hidden);
    const double n = static_cast<double>(d_output.rows());

    Matrix delta = d_output.cwiseProduct(c.output).cwiseProduct((1.0 - c.output.array()).matrix());
    dw[layers - 1] = delta.transpose() * c.inputs[layers - 1];
    db[layers - 1] = delta.colwise().sum().transpose();
    Matrix da = delta * model.weights[layers - 1];

    for (std::size_t l = hidden; l-- > 0;) {
        Matrix dy = da.cwiseProduct(c.mask[l]);
        dy = (c.bn_out[l].array() > 0.0).select(dy, 0.0);
        dscale[l] = dy.cwiseProduct(c.xhat[l]).colwise().sum().transpose();
        dshift[l] = dy.colwise().sum().transpose();
        const Matrix dxhat = dy * model.bn_scale[l].asDiagonal();
        const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
        const Eigen::RowVectorXd sum_dxhat_xhat = dxhat.cwiseProduct(c.xhat[l]).colwise().sum();
        Matrix dh = n * dxhat;
        dh.rowwise() -= sum_dxhat;
        dh -= c.xhat[l] * sum_dxhat_xhat.asDiagonal();
        dh = dh * (c.inv_std[l] / n).asDiagonal();
        dw[l] = dh.transpose() * c.inputs[l];
        db[l] = dh.colwise().sum().transpose();
        da = dh * model.weights[l];
    }

    Vector grad(model.num_params());
    Eigen::Index i = 0;
    const auto put = [&](const double* p, Eigen::Index len) {
        std::copy(p, p + len, grad.data() + i);
        i += len;
    };
    for (const auto& w : dw) put(w.data(), w.size());
    for (const auto& b : db) put(b.data(), b.size());
    for (const auto& g : dscale) put(g.data(), g.size());
    for (const auto& s : dshift) put(s.data(), s.size());
    return grad;
}

struct LossAndGradient {
    double loss = 0.0;
    Vector grad;
};

/// MMD(u_batch, f_theta(v_batch)) in training mode and its exact gradient
/// in theta for the fixed dropout mask and batch statistics.
inline LossAndGradient mmd_loss_and_grad(const GmmnModel& model, const Matrix& u_batch, const Matrix& v_batch,
                                         const KernelSpec& kernel, std::uint64_t mask_seed,
                                         ForwardCache* cache_out = nullptr,
                                         const detail::FixedSum* target_sum = nullptr) {
    if (u_batch.rows() < 2 || v_batch.rows() < 2) throw InputError("mmd_loss_and_grad: batch size must be >= 2");
    require(u_batch.cols() == model.output_dim(), "mmd_loss_and_grad: target dimension mismatch");
    ForwardCache local;
    ForwardCache& cache = cache_out ? *cache_out : local;
    const Matrix generated = forward_train(model, v_batch, mask_seed, &cache);
    const MmdGradient g = mmd_with_gradient(u_batch, generated, kernel, target_sum);
    LossAndGradient res;
    res.loss = g.loss;
    res.grad = g.loss > 0.0 ? backward(model, cache, g.d_generated) : Vector::Zero(model.num_params());
    return res;
}

// ---------------------------------------------------------------------------

struct AdamState {
    Vector m1;
    Vector m2;
    std::int64_t step = 0;
    double alpha = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState zeros(Eigen::Index n) {
        AdamState s;
        s.m1 = Vector::Zero(n);
        s.m2 = Vector::Zero(n);
        return s;
    }
};

/// One Adam update; increments the step counter r first.
inline void adam_step(AdamState& s, const Vector& grad, Vector& theta) {
    require(grad.size() == theta.size() && s.m1.size() == theta.size(), "adam_step: size mismatch");
    ++s.step;
    const double r = static_cast<double>(s.step);
    s.m1 = s.beta1 * s.m1 + (1.0 - s.beta1) * grad;
    s.m2 = s.beta2 * s.m2 + (1.0 - s.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(s.beta1, r);
    const double c2 = 1.0 - std::pow(s.beta2, r);
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double m1_hat = s.m1[i] / c1;
        const double m2_hat = s.m2[i] / c2;
        theta[i] -= s.alpha * m1_hat / (std::sqrt(m2_hat) + s.eps);
    }
}

// ---------------------------------------------------------------------------

struct TrainConfig {
    std::vector<int> hidden{100};
    double dropout_rate = 0.5;
    int n_epo = 1000;
    int n_bat = 0;  // 0 means the full training size (batch optimization)
    KernelSpec kernel = KernelSpec::training_default();
    std::uint64_t seed = 0;
};

struct TrainingTrace {
    std::vector<double> epoch_loss;  // mean batch loss per epoch
    AdamState adam;
};

namespace detail {

// Stream identifiers under the training master seed.
inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kPriorStream = 2;
inline constexpr std::uint64_t kPartitionStream = 3;
inline constexpr std::uint64_t kMaskStream = 4;

inline void glorot_init(GmmnModel& m, Rng& rng) {
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        const double bound = std::sqrt(6.0 / (m.layer_dims[l + 1] + m.layer_dims[l]));
        auto& w = m.weights[l];
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
    }
}

inline Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix v(rows, cols);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.normal();
    return v;
}

inline std::vector<Eigen::Index> permutation(Eigen::Index n, Rng& rng) {
    std::vector<Eigen::Index> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), Eigen::Index{0});
    for (std::size_t i = p.size(); i > 1; --i) std::swap(p[i - 1], p[rng.index(i)]);
    return p;
}

inline Matrix gather_rows(const Matrix& m, const std::vector<Eigen::Index>& idx, std::size_t first, std::size_t count) {
    Matrix out(static_cast<Eigen::Index>(count), m.cols());
    for (std::size_t i = 0; i < count; ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[first + i]);
    return out;
}

}  // namespace detail

/// Glorot-initialized network for `train` with output dimension d.
inline GmmnModel init_gmmn(int d, const TrainConfig& cfg) {
    std::vector<int> dims{d};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(d);
    GmmnModel m = GmmnModel::zeros(std::move(dims), cfg.dropout_rate);
    m.kernel = cfg.kernel;
    m.seed = cfg.seed;
    Rng init_rng = Rng(cfg.seed).split(detail::kInitStream);
    detail::glorot_init(m, init_rng);
    return m;
}

/// Adam training on MMD. The prior sample V_1..V_tau is drawn once; every
/// epoch re-partitions both samples into tau / n_bat aligned batches.
inline GmmnModel train_gmmn(const Matrix& u_train, const TrainConfig& cfg, TrainingTrace* trace = nullptr) {
    const Eigen::Index tau = u_train.rows();
    const Eigen::Index n_bat = cfg.n_bat > 0 ? cfg.n_bat : tau;
    if (n_bat < 2) throw ConfigError("train_gmmn: batch size must be >= 2");
    if (tau % n_bat != 0) throw ConfigError("train_gmmn: batch size must divide the training size");
    if (cfg.n_epo < 1) throw ConfigError("train_gmmn: at least one epoch is required");
    if (!u_train.allFinite()) throw InputError("train_gmmn: non-finite training data");
    cfg.kernel.validate();

    const int d = static_cast<int>(u_train.cols());
    const Rng master(cfg.seed);
    GmmnModel model = init_gmmn(d, cfg);
    Rng prior_rng = master.split(detail::kPriorStream);
    const Matrix prior = detail::standard_normal(tau, d, prior_rng);

    Vector theta = model.flatten();
    AdamState adam = AdamState::zeros(theta.size());
    const Eigen::Index batches = tau / n_bat;

    // In batch mode every epoch sees the whole target sample, whose pair sum
    // is permutation invariant.
    std::optional<detail::FixedSum> full_target;
    if (batches == 1) full_target = detail::kernel_sum(u_train, u_train, detail::KernelTable(cfg.kernel));

    std::vector<double> epoch_loss;
    epoch_loss.reserve(static_cast<std::size_t>(cfg.n_epo));
    ForwardCache cache;
    for (int epoch = 0; epoch < cfg.n_epo; ++epoch) {
        Rng part_rng = master.split(detail::kPartitionStream).split(static_cast<std::uint64_t>(epoch));
        const auto perm_u = detail::permutation(tau, part_rng);
        const auto perm_v = detail::permutation(tau, part_rng);
        double loss_sum = 0.0;
        for (Eigen::Index b = 0; b < batches; ++b) {
            const auto first = static_cast<std::size_t>(b * n_bat);
            const Matrix ub = detail::gather_rows(u_train, perm_u, first, static_cast<std::size_t>(n_bat));
            const Matrix vb = detail::gather_rows(prior, perm_v, first, static_cast<std::size_t>(n_bat));
            const std::uint64_t mask_seed =
                derive_seed(derive_seed(cfg.seed, detail::kMaskStream), static_cast<std::uint64_t>(adam.step));
            const auto lg = mmd_loss_and_grad(model, ub, vb, cfg.kernel, mask_seed, &cache,
                                              full_target ? &*full_target : nullptr);
            update_running_stats(model, cache);
            adam_step(adam, lg.grad, theta);
            model.unflatten(theta);
            loss_sum += lg.loss;
        }
        epoch_loss.push_back(loss_sum / static_cast<double>(batches));
    }
    if (!theta.allFinite()) throw NumericalError("train_gmmn: parameters became non-finite");
    if (trace) {
        trace->epoch_loss = std::move(epoch_loss);
        trace->adam = std::move(adam);
    }
    return model;
}

/// Draw V ~ N(0, I), map through the network in inference mode and return
/// the pseudo-observations of the outputs.
inline Matrix sample_gmmn(const GmmnModel& model, Eigen::Index n_gen, Rng& rng) {
    require(n_gen >= 1, "sample_gmmn: n_gen must be >= 1");
    const Matrix v = detail::standard_normal(n_gen, model.prior_dim(), rng);
    return pseudo_observations(forward_infer(model, v)).u;
}

}  // namespace gmmn_garch
