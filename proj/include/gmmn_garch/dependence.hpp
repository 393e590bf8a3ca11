#pragma once

#include "gmmn_garch/copula.hpp"
#include "gmmn_garch/core.hpp"
#include "gmmn_garch/gmmn.hpp"
#include "gmmn_garch/rng.hpp"

#include <string>
#include <variant>
#include <vector>

namespace gmmn_garch {

struct IndependenceCopula {
    int dim = 0;
};

struct EmpiricalCopula {
    PseudoSample sample;
};

struct EmpiricalBetaCopula {
    PseudoSample sample;  // only the ranks are used for sampling
};

struct GmmnCopula {
    GmmnModel model;
};

class DependenceModel;

/// Equally weighted mixture of dependence models, one per bootstrap
/// replicate, each with the empirical quantile tables of its replicate.
struct BootstrapMixture {
    std::vector<DependenceModel> components;
    std::vector<std::vector<EmpiricalQuantile>> component_quantiles;
};

/// Rows in (0, 1)^{d*}; `component` holds the mixture component of each
/// row and is empty for non-mixture models.
struct DependenceDraw {
    Matrix u;
    std::vector<std::size_t> component;
};

/// Any of the supported copula estimators behind one sampling contract.
class DependenceModel {
public:
    using Variant = std::variant<IndependenceCopula, EmpiricalCopula, EmpiricalBetaCopula, GmmnCopula, BootstrapMixture>;

    DependenceModel() = default;
    template <typename T>
        requires std::is_constructible_v<Variant, T&&> && (!std::is_same_v<std::remove_cvref_t<T>, DependenceModel>)
    DependenceModel(T&& v) : v_(std::forward<T>(v)) {}

    [[nodiscard]] const Variant& variant() const { return v_; }

    [[nodiscard]] bool is_mixture() const { return std::holds_alternative<BootstrapMixture>(v_); }

    [[nodiscard]] int dim() const;

    [[nodiscard]] std::string kind() const;

    /// n_gen rows; for mixtures also the component index of each row.
    [[nodiscard]] DependenceDraw draw(Eigen::Index n_gen, Rng& rng) const;

    [[nodiscard]] Matrix sample(Eigen::Index n_gen, Rng& rng) const { return draw(n_gen, rng).u; }

private:
    Variant v_;
};

/// Mixture sampling: a uniform component per row, then that component's
/// draws for its rows. A single component is sampled directly with `rng`.
inline DependenceDraw sample_mixture(const BootstrapMixture& mix, Eigen::Index n_gen, Rng& rng) {
    require(!mix.components.empty(), "sample_mixture: empty mixture");
    const std::size_t n_bt = mix.components.size();
    DependenceDraw out;
    if (n_bt == 1) {
        out.u = mix.components.front().sample(n_gen, rng);
        out.component.assign(static_cast<std::size_t>(n_gen), 0);
        return out;
    }
    out.component.resize(static_cast<std::size_t>(n_gen));
    std::vector<std::vector<Eigen::Index>> rows(n_bt);
    for (Eigen::Index i = 0; i < n_gen; ++i) {
        const std::size_t b = rng.index(n_bt);
        out.component[static_cast<std::size_t>(i)] = b;
        rows[b].push_back(i);
    }
    const std::uint64_t base = rng.next_u64();
    out.u.resize(n_gen, mix.components.front().dim());
    for (std::size_t b = 0; b < n_bt; ++b) {
        if (rows[b].empty()) continue;
        Rng sub(derive_seed(base, b));
        const Matrix part = mix.components[b].sample(static_cast<Eigen::Index>(rows[b].size()), sub);
        for (std::size_t r = 0; r < rows[b].size(); ++r) out.u.row(rows[b][r]) = part.row(static_cast<Eigen::Index>(r));
    }
    return out;
}

inline int DependenceModel::dim() const {
    return std::visit(
        [](const auto& m) -> int {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, IndependenceCopula>) return m.dim;
            else if constexpr (std::is_same_v<T, EmpiricalCopula> || std::is_same_v<T, EmpiricalBetaCopula>)
                return static_cast<int>(m.sample.dim());
            else if constexpr (std::is_same_v<T, GmmnCopula>) return m.model.output_dim();
            else return m.components.empty() ? 0 : m.components.front().dim();
        },
        v_);
}

inline std::string DependenceModel::kind() const {
    return std::visit(
        [](const auto& m) -> std::string {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, IndependenceCopula>) return "independence";
            else if constexpr (std::is_same_v<T, EmpiricalCopula>) return "empirical";
            else if constexpr (std::is_same_v<T, EmpiricalBetaCopula>) return "empirical_beta";
            else if constexpr (std::is_same_v<T, GmmnCopula>) return "gmmn";
            else return "mixture";
        },
        v_);
}

inline DependenceDraw DependenceModel::draw(Eigen::Index n_gen, Rng& rng) const {
    return std::visit(
        [&](const auto& m) -> DependenceDraw {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, IndependenceCopula>) return {sample_independence(m.dim, n_gen, rng), {}};
            else if constexpr (std::is_same_v<T, EmpiricalCopula>) return {sample_empirical(m.sample, n_gen, rng), {}};
            else if constexpr (std::is_same_v<T, EmpiricalBetaCopula>)
                return {sample_empirical_beta(m.sample, n_gen, rng), {}};
            else if constexpr (std::is_same_v<T, GmmnCopula>) return {sample_gmmn(m.model, n_gen, rng), {}};
            else return sample_mixture(m, n_gen, rng);
        },
        v_);
}

// ---------------------------------------------------------------------------

enum class DependenceKind { Independence, Empirical, EmpiricalBeta, Gmmn };

/// What to fit to the pseudo-observations.
struct DependenceSpec {
    DependenceKind kind = DependenceKind::Independence;
    TrainConfig gmmn{};  // used when kind == Gmmn; seed is supplied at fit time

    [[nodiscard]] std::string label() const {
        switch (kind) {
            case DependenceKind::Independence: return "independence";
            case DependenceKind::Empirical: return "empirical";
            case DependenceKind::EmpiricalBeta: return "empirical_beta";
            case DependenceKind::Gmmn: break;
        }
        std::string s = "gmmn_";
        bool uniform = true;
        for (int h : gmmn.hidden) uniform = uniform && h == gmmn.hidden.front();
        if (uniform && !gmmn.hidden.empty()) {
            s += std::to_string(gmmn.hidden.size()) + "x" + std::to_string(gmmn.hidden.front());
        } else {
            for (std::size_t i = 0; i < gmmn.hidden.size(); ++i) s += (i ? "-" : "") + std::to_string(gmmn.hidden[i]);
        }
        return s;
    }
};

inline DependenceModel fit_dependence(const DependenceSpec& spec, const PseudoSample& ps, std::uint64_t seed) {
    switch (spec.kind) {
        case DependenceKind::Independence: return IndependenceCopula{static_cast<int>(ps.dim())};
        case DependenceKind::Empirical: return EmpiricalCopula{ps};
        case DependenceKind::EmpiricalBeta: return EmpiricalBetaCopula{ps};
        case DependenceKind::Gmmn: {
            TrainConfig cfg = spec.gmmn;
            cfg.seed = seed;
            return GmmnCopula{train_gmmn(ps.u, cfg)};
        }
    }
    throw ConfigError("fit_dependence: unknown dependence kind");
}

}  // namespace gmmn_garch
