#pragma once

#include "gmmn_garch/forecasting.hpp"

namespace testmodels {

/// Fitted-model stand-in built from known parameters: identity PCA,
/// parametric margins and the unconditional pre-sample variance.
inline gmmn_garch::MtsModel known_model(const std::vector<gmmn_garch::ArmaGarchParams>& params,
                                        gmmn_garch::DependenceModel dependence) {
    gmmn_garch::MtsModel m;
    for (const auto& p : params) {
        gmmn_garch::MarginalFitResult f;
        f.params = p;
        f.base_variance = p.unconditional_variance();
        f.converged = true;
        m.margins.push_back(f);
    }
    m.pca = gmmn_garch::PcaTransform::identity(static_cast<int>(params.size()));
    m.dependence = std::move(dependence);
    return m;
}

}  // namespace testmodels
