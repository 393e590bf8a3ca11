#pragma once

#include "gmmn_garch/assessment.hpp"
#include "gmmn_garch/bootstrap.hpp"
#include "gmmn_garch/config.hpp"
#include "gmmn_garch/copula.hpp"
#include "gmmn_garch/core.hpp"
#include "gmmn_garch/dataset.hpp"
#include "gmmn_garch/dependence.hpp"
#include "gmmn_garch/forecasting.hpp"
#include "gmmn_garch/gmmn.hpp"
#include "gmmn_garch/margins.hpp"
#include "gmmn_garch/mmd.hpp"
#include "gmmn_garch/optimize.hpp"
#include "gmmn_garch/pca.hpp"
#include "gmmn_garch/pipeline.hpp"
#include "gmmn_garch/rng.hpp"
#include "gmmn_garch/serialization.hpp"
#include "gmmn_garch/synthetic.hpp"
