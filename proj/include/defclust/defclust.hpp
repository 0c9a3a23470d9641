#pragma once

#include "defclust/affine_survival.hpp"
#include "defclust/clt_fluctuations.hpp"
#include "defclust/config.hpp"
#include "defclust/csv.hpp"
#include "defclust/errors.hpp"
#include "defclust/exact_sim.hpp"
#include "defclust/factor_path.hpp"
#include "defclust/importance_sampling.hpp"
#include "defclust/ldp.hpp"
#include "defclust/lln_moments.hpp"
#include "defclust/manifest.hpp"
#include "defclust/model.hpp"
#include "defclust/parallel.hpp"
#include "defclust/rng.hpp"
#include "defclust/scenarios.hpp"
#include "defclust/stats.hpp"
#include "defclust/version.hpp"
