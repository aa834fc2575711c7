#ifndef INLA_INLA_HPP
#define INLA_INLA_HPP

// Umbrella header for the whole engine.

#include "inla/cholesky.hpp"
#include "inla/csv.hpp"
#include "inla/errors.hpp"
#include "inla/fit.hpp"
#include "inla/gaussian_approx.hpp"
#include "inla/gmrf.hpp"
#include "inla/hyper_posterior.hpp"
#include "inla/integration.hpp"
#include "inla/kvtree.hpp"
#include "inla/latent_marginals.hpp"
#include "inla/likelihood.hpp"
#include "inla/marginal.hpp"
#include "inla/mcmc.hpp"
#include "inla/model.hpp"
#include "inla/model_spec.hpp"
#include "inla/prediction.hpp"
#include "inla/rng.hpp"
#include "inla/sparse.hpp"

#endif
