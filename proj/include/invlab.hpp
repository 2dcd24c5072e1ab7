#pragma once

#include "invlab/bsde.hpp"
#include "invlab/errors.hpp"
#include "invlab/estimators.hpp"
#include "invlab/experiment.hpp"
#include "invlab/functionals.hpp"
#include "invlab/hazard_model.hpp"
#include "invlab/hazard_oracle.hpp"
#include "invlab/model_config.hpp"
#include "invlab/path_engine.hpp"
#include "invlab/path_functionals.hpp"
#include "invlab/pde.hpp"
#include "invlab/report.hpp"
#include "invlab/rng.hpp"
#include "invlab/scenario.hpp"
#include "invlab/special_functions.hpp"
#include "invlab/time_grid.hpp"
#include "invlab/transfer.hpp"
