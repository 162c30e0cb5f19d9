#pragma once

#include "imasp/errors.hpp"
#include "imasp/world.hpp"
#include "imasp/field_model.hpp"
#include "imasp/conditioner.hpp"
#include "imasp/outcome_discretization.hpp"
#include "imasp/planning.hpp"
#include "imasp/bounded_dp.hpp"
#include "imasp/exact_dp.hpp"
#include "imasp/urtdp.hpp"
#include "imasp/baselines.hpp"
#include "imasp/evaluation.hpp"
#include "imasp/harness.hpp"
