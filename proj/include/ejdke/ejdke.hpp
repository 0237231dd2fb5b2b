#pragma once

#include "ejdke/error.hpp"
#include "ejdke/numeric.hpp"
#include "ejdke/rng.hpp"
#include "ejdke/parallel.hpp"
#include "ejdke/levy.hpp"
#include "ejdke/model.hpp"
#include "ejdke/simulate.hpp"
#include "ejdke/trajectory_io.hpp"
#include "ejdke/kernel.hpp"
#include "ejdke/estimator.hpp"
#include "ejdke/reference.hpp"
#include "ejdke/adaptive.hpp"
#include "ejdke/rates.hpp"
#include "ejdke/serialize.hpp"
