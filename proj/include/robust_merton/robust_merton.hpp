#pragma once

#include "robust_merton/core.hpp"
#include "robust_merton/uncertainty.hpp"
#include "robust_merton/utility.hpp"
#include "robust_merton/solver.hpp"
#include "robust_merton/continuous_limit.hpp"
#include "robust_merton/random.hpp"
#include "robust_merton/simulator.hpp"
#include "robust_merton/verification.hpp"
#include "robust_merton/io.hpp"
