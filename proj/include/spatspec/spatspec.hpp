#pragma once

#include "spatspec/basis.hpp"
#include "spatspec/bootstrap.hpp"
#include "spatspec/common.hpp"
#include "spatspec/covariance.hpp"
#include "spatspec/dgp.hpp"
#include "spatspec/io.hpp"
#include "spatspec/optimize.hpp"
#include "spatspec/parallel.hpp"
#include "spatspec/qmle.hpp"
#include "spatspec/random.hpp"
#include "spatspec/spec_test.hpp"
#include "spatspec/weights.hpp"
