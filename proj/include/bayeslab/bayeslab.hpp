#pragma once

#include "bayeslab/core.hpp"
#include "bayeslab/models.hpp"
#include "bayeslab/mixture.hpp"
#include "bayeslab/discount.hpp"
#include "bayeslab/valuation.hpp"
#include "bayeslab/policies.hpp"
#include "bayeslab/analysis.hpp"
#include "bayeslab/io.hpp"
