#pragma once

#include "retail/case_io.hpp"
#include "retail/dg_cost.hpp"
#include "retail/dispatch.hpp"
#include "retail/equilibrium.hpp"
#include "retail/error.hpp"
#include "retail/network.hpp"
#include "retail/power_flow.hpp"
#include "retail/pricing.hpp"
#include "retail/results_io.hpp"
#include "retail/scenario.hpp"
