#pragma once

#include "glucoctl/errors.hpp"
#include "glucoctl/model.hpp"
#include "glucoctl/control.hpp"
#include "glucoctl/contraction.hpp"
#include "glucoctl/sim.hpp"
#include "glucoctl/metrics.hpp"
#include "glucoctl/scenarios.hpp"
#include "glucoctl/io.hpp"
#include "glucoctl/cli.hpp"
