#pragma once

#include "icqnls/errors.hpp"
#include "icqnls/grid.hpp"
#include "icqnls/spectral.hpp"
#include "icqnls/norms.hpp"
#include "icqnls/model.hpp"
#include "icqnls/record.hpp"
#include "icqnls/evolve.hpp"
#include "icqnls/diagnostics.hpp"
#include "icqnls/probes.hpp"
#include "icqnls/scenario.hpp"
