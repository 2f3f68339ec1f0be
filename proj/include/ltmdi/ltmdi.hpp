#pragma once

#include "ltmdi/decoy.hpp"
#include "ltmdi/error.hpp"
#include "ltmdi/io.hpp"
#include "ltmdi/keyrate.hpp"
#include "ltmdi/losstol.hpp"
#include "ltmdi/lp.hpp"
#include "ltmdi/pipeline.hpp"
#include "ltmdi/qstate.hpp"
#include "ltmdi/rng.hpp"
#include "ltmdi/simulate.hpp"
#include "ltmdi/tomography.hpp"
#include "ltmdi/version.hpp"
