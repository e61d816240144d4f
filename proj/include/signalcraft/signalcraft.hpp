#pragma once

#include "signalcraft/cli.hpp"
#include "signalcraft/common.hpp"
#include "signalcraft/design_result.hpp"
#include "signalcraft/dist.hpp"
#include "signalcraft/equilibrium.hpp"
#include "signalcraft/evaluate.hpp"
#include "signalcraft/json_io.hpp"
#include "signalcraft/lp.hpp"
#include "signalcraft/lp_design.hpp"
#include "signalcraft/mechanism.hpp"
#include "signalcraft/numeric.hpp"
#include "signalcraft/preference.hpp"
#include "signalcraft/rng.hpp"
#include "signalcraft/set_designer.hpp"
#include "signalcraft/studies.hpp"
