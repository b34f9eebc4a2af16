#pragma once

#include "polyquant/diatomic.hpp"
#include "polyquant/energy_law.hpp"
#include "polyquant/equilibrium.hpp"
#include "polyquant/errors.hpp"
#include "polyquant/io_config.hpp"
#include "polyquant/particles.hpp"
#include "polyquant/state_models.hpp"
