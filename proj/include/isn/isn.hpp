#pragma once

// Umbrella header for the full toolkit.

#include "isn/config.hpp"
#include "isn/core.hpp"
#include "isn/datagen.hpp"
#include "isn/evaluation.hpp"
#include "isn/inference.hpp"
#include "isn/kernels.hpp"
#include "isn/losses.hpp"
#include "isn/models.hpp"
#include "isn/net.hpp"
#include "isn/oracles.hpp"
#include "isn/rng.hpp"
#include "isn/special_functions.hpp"
#include "isn/training.hpp"
