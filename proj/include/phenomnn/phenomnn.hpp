#pragma once

// Umbrella header for the PhenomNN library.

#include "phenomnn/autodiff.hpp"
#include "phenomnn/config.hpp"
#include "phenomnn/data.hpp"
#include "phenomnn/energy.hpp"
#include "phenomnn/gradcheck.hpp"
#include "phenomnn/hypergraph.hpp"
#include "phenomnn/linalg.hpp"
#include "phenomnn/model.hpp"
#include "phenomnn/rng.hpp"
#include "phenomnn/train.hpp"
