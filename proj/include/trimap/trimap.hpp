#pragma once

/// @file trimap.hpp
/// @brief Umbrella header for the library (everything except the command line).

#include "cluster.hpp"
#include "core_math.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "io.hpp"
#include "optimizer.hpp"
#include "preprocess.hpp"
#include "stress.hpp"
#include "synthetic.hpp"
#include "triplets.hpp"
