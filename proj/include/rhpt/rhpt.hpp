#pragma once

// Umbrella header: causal effect estimation with random hyperplane
// tessellations — packed binary sketches, Hamming 1-NN matching, classic
// baselines, a ground-truth synthetic DGP, and the evaluation suite.

#include "rhpt/baselines.hpp"
#include "rhpt/error.hpp"
#include "rhpt/evaluation.hpp"
#include "rhpt/experiment.hpp"
#include "rhpt/matching.hpp"
#include "rhpt/parallel.hpp"
#include "rhpt/random.hpp"
#include "rhpt/sketch.hpp"
#include "rhpt/synthetic.hpp"
#include "rhpt/tessellation.hpp"
#include "rhpt/types.hpp"
