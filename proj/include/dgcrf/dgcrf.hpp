#pragma once

// Umbrella header.

#include "dgcrf/bench.hpp"
#include "dgcrf/cg.hpp"
#include "dgcrf/errors.hpp"
#include "dgcrf/gcrf_layer.hpp"
#include "dgcrf/grad_check.hpp"
#include "dgcrf/layer_io.hpp"
#include "dgcrf/loss.hpp"
#include "dgcrf/matrix_io.hpp"
#include "dgcrf/reference.hpp"
#include "dgcrf/run_config.hpp"
#include "dgcrf/synth.hpp"
#include "dgcrf/tensor.hpp"
#include "dgcrf/toy_model.hpp"
#include "dgcrf/train.hpp"
