#pragma once

// Everything: simulator, dataset, ROM fitting, observer, MPC, references, metrics and pipeline.

#include "romshape/dataset.hpp"
#include "romshape/error.hpp"
#include "romshape/estimator.hpp"
#include "romshape/fomsim.hpp"
#include "romshape/io.hpp"
#include "romshape/metrics.hpp"
#include "romshape/numkernel.hpp"
#include "romshape/pipeline.hpp"
#include "romshape/reference.hpp"
#include "romshape/romfit.hpp"
#include "romshape/rompc.hpp"
#include "romshape/tracking.hpp"
