#pragma once

#include "ftsbench/version.hpp"

#include "ftsbench/core/adam.hpp"
#include "ftsbench/core/error.hpp"
#include "ftsbench/core/hash.hpp"
#include "ftsbench/core/matrix.hpp"
#include "ftsbench/core/net.hpp"
#include "ftsbench/core/optimize.hpp"
#include "ftsbench/core/parallel.hpp"
#include "ftsbench/core/random.hpp"
#include "ftsbench/core/stats.hpp"
#include "ftsbench/core/tape.hpp"

#include "ftsbench/generators/dataset.hpp"
#include "ftsbench/generators/panel_io.hpp"
#include "ftsbench/generators/spec_io.hpp"

#include "ftsbench/parametric/dcc.hpp"
#include "ftsbench/parametric/fit_io.hpp"
#include "ftsbench/parametric/garch.hpp"

#include "ftsbench/dgm/gmmn.hpp"
#include "ftsbench/dgm/model_io.hpp"
#include "ftsbench/dgm/rcgan.hpp"

#include "ftsbench/evaluation/metric_table.hpp"
#include "ftsbench/evaluation/network.hpp"
#include "ftsbench/evaluation/score.hpp"

#include "ftsbench/har/backtest.hpp"

#include "ftsbench/pipeline/config.hpp"
#include "ftsbench/pipeline/manifest.hpp"
#include "ftsbench/pipeline/report.hpp"
#include "ftsbench/pipeline/runner.hpp"
