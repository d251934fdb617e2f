#pragma once

#include "opsurv/evalmetrics/brier.hpp"
#include "opsurv/evalmetrics/folds.hpp"
#include "opsurv/evalmetrics/km.hpp"
