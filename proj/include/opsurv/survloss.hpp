#pragma once

#include "opsurv/survloss/check.hpp"
#include "opsurv/survloss/curve.hpp"
#include "opsurv/survloss/expand.hpp"
#include "opsurv/survloss/grid.hpp"
#include "opsurv/survloss/loss.hpp"
#include "opsurv/survloss/predict.hpp"
#include "opsurv/survloss/record.hpp"
#include "opsurv/survloss/train.hpp"
