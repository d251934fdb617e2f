#pragma once

#include "opsurv/numcore/adam.hpp"
#include "opsurv/numcore/grad_check.hpp"
#include "opsurv/numcore/init.hpp"
#include "opsurv/numcore/layers.hpp"
#include "opsurv/numcore/tape.hpp"
#include "opsurv/numcore/tensor.hpp"
