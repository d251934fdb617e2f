#pragma once

#include "opsurv/harness/config.hpp"
#include "opsurv/harness/csvio.hpp"
#include "opsurv/harness/curves.hpp"
#include "opsurv/harness/experiments.hpp"
