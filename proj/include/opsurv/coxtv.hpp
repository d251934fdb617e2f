#pragma once

#include "opsurv/coxtv/cox.hpp"
#include "opsurv/coxtv/io.hpp"
