#pragma once

#include "ddlab/ddcm/database.hpp"
#include "ddlab/ddcm/lce.hpp"
#include "ddlab/ddcm/metric.hpp"
#include "ddlab/ddcm/nnls.hpp"
#include "ddlab/ddcm/search.hpp"
#include "ddlab/ddcm/solver.hpp"
