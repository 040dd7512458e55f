#pragma once

#include "ancka/error.hpp"
#include "ancka/sparse.hpp"
#include "ancka/network.hpp"
#include "ancka/ivf_index.hpp"
#include "ancka/knn.hpp"
#include "ancka/walk.hpp"
#include "ancka/oracle.hpp"
#include "ancka/discretize.hpp"
#include "ancka/engine.hpp"
#include "ancka/metrics.hpp"
#include "ancka/io.hpp"
