#pragma once

#include <gsor/error.hpp>
#include <gsor/experiments.hpp>
#include <gsor/graph.hpp>
#include <gsor/io.hpp>
#include <gsor/lwce_bound.hpp>
#include <gsor/param_select.hpp>
#include <gsor/random.hpp>
#include <gsor/recovery.hpp>
#include <gsor/spectral.hpp>
