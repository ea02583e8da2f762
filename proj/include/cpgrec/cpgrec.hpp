#pragma once

#include "cpgrec/csv.hpp"
#include "cpgrec/data.hpp"
#include "cpgrec/evaluation.hpp"
#include "cpgrec/graph.hpp"
#include "cpgrec/model.hpp"
#include "cpgrec/parallel.hpp"
#include "cpgrec/propagation.hpp"
#include "cpgrec/rng.hpp"
#include "cpgrec/training.hpp"
