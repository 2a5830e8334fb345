#ifndef PERCEPT_PERCEPT_HPP
#define PERCEPT_PERCEPT_HPP

#include "percept/attack.hpp"
#include "percept/config.hpp"
#include "percept/constraints.hpp"
#include "percept/corpus.hpp"
#include "percept/error.hpp"
#include "percept/evaluation.hpp"
#include "percept/export.hpp"
#include "percept/hash.hpp"
#include "percept/oracles.hpp"
#include "percept/remote.hpp"
#include "percept/saliency.hpp"
#include "percept/serialization.hpp"
#include "percept/text.hpp"
#include "percept/toy_oracles.hpp"

#endif  // PERCEPT_PERCEPT_HPP
