#ifndef AUTOBO_AUTOBO_HPP
#define AUTOBO_AUTOBO_HPP
#pragma once

#include "autobo/acquisitions.hpp"
#include "autobo/benchmarks.hpp"
#include "autobo/bo_loop.hpp"
#include "autobo/errors.hpp"
#include "autobo/external_objective.hpp"
#include "autobo/gp.hpp"
#include "autobo/harness.hpp"
#include "autobo/meta_opt.hpp"
#include "autobo/objective.hpp"
#include "autobo/policies.hpp"
#include "autobo/random.hpp"

#endif // AUTOBO_AUTOBO_HPP
