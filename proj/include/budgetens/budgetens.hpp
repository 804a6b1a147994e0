#pragma once

#include <budgetens/costing.hpp>
#include <budgetens/errors.hpp>
#include <budgetens/harness.hpp>
#include <budgetens/orchestrator.hpp>
#include <budgetens/predictor.hpp>
#include <budgetens/registry.hpp>
#include <budgetens/selector.hpp>
