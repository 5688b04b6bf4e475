#pragma once

#include "nok/bounds.hpp"
#include "nok/design.hpp"
#include "nok/engine.hpp"
#include "nok/errors.hpp"
#include "nok/io.hpp"
#include "nok/kernel.hpp"
#include "nok/learning.hpp"
#include "nok/prox.hpp"
