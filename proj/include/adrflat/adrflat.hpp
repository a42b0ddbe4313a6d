#pragma once

#include "error.hpp"
#include "polynomial.hpp"
#include "model.hpp"
#include "observer.hpp"
#include "flat_brunovsky.hpp"
#include "flat_polymatrix.hpp"
#include "plant.hpp"
#include "controller.hpp"
#include "rk4.hpp"
#include "simulation.hpp"
#include "scenario.hpp"
#include "svg.hpp"
#include "report.hpp"
