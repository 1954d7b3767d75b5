#pragma once

#include "recipro/clustering.hpp"
#include "recipro/dynamics.hpp"
#include "recipro/errors.hpp"
#include "recipro/io.hpp"
#include "recipro/linalg.hpp"
#include "recipro/reciprocity.hpp"
#include "recipro/rendezvous.hpp"
#include "recipro/schedule.hpp"
