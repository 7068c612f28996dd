#pragma once

#include "acquisition.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "harness.hpp"
#include "image_io.hpp"
#include "metrics.hpp"
#include "pattern_cache.hpp"
#include "patterns.hpp"
#include "reconstruction.hpp"
#include "scene.hpp"
#include "tracking.hpp"
#include "version.hpp"
