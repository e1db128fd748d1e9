#pragma once

#include "desens/error.hpp"
#include "desens/mask.hpp"
#include "desens/core.hpp"
#include "desens/validate.hpp"
#include "desens/geometry.hpp"
#include "desens/document.hpp"
#include "desens/metrics.hpp"
#include "desens/postproc.hpp"
#include "desens/tracker.hpp"
#include "desens/pipeline.hpp"
#include "desens/renderer.hpp"
#include "desens/losses.hpp"
#include "desens/harness.hpp"
#include "desens/config.hpp"
